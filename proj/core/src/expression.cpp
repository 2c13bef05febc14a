#include "cascade/expression.hpp"

#include "cascade/errors.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <numbers>
#include <set>

namespace cascade {

struct Expression::Node {
    enum class Kind { Number, Variable, Neg, Add, Sub, Mul, Div, Pow, Call };
    enum class Func { Sin, Cos, Tan, Exp, Log, Sqrt, Tanh };

    Kind kind = Kind::Number;
    double value = 0.0;
    std::string name;
    std::size_t slot = 0;
    Func func = Func::Sin;
    std::shared_ptr<const Node> lhs;
    std::shared_ptr<const Node> rhs;
};

namespace {

using Node = Expression::Node;
using NodePtr = std::shared_ptr<const Node>;

NodePtr make(Node node) { return std::make_shared<const Node>(std::move(node)); }

class Parser {
public:
    explicit Parser(std::string_view text) : text_(text) {}

    NodePtr parse() {
        NodePtr root = expr();
        skip_space();
        if (pos_ != text_.size()) {
            fail("unexpected '" + std::string(1, text_[pos_]) + "'");
        }
        return root;
    }

private:
    [[noreturn]] void fail(const std::string& message) const {
        throw InputError("expression \"" + std::string(text_) + "\" column " + std::to_string(pos_ + 1) +
                         ": " + message);
    }

    void skip_space() {
        while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) {
            ++pos_;
        }
    }

    bool accept(std::string_view token) {
        skip_space();
        if (text_.substr(pos_, token.size()) == token) {
            pos_ += token.size();
            return true;
        }
        return false;
    }

    NodePtr expr() {
        NodePtr lhs = term();
        for (;;) {
            if (accept("+")) {
                lhs = make({.kind = Node::Kind::Add, .lhs = lhs, .rhs = term()});
            } else if (accept("-")) {
                lhs = make({.kind = Node::Kind::Sub, .lhs = lhs, .rhs = term()});
            } else {
                return lhs;
            }
        }
    }

    NodePtr term() {
        NodePtr lhs = unary();
        for (;;) {
            if (accept("*")) {
                lhs = make({.kind = Node::Kind::Mul, .lhs = lhs, .rhs = unary()});
            } else if (accept("/")) {
                lhs = make({.kind = Node::Kind::Div, .lhs = lhs, .rhs = unary()});
            } else {
                return lhs;
            }
        }
    }

    NodePtr unary() {
        if (accept("-")) {
            return make({.kind = Node::Kind::Neg, .lhs = unary()});
        }
        if (accept("+")) {
            return unary();
        }
        return power();
    }

    NodePtr power() {
        NodePtr base = primary();
        if (accept("^") || accept("**")) {
            return make({.kind = Node::Kind::Pow, .lhs = base, .rhs = unary()});
        }
        return base;
    }

    NodePtr primary() {
        skip_space();
        if (pos_ >= text_.size()) {
            fail("unexpected end of expression");
        }
        const char c = text_[pos_];
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
            return number();
        }
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            const std::size_t start = pos_;
            while (pos_ < text_.size() &&
                   (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_')) {
                ++pos_;
            }
            std::string name(text_.substr(start, pos_ - start));
            if (accept("(")) {
                Node call{.kind = Node::Kind::Call};
                call.func = function(name);
                call.lhs = expr();
                if (!accept(")")) {
                    fail("expected ')'");
                }
                return make(std::move(call));
            }
            if (name == "pi") {
                return make({.kind = Node::Kind::Number, .value = std::numbers::pi});
            }
            if (name == "e") {
                return make({.kind = Node::Kind::Number, .value = std::numbers::e});
            }
            return make({.kind = Node::Kind::Variable, .name = std::move(name)});
        }
        if (accept("(")) {
            NodePtr inner = expr();
            if (!accept(")")) {
                fail("expected ')'");
            }
            return inner;
        }
        fail("unexpected '" + std::string(1, c) + "'");
    }

    NodePtr number() {
        const char* begin = text_.data() + pos_;
        const char* end = text_.data() + text_.size();
        double value = 0.0;
        auto [ptr, ec] = std::from_chars(begin, end, value);
        if (ec != std::errc() || ptr == begin) {
            fail("malformed number");
        }
        pos_ += static_cast<std::size_t>(ptr - begin);
        return make({.kind = Node::Kind::Number, .value = value});
    }

    Node::Func function(const std::string& name) {
        if (name == "sin") return Node::Func::Sin;
        if (name == "cos") return Node::Func::Cos;
        if (name == "tan") return Node::Func::Tan;
        if (name == "exp") return Node::Func::Exp;
        if (name == "log") return Node::Func::Log;
        if (name == "sqrt") return Node::Func::Sqrt;
        if (name == "tanh") return Node::Func::Tanh;
        fail("unknown function '" + name + "'");
    }

    std::string_view text_;
    std::size_t pos_ = 0;
};

void collect(const Node& node, std::set<std::string>& out) {
    if (node.kind == Node::Kind::Variable) {
        out.insert(node.name);
    }
    if (node.lhs) collect(*node.lhs, out);
    if (node.rhs) collect(*node.rhs, out);
}

NodePtr resolve(const NodePtr& node, const std::vector<std::string>& names) {
    Node copy = *node;
    if (copy.kind == Node::Kind::Variable) {
        auto it = std::find(names.begin(), names.end(), copy.name);
        if (it == names.end()) {
            throw InputError("unbound variable '" + copy.name + "'");
        }
        copy.slot = static_cast<std::size_t>(it - names.begin());
    }
    if (copy.lhs) copy.lhs = resolve(copy.lhs, names);
    if (copy.rhs) copy.rhs = resolve(copy.rhs, names);
    return make(std::move(copy));
}

template <typename Lookup>
double eval_node(const Node& node, const Lookup& lookup) {
    switch (node.kind) {
        case Node::Kind::Number: return node.value;
        case Node::Kind::Variable: return lookup(node);
        case Node::Kind::Neg: return -eval_node(*node.lhs, lookup);
        case Node::Kind::Add: return eval_node(*node.lhs, lookup) + eval_node(*node.rhs, lookup);
        case Node::Kind::Sub: return eval_node(*node.lhs, lookup) - eval_node(*node.rhs, lookup);
        case Node::Kind::Mul: return eval_node(*node.lhs, lookup) * eval_node(*node.rhs, lookup);
        case Node::Kind::Div: {
            const double num = eval_node(*node.lhs, lookup);
            const double den = eval_node(*node.rhs, lookup);
            if (den == 0.0) {
                throw NumericError("division by zero");
            }
            return num / den;
        }
        case Node::Kind::Pow: {
            const double base = eval_node(*node.lhs, lookup);
            const double exponent = eval_node(*node.rhs, lookup);
            // Small integer exponents by repeated multiplication so x^2 is exact.
            if (exponent == std::round(exponent) && std::abs(exponent) <= 8.0) {
                const int k = static_cast<int>(exponent);
                double r = 1.0;
                for (int i = 0; i < std::abs(k); ++i) {
                    r *= base;
                }
                if (k < 0) {
                    if (r == 0.0) {
                        throw NumericError("division by zero");
                    }
                    r = 1.0 / r;
                }
                return r;
            }
            return std::pow(base, exponent);
        }
        case Node::Kind::Call: {
            const double x = eval_node(*node.lhs, lookup);
            switch (node.func) {
                case Node::Func::Sin: return std::sin(x);
                case Node::Func::Cos: return std::cos(x);
                case Node::Func::Tan: return std::tan(x);
                case Node::Func::Exp: return std::exp(x);
                case Node::Func::Log: return std::log(x);
                case Node::Func::Sqrt: return std::sqrt(x);
                case Node::Func::Tanh: return std::tanh(x);
            }
        }
    }
    return 0.0;
}

double check_finite(double v) {
    if (!std::isfinite(v)) {
        throw NumericError("expression evaluated to a non-finite value");
    }
    return v;
}

}  // namespace

Expression Expression::parse(std::string_view text) {
    Expression e;
    e.text_ = std::string(text);
    e.root_ = Parser(text).parse();
    return e;
}

std::vector<std::string> Expression::variables() const {
    std::set<std::string> names;
    if (root_) {
        collect(*root_, names);
    }
    return {names.begin(), names.end()};
}

double Expression::evaluate(const std::map<std::string, double, std::less<>>& bindings) const {
    if (!root_) {
        throw InputError("empty expression");
    }
    auto lookup = [&](const Node& node) {
        auto it = bindings.find(node.name);
        if (it == bindings.end()) {
            throw InputError("unbound variable '" + node.name + "'");
        }
        return it->second;
    };
    return check_finite(eval_node(*root_, lookup));
}

Expression Expression::bind(const std::vector<std::string>& names) const {
    Expression out;
    out.text_ = text_;
    out.root_ = resolve(root_, names);
    out.bound_ = true;
    return out;
}

double Expression::evaluate_slots(std::span<const double> values) const {
    if (!bound_) {
        throw PreconditionError("evaluate_slots on an unbound expression");
    }
    auto lookup = [&](const Node& node) { return values[node.slot]; };
    return check_finite(eval_node(*root_, lookup));
}

double eval_expression(const Expression& e, const std::map<std::string, double, std::less<>>& bindings) {
    return e.evaluate(bindings);
}

}  // namespace cascade
