#pragma once

// A small arithmetic expression language for user-defined fields:
//
//   expr    := term (('+' | '-') term)*
//   term    := unary (('*' | '/') unary)*
//   unary   := ('-' | '+') unary | power
//   power   := primary (('^' | '**') unary)?
//   primary := number | name | name '(' expr ')' | '(' expr ')'
//
// Functions: sin cos tan exp log sqrt tanh. Constants: pi, e.
// There are no conditionals or loops.

#include <map>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace cascade {

class Expression {
public:
    /// Throws InputError with the offending column on a syntax error.
    [[nodiscard]] static Expression parse(std::string_view text);

    /// Source text as given to parse().
    [[nodiscard]] const std::string& text() const noexcept { return text_; }

    /// Free variable names, sorted, without duplicates.
    [[nodiscard]] std::vector<std::string> variables() const;

    /// Evaluates with named bindings. Throws InputError for an unbound
    /// variable and NumericError on division by zero or a non-finite result.
    [[nodiscard]] double evaluate(const std::map<std::string, double, std::less<>>& bindings) const;

    /// Resolves variable names to slots; evaluate_slots then reads values[slot].
    /// Throws InputError if a free variable is not in `names`.
    [[nodiscard]] Expression bind(const std::vector<std::string>& names) const;
    [[nodiscard]] double evaluate_slots(std::span<const double> values) const;

    struct Node;

private:
    std::string text_;
    std::shared_ptr<const Node> root_;
    bool bound_ = false;
};

/// eval_expression(e, bindings): see Expression::evaluate.
[[nodiscard]] double eval_expression(const Expression& e,
                                     const std::map<std::string, double, std::less<>>& bindings);

}  // namespace cascade
