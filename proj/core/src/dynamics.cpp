#include "cascade/dynamics.hpp"

#include "cascade/errors.hpp"

#include <cmath>
#include <sstream>

namespace cascade {

namespace {

std::string format_real(double c) {
    std::ostringstream os;
    os << c;
    return os.str();
}

std::string format_point(const PointCoords& p) {
    std::ostringstream os;
    os.precision(17);
    os << '(';
    for (Eigen::Index i = 0; i < p.size(); ++i) {
        os << (i ? ", " : "") << p[i];
    }
    os << ')';
    return os.str();
}

void require_dim(std::size_t expected, const Eigen::VectorXd& v, const char* what) {
    if (static_cast<std::size_t>(v.size()) != expected) {
        throw InputError(std::string(what) + ": expected dimension " + std::to_string(expected) +
                         ", got " + std::to_string(v.size()));
    }
}

}  // namespace

std::string to_string(SystemKind kind) {
    switch (kind) {
        case SystemKind::Generic: return "generic";
        case SystemKind::Gradient: return "gradient";
        case SystemKind::Mechanical: return "mechanical";
        case SystemKind::Cascade: return "cascade";
    }
    return "generic";
}

double fd_step(double x) noexcept { return std::max(1e-6, 1e-8 * std::abs(x)); }

Eigen::MatrixXd finite_difference_jacobian(const FieldFn& field, const PointCoords& p) {
    const Eigen::Index n = p.size();
    Eigen::MatrixXd jac(n, n);
    PointCoords probe = p;
    TangentCoords plus(n);
    TangentCoords minus(n);
    for (Eigen::Index j = 0; j < n; ++j) {
        const double h = fd_step(p[j]);
        probe[j] = p[j] + h;
        field(probe, plus);
        probe[j] = p[j] - h;
        field(probe, minus);
        probe[j] = p[j];
        jac.col(j) = (plus - minus) / (2.0 * h);
    }
    if (!jac.allFinite()) {
        throw NumericError("non-finite Jacobian at " + format_point(p));
    }
    return jac;
}

SystemDef::SystemDef(SpaceSpec space, FieldFn field, SystemKind kind, JacobianFn jacobian,
                     std::string name)
    : space_(std::move(space)),
      field_(std::move(field)),
      kind_(kind),
      jacobian_(std::move(jacobian)),
      name_(std::move(name)) {
    if (!field_) {
        throw InputError("system needs a field rule");
    }
}

TangentCoords SystemDef::eval(const PointCoords& p) const {
    require_dim(dim(), p, "eval_field");
    TangentCoords out(p.size());
    field_(p, out);
    if (!out.allFinite()) {
        throw NumericError("non-finite field value at " + format_point(p));
    }
    return out;
}

Eigen::MatrixXd SystemDef::jacobian(const PointCoords& p) const {
    require_dim(dim(), p, "jacobian");
    if (jacobian_) {
        Eigen::MatrixXd jac = jacobian_(p);
        if (!jac.allFinite()) {
            throw NumericError("non-finite Jacobian at " + format_point(p));
        }
        return jac;
    }
    return finite_difference_jacobian(field_, p);
}

ScalarField::ScalarField(SpaceSpec space, ValueFn value, GradientFn gradient, std::string name)
    : space_(std::move(space)),
      value_(std::move(value)),
      gradient_(std::move(gradient)),
      name_(std::move(name)) {
    if (!value_) {
        throw InputError("scalar field needs a value rule");
    }
}

TangentCoords ScalarField::gradient(const PointCoords& p) const {
    if (gradient_) {
        return gradient_(p);
    }
    return finite_difference_gradient(p);
}

TangentCoords ScalarField::finite_difference_gradient(const PointCoords& p) const {
    require_dim(space_.dim(), p, "gradient");
    TangentCoords grad(p.size());
    PointCoords probe = p;
    for (Eigen::Index j = 0; j < p.size(); ++j) {
        const double h = fd_step(p[j]);
        probe[j] = p[j] + h;
        const double up = value_(probe);
        probe[j] = p[j] - h;
        const double down = value_(probe);
        probe[j] = p[j];
        grad[j] = (up - down) / (2.0 * h);
    }
    return grad;
}

ScalarField ScalarField::constant(SpaceSpec space, double c) {
    const auto n = static_cast<Eigen::Index>(space.dim());
    return ScalarField(
        std::move(space), [c](const PointCoords&) { return c; },
        [n](const PointCoords&) { return TangentCoords(TangentCoords::Zero(n)); }, format_real(c));
}

CascadeDef::CascadeDef(SpaceSpec outer_space, CouplingFn outer, SystemDef inner,
                       PointCoords inner_equilibrium, std::string name)
    : outer_space_(std::move(outer_space)),
      outer_(std::move(outer)),
      inner_(std::move(inner)),
      inner_equilibrium_(std::move(inner_equilibrium)),
      name_(std::move(name)) {
    if (!outer_) {
        throw InputError("cascade needs an outer field rule");
    }
    require_dim(inner_.dim(), inner_equilibrium_, "inner equilibrium");
    inner_equilibrium_ = canonicalize(inner_.space(), inner_equilibrium_);
    const TangentCoords g0 = inner_.eval(inner_equilibrium_);
    if (g0.lpNorm<Eigen::Infinity>() > 1e-10) {
        throw InputError("inner field does not vanish at the inner equilibrium: |g(0_Y)| = " +
                         std::to_string(g0.lpNorm<Eigen::Infinity>()));
    }
}

TangentCoords CascadeDef::outer_field(const PointCoords& x, const PointCoords& y) const {
    require_dim(outer_dim(), x, "outer state");
    require_dim(inner_dim(), y, "inner state");
    TangentCoords out(x.size());
    outer_(x, y, out);
    return out;
}

PointCoords CascadeDef::outer_part(const PointCoords& z) const {
    require_dim(outer_dim() + inner_dim(), z, "cascade state");
    return z.head(static_cast<Eigen::Index>(outer_dim()));
}

PointCoords CascadeDef::inner_part(const PointCoords& z) const {
    require_dim(outer_dim() + inner_dim(), z, "cascade state");
    return z.tail(static_cast<Eigen::Index>(inner_dim()));
}

PointCoords CascadeDef::join(const PointCoords& x, const PointCoords& y) const {
    require_dim(outer_dim(), x, "outer state");
    require_dim(inner_dim(), y, "inner state");
    PointCoords z(x.size() + y.size());
    z << x, y;
    return z;
}

SystemDef CascadeDef::full_system() const {
    const auto nx = static_cast<Eigen::Index>(outer_dim());
    const auto ny = static_cast<Eigen::Index>(inner_dim());
    auto field = [outer = outer_, inner = inner_, nx, ny](const PointCoords& z, TangentCoords& out) {
        thread_local PointCoords x;
        thread_local PointCoords y;
        thread_local TangentCoords fx;
        thread_local TangentCoords gy;
        x = z.head(nx);
        y = z.tail(ny);
        fx.resize(nx);
        gy.resize(ny);
        outer(x, y, fx);
        inner.eval_into(y, gy);
        out.head(nx) = fx;
        out.tail(ny) = gy;
    };
    return SystemDef(SpaceSpec::product(outer_space_, inner_.space()), std::move(field),
                     SystemKind::Cascade, {}, name_);
}

SystemDef unforced_outer(const CascadeDef& cas) {
    const PointCoords y0 = cas.inner_equilibrium();
    auto field = [cas, y0](const PointCoords& x, TangentCoords& out) { out = cas.outer_field(x, y0); };
    return SystemDef(cas.outer_space(), std::move(field), SystemKind::Generic, {},
                     cas.name().empty() ? std::string("unforced-outer") : cas.name() + "/unforced-outer");
}

TangentCoords interconnection(const CascadeDef& cas, const PointCoords& x, const PointCoords& y) {
    return cas.outer_field(x, y) - cas.outer_field(x, cas.inner_equilibrium());
}

SystemDef make_gradient_system(const SpaceSpec& space, const ScalarField& potential) {
    if (potential.space().dim() != space.dim()) {
        throw InputError("gradient system: potential lives on a space of different dimension");
    }
    Eigen::MatrixXd inv = space.metric_inverse();
    auto field = [inv, potential](const PointCoords& q, TangentCoords& out) {
        out = -(inv * potential.gradient(q));
    };
    return SystemDef(space, std::move(field), SystemKind::Gradient, {},
                     "gradient(" + potential.name() + ")");
}

SpaceSpec tangent_bundle(const SpaceSpec& space_q, const Eigen::MatrixXd& kappa) {
    if (!is_symmetric_positive_definite(kappa) ||
        static_cast<std::size_t>(kappa.rows()) != space_q.dim()) {
        throw InputError("kinetic energy metric must be symmetric positive definite of size dim Q");
    }
    std::vector<FactorKind> factors = space_q.factors();
    factors.insert(factors.end(), space_q.dim(), FactorKind::Line);
    const auto n = static_cast<Eigen::Index>(space_q.dim());
    Eigen::MatrixXd metric = Eigen::MatrixXd::Zero(2 * n, 2 * n);
    metric.topLeftCorner(n, n) = kappa;
    metric.bottomRightCorner(n, n) = kappa;
    return SpaceSpec(std::move(factors), std::move(metric));
}

SystemDef make_mechanical_system(const SpaceSpec& space_q, const Eigen::MatrixXd& kappa,
                                 const Eigen::MatrixXd& nu, const ScalarField& potential) {
    const auto n = static_cast<Eigen::Index>(space_q.dim());
    if (!is_symmetric_positive_definite(nu) || nu.rows() != n) {
        throw InputError("Rayleigh dissipation must be symmetric positive definite of size dim Q");
    }
    if (potential.space().dim() != space_q.dim()) {
        throw InputError("mechanical system: potential lives on a space of different dimension");
    }
    SpaceSpec tq = tangent_bundle(space_q, kappa);
    Eigen::MatrixXd kappa_inv = kappa.inverse();
    auto field = [kappa_inv, nu, potential, n](const PointCoords& s, TangentCoords& out) {
        const PointCoords q = s.head(n);
        const TangentCoords qdot = s.tail(n);
        out.head(n) = qdot;
        out.tail(n) = -(kappa_inv * (potential.gradient(q) + nu * qdot));
    };
    return SystemDef(std::move(tq), std::move(field), SystemKind::Mechanical, {},
                     "mechanical(" + potential.name() + ")");
}

ScalarField total_energy(const Eigen::MatrixXd& kappa, const ScalarField& potential) {
    SpaceSpec tq = tangent_bundle(potential.space(), kappa);
    const auto n = static_cast<Eigen::Index>(potential.space().dim());
    auto value = [kappa, potential, n](const PointCoords& s) {
        const TangentCoords qdot = s.tail(n);
        return potential(s.head(n)) + 0.5 * qdot.dot(kappa * qdot);
    };
    GradientFn gradient;
    if (potential.has_analytic_gradient()) {
        gradient = [kappa, potential, n](const PointCoords& s) {
            TangentCoords g(2 * n);
            g.head(n) = potential.gradient(s.head(n));
            g.tail(n) = kappa * s.tail(n);
            return g;
        };
    }
    return ScalarField(std::move(tq), std::move(value), std::move(gradient),
                       "energy(" + potential.name() + ")");
}

double lie_derivative(const ScalarField& w, const TangentCoords& v, const PointCoords& p) {
    const TangentCoords grad = w.gradient(p);
    if (grad.size() != v.size()) {
        throw InputError("lie_derivative: direction has wrong dimension");
    }
    return grad.dot(v);
}

}  // namespace cascade
