#pragma once

// Vector fields, scalar fields and cascades on flat product spaces.

#include "cascade/geometry.hpp"

#include <functional>
#include <optional>
#include <string>

namespace cascade {

enum class SystemKind { Generic, Gradient, Mechanical, Cascade };

[[nodiscard]] std::string to_string(SystemKind kind);

/// Writes the field value at p into out (already sized to the dimension).
using FieldFn = std::function<void(const PointCoords& p, TangentCoords& out)>;
using JacobianFn = std::function<Eigen::MatrixXd(const PointCoords& p)>;
using ValueFn = std::function<double(const PointCoords& p)>;
using GradientFn = std::function<TangentCoords(const PointCoords& p)>;

/// Central-difference step for coordinate value x.
[[nodiscard]] double fd_step(double x) noexcept;

class SystemDef {
public:
    SystemDef(SpaceSpec space, FieldFn field, SystemKind kind = SystemKind::Generic,
              JacobianFn jacobian = {}, std::string name = {});

    [[nodiscard]] const SpaceSpec& space() const noexcept { return space_; }
    [[nodiscard]] std::size_t dim() const noexcept { return space_.dim(); }
    [[nodiscard]] SystemKind kind() const noexcept { return kind_; }
    [[nodiscard]] const std::string& name() const noexcept { return name_; }
    [[nodiscard]] bool has_analytic_jacobian() const noexcept { return static_cast<bool>(jacobian_); }

    /// Throws NumericError (naming p) if the value is not finite.
    [[nodiscard]] TangentCoords eval(const PointCoords& p) const;

    /// Unchecked evaluation into a preallocated buffer; the integrator's hot path.
    void eval_into(const PointCoords& p, TangentCoords& out) const { field_(p, out); }

    /// Analytic Jacobian if provided, otherwise central differences.
    [[nodiscard]] Eigen::MatrixXd jacobian(const PointCoords& p) const;

private:
    SpaceSpec space_;
    FieldFn field_;
    SystemKind kind_;
    JacobianFn jacobian_;
    std::string name_;
};

/// Evaluates the field of sys at p; see SystemDef::eval.
[[nodiscard]] inline TangentCoords eval_field(const SystemDef& sys, const PointCoords& p) {
    return sys.eval(p);
}

/// Central-difference Jacobian of an arbitrary field.
[[nodiscard]] Eigen::MatrixXd finite_difference_jacobian(const FieldFn& field,
                                                         const PointCoords& p);

class ScalarField {
public:
    ScalarField(SpaceSpec space, ValueFn value, GradientFn gradient = {}, std::string name = {});

    [[nodiscard]] const SpaceSpec& space() const noexcept { return space_; }
    [[nodiscard]] const std::string& name() const noexcept { return name_; }
    [[nodiscard]] bool has_analytic_gradient() const noexcept { return static_cast<bool>(gradient_); }

    [[nodiscard]] double operator()(const PointCoords& p) const { return value_(p); }
    [[nodiscard]] double value(const PointCoords& p) const { return value_(p); }

    /// Chart gradient (partial derivatives); analytic when available.
    [[nodiscard]] TangentCoords gradient(const PointCoords& p) const;
    [[nodiscard]] TangentCoords finite_difference_gradient(const PointCoords& p) const;

    /// A field that is identically c.
    [[nodiscard]] static ScalarField constant(SpaceSpec space, double c);

private:
    SpaceSpec space_;
    ValueFn value_;
    GradientFn gradient_;
    std::string name_;
};

/// Outer field of a cascade: writes f(x, y) into out (sized dim X).
using CouplingFn = std::function<void(const PointCoords& x, const PointCoords& y, TangentCoords& out)>;

/// Cascade x' = f(x, y), y' = g(y) on X x Y with a distinguished inner
/// equilibrium 0_Y.
class CascadeDef {
public:
    /// Throws InputError if |g(0_Y)| > 1e-10 or dimensions disagree.
    CascadeDef(SpaceSpec outer_space, CouplingFn outer, SystemDef inner, PointCoords inner_equilibrium,
               std::string name = {});

    [[nodiscard]] const SpaceSpec& outer_space() const noexcept { return outer_space_; }
    [[nodiscard]] const SpaceSpec& inner_space() const noexcept { return inner_.space(); }
    [[nodiscard]] const SystemDef& inner() const noexcept { return inner_; }
    [[nodiscard]] const PointCoords& inner_equilibrium() const noexcept { return inner_equilibrium_; }
    [[nodiscard]] const std::string& name() const noexcept { return name_; }
    [[nodiscard]] std::size_t outer_dim() const noexcept { return outer_space_.dim(); }
    [[nodiscard]] std::size_t inner_dim() const noexcept { return inner_.dim(); }

    [[nodiscard]] TangentCoords outer_field(const PointCoords& x, const PointCoords& y) const;

    /// The full system on X x Y, state ordered (x, y).
    [[nodiscard]] SystemDef full_system() const;

    /// Splits a full-space point into (x, y).
    [[nodiscard]] PointCoords outer_part(const PointCoords& z) const;
    [[nodiscard]] PointCoords inner_part(const PointCoords& z) const;
    [[nodiscard]] PointCoords join(const PointCoords& x, const PointCoords& y) const;

private:
    SpaceSpec outer_space_;
    CouplingFn outer_;
    SystemDef inner_;
    PointCoords inner_equilibrium_;
    std::string name_;
};

/// x' = f(x, 0_Y) as a standalone system on X.
[[nodiscard]] SystemDef unforced_outer(const CascadeDef& cas);

/// h(x, y) = f(x, y) - f(x, 0_Y).
[[nodiscard]] TangentCoords interconnection(const CascadeDef& cas, const PointCoords& x,
                                            const PointCoords& y);

/// q' = -M^{-1} grad V with M the metric of `space`. Throws InputError if the
/// field's space differs in dimension.
[[nodiscard]] SystemDef make_gradient_system(const SpaceSpec& space, const ScalarField& potential);

/// Dissipative mechanical system on TQ = Q x R^n with state (q, qdot):
///   qddot = -kappa^{-1} (grad V(q) + nu qdot).
/// The tangent bundle carries the block metric diag(kappa, kappa).
/// Throws InputError unless kappa and nu are symmetric positive definite.
[[nodiscard]] SystemDef make_mechanical_system(const SpaceSpec& space_q, const Eigen::MatrixXd& kappa,
                                               const Eigen::MatrixXd& nu, const ScalarField& potential);

/// Tangent-bundle space for a configuration space Q: Q's factors followed
/// by one line factor per coordinate, metric diag(kappa, kappa).
[[nodiscard]] SpaceSpec tangent_bundle(const SpaceSpec& space_q, const Eigen::MatrixXd& kappa);

/// W(q, qdot) = V(q) + 1/2 qdot^T kappa qdot.
/// The result lives on tangent_bundle(potential.space(), kappa).
[[nodiscard]] ScalarField total_energy(const Eigen::MatrixXd& kappa, const ScalarField& potential);

/// Directional derivative grad W(p) . v.
[[nodiscard]] double lie_derivative(const ScalarField& w, const TangentCoords& v, const PointCoords& p);

}  // namespace cascade
