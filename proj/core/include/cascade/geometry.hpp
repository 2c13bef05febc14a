#pragma once

// Flat product manifolds built from circle and line factors.
//
// Points are stored in chart coordinates: radians for circle factors,
// unitless for line factors. Circle coordinates are kept in [-pi, pi);
// a coordinate of exactly pi maps to -pi.

#include <Eigen/Dense>

#include <cstddef>
#include <numbers>
#include <string>
#include <vector>

namespace cascade {

using PointCoords = Eigen::VectorXd;
using TangentCoords = Eigen::VectorXd;

enum class FactorKind { Circle, Line };

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

[[nodiscard]] std::string to_string(FactorKind kind);

/// True when `m` is square, symmetric to 1e-12 (relative) and has strictly
/// positive eigenvalues.
[[nodiscard]] bool is_symmetric_positive_definite(const Eigen::MatrixXd& m);

class SpaceSpec {
public:
    /// Throws InputError unless metric is n x n symmetric positive definite
    /// with n = factors.size() >= 1.
    SpaceSpec(std::vector<FactorKind> factors, Eigen::MatrixXd metric);

    /// Identity metric over the given factors.
    explicit SpaceSpec(std::vector<FactorKind> factors);

    /// Cartesian product with block-diagonal metric.
    [[nodiscard]] static SpaceSpec product(const SpaceSpec& first, const SpaceSpec& second);

    [[nodiscard]] std::size_t dim() const noexcept { return factors_.size(); }
    [[nodiscard]] const std::vector<FactorKind>& factors() const noexcept { return factors_; }
    [[nodiscard]] FactorKind factor(std::size_t i) const { return factors_.at(i); }
    [[nodiscard]] bool is_circle(std::size_t i) const { return factors_.at(i) == FactorKind::Circle; }
    [[nodiscard]] const Eigen::MatrixXd& metric() const noexcept { return metric_; }
    [[nodiscard]] const Eigen::MatrixXd& metric_inverse() const noexcept { return metric_inverse_; }

    friend bool operator==(const SpaceSpec& a, const SpaceSpec& b) {
        return a.factors_ == b.factors_ && a.metric_ == b.metric_;
    }

private:
    std::vector<FactorKind> factors_;
    Eigen::MatrixXd metric_;
    Eigen::MatrixXd metric_inverse_;
};

/// Wraps an angle into [-pi, pi).
[[nodiscard]] double wrap_angle(double angle) noexcept;

/// Wraps every circle coordinate; line coordinates pass through.
/// Throws InputError on dimension mismatch.
[[nodiscard]] PointCoords canonicalize(const SpaceSpec& space, const PointCoords& p);

/// Chart displacement q - p with circle components taken along the shorter arc.
[[nodiscard]] TangentCoords chart_difference(const SpaceSpec& space, const PointCoords& p,
                                             const PointCoords& q);

/// Geodesic distance of the flat metric: sqrt(d^T M d), d = chart_difference(p, q).
[[nodiscard]] double dist(const SpaceSpec& space, const PointCoords& p, const PointCoords& q);

/// Euler displacement p + dt * v, canonicalized. Throws NumericError on
/// non-finite input.
[[nodiscard]] PointCoords step_point(const SpaceSpec& space, const PointCoords& p,
                                     const TangentCoords& v, double dt);

}  // namespace cascade
