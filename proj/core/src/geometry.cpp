#include "cascade/geometry.hpp"

#include "cascade/errors.hpp"

#include <cmath>

namespace cascade {

namespace {

void require_dim(const SpaceSpec& space, const Eigen::VectorXd& v, const char* what) {
    if (static_cast<std::size_t>(v.size()) != space.dim()) {
        throw InputError(std::string(what) + " has dimension " + std::to_string(v.size()) +
                         ", space has dimension " + std::to_string(space.dim()));
    }
}

}  // namespace

std::string to_string(FactorKind kind) {
    return kind == FactorKind::Circle ? "circle" : "line";
}

bool is_symmetric_positive_definite(const Eigen::MatrixXd& m) {
    if (m.rows() == 0 || m.rows() != m.cols() || !m.allFinite()) {
        return false;
    }
    const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
    if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
        return false;
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(m, Eigen::EigenvaluesOnly);
    return solver.info() == Eigen::Success && solver.eigenvalues().minCoeff() > 0.0;
}

SpaceSpec::SpaceSpec(std::vector<FactorKind> factors, Eigen::MatrixXd metric)
    : factors_(std::move(factors)), metric_(std::move(metric)) {
    if (factors_.empty()) {
        throw InputError("space needs at least one factor");
    }
    if (static_cast<std::size_t>(metric_.rows()) != factors_.size() ||
        static_cast<std::size_t>(metric_.cols()) != factors_.size()) {
        throw InputError("metric must be " + std::to_string(factors_.size()) + "x" +
                         std::to_string(factors_.size()));
    }
    if (!is_symmetric_positive_definite(metric_)) {
        throw InputError("metric must be symmetric positive definite");
    }
    metric_inverse_ = metric_.inverse();
}

SpaceSpec::SpaceSpec(std::vector<FactorKind> factors)
    : SpaceSpec(factors, Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(factors.size()),
                                                   static_cast<Eigen::Index>(factors.size()))) {}

SpaceSpec SpaceSpec::product(const SpaceSpec& first, const SpaceSpec& second) {
    std::vector<FactorKind> factors = first.factors_;
    factors.insert(factors.end(), second.factors_.begin(), second.factors_.end());
    const auto n1 = static_cast<Eigen::Index>(first.dim());
    const auto n2 = static_cast<Eigen::Index>(second.dim());
    Eigen::MatrixXd metric = Eigen::MatrixXd::Zero(n1 + n2, n1 + n2);
    metric.topLeftCorner(n1, n1) = first.metric_;
    metric.bottomRightCorner(n2, n2) = second.metric_;
    return SpaceSpec(std::move(factors), std::move(metric));
}

double wrap_angle(double angle) noexcept {
    double r = angle - kTwoPi * std::floor((angle + kPi) / kTwoPi);
    // floor can land one period off when angle + pi rounds across a multiple of 2 pi
    if (r >= kPi) {
        r -= kTwoPi;
    }
    if (r < -kPi) {
        r += kTwoPi;
    }
    return r;
}

PointCoords canonicalize(const SpaceSpec& space, const PointCoords& p) {
    require_dim(space, p, "point");
    PointCoords out = p;
    for (std::size_t i = 0; i < space.dim(); ++i) {
        if (space.is_circle(i)) {
            out[static_cast<Eigen::Index>(i)] = wrap_angle(out[static_cast<Eigen::Index>(i)]);
        }
    }
    return out;
}

TangentCoords chart_difference(const SpaceSpec& space, const PointCoords& p,
                               const PointCoords& q) {
    require_dim(space, p, "first point");
    require_dim(space, q, "second point");
    TangentCoords d = q - p;
    for (std::size_t i = 0; i < space.dim(); ++i) {
        if (space.is_circle(i)) {
            d[static_cast<Eigen::Index>(i)] = wrap_angle(d[static_cast<Eigen::Index>(i)]);
        }
    }
    return d;
}

double dist(const SpaceSpec& space, const PointCoords& p, const PointCoords& q) {
    const TangentCoords d = chart_difference(space, p, q);
    // |wrap(x)| is pi for a difference of exactly pi either way, so the
    // result stays symmetric even though wrap_angle(pi) = -pi.
    const double sq = d.dot(space.metric() * d);
    return std::sqrt(std::max(0.0, sq));
}

PointCoords step_point(const SpaceSpec& space, const PointCoords& p, const TangentCoords& v,
                       double dt) {
    require_dim(space, p, "point");
    require_dim(space, v, "tangent");
    if (!std::isfinite(dt) || !p.allFinite() || !v.allFinite()) {
        throw NumericError("step_point: non-finite input");
    }
    return canonicalize(space, p + dt * v);
}

}  // namespace cascade
