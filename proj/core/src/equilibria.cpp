#include "cascade/equilibria.hpp"

#include "cascade/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace cascade {

namespace {

bool lexicographic_less(const PointCoords& a, const PointCoords& b) {
    return std::lexicographical_compare(a.data(), a.data() + a.size(), b.data(), b.data() + b.size());
}

// Order on coordinates rounded to 1e-6, so roots that differ by Newton noise
// sort the same way whatever grid produced them.
bool rounded_less(const PointCoords& a, const PointCoords& b) {
    for (Eigen::Index i = 0; i < a.size(); ++i) {
        const double x = std::round(a[i] * 1e6);
        const double y = std::round(b[i] * 1e6);
        if (x != y) {
            return x < y;
        }
    }
    return false;
}

// Circle coordinates that converge to pi from below are the same point as -pi.
// Roundoff-level coordinates are reported as exact zeros.
PointCoords snap_to_canonical(const SpaceSpec& space, PointCoords p) {
    p = canonicalize(space, p);
    for (std::size_t i = 0; i < space.dim(); ++i) {
        const auto k = static_cast<Eigen::Index>(i);
        if (space.is_circle(i) && p[k] > kPi - 1e-9) {
            p[k] = -kPi;
        }
        if (std::abs(p[k]) < 1e-14) {
            p[k] = 0.0;
        }
    }
    return p;
}

struct NewtonResult {
    bool converged = false;
    PointCoords point;
    double residual = std::numeric_limits<double>::infinity();
};

// A few undamped steps past convergence, kept while the residual drops.
PointCoords polish(const SystemDef& sys, PointCoords p, double res) {
    for (int it = 0; it < 3 && res > 0.0; ++it) {
        const Eigen::FullPivLU<Eigen::MatrixXd> lu(sys.jacobian(p));
        if (!lu.isInvertible()) {
            break;
        }
        const PointCoords trial = canonicalize(sys.space(), p - lu.solve(sys.eval(p)));
        const double r = sys.eval(trial).norm();
        if (!(r < res)) {
            break;
        }
        p = trial;
        res = r;
    }
    return p;
}

NewtonResult newton(const SystemDef& sys, PointCoords p, const EquilibriumSearch& search) {
    const SpaceSpec& space = sys.space();
    NewtonResult result;
    TangentCoords f = sys.eval(p);
    double res = f.norm();
    for (int it = 0; it < search.max_iterations; ++it) {
        if (res < search.newton_tol) {
            p = snap_to_canonical(space, polish(sys, p, res));
            const double r = sys.eval(p).norm();
            result = {r < search.newton_tol, p, r};
            return result;
        }
        const Eigen::MatrixXd jac = sys.jacobian(p);
        Eigen::FullPivLU<Eigen::MatrixXd> lu(jac);
        if (!lu.isInvertible() || std::abs(lu.determinant()) < 1e-14) {
            return result;
        }
        const TangentCoords delta = lu.solve(f);
        // Damped step: halve while the residual grows.
        double scale = 1.0;
        PointCoords trial;
        TangentCoords f_trial;
        double res_trial = std::numeric_limits<double>::infinity();
        for (int damp = 0; damp < 30; ++damp) {
            trial = canonicalize(space, p - scale * delta);
            f_trial = sys.eval(trial);
            res_trial = f_trial.norm();
            if (res_trial < res) {
                break;
            }
            scale *= 0.5;
        }
        if (!(res_trial < res) && res_trial > search.newton_tol) {
            return result;
        }
        p = trial;
        f = f_trial;
        res = res_trial;
    }
    if (res < search.newton_tol) {
        p = snap_to_canonical(space, polish(sys, p, res));
        const double r = sys.eval(p).norm();
        result = {r < search.newton_tol, p, r};
    }
    return result;
}

std::vector<PointCoords> grid_seeds(const RegionSpec& region, int per_dim) {
    const std::size_t n = region.dim();
    std::vector<std::vector<double>> axes(n);
    for (std::size_t i = 0; i < n; ++i) {
        const Interval b = region.bounds(i);
        for (int k = 0; k < per_dim; ++k) {
            if (region.space().is_circle(i)) {
                axes[i].push_back(-kPi + kTwoPi * k / per_dim);
            } else {
                axes[i].push_back(b.lo + b.width() * k / (per_dim - 1));
            }
        }
    }
    std::vector<PointCoords> seeds;
    std::vector<int> index(n, 0);
    for (;;) {
        PointCoords p(static_cast<Eigen::Index>(n));
        for (std::size_t i = 0; i < n; ++i) {
            p[static_cast<Eigen::Index>(i)] = axes[i][static_cast<std::size_t>(index[i])];
        }
        seeds.push_back(std::move(p));
        std::size_t d = 0;
        while (d < n && ++index[d] == per_dim) {
            index[d] = 0;
            ++d;
        }
        if (d == n) {
            break;
        }
    }
    return seeds;
}

}  // namespace

std::string to_string(const Classification& c) {
    switch (c.kind) {
        case Classification::Kind::Stable: return "Stable";
        case Classification::Kind::Unstable: return "Unstable(" + std::to_string(c.unstable_count) + ")";
        case Classification::Kind::NonHyperbolic: return "NonHyperbolic";
    }
    return "NonHyperbolic";
}

Eigenvalues eigenvalues(const Eigen::MatrixXd& m) {
    if (m.rows() != m.cols()) {
        throw InputError("eigenvalues: matrix must be square");
    }
    Eigen::EigenSolver<Eigen::MatrixXd> solver(m, false);
    if (solver.info() != Eigen::Success) {
        throw NumericError("eigenvalue iteration did not converge");
    }
    Eigenvalues out(solver.eigenvalues().begin(), solver.eigenvalues().end());
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
        return a.real() != b.real() ? a.real() < b.real() : a.imag() < b.imag();
    });
    return out;
}

Classification classify(const Eigenvalues& eigs, double hyp_tol) {
    if (!(hyp_tol > 0.0)) {
        throw PreconditionError("classify: hyperbolicity tolerance must be positive");
    }
    Classification c;
    int unstable = 0;
    for (const auto& lambda : eigs) {
        if (std::abs(lambda.real()) < hyp_tol) {
            c.kind = Classification::Kind::NonHyperbolic;
            return c;
        }
        if (lambda.real() > hyp_tol) {
            ++unstable;
        }
    }
    c.kind = unstable == 0 ? Classification::Kind::Stable : Classification::Kind::Unstable;
    c.unstable_count = unstable;
    return c;
}

Eigen::MatrixXd linearize(const SystemDef& sys, const PointCoords& p) {
    const double res = sys.eval(p).norm();
    if (!(res < 1e-8)) {
        throw PreconditionError("linearize: point is not an equilibrium (residual " + std::to_string(res) + ")");
    }
    return sys.jacobian(p);
}

EquilibriumRecord analyze_equilibrium(const SystemDef& sys, const PointCoords& p, double hyp_tol) {
    EquilibriumRecord rec;
    rec.point = canonicalize(sys.space(), p);
    rec.residual = sys.eval(rec.point).norm();
    rec.eigenvalues = eigenvalues(linearize(sys, rec.point));
    rec.classification = classify(rec.eigenvalues, hyp_tol);
    return rec;
}

std::vector<EquilibriumRecord> find_equilibria(const SystemDef& sys, const RegionSpec& region,
                                               const EquilibriumSearch& search) {
    if (search.grid_per_dim < 2) {
        throw PreconditionError("find_equilibria: grid_per_dim must be at least 2");
    }
    if (region.dim() != sys.dim()) {
        throw InputError("find_equilibria: region and system dimensions differ");
    }
    std::vector<PointCoords> roots;
    for (const PointCoords& seed : grid_seeds(region, search.grid_per_dim)) {
        NewtonResult r;
        try {
            r = newton(sys, seed, search);
        } catch (const NumericError&) {
            continue;
        }
        if (r.converged && region.contains(r.point)) {
            roots.push_back(std::move(r.point));
        }
    }
    std::sort(roots.begin(), roots.end(), lexicographic_less);
    std::vector<PointCoords> unique;
    for (const PointCoords& p : roots) {
        const bool seen = std::any_of(unique.begin(), unique.end(), [&](const PointCoords& q) {
            return dist(sys.space(), p, q) < kDedupRadius;
        });
        if (!seen) {
            unique.push_back(p);
        }
    }
    std::sort(unique.begin(), unique.end(), rounded_less);
    std::vector<EquilibriumRecord> out;
    out.reserve(unique.size());
    for (const PointCoords& p : unique) {
        EquilibriumRecord rec;
        rec.point = p;
        rec.residual = sys.eval(p).norm();
        rec.eigenvalues = eigenvalues(sys.jacobian(p));
        rec.classification = classify(rec.eigenvalues, search.hyp_tol);
        out.push_back(std::move(rec));
    }
    return out;
}

double spectrum_pairing_error(const Eigenvalues& a, const Eigenvalues& b) {
    if (a.size() != b.size()) {
        return std::numeric_limits<double>::infinity();
    }
    std::vector<bool> used(b.size(), false);
    double worst = 0.0;
    for (const auto& lambda : a) {
        double best = std::numeric_limits<double>::infinity();
        std::size_t best_j = 0;
        for (std::size_t j = 0; j < b.size(); ++j) {
            if (!used[j] && std::abs(lambda - b[j]) < best) {
                best = std::abs(lambda - b[j]);
                best_j = j;
            }
        }
        used[best_j] = true;
        worst = std::max(worst, best);
    }
    return worst;
}

BlockStructureReport cascade_block_structure(const CascadeDef& cas, const PointCoords& eq, double hyp_tol) {
    const PointCoords y = cas.inner_part(eq);
    if (dist(cas.inner_space(), y, cas.inner_equilibrium()) > 1e-8) {
        throw PreconditionError("cascade_block_structure: point is not on the slice y = 0_Y");
    }
    const auto nx = static_cast<Eigen::Index>(cas.outer_dim());
    const auto ny = static_cast<Eigen::Index>(cas.inner_dim());
    const SystemDef full = cas.full_system();
    const Eigen::MatrixXd jac = full.jacobian(eq);

    BlockStructureReport report;
    report.lower_left_norm = jac.bottomLeftCorner(ny, nx).cwiseAbs().maxCoeff();
    report.full = eigenvalues(jac);
    report.outer_block = eigenvalues(jac.topLeftCorner(nx, nx));
    report.inner_block = eigenvalues(jac.bottomRightCorner(ny, ny));
    Eigenvalues joined = report.outer_block;
    joined.insert(joined.end(), report.inner_block.begin(), report.inner_block.end());
    report.max_pairing_error = spectrum_pairing_error(report.full, joined);
    report.classification = classify(report.full, hyp_tol);

    const bool triangular = report.lower_left_norm < 1e-8;
    const bool paired = report.max_pairing_error <= 1e-6;
    report.ok = triangular && paired;
    if (!triangular) {
        report.message = "d_x g block is not zero";
    } else if (!paired) {
        report.message = "spectrum differs from the union of block spectra";
    } else {
        report.message = "block lower triangular; spectrum is the union of block spectra";
    }
    return report;
}

}  // namespace cascade
