#include "odaa/markowitz.hpp"

#include "odaa/errors.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <sstream>

namespace odaa {

namespace {

constexpr double kFeasTol = 1e-10;

enum class Face { kFree, kLower, kUpper };

struct Problem {
    const Eigen::MatrixXd& sigma;
    Eigen::MatrixXd A;  ///< equality rows: budget, then the return target when present
    Eigen::VectorXd b;
    Eigen::VectorXd lo;
    Eigen::VectorXd hi;
};

void check_inputs(const Eigen::VectorXd& mu, const Eigen::MatrixXd& sigma, const ConstraintSet& cs) {
    const Eigen::Index m = mu.size();
    if (m < 1 || sigma.rows() != m || sigma.cols() != m) {
        throw InputError("markowitz: mu and sigma dimensions differ");
    }
    if (!cs.budget) throw InputError("markowitz: the budget constraint is required");
    if (!mu.allFinite() || !sigma.allFinite()) throw InputError("markowitz: non-finite inputs");
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sigma);
    if (es.eigenvalues().minCoeff() < -1e-10 * std::max(1.0, sigma.diagonal().cwiseAbs().maxCoeff())) {
        throw InputError("markowitz: sigma is not positive semi-definite");
    }
}

Problem make_problem(const Eigen::VectorXd& mu, const Eigen::MatrixXd& sigma, const ConstraintSet& cs,
                     std::optional<double> r_bar) {
    const Eigen::Index m = mu.size();
    Problem p{sigma, Eigen::MatrixXd(r_bar ? 2 : 1, m), Eigen::VectorXd(r_bar ? 2 : 1), Eigen::VectorXd(m),
              Eigen::VectorXd(m)};
    p.A.row(0).setOnes();
    p.b(0) = 1.0;
    if (r_bar) {
        p.A.row(1) = mu.transpose();
        p.b(1) = *r_bar;
    }
    for (Eigen::Index j = 0; j < m; ++j) {
        p.lo(j) = cs.lower(j);
        p.hi(j) = cs.upper(j);
    }
    return p;
}

// Minimizer of u^T sigma u on one face (fixed variables at their bounds).
std::optional<Eigen::VectorXd> solve_face(const Problem& p, const std::vector<Face>& faces) {
    const Eigen::Index m = p.sigma.rows();
    std::vector<Eigen::Index> free;
    Eigen::VectorXd u = Eigen::VectorXd::Zero(m);
    for (Eigen::Index j = 0; j < m; ++j) {
        const Face f = faces[static_cast<std::size_t>(j)];
        if (f == Face::kFree) {
            free.push_back(j);
        } else {
            const double v = f == Face::kLower ? p.lo(j) : p.hi(j);
            if (!std::isfinite(v)) return std::nullopt;
            u(j) = v;
        }
    }
    const auto nf = static_cast<Eigen::Index>(free.size());
    const Eigen::Index ne = p.A.rows();
    const Eigen::VectorXd rhs_eq = p.b - p.A * u;
    if (nf > 0) {
        Eigen::MatrixXd K = Eigen::MatrixXd::Zero(nf + ne, nf + ne);
        Eigen::VectorXd rhs = Eigen::VectorXd::Zero(nf + ne);
        const Eigen::VectorXd grad_fixed = 2.0 * p.sigma * u;
        for (Eigen::Index a = 0; a < nf; ++a) {
            for (Eigen::Index c = 0; c < nf; ++c) K(a, c) = 2.0 * p.sigma(free[a], free[c]);
            for (Eigen::Index e = 0; e < ne; ++e) {
                K(a, nf + e) = p.A(e, free[a]);
                K(nf + e, a) = p.A(e, free[a]);
            }
            rhs(a) = -grad_fixed(free[a]);
        }
        rhs.tail(ne) = rhs_eq;
        const Eigen::VectorXd sol = K.completeOrthogonalDecomposition().solve(rhs);
        const double scale = std::max(1.0, rhs.cwiseAbs().maxCoeff());
        if ((K * sol - rhs).cwiseAbs().maxCoeff() > 1e-9 * scale) return std::nullopt;
        for (Eigen::Index a = 0; a < nf; ++a) u(free[a]) = sol(a);
    }
    if ((p.A * u - p.b).cwiseAbs().maxCoeff() > kFeasTol * std::max(1.0, p.b.cwiseAbs().maxCoeff())) {
        return std::nullopt;
    }
    for (Eigen::Index j = 0; j < m; ++j) {
        if (u(j) < p.lo(j) - kFeasTol || u(j) > p.hi(j) + kFeasTol) return std::nullopt;
        u(j) = std::clamp(u(j), p.lo(j), p.hi(j));
    }
    return u;
}

// Global minimizer: every face is tried; the best feasible face solution wins.
std::optional<Eigen::VectorXd> solve_qp(const Problem& p) {
    const Eigen::Index m = p.sigma.rows();
    std::vector<Face> faces(static_cast<std::size_t>(m), Face::kFree);
    std::optional<Eigen::VectorXd> best;
    double best_var = kInfinity;
    long total = 1;
    for (Eigen::Index j = 0; j < m; ++j) total *= 3;
    for (long code = 0; code < total; ++code) {
        long c = code;
        for (Eigen::Index j = 0; j < m; ++j) {
            faces[static_cast<std::size_t>(j)] = static_cast<Face>(c % 3);
            c /= 3;
        }
        const auto u = solve_face(p, faces);
        if (!u) continue;
        const double v = u->dot(p.sigma * *u);
        if (!best || v < best_var - 1e-15 * std::max(1.0, std::abs(best_var))) {
            best_var = v;
            best = u;
        }
    }
    return best;
}

// Largest u^T mu under budget and bounds (greedy fill in descending mu).
double max_linear_return(const Eigen::VectorXd& mu, const ConstraintSet& cs) {
    const Eigen::Index m = mu.size();
    Eigen::VectorXd u(m);
    double remaining = 1.0;
    for (Eigen::Index j = 0; j < m; ++j) {
        u(j) = cs.lower(j);
        if (!std::isfinite(u(j))) throw InputError("markowitz: lower bounds must be finite");
        remaining -= u(j);
    }
    if (remaining < -kFeasTol) throw InputError("markowitz: lower bounds exceed the budget");
    std::vector<Eigen::Index> order(static_cast<std::size_t>(m));
    for (Eigen::Index j = 0; j < m; ++j) order[static_cast<std::size_t>(j)] = j;
    std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) { return mu(a) > mu(b); });
    for (Eigen::Index j : order) {
        const double add = std::min(remaining, cs.upper(j) - u(j));
        u(j) += add;
        remaining -= add;
    }
    if (remaining > kFeasTol) throw InputError("markowitz: upper bounds cannot absorb the budget");
    return u.dot(mu);
}

bool within_cap(double variance, const ConstraintSet& cs) {
    return !cs.sigma_max || std::sqrt(std::max(variance, 0.0)) <= *cs.sigma_max + cs.risk_tolerance;
}

}  // namespace

ReturnRange feasible_return_range(const Eigen::VectorXd& mu, const Eigen::MatrixXd& sigma, const ConstraintSet& cs) {
    check_inputs(mu, sigma, cs);
    const auto gmv = solve_qp(make_problem(mu, sigma, cs, std::nullopt));
    if (!gmv) throw InputError("markowitz: the feasible allocation set is empty");
    const double gmv_var = gmv->dot(sigma * *gmv);
    if (!within_cap(gmv_var, cs)) {
        throw InfeasibleError("markowitz: the minimum-variance portfolio already exceeds sigma_max");
    }
    ReturnRange r;
    r.r_min = gmv->dot(mu);
    const double r_lp = max_linear_return(mu, cs);
    if (r_lp <= r.r_min) {
        r.r_max = r.r_min;
        return r;
    }
    auto var_at = [&](double target) {
        const auto u = solve_qp(make_problem(mu, sigma, cs, target));
        return u ? u->dot(sigma * *u) : kInfinity;
    };
    if (within_cap(var_at(r_lp), cs)) {
        r.r_max = r_lp;
        return r;
    }
    // Frontier variance is convex and increasing above r_min: bisect on the cap.
    double a = r.r_min;
    double b = r_lp;
    for (int it = 0; it < 200 && b - a > 1e-15 * std::max(1.0, std::abs(b)); ++it) {
        const double mid = 0.5 * (a + b);
        (within_cap(var_at(mid), cs) ? a : b) = mid;
    }
    r.r_max = a;
    return r;
}

FrontierPoint min_variance_for_target(const Eigen::VectorXd& mu, const Eigen::MatrixXd& sigma, double r_bar,
                                      const ConstraintSet& cs) {
    check_inputs(mu, sigma, cs);
    const auto u = solve_qp(make_problem(mu, sigma, cs, r_bar));
    const double var = u ? u->dot(sigma * *u) : kInfinity;
    if (!u || !within_cap(var, cs)) {
        const ReturnRange range = feasible_return_range(mu, sigma, cs);
        std::ostringstream os;
        os << "markowitz: target return " << r_bar << " outside the feasible range [" << range.r_min << ", "
           << range.r_max << "]";
        throw InputError(os.str());
    }
    return {r_bar, *u, std::max(var, 0.0)};
}

std::vector<FrontierPoint> efficient_frontier(const Eigen::VectorXd& mu, const Eigen::MatrixXd& sigma,
                                              const ConstraintSet& cs, int n_points) {
    if (n_points < 2) throw InputError("efficient_frontier: need at least two points");
    const ReturnRange range = feasible_return_range(mu, sigma, cs);
    std::vector<FrontierPoint> out;
    out.reserve(static_cast<std::size_t>(n_points));
    for (int i = 0; i < n_points; ++i) {
        const double r = i + 1 == n_points ? range.r_max
                                           : range.r_min + (range.r_max - range.r_min) * i / (n_points - 1);
        out.push_back(min_variance_for_target(mu, sigma, r, cs));
    }
    return out;
}

SelectionResult select_max_success(const std::vector<FrontierPoint>& frontier, const MixtureModel& mm,
                                   const TargetSequence& ts, double x0, const SimulationConfig& cfg, StaticMode mode) {
    if (frontier.empty()) throw InputError("select_max_success: empty frontier");
    SelectionResult best;
    double best_p = -1.0;
    for (std::size_t i = 0; i < frontier.size(); ++i) {
        const SimulationResult r = simulate(frontier[i].allocation, mm, ts, x0, cfg, mode);
        best.probabilities.push_back(r.probability);
        if (r.probability > best_p) {
            best_p = r.probability;
            best.index = i;
            best.allocation = frontier[i].allocation;
            best.probability = r.probability;
            best.standard_error = r.standard_error;
        }
    }
    return best;
}

}  // namespace odaa
