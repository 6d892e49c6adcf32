#include "odaa/allocation.hpp"

#include "odaa/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace odaa {

TargetSequence TargetSequence::terminal_goal(int horizon, double terminal_lower, double x0) {
    if (horizon < 1) throw InputError("terminal_goal: horizon must be >= 1");
    TargetSequence ts;
    ts.sets.assign(static_cast<std::size_t>(horizon + 1), Interval{0.0, kInfinity});
    ts.sets.front() = Interval{x0, x0};
    ts.sets.back() = Interval{terminal_lower, kInfinity};
    return ts;
}

void TargetSequence::validate(double x0) const {
    if (horizon() < 1) throw InputError("TargetSequence: horizon must be >= 1");
    for (std::size_t k = 0; k < sets.size(); ++k) {
        const auto& s = sets[k];
        if (!(s.lower >= 0.0) || !(s.upper >= s.lower) || std::isnan(s.upper)) {
            std::ostringstream os;
            os << "TargetSequence: set X_" << k << " = [" << s.lower << ", " << s.upper
               << "] must be nonempty with lower >= 0";
            throw InputError(os.str());
        }
    }
    if (!sets.front().contains(x0)) {
        throw InputError("TargetSequence: initial value is outside X_0");
    }
}

double ConstraintSet::lower(Eigen::Index j) const {
    double lo = -kInfinity;
    if (!lower_bounds.empty()) lo = lower_bounds.at(static_cast<std::size_t>(j));
    if (long_only) lo = std::max(lo, 0.0);
    return lo;
}

double ConstraintSet::upper(Eigen::Index j) const {
    double hi = kInfinity;
    if (!upper_bounds.empty()) hi = upper_bounds.at(static_cast<std::size_t>(j));
    if (long_only && budget) hi = std::min(hi, 1.0);
    return hi;
}

std::string ConstraintSet::violations(const Eigen::VectorXd& u, const Eigen::MatrixXd& risk_cov, double tol) const {
    std::ostringstream os;
    if (budget && std::abs(u.sum() - 1.0) > tol) os << "budget (sum = " << u.sum() << "); ";
    for (Eigen::Index j = 0; j < u.size(); ++j) {
        if (long_only && u(j) < -tol) os << "long-only (asset " << j << " = " << u(j) << "); ";
        if (!lower_bounds.empty() && u(j) < lower(j) - tol) os << "lower bound (asset " << j << "); ";
        if (!upper_bounds.empty() && u(j) > upper(j) + tol) os << "upper bound (asset " << j << "); ";
    }
    if (sigma_max) {
        const double sd = std::sqrt(std::max(0.0, u.dot(risk_cov * u)));
        if (sd > *sigma_max + risk_tolerance) os << "risk budget (sd " << sd << " > " << *sigma_max << "); ";
    }
    return os.str();
}

bool ConstraintSet::admits(const Eigen::VectorXd& u, const Eigen::MatrixXd& risk_cov, double tol) const {
    return violations(u, risk_cov, tol).empty();
}

AllocationLattice::AllocationLattice(ConstraintSet cs, Eigen::MatrixXd risk_cov, int resolution)
    : cs_(std::move(cs)), risk_cov_(std::move(risk_cov)), resolution_(resolution) {
    const Eigen::Index m = risk_cov_.rows();
    if (m < 1 || risk_cov_.cols() != m) throw InputError("AllocationLattice: risk covariance must be square");
    if (resolution_ < 1) throw InputError("AllocationLattice: resolution must be positive");
    if ((!cs_.lower_bounds.empty() && static_cast<Eigen::Index>(cs_.lower_bounds.size()) != m) ||
        (!cs_.upper_bounds.empty() && static_cast<Eigen::Index>(cs_.upper_bounds.size()) != m)) {
        throw InputError("AllocationLattice: per-asset bounds must have one entry per asset");
    }
    const double r = static_cast<double>(resolution_);
    for (Eigen::Index j = 0; j < m; ++j) {
        double lo = cs_.lower(j);
        double hi = cs_.upper(j);
        if (!std::isfinite(lo) || !std::isfinite(hi)) {
            throw InputError("AllocationLattice: allocation search needs finite per-asset bounds "
                             "(enable long_only with budget, or supply lower/upper bounds)");
        }
        lo_units_.push_back(static_cast<int>(std::ceil(lo * r - 1e-9)));
        hi_units_.push_back(static_cast<int>(std::floor(hi * r + 1e-9)));
    }
}

int AllocationLattice::units_for(double step) const {
    const double u = step * static_cast<double>(resolution_);
    const long rounded = std::lround(u);
    if (rounded < 1 || std::abs(u - static_cast<double>(rounded)) > 1e-6) {
        std::ostringstream os;
        os << "AllocationLattice: step " << step << " is not a multiple of 1/" << resolution_;
        throw InputError(os.str());
    }
    return static_cast<int>(rounded);
}

Eigen::VectorXd AllocationLattice::weights(const LatticeKey& key) const {
    Eigen::VectorXd u(static_cast<Eigen::Index>(key.size()));
    for (std::size_t j = 0; j < key.size(); ++j) {
        u(static_cast<Eigen::Index>(j)) = static_cast<double>(key[j]) / static_cast<double>(resolution_);
    }
    return u;
}

double AllocationLattice::variance(const LatticeKey& key) const {
    const Eigen::VectorXd u = weights(key);
    return u.dot(risk_cov_ * u);
}

bool AllocationLattice::feasible(const LatticeKey& key) const {
    if (static_cast<Eigen::Index>(key.size()) != assets()) return false;
    int total = 0;
    for (std::size_t j = 0; j < key.size(); ++j) {
        if (key[j] < lo_units_[j] || key[j] > hi_units_[j]) return false;
        total += key[j];
    }
    if (cs_.budget && total != resolution_) return false;
    if (cs_.sigma_max) {
        const double sd = std::sqrt(std::max(0.0, variance(key)));
        if (sd > *cs_.sigma_max + cs_.risk_tolerance) return false;
    }
    return true;
}

void AllocationLattice::enumerate(std::vector<LatticeKey>& out, LatticeKey& cur, Eigen::Index j, int remaining,
                                  const std::vector<int>& lo, const std::vector<int>& hi, int step) const {
    const auto idx = static_cast<std::size_t>(j);
    const bool last = j + 1 == assets();
    if (cs_.budget && last) {
        if (remaining >= lo[idx] && remaining <= hi[idx] && (remaining - lo[idx]) % step == 0) {
            cur[idx] = remaining;
            if (feasible(cur)) out.push_back(cur);
        }
        return;
    }
    for (int v = lo[idx]; v <= hi[idx]; v += step) {
        cur[idx] = v;
        if (last) {
            if (feasible(cur)) out.push_back(cur);
        } else {
            enumerate(out, cur, j + 1, remaining - v, lo, hi, step);
        }
    }
}

std::vector<LatticeKey> AllocationLattice::grid(int step_units) const {
    if (step_units < 1) throw InputError("AllocationLattice::grid: step must be positive");
    std::vector<int> lo(lo_units_.size());
    std::vector<int> hi(hi_units_.size());
    for (std::size_t j = 0; j < lo.size(); ++j) {
        // align to multiples of the step
        lo[j] = static_cast<int>(std::ceil(static_cast<double>(lo_units_[j]) / step_units)) * step_units;
        hi[j] = static_cast<int>(std::floor(static_cast<double>(hi_units_[j]) / step_units)) * step_units;
    }
    std::vector<LatticeKey> out;
    LatticeKey cur(lo.size(), 0);
    enumerate(out, cur, 0, resolution_, lo, hi, step_units);
    return out;
}

std::vector<LatticeKey> AllocationLattice::neighborhood(const LatticeKey& center, int step_units,
                                                        int radius_units) const {
    std::vector<int> lo(center.size());
    std::vector<int> hi(center.size());
    for (std::size_t j = 0; j < center.size(); ++j) {
        int a = center[j] - (radius_units / step_units) * step_units;
        int b = center[j] + (radius_units / step_units) * step_units;
        while (a < lo_units_[j]) a += step_units;
        while (b > hi_units_[j]) b -= step_units;
        lo[j] = a;
        hi[j] = b;
    }
    std::vector<LatticeKey> out;
    LatticeKey cur(center.size(), 0);
    const int total = std::accumulate(center.begin(), center.end(), 0);
    enumerate(out, cur, 0, cs_.budget ? resolution_ : total, lo, hi, step_units);
    return out;
}

std::string AllocationLattice::diagnose_empty(int step_units) const {
    std::ostringstream os;
    const int lo_sum = std::accumulate(lo_units_.begin(), lo_units_.end(), 0);
    const int hi_sum = std::accumulate(hi_units_.begin(), hi_units_.end(), 0);
    if (cs_.budget && (lo_sum > resolution_ || hi_sum < resolution_)) {
        os << "budget constraint incompatible with per-asset bounds; ";
    }
    if (cs_.sigma_max) {
        ConstraintSet relaxed = cs_;
        relaxed.sigma_max.reset();
        AllocationLattice without_risk(relaxed, risk_cov_, resolution_);
        const auto pts = without_risk.grid(step_units);
        if (!pts.empty()) {
            double best = kInfinity;
            for (const auto& p : pts) best = std::min(best, std::sqrt(std::max(0.0, variance(p))));
            os << "risk budget sigma_max = " << *cs_.sigma_max << " is below the smallest lattice volatility "
               << best << "; ";
        }
    }
    std::string msg = os.str();
    if (msg.empty()) msg = "no lattice point satisfies the constraints at the requested step; ";
    return msg;
}

std::size_t select_candidate(const std::vector<Candidate>& cands, double tie_tolerance) {
    if (cands.empty()) throw InputError("select_candidate: no candidates");
    double best = -kInfinity;
    for (const auto& c : cands) best = std::max(best, c.value);
    std::size_t pick = cands.size();
    for (std::size_t i = 0; i < cands.size(); ++i) {
        const auto& c = cands[i];
        if (c.value < best - tie_tolerance) continue;
        if (pick == cands.size()) {
            pick = i;
            continue;
        }
        const auto& p = cands[pick];
        if (c.variance < p.variance || (c.variance == p.variance && c.key < p.key)) pick = i;
    }
    return pick;
}

}  // namespace odaa
