#include "odaa/reachability.hpp"

#include "odaa/errors.hpp"
#include "odaa/gaussian.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>
#include <unordered_map>

namespace odaa {

// ---------------------------------------------------------------------------
// Grid and value function
// ---------------------------------------------------------------------------

StateGrid::StateGrid(double lo, double hi, int size) {
    if (!(lo > 0.0) || !(hi > lo) || size < 2) {
        throw InputError("StateGrid: need 0 < lo < hi and at least two nodes");
    }
    log_step_ = std::log(hi / lo) / static_cast<double>(size - 1);
    nodes_.resize(static_cast<std::size_t>(size));
    for (int i = 0; i < size; ++i) nodes_[static_cast<std::size_t>(i)] = lo * std::exp(log_step_ * i);
    nodes_.back() = hi;
}

int StateGrid::nearest(double x) const {
    if (!(x > nodes_.front())) return 0;
    const double pos = std::log(x / nodes_.front()) / log_step_;
    const long i = std::lround(pos);
    return static_cast<int>(std::clamp<long>(i, 0, size() - 1));
}

StateGrid StateGrid::scaled(double factor) const {
    if (!(factor > 0.0)) throw InputError("StateGrid: scale factor must be positive");
    StateGrid g = *this;
    for (double& v : g.nodes_) v *= factor;
    return g;
}

int StateGrid::segment(double x) const {
    if (x < nodes_.front()) return -1;
    if (x >= nodes_.back()) return size() - 1;
    auto it = std::upper_bound(nodes_.begin(), nodes_.end(), x);
    return static_cast<int>(it - nodes_.begin()) - 1;
}

double ValueFunction::operator()(double x) const {
    const int s = grid->segment(x);
    if (s < 0) return 0.0;
    if (s >= grid->size() - 1) return values.back();
    const double a = grid->node(s);
    const double b = grid->node(s + 1);
    const double t = (x - a) / (b - a);
    return values[static_cast<std::size_t>(s)] * (1.0 - t) + values[static_cast<std::size_t>(s + 1)] * t;
}

namespace {

// Finite bounds within roundoff of a node are moved onto it, so a bound placed
// on a node by construction classifies that node consistently.
Interval snapped(Interval target, const StateGrid& g) {
    auto snap = [&](double& b) {
        if (!(b > 0.0) || !std::isfinite(b)) return;
        const int i = g.nearest(b);
        if (std::abs(std::log(b / g.node(i))) <= 1e-9 * g.log_step()) b = g.node(i);
    };
    snap(target.lower);
    snap(target.upper);
    return target;
}

}  // namespace

ValueFunction terminal_values(std::shared_ptr<const StateGrid> grid, const Interval& target) {
    ValueFunction vf;
    vf.grid = std::move(grid);
    const Interval t = snapped(target, *vf.grid);
    vf.values.resize(static_cast<std::size_t>(vf.grid->size()));
    for (int i = 0; i < vf.grid->size(); ++i) {
        vf.values[static_cast<std::size_t>(i)] = t.contains(vf.grid->node(i)) ? 1.0 : 0.0;
    }
    return vf;
}

// ---------------------------------------------------------------------------
// Integrand: J_next restricted to X_next
// ---------------------------------------------------------------------------

namespace {

// Constant-valued interval integrated with direct CDF calls: pieces cut by a
// target bound, and the region above the grid when it is not the plain tail.
struct SpecialPiece {
    double a;
    double b;
    double value;
    int piece;  ///< index used for window membership; pieces >= size-1 lie above the grid
};

// F(z) = J_next(z) 1{z in X_next} in piece form. Pieces fully inside X keep the
// linear interpolant; pieces cut by a bound take the value of their inside node
// on the inside part; pieces outside are zero.
class Integrand {
public:
    Integrand(const ValueFunction& next, const Interval& target_in)
        : grid_(next.grid.get()), target_(snapped(target_in, *next.grid)), values_(&next.values) {
        const Interval& target = target_;
        const int n = grid_->size();
        level_.assign(static_cast<std::size_t>(n - 1), 0.0);
        slope_.assign(static_cast<std::size_t>(n - 1), 0.0);
        piece_min_.assign(static_cast<std::size_t>(n - 1), 0.0);
        piece_max_.assign(static_cast<std::size_t>(n - 1), 0.0);
        for (int t = 0; t + 1 < n; ++t) {
            const double za = grid_->node(t);
            const double zb = grid_->node(t + 1);
            const double va = next.values[static_cast<std::size_t>(t)];
            const double vb = next.values[static_cast<std::size_t>(t + 1)];
            const auto i = static_cast<std::size_t>(t);
            if (za >= target.lower && zb <= target.upper) {
                level_[i] = va;
                slope_[i] = vb - va;
                piece_min_[i] = std::min(va, vb);
                piece_max_[i] = std::max(va, vb);
                continue;
            }
            const double a = std::max(za, target.lower);
            const double b = std::min(zb, target.upper);
            if (a >= b) continue;  // outside X
            double v = 0.0;
            if (target.lower > za && target.upper < zb) {
                v = next((a + b) / 2.0);
            } else if (target.lower > za) {
                v = vb;
            } else {
                v = va;
            }
            specials_.push_back({a, b, v, t});
            piece_min_[i] = std::min(0.0, v);
            piece_max_[i] = std::max(0.0, v);
        }
        top_ = next.values.back();
        const double z_top = grid_->hi();
        if (target.upward_unbounded() && target.lower <= z_top) {
            plain_tail_ = true;
        } else {
            const double a = std::max(z_top, target.lower);
            if (a < target.upper) specials_.push_back({a, target.upper, top_, n - 1});
        }
        tail_active_ = plain_tail_ || (!specials_.empty() && specials_.back().piece == n - 1);
    }

    [[nodiscard]] const StateGrid& grid() const { return *grid_; }
    [[nodiscard]] const std::vector<double>& level() const { return level_; }
    [[nodiscard]] const std::vector<double>& slope() const { return slope_; }
    [[nodiscard]] const std::vector<SpecialPiece>& specials() const { return specials_; }
    [[nodiscard]] bool plain_tail() const { return plain_tail_; }
    [[nodiscard]] double top() const { return top_; }

    /// F at a single point; used for point-mass components.
    [[nodiscard]] double at(double z) const {
        for (const auto& s : specials_) {
            if (z >= s.a && z <= s.b) return s.value;
        }
        const int n = grid_->size();
        if (z < grid_->lo()) return 0.0;
        if (z >= grid_->hi()) return plain_tail_ ? top_ : 0.0;
        const int t = grid_->segment(z);
        const auto i = static_cast<std::size_t>(t);
        if (t < 0 || t >= n - 1) return 0.0;
        const double za = grid_->node(t);
        const double zb = grid_->node(t + 1);
        return level_[i] + slope_[i] * (z - za) / (zb - za);
    }

    /// F at node t of the next grid; t may lie outside the grid.
    [[nodiscard]] double node_value(long t, double z) const {
        const long n = grid_->size();
        if (t < 0) return 0.0;
        if (t < n) return target_.contains(grid_->node(static_cast<int>(t))) ? (*values_)[static_cast<std::size_t>(t)] : 0.0;
        return at(z);
    }

    /// True when a target bound lies in (z_lo, z_hi].
    [[nodiscard]] bool cuts(double z_lo, double z_hi) const {
        return (target_.lower > z_lo && target_.lower <= z_hi) || (target_.upper >= z_lo && target_.upper < z_hi);
    }

    /// Range of F over pieces [t_begin, t_end], including virtual pieces outside the grid.
    void range(long t_begin, long t_end, double& lo, double& hi) const {
        const long n = grid_->size();
        lo = kInfinity;
        hi = -kInfinity;
        if (t_begin < 0) {
            lo = std::min(lo, 0.0);
            hi = std::max(hi, 0.0);
        }
        const long a = std::max(t_begin, 0L);
        const long b = std::min(t_end, n - 2);
        for (long t = a; t <= b; ++t) {
            lo = std::min(lo, piece_min_[static_cast<std::size_t>(t)]);
            hi = std::max(hi, piece_max_[static_cast<std::size_t>(t)]);
        }
        if (t_end >= n - 1) {
            const double v = tail_active_ ? top_ : 0.0;
            lo = std::min(lo, v);
            hi = std::max(hi, v);
            if (!plain_tail_) {
                lo = std::min(lo, 0.0);
                hi = std::max(hi, 0.0);
            }
        }
    }

private:
    const StateGrid* grid_;
    Interval target_;
    const std::vector<double>* values_;
    std::vector<double> level_;
    std::vector<double> slope_;
    std::vector<double> piece_min_;
    std::vector<double> piece_max_;
    std::vector<SpecialPiece> specials_;
    double top_ = 0.0;
    bool plain_tail_ = false;
    bool tail_active_ = false;
};

// Below this projected sd a component is integrated as a point mass.
constexpr double kPointMassSd = 1e-14;

// Components narrower than this fraction of a grid step use a three-node stencil.
constexpr double kNarrowSteps = 0.5;

// Weights on nodes at rel_m < rel_0 < rel_p (ratios to x) matching the mean
// 1 + mean and variance sd^2 of the step. Integrating a narrow Gaussian against
// the piecewise-linear J instead adds a spurious variance of order sd h at every
// kink, which compounds over many stages.
struct Stencil {
    long center = 0;  ///< offset of the middle node
    double w[3] = {0.0, 0.0, 0.0};
    double rel[3] = {0.0, 0.0, 0.0};
    bool valid = false;
};

Stencil make_stencil(double mean, double sd, double h, double log_growth, double shift) {
    Stencil st;
    if (!(sd / (1.0 + mean) < kNarrowSteps * h)) return st;
    st.center = std::lround((std::log1p(mean) - log_growth - shift) / h);
    for (int i = 0; i < 3; ++i) {
        st.rel[i] = std::exp(h * static_cast<double>(st.center - 1 + i) + log_growth + shift);
    }
    const double a = st.rel[0] - st.rel[1];
    const double b = st.rel[2] - st.rel[1];
    const double d = 1.0 + mean - st.rel[1];
    const double q = sd * sd + d * d;
    st.w[2] = (q - a * d) / (b * (b - a));
    st.w[0] = (q - b * d) / (a * (a - b));
    st.w[1] = 1.0 - st.w[0] - st.w[2];
    st.valid = st.w[0] >= 0.0 && st.w[1] >= 0.0 && st.w[2] >= 0.0;
    return st;
}

// Piece indices [lo, hi] whose pieces can meet 1 + mean +/- T sd, where piece t
// starts at log position t h - shift (relative to x); clamped to +/- limit.
void piece_window(double mean, double sd, double T, double h, double shift, long limit, long& lo, long& hi) {
    const double top = 1.0 + mean + T * sd;
    const double bottom = 1.0 + mean - T * sd;
    const auto bound = static_cast<double>(limit);
    const double up = top > 0.0 ? std::ceil((std::log(top) + shift) / h) : -bound;
    const double down = bottom > 0.0 ? std::floor((std::log(bottom) + shift) / h) - 1.0 : -bound;
    hi = static_cast<long>(std::clamp(up, -bound, bound));
    lo = static_cast<long>(std::clamp(down, -bound, bound));
}

// Integral of a constant over [a, b] against N(x(1+mean), (x sd)^2).
double constant_piece(double x, double mean, double sd, double a, double b, double value) {
    if (value == 0.0 || !(b > a)) return 0.0;
    const double da = (a / x - 1.0 - mean) / sd;
    const double db = b == kInfinity ? kInfinity : (b / x - 1.0 - mean) / sd;
    const double mass = db == kInfinity ? gaussian::sf(da) : gaussian::cdf(db) - gaussian::cdf(da);
    return value * mass;
}

// Direct closed-form integration for an arbitrary x.
double integrate_component_direct(const Integrand& f, double x, double mean, double sd, double T) {
    if (sd <= kPointMassSd) return f.at(x * (1.0 + mean));
    const StateGrid& g = f.grid();
    const int n = g.size();
    const double h = g.log_step();
    const Stencil st = make_stencil(mean, sd, h, 0.0, std::log(g.lo() / x));
    if (st.valid && !f.cuts(x * st.rel[0], x * st.rel[2])) {
        const long base = st.center - 1;
        double v = 0.0;
        for (int i = 0; i < 3; ++i) v += st.w[i] * f.node_value(base + i, x * st.rel[i]);
        return v;
    }
    long t_lo = 0;
    long t_hi = 0;
    piece_window(mean, sd, T, h, std::log(x / g.lo()), 2L * n + 2L, t_lo, t_hi);

    auto node_z = [&](long t) { return g.lo() * std::exp(h * static_cast<double>(t)); };
    auto d_of = [&](double z) { return (z / x - 1.0 - mean) / sd; };

    double total = 0.0;
    const long a = std::max(t_lo, 0L);
    const long b = std::min(t_hi, static_cast<long>(n) - 2);
    if (a <= b) {
        double z0 = g.node(static_cast<int>(a));
        double d0 = d_of(z0);
        double P0 = gaussian::cdf(d0);
        double p0 = gaussian::pdf(d0);
        for (long t = a; t <= b; ++t) {
            const double z1 = g.node(static_cast<int>(t + 1));
            const double d1 = d_of(z1);
            const double P1 = gaussian::cdf(d1);
            const double p1 = gaussian::pdf(d1);
            const auto i = static_cast<std::size_t>(t);
            const double dP = P1 - P0;
            const double lvl = f.level()[i];
            const double slp = f.slope()[i];
            if (lvl != 0.0 || slp != 0.0) {
                const double rel = z0 / x;
                const double width = (z1 - z0) / x;
                total += lvl * dP + slp * ((1.0 + mean - rel) * dP - sd * (p1 - p0)) / width;
            }
            z0 = z1;
            P0 = P1;
            p0 = p1;
        }
    }
    const double win_lo = node_z(t_lo);
    const double win_hi = node_z(t_hi + 1);
    if (f.plain_tail() && t_hi >= n - 1) {
        const double za = std::max(g.hi(), win_lo);
        total += constant_piece(x, mean, sd, za, win_hi, f.top());
    }
    for (const auto& s : f.specials()) {
        const double za = std::max(s.a, win_lo);
        const double zb = std::min(s.b, win_hi);
        total += constant_piece(x, mean, sd, za, zb, s.value);
    }
    return total;
}

// ---------------------------------------------------------------------------
// Offset kernels: on a log-uniform grid the standardized breakpoints of node
// j + o seen from node j depend only on o, so one kernel per allocation serves
// every node and every stage.
// ---------------------------------------------------------------------------

struct ComponentKernel {
    double weight = 0.0;
    double mean = 0.0;
    double sd = 0.0;
    bool point_mass = false;
    long o_lo = 0;
    long o_hi = 0;
    double rel_lo = 0.0;        ///< next node / x at offset o_lo
    double rel_hi = 0.0;        ///< next node / x at offset o_hi + 1
    std::vector<double> cdf;    ///< Phi at offsets o_lo .. o_hi + 1
    std::vector<double> level;  ///< mass of piece o
    std::vector<double> slope;  ///< first-moment weight of piece o
    Stencil stencil;            ///< offsets relative to the node's own index
};

struct AllocationKernel {
    LatticeKey key;
    Eigen::VectorXd allocation;
    double variance = 0.0;
    std::vector<ComponentKernel> components;
};

// Next-stage node j + o sits at x (1 + drift) e^{o h} from node j.
AllocationKernel build_kernel(const LatticeKey& key, const Eigen::VectorXd& u, double variance,
                              const MixtureModel& mm, const StateGrid& g, double drift, double T) {
    AllocationKernel k;
    k.key = key;
    k.allocation = u;
    k.variance = variance;
    const UnivariateMixture um = project(mm, u);
    const double h = g.log_step();
    const double expm1h = std::expm1(h);
    for (std::size_t i = 0; i < um.weights.size(); ++i) {
        ComponentKernel c;
        c.weight = um.weights[i];
        c.mean = um.means[i];
        c.sd = um.sds[i];
        if (c.weight == 0.0) {
            k.components.push_back(std::move(c));
            continue;
        }
        if (c.sd <= kPointMassSd) {
            c.point_mass = true;
            k.components.push_back(std::move(c));
            continue;
        }
        const double log_growth = std::log1p(drift);
        piece_window(c.mean, c.sd, T, h, -log_growth, g.size() + 1L, c.o_lo, c.o_hi);
        c.stencil = make_stencil(c.mean, c.sd, h, log_growth, 0.0);
        const long len = c.o_hi - c.o_lo + 1;
        c.cdf.resize(static_cast<std::size_t>(len + 1));
        std::vector<double> pdf(static_cast<std::size_t>(len + 1));
        std::vector<double> rel(static_cast<std::size_t>(len + 1));
        for (long o = c.o_lo; o <= c.o_hi + 1; ++o) {
            const auto i2 = static_cast<std::size_t>(o - c.o_lo);
            rel[i2] = std::exp(h * static_cast<double>(o) + log_growth);
            const double d = (rel[i2] - 1.0 - c.mean) / c.sd;
            c.cdf[i2] = gaussian::cdf(d);
            pdf[i2] = gaussian::pdf(d);
        }
        c.rel_lo = rel.front();
        c.rel_hi = rel.back();
        c.level.resize(static_cast<std::size_t>(len));
        c.slope.resize(static_cast<std::size_t>(len));
        for (long o = 0; o < len; ++o) {
            const auto i2 = static_cast<std::size_t>(o);
            const double dP = c.cdf[i2 + 1] - c.cdf[i2];
            c.level[i2] = dP;
            c.slope[i2] = ((1.0 + c.mean - rel[i2]) * dP - c.sd * (pdf[i2 + 1] - pdf[i2])) / (rel[i2] * expm1h);
        }
        k.components.push_back(std::move(c));
    }
    return k;
}

double integrate_component_kernel(const Integrand& f, double x, int j, const ComponentKernel& c) {
    const StateGrid& g = f.grid();
    if (c.point_mass) return f.at(x * (1.0 + c.mean));
    const Stencil& st = c.stencil;
    if (st.valid && !f.cuts(x * st.rel[0], x * st.rel[2])) {
        const long base = j + st.center - 1;
        double v = 0.0;
        for (int i = 0; i < 3; ++i) v += st.w[i] * f.node_value(base + i, x * st.rel[i]);
        return v;
    }
    const long n = g.size();
    double total = 0.0;
    const long o_begin = std::max(c.o_lo, -static_cast<long>(j));
    const long o_end = std::min(c.o_hi, n - 2 - j);
    if (o_begin <= o_end) {
        const Eigen::Index len = o_end - o_begin + 1;
        const Eigen::Index t0 = j + o_begin;
        const Eigen::Index k0 = o_begin - c.o_lo;
        total += Eigen::Map<const Eigen::VectorXd>(f.level().data() + t0, len)
                     .dot(Eigen::Map<const Eigen::VectorXd>(c.level.data() + k0, len));
        total += Eigen::Map<const Eigen::VectorXd>(f.slope().data() + t0, len)
                     .dot(Eigen::Map<const Eigen::VectorXd>(c.slope.data() + k0, len));
    }
    if (f.plain_tail()) {
        const long start = std::max(n - 1 - j, c.o_lo);
        if (start <= c.o_hi) {
            total += f.top() * (c.cdf.back() - c.cdf[static_cast<std::size_t>(start - c.o_lo)]);
        }
    }
    if (!f.specials().empty()) {
        const double win_lo = x * c.rel_lo;
        const double win_hi = x * c.rel_hi;
        for (const auto& s : f.specials()) {
            total += constant_piece(x, c.mean, c.sd, std::max(s.a, win_lo), std::min(s.b, win_hi), s.value);
        }
    }
    return total;
}

double checked_value(double v, int stage, double x) {
    if (!std::isfinite(v)) {
        std::ostringstream os;
        os << "stage value is not finite at stage " << stage << ", x = " << x;
        throw NumericalError(os.str());
    }
    return std::clamp(v, 0.0, 1.0);
}

double kernel_value(const Integrand& f, const StateGrid& here, int j, const AllocationKernel& k, int stage) {
    const double x = here.node(j);
    double v = 0.0;
    for (const auto& c : k.components) {
        if (c.weight == 0.0) continue;
        v += c.weight * integrate_component_kernel(f, x, j, c);
    }
    return checked_value(v, stage, x);
}

// ---------------------------------------------------------------------------
// Search
// ---------------------------------------------------------------------------

struct KeyHash {
    std::size_t operator()(const LatticeKey& k) const noexcept {
        std::size_t h = 1469598103934665603ULL;
        for (int v : k) {
            h ^= static_cast<std::size_t>(static_cast<unsigned>(v));
            h *= 1099511628211ULL;
        }
        return h;
    }
};

int lattice_resolution(const SolverConfig& cfg) {
    double finest = cfg.coarse_step;
    for (double s : cfg.refine_steps) finest = std::min(finest, s);
    const long r = std::lround(1.0 / finest);
    if (r < 1 || std::abs(1.0 / static_cast<double>(r) - finest) > 1e-9 * finest) {
        throw InputError("SolverConfig: the finest allocation step must be 1/R for an integer R");
    }
    return static_cast<int>(r);
}

// Coarse enumeration then refinement rounds; each round searches a window of
// one previous step around the incumbent. `value(key)` evaluates a point.
template <class ValueFn>
Candidate run_search(const AllocationLattice& lat, const std::vector<LatticeKey>& coarse, const SolverConfig& cfg,
                     ValueFn&& value, std::vector<LatticeKey>* visited = nullptr) {
    std::vector<Candidate> cands;
    cands.reserve(coarse.size() + 256);
    std::unordered_map<LatticeKey, std::size_t, KeyHash> seen;
    auto consider = [&](const LatticeKey& key) {
        if (seen.count(key)) return;
        seen.emplace(key, cands.size());
        cands.push_back({key, value(key), lat.variance(key)});
        if (visited) visited->push_back(key);
    };
    for (const auto& key : coarse) consider(key);
    std::size_t pick = select_candidate(cands, cfg.tie_tolerance);
    int radius = lat.units_for(cfg.coarse_step);
    for (double step : cfg.refine_steps) {
        const int units = lat.units_for(step);
        const LatticeKey center = cands[pick].key;
        for (const auto& key : lat.neighborhood(center, units, radius)) consider(key);
        pick = select_candidate(cands, cfg.tie_tolerance);
        radius = units;
    }
    return cands[pick];
}

std::vector<LatticeKey> coarse_points(const AllocationLattice& lat, const SolverConfig& cfg) {
    const int units = lat.units_for(cfg.coarse_step);
    auto pts = lat.grid(units);
    if (pts.empty()) {
        throw InfeasibleError("empty feasible allocation set: " + lat.diagnose_empty(units));
    }
    return pts;
}

class KernelCache {
public:
    KernelCache(const AllocationLattice& lat, const MixtureModel& mm, const StateGrid& g, double drift, double T)
        : lat_(lat), mm_(mm), grid_(g), drift_(drift), T_(T) {}

    std::shared_ptr<const AllocationKernel> get(const LatticeKey& key) {
        {
            std::lock_guard lock(mutex_);
            auto it = map_.find(key);
            if (it != map_.end()) return it->second;
        }
        auto k = std::make_shared<const AllocationKernel>(
            build_kernel(key, lat_.weights(key), lat_.variance(key), mm_, grid_, drift_, T_));
        std::lock_guard lock(mutex_);
        if (map_.size() < kMaxEntries) map_.emplace(key, k);
        return k;
    }

private:
    static constexpr std::size_t kMaxEntries = 60000;
    const AllocationLattice& lat_;
    const MixtureModel& mm_;
    const StateGrid& grid_;
    double drift_;
    double T_;
    std::mutex mutex_;
    std::unordered_map<LatticeKey, std::shared_ptr<const AllocationKernel>, KeyHash> map_;
};

template <class Fn>
void parallel_for(int count, int threads, Fn&& fn) {
    threads = std::max(1, std::min(threads, count));
    if (threads == 1) {
        for (int i = 0; i < count; ++i) fn(i);
        return;
    }
    std::vector<std::jthread> pool;
    std::mutex error_mutex;
    std::exception_ptr error;
    for (int w = 0; w < threads; ++w) {
        pool.emplace_back([&, w] {
            try {
                for (int i = w; i < count; i += threads) fn(i);
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!error) error = std::current_exception();
            }
        });
    }
    pool.clear();
    if (error) std::rethrow_exception(error);
}

}  // namespace

void SolverConfig::validate() const {
    if (grid_size < 2 || !(grid_lo > 0.0) || !(grid_hi > grid_lo) || !(coarse_step > 0.0) ||
        !(truncation_sd > 0.0) || !(tie_tolerance >= 0.0) || threads < 1) {
        throw InputError("SolverConfig: grid, steps, truncation and threads must be positive");
    }
    for (double s : refine_steps) {
        if (!(s > 0.0)) throw InputError("SolverConfig: refinement steps must be positive");
    }
}

double stage_value(double x, const Eigen::VectorXd& u, const ValueFunction& next, const Interval& next_target,
                   const MixtureModel& mm, double truncation_sd) {
    if (!(x > 0.0)) throw InputError("stage_value: portfolio value must be positive");
    const Integrand f(next, next_target);
    const UnivariateMixture um = project(mm, u);
    double v = 0.0;
    for (std::size_t i = 0; i < um.weights.size(); ++i) {
        if (um.weights[i] == 0.0) continue;
        v += um.weights[i] * integrate_component_direct(f, x, um.means[i], um.sds[i], truncation_sd);
    }
    return checked_value(v, next.stage - 1, x);
}

NodeOptimum optimize_stage_node(double x, const ValueFunction& next, const Interval& next_target,
                                const ConstraintSet& cs, const MixtureModel& mm, const SolverConfig& cfg) {
    cfg.validate();
    const AllocationLattice lat(cs, mm.covariance(), lattice_resolution(cfg));
    const auto coarse = coarse_points(lat, cfg);
    const Integrand f(next, next_target);
    auto value = [&](const LatticeKey& key) {
        const UnivariateMixture um = project(mm, lat.weights(key));
        double v = 0.0;
        for (std::size_t i = 0; i < um.weights.size(); ++i) {
            if (um.weights[i] == 0.0) continue;
            v += um.weights[i] * integrate_component_direct(f, x, um.means[i], um.sds[i], cfg.truncation_sd);
        }
        return checked_value(v, next.stage - 1, x);
    };
    const Candidate best = run_search(lat, coarse, cfg, value);
    return {lat.weights(best.key), best.value};
}

SolveResult solve(const TargetSequence& ts, const ConstraintSet& cs, const MixtureModel& mm, double x0,
                  const SolverConfig& cfg) {
    const auto started = std::chrono::steady_clock::now();
    cfg.validate();
    ts.validate(x0);
    if (!(x0 > cfg.grid_lo && x0 < cfg.grid_hi)) {
        throw InputError("solve: the state grid must contain the initial value");
    }

    const int N = ts.horizon();
    const AllocationLattice lat(cs, mm.covariance(), lattice_resolution(cfg));
    const auto coarse = coarse_points(lat, cfg);

    // Outcome of the search when every candidate ties; a node whose reachable
    // integrand is flat to well inside the tie tolerance resolves to this
    // allocation without a search.
    std::vector<LatticeKey> flat_visits;
    const Candidate flat_pick = run_search(lat, coarse, cfg, [](const LatticeKey&) { return 0.0; }, &flat_visits);

    const double drift = cfg.drift ? *cfg.drift : mm.mean().dot(lat.weights(flat_pick.key));
    if (!(drift > -1.0) || !std::isfinite(drift)) throw InputError("solve: grid drift must exceed -1");

    // Shift the base grid by less than half a step so x0 is a node: p_star is
    // then a node value and simulated paths start where the policy was computed.
    // With align_target the step is also stretched so the terminal bound sits on
    // a stage-N node; otherwise a near-riskless allocation straddles the jump of
    // J_N inside one cell and the interpolated values overshoot.
    double h = std::log(cfg.grid_hi / cfg.grid_lo) / (cfg.grid_size - 1);
    if (cfg.align_target) {
        const Interval& goal = ts.at(N);
        const double bound = goal.lower > 0.0 ? goal.lower : goal.upper;
        if (bound > 0.0 && std::isfinite(bound)) {
            const double d = std::abs(std::log(bound / x0) - N * std::log1p(drift));
            const double steps = std::round(d / h);
            if (steps >= 1.0) h = d / steps;
        }
    }
    const double anchor =
        std::clamp(std::round(std::log(x0 / cfg.grid_lo) / h), 1.0, static_cast<double>(cfg.grid_size - 2));
    const double lo = x0 * std::exp(-anchor * h);
    const StateGrid base(lo, lo * std::exp(h * (cfg.grid_size - 1)), cfg.grid_size);
    const int n = base.size();
    std::vector<std::shared_ptr<const StateGrid>> grids(static_cast<std::size_t>(N + 1));
    for (int k = 0; k <= N; ++k) {
        grids[static_cast<std::size_t>(k)] = std::make_shared<const StateGrid>(base.scaled(std::pow(1.0 + drift, k)));
    }
    for (int k = 1; k <= N; ++k) {
        const auto& s = ts.at(k);
        const auto& g = *grids[static_cast<std::size_t>(k)];
        const bool lower_ok = s.lower == 0.0 || (s.lower > g.lo() && s.lower < g.hi());
        const bool upper_ok = s.upper == kInfinity || (s.upper > g.lo() && s.upper < g.hi());
        if (!lower_ok || !upper_ok) {
            std::ostringstream os;
            os << "solve: target X_" << k << " has a finite bound outside the stage grid [" << g.lo() << ", "
               << g.hi() << "]";
            throw InputError(os.str());
        }
    }

    KernelCache cache(lat, mm, base, drift, cfg.truncation_sd);
    std::vector<std::shared_ptr<const AllocationKernel>> coarse_kernels;
    coarse_kernels.reserve(coarse.size());
    for (const auto& key : coarse) coarse_kernels.push_back(cache.get(key));

    long reach_lo = 0;
    long reach_hi = 0;
    for (const auto& key : flat_visits) {
        const auto k = cache.get(key);
        for (const auto& c : k->components) {
            if (c.weight == 0.0) continue;
            long lo = c.o_lo;
            long hi = c.o_hi;
            if (c.point_mass) {
                lo = static_cast<long>(std::floor((std::log1p(c.mean) - std::log1p(drift)) / base.log_step())) - 1;
                hi = lo + 2;
            }
            reach_lo = std::min(reach_lo, lo);
            reach_hi = std::max(reach_hi, hi);
        }
    }
    const auto flat_kernel = cache.get(flat_pick.key);
    const double flat_tolerance = 0.25 * cfg.tie_tolerance;

    SolveResult out;
    out.drift = drift;
    out.policy.grids.assign(grids.begin(), grids.end() - 1);
    out.policy.allocations.assign(static_cast<std::size_t>(N), Eigen::MatrixXd(n, lat.assets()));
    out.values.resize(static_cast<std::size_t>(N + 1));
    out.values[static_cast<std::size_t>(N)] = terminal_values(grids.back(), ts.at(N));
    out.values[static_cast<std::size_t>(N)].stage = N;

    std::vector<long> evaluations(static_cast<std::size_t>(n), 0);
    for (int k = N - 1; k >= 0; --k) {
        const StateGrid& here = *grids[static_cast<std::size_t>(k)];
        const Integrand f(out.values[static_cast<std::size_t>(k + 1)], ts.at(k + 1));
        std::vector<std::shared_ptr<const AllocationKernel>> picks(static_cast<std::size_t>(n));
        std::vector<double> vals(static_cast<std::size_t>(n));

        parallel_for(n, cfg.threads, [&](int j) {
            const auto idx = static_cast<std::size_t>(j);
            double lo = 0.0;
            double hi = 0.0;
            f.range(j + reach_lo, j + reach_hi, lo, hi);
            if (hi - lo <= flat_tolerance) {
                picks[idx] = flat_kernel;
                vals[idx] = kernel_value(f, here, j, *flat_kernel, k);
                evaluations[idx] += 1;
                return;
            }
            std::unordered_map<LatticeKey, std::shared_ptr<const AllocationKernel>, KeyHash> used;
            auto value = [&](const LatticeKey& key) {
                std::shared_ptr<const AllocationKernel> kern;
                const auto it = std::lower_bound(coarse.begin(), coarse.end(), key);
                if (it != coarse.end() && *it == key) kern = coarse_kernels[static_cast<std::size_t>(it - coarse.begin())];
                if (!kern) kern = cache.get(key);
                used.emplace(key, kern);
                evaluations[idx] += 1;
                return kernel_value(f, here, j, *kern, k);
            };
            const Candidate best = run_search(lat, coarse, cfg, value);
            picks[idx] = used.at(best.key);
            vals[idx] = best.value;
        });

        // Left-to-right sweep offering each node its left neighbour's allocation.
        // Every allocation's value is non-decreasing in x when J_{k+1} is, so
        // this keeps J_k monotone; the sweep is sequential and thread-independent.
        for (int j = 1; j < n; ++j) {
            const auto idx = static_cast<std::size_t>(j);
            const auto& left = picks[idx - 1];
            if (left == picks[idx]) continue;
            const double v = kernel_value(f, here, j, *left, k);
            evaluations[idx] += 1;
            const std::vector<Candidate> pair{{picks[idx]->key, vals[idx], picks[idx]->variance},
                                              {left->key, v, left->variance}};
            if (select_candidate(pair, cfg.tie_tolerance) == 1) {
                picks[idx] = left;
                vals[idx] = v;
            }
        }

        auto& alloc = out.policy.allocations[static_cast<std::size_t>(k)];
        ValueFunction& vf = out.values[static_cast<std::size_t>(k)];
        vf.stage = k;
        vf.grid = grids[static_cast<std::size_t>(k)];
        vf.values = vals;
        for (int j = 0; j < n; ++j) alloc.row(j) = picks[static_cast<std::size_t>(j)]->allocation.transpose();
    }

    out.p_star = out.values.front().values[static_cast<std::size_t>(anchor)];
    for (long e : evaluations) out.evaluations += e;
    out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    return out;
}

PolicyQuery query_policy(const PolicyMap& pm, int stage, double x) {
    if (stage < 0 || stage >= pm.horizon()) {
        throw InputError("query_policy: stage outside [0, N)");
    }
    const StateGrid& g = *pm.grids[static_cast<std::size_t>(stage)];
    PolicyQuery q;
    q.clamped = x < g.lo() || x > g.hi();
    q.node = g.nearest(x);
    q.allocation = pm.allocations[static_cast<std::size_t>(stage)].row(q.node).transpose();
    return q;
}

double var_to_sigma_max(double var_level, double horizon_months, double confidence_multiplier) {
    if (var_level < 0.0 || !(horizon_months > 0.0) || !(confidence_multiplier > 0.0)) {
        throw InputError("var_to_sigma_max: arguments must be positive");
    }
    return var_level * std::sqrt(12.0 / horizon_months) / confidence_multiplier;
}

double per_period_sigma(double annual_sigma, int periods_per_year) {
    if (periods_per_year < 1) throw InputError("per_period_sigma: periods_per_year must be positive");
    return annual_sigma / std::sqrt(static_cast<double>(periods_per_year));
}

}  // namespace odaa
