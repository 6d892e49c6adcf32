#include "odaa/simulation.hpp"

#include "odaa/errors.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <mutex>
#include <numeric>
#include <random>
#include <thread>

namespace odaa {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

void check_config(const SimulationConfig& cfg) {
    if (cfg.n_paths < 1) throw InputError("simulate: n_paths must be positive");
    if (cfg.threads < 1) throw InputError("simulate: threads must be positive");
    if (cfg.histogram_bins < 1) throw InputError("simulate: histogram_bins must be positive");
}

// Runs path(i, rng, work, draw) for every path, sharded over threads, and
// assembles the order-independent result.
template <class PathFn>
SimulationResult run_paths(const SimulationConfig& cfg, const TargetSequence& ts, Eigen::Index dim, PathFn&& path) {
    check_config(cfg);
    const long n = cfg.n_paths;
    std::vector<double> terminal(static_cast<std::size_t>(n));
    const int threads = static_cast<int>(std::max<long>(1, std::min<long>(cfg.threads, n)));
    std::vector<long> successes(static_cast<std::size_t>(threads), 0);
    std::exception_ptr error;
    std::mutex error_mutex;

    auto worker = [&](int w) {
        try {
            Eigen::VectorXd draw(dim);
            Eigen::VectorXd work(dim);
            std::vector<double> values(static_cast<std::size_t>(ts.horizon() + 1));
            const long begin = n * w / threads;
            const long end = n * (w + 1) / threads;
            for (long i = begin; i < end; ++i) {
                std::mt19937_64 rng(path_seed(cfg.seed, static_cast<std::uint64_t>(i)));
                path(rng, draw, work, values);
                bool ok = true;
                for (int k = 1; k <= ts.horizon(); ++k) ok = ok && ts.at(k).contains(values[static_cast<std::size_t>(k)]);
                successes[static_cast<std::size_t>(w)] += ok ? 1 : 0;
                terminal[static_cast<std::size_t>(i)] = values.back();
            }
        } catch (...) {
            std::lock_guard lock(error_mutex);
            if (!error) error = std::current_exception();
        }
    };
    if (threads == 1) {
        worker(0);
    } else {
        std::vector<std::jthread> pool;
        for (int w = 0; w < threads; ++w) pool.emplace_back(worker, w);
    }
    if (error) std::rethrow_exception(error);

    SimulationResult r;
    r.n_paths = n;
    for (long s : successes) r.success_count += s;
    r.probability = static_cast<double>(r.success_count) / static_cast<double>(n);
    r.standard_error = std::sqrt(r.probability * (1.0 - r.probability) / static_cast<double>(n));
    double lo = 0.0;
    double hi = 0.0;
    if (cfg.histogram_range) {
        std::tie(lo, hi) = *cfg.histogram_range;
    } else {
        const auto [mn, mx] = std::minmax_element(terminal.begin(), terminal.end());
        lo = *mn;
        hi = *mx > *mn ? *mx : *mn + 1.0;
    }
    r.histogram = histogram(terminal, cfg.histogram_bins, lo, hi);
    return r;
}

void check_dims(Eigen::Index assets, const MixtureModel& mm, double x0, const TargetSequence& ts) {
    if (assets != mm.dim()) throw InputError("simulate: allocation and model dimensions differ");
    ts.validate(x0);
}

}  // namespace

std::pair<double, double> SimulationResult::interval(double z) const {
    return {std::max(0.0, probability - z * standard_error), std::min(1.0, probability + z * standard_error)};
}

std::uint64_t path_seed(std::uint64_t seed, std::uint64_t index) {
    return splitmix64(splitmix64(seed) ^ splitmix64(index + 0x632be59bd9b4e019ULL));
}

namespace {

// Within a component the portfolio return u^T w is Gaussian, so one component
// pick and one standard normal advance a path by a period.
struct ProjectedLaw {
    std::vector<double> cumulative;
    std::vector<double> means;
    std::vector<double> sds;
};

ProjectedLaw projected_law(const MixtureModel& mm, const Eigen::VectorXd& u) {
    const UnivariateMixture um = project(mm, u);
    ProjectedLaw law;
    law.means = um.means;
    law.sds = um.sds;
    law.cumulative.resize(um.weights.size());
    std::partial_sum(um.weights.begin(), um.weights.end(), law.cumulative.begin());
    return law;
}

struct PathDraws {
    std::uniform_real_distribution<double> pick{0.0, 1.0};
    std::normal_distribution<double> normal{0.0, 1.0};
};

template <class Rng>
double draw_return(Rng& rng, PathDraws& d, const std::vector<double>& cumulative, const double* means,
                   const double* sds) {
    const double v = d.pick(rng);
    std::size_t c = 0;
    while (c + 1 < cumulative.size() && v >= cumulative[c]) ++c;
    return means[c] + sds[c] * d.normal(rng);
}

}  // namespace

SimulationResult simulate(const PolicyMap& policy, const MixtureModel& mm, const TargetSequence& ts, double x0,
                          const SimulationConfig& cfg) {
    check_dims(policy.assets(), mm, x0, ts);
    if (policy.horizon() != ts.horizon()) throw InputError("simulate: policy and target horizons differ");
    const std::size_t K = mm.size();
    std::vector<double> cumulative(K);
    std::partial_sum(mm.weights().begin(), mm.weights().end(), cumulative.begin());
    // means/sds per (stage, node, component)
    std::vector<std::vector<double>> means(static_cast<std::size_t>(policy.horizon()));
    std::vector<std::vector<double>> sds(static_cast<std::size_t>(policy.horizon()));
    for (int k = 0; k < policy.horizon(); ++k) {
        const auto& alloc = policy.allocations[static_cast<std::size_t>(k)];
        auto& mk = means[static_cast<std::size_t>(k)];
        auto& sk = sds[static_cast<std::size_t>(k)];
        mk.resize(static_cast<std::size_t>(alloc.rows()) * K);
        sk.resize(mk.size());
        for (Eigen::Index i = 0; i < alloc.rows(); ++i) {
            const UnivariateMixture um = project(mm, alloc.row(i).transpose());
            for (std::size_t c = 0; c < K; ++c) {
                mk[static_cast<std::size_t>(i) * K + c] = um.means[c];
                sk[static_cast<std::size_t>(i) * K + c] = um.sds[c];
            }
        }
    }
    return run_paths(cfg, ts, mm.dim(), [&](std::mt19937_64& rng, Eigen::VectorXd&, Eigen::VectorXd&,
                                            std::vector<double>& xs) {
        PathDraws d;
        double x = x0;
        xs[0] = x;
        for (int k = 0; k < ts.horizon(); ++k) {
            const auto ks = static_cast<std::size_t>(k);
            const auto node = static_cast<std::size_t>(policy.grids[ks]->nearest(x));
            x *= 1.0 + draw_return(rng, d, cumulative, &means[ks][node * K], &sds[ks][node * K]);
            xs[ks + 1] = x;
        }
    });
}

SimulationResult simulate(const Eigen::VectorXd& allocation, const MixtureModel& mm, const TargetSequence& ts,
                          double x0, const SimulationConfig& cfg, StaticMode mode) {
    check_dims(allocation.size(), mm, x0, ts);
    if (mode == StaticMode::kConstantMix) {
        const ProjectedLaw law = projected_law(mm, allocation);
        return run_paths(cfg, ts, mm.dim(), [&](std::mt19937_64& rng, Eigen::VectorXd&, Eigen::VectorXd&,
                                                std::vector<double>& xs) {
            PathDraws d;
            double x = x0;
            xs[0] = x;
            for (int k = 0; k < ts.horizon(); ++k) {
                x *= 1.0 + draw_return(rng, d, law.cumulative, law.means.data(), law.sds.data());
                xs[static_cast<std::size_t>(k + 1)] = x;
            }
        });
    }
    return run_paths(cfg, ts, mm.dim(), [&](std::mt19937_64& rng, Eigen::VectorXd& w, Eigen::VectorXd& work,
                                            std::vector<double>& xs) {
        Eigen::VectorXd holdings = x0 * allocation;
        xs[0] = x0;
        for (int k = 0; k < ts.horizon(); ++k) {
            mm.draw(rng, w, work);
            holdings.array() *= 1.0 + w.array();
            xs[static_cast<std::size_t>(k + 1)] = holdings.sum();
        }
    });
}

ReturnSeries synthetic_three_asset(long n, double rho, std::uint64_t seed) {
    if (n < 1) throw InputError("synthetic_three_asset: n must be positive");
    if (!(rho > 0.0)) throw InputError("synthetic_three_asset: rho must be positive");
    ReturnSeries rs;
    rs.labels = {"GAMMA", "MIRROR", "NORMAL"};
    rs.returns.resize(n, 3);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> uniform(0.0, 1.0);
    std::normal_distribution<double> normal(rho, rho);
    for (long i = 0; i < n; ++i) {
        rs.returns(i, 0) = -rho * std::log1p(-uniform(rng));
        rs.returns(i, 1) = 2.0 * rho + rho * std::log1p(-uniform(rng));
        rs.returns(i, 2) = normal(rng);
    }
    return rs;
}

Histogram histogram(const std::vector<double>& values, int n_bins, double lo, double hi) {
    if (n_bins < 1) throw InputError("histogram: n_bins must be positive");
    if (!(hi > lo)) throw InputError("histogram: range must satisfy lo < hi");
    Histogram h;
    h.edges.resize(static_cast<std::size_t>(n_bins + 1));
    for (int i = 0; i <= n_bins; ++i) h.edges[static_cast<std::size_t>(i)] = lo + (hi - lo) * i / n_bins;
    h.edges.back() = hi;
    h.counts.assign(static_cast<std::size_t>(n_bins), 0);
    for (double v : values) {
        auto it = std::upper_bound(h.edges.begin(), h.edges.end(), v);
        long bin = static_cast<long>(it - h.edges.begin()) - 1;
        bin = std::clamp<long>(bin, 0, n_bins - 1);
        ++h.counts[static_cast<std::size_t>(bin)];
    }
    return h;
}

}  // namespace odaa
