#include "odaa/config.hpp"

#include "odaa/errors.hpp"
#include "odaa/serialization.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>

namespace odaa {

using nlohmann::json;

namespace {

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
    const std::filesystem::path path(p);
    if (path.is_absolute()) return path;
    return std::filesystem::absolute(base / path).lexically_normal();
}

double bound_from(const json& j) {
    if (j.is_null()) return kInfinity;
    if (j.is_string() && (j == "inf" || j == "infinity")) return kInfinity;
    return j.get<double>();
}

json bound_to(double v) { return std::isinf(v) ? json(nullptr) : json(v); }

std::string mode_name(StaticMode m) { return m == StaticMode::kBuyAndHold ? "buy_and_hold" : "constant_mix"; }

StaticMode mode_from(const std::string& s) {
    if (s == "constant_mix") return StaticMode::kConstantMix;
    if (s == "buy_and_hold") return StaticMode::kBuyAndHold;
    throw InputError("mode must be 'constant_mix' or 'buy_and_hold'");
}

template <class T>
void read(const json& j, const char* key, T& out) {
    if (j.contains(key) && !j[key].is_null()) out = j[key].get<T>();
}

}  // namespace

TargetSequence RunConfig::target_sequence() const {
    if (horizon < 1) throw InputError("config: horizon must be at least 1");
    std::vector<int> hits(static_cast<std::size_t>(horizon + 1), 0);
    TargetSequence ts;
    ts.sets.assign(static_cast<std::size_t>(horizon + 1), Interval{});
    ts.sets[0] = {x0, x0};
    for (const auto& t : targets) {
        if (t.first < 1 || t.last > horizon || t.first > t.last) {
            throw InputError("config: target stage range [" + std::to_string(t.first) + ", " +
                             std::to_string(t.last) + "] outside 1.." + std::to_string(horizon));
        }
        if (!(t.lower >= 0.0) || !(t.upper >= t.lower)) {
            throw InputError("config: target bounds need 0 <= lower <= upper");
        }
        for (int k = t.first; k <= t.last; ++k) {
            ++hits[static_cast<std::size_t>(k)];
            ts.sets[static_cast<std::size_t>(k)] = {t.lower, t.upper};
        }
    }
    for (int k = 1; k <= horizon; ++k) {
        if (hits[static_cast<std::size_t>(k)] != 1) {
            throw InputError("config: stage " + std::to_string(k) +
                             (hits[static_cast<std::size_t>(k)] == 0 ? " has no target set" : " has overlapping target sets"));
        }
    }
    return ts;
}

std::optional<double> RunConfig::sigma_max_annual() const {
    if (risk.var) return var_to_sigma_max(risk.var->level, risk.var->horizon_months, risk.var->multiplier);
    return risk.sigma_max_annual;
}

ConstraintSet RunConfig::constraints() const {
    ConstraintSet cs;
    cs.budget = risk.budget;
    cs.long_only = risk.long_only;
    cs.lower_bounds = risk.lower_bounds;
    cs.upper_bounds = risk.upper_bounds;
    cs.risk_tolerance = risk.risk_tolerance;
    if (const auto s = sigma_max_annual()) cs.sigma_max = per_period_sigma(*s, periods_per_year);
    return cs;
}

std::string RunConfig::to_json() const {
    json j;
    json data;
    if (prices) data["prices"] = prices->string();
    if (returns) data["returns"] = returns->string();
    data["periods_per_year"] = periods_per_year;
    j["data"] = data;
    if (model) j["model"] = model->string();
    if (moments) j["moments"] = moments->string();
    j["horizon"] = horizon;
    j["x0"] = x0;
    json ts = json::array();
    for (const auto& t : targets) {
        ts.push_back({{"stages", {t.first, t.last}}, {"lower", t.lower}, {"upper", bound_to(t.upper)}});
    }
    j["targets"] = ts;
    json r;
    r["budget"] = risk.budget;
    r["long_only"] = risk.long_only;
    if (risk.var) {
        r["var"] = {{"level", risk.var->level},
                    {"horizon_months", risk.var->horizon_months},
                    {"multiplier", risk.var->multiplier}};
    }
    if (risk.sigma_max_annual) r["sigma_max_annual"] = *risk.sigma_max_annual;
    if (!risk.lower_bounds.empty()) r["lower_bounds"] = risk.lower_bounds;
    if (!risk.upper_bounds.empty()) r["upper_bounds"] = risk.upper_bounds;
    r["risk_tolerance"] = risk.risk_tolerance;
    j["constraints"] = r;
    json s;
    s["grid_size"] = solver.grid_size;
    s["grid_lo"] = solver.grid_lo;
    s["grid_hi"] = solver.grid_hi;
    s["coarse_step"] = solver.coarse_step;
    s["refine_steps"] = solver.refine_steps;
    s["truncation_sd"] = solver.truncation_sd;
    s["tie_tolerance"] = solver.tie_tolerance;
    if (solver.drift) s["drift"] = *solver.drift;
    s["align_target"] = solver.align_target;
    j["solver"] = s;
    json mc;
    mc["n_paths"] = monte_carlo.n_paths;
    mc["seed"] = monte_carlo.seed;
    mc["histogram_bins"] = monte_carlo.histogram_bins;
    if (monte_carlo.histogram_range) {
        mc["histogram_range"] = {monte_carlo.histogram_range->first, monte_carlo.histogram_range->second};
    }
    j["monte_carlo"] = mc;
    j["fit"] = {{"k_components", fit.k_components}, {"max_iterations", fit.max_iterations},
                {"tolerance", fit.tolerance},       {"require_unimodal", fit.require_unimodal},
                {"seed", fit.seed},                 {"restarts", fit.restarts}};
    j["frontier"] = {{"n_points", frontier.n_points}, {"mode", mode_name(frontier.mode)},
                     {"annualize", frontier.annualize}};
    json sim;
    sim["policy"] = simulate.dynamic ? "optimal" : "static";
    if (!simulate.allocation.empty()) sim["allocation"] = simulate.allocation;
    sim["mode"] = mode_name(simulate.mode);
    j["simulate"] = sim;
    j["analysis"] = {{"confidence_level", confidence_level}};
    j["output"] = output.string();
    j["threads"] = threads;
    return j.dump(2) + "\n";
}

RunConfig config_from_json(const std::string& text, const std::filesystem::path& base_dir) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw InputError(std::string("config: invalid JSON: ") + e.what());
    }
    RunConfig c;
    try {
        if (j.contains("data")) {
            const json& d = j["data"];
            if (d.contains("prices")) c.prices = resolve(base_dir, d["prices"].get<std::string>());
            if (d.contains("returns")) c.returns = resolve(base_dir, d["returns"].get<std::string>());
            read(d, "periods_per_year", c.periods_per_year);
        }
        if (j.contains("model")) c.model = resolve(base_dir, j["model"].get<std::string>());
        if (j.contains("moments")) c.moments = resolve(base_dir, j["moments"].get<std::string>());
        read(j, "horizon", c.horizon);
        read(j, "x0", c.x0);
        if (j.contains("targets")) {
            for (const auto& t : j["targets"]) {
                TargetSpec s;
                const auto stages = t.at("stages").get<std::vector<int>>();
                if (stages.empty() || stages.size() > 2) throw InputError("config: stages must be [k] or [first, last]");
                s.first = stages.front();
                s.last = stages.back();
                if (t.contains("lower")) s.lower = t["lower"].get<double>();
                if (t.contains("upper")) s.upper = bound_from(t["upper"]);
                c.targets.push_back(s);
            }
        }
        if (j.contains("constraints")) {
            const json& r = j["constraints"];
            read(r, "budget", c.risk.budget);
            read(r, "long_only", c.risk.long_only);
            if (r.contains("var") && !r["var"].is_null()) {
                VarBudget v;
                read(r["var"], "level", v.level);
                read(r["var"], "horizon_months", v.horizon_months);
                read(r["var"], "multiplier", v.multiplier);
                c.risk.var = v;
            }
            if (r.contains("sigma_max_annual") && !r["sigma_max_annual"].is_null()) {
                c.risk.sigma_max_annual = r["sigma_max_annual"].get<double>();
            }
            read(r, "lower_bounds", c.risk.lower_bounds);
            read(r, "upper_bounds", c.risk.upper_bounds);
            read(r, "risk_tolerance", c.risk.risk_tolerance);
        }
        if (j.contains("solver")) {
            const json& s = j["solver"];
            read(s, "grid_size", c.solver.grid_size);
            read(s, "grid_lo", c.solver.grid_lo);
            read(s, "grid_hi", c.solver.grid_hi);
            read(s, "coarse_step", c.solver.coarse_step);
            read(s, "refine_steps", c.solver.refine_steps);
            read(s, "truncation_sd", c.solver.truncation_sd);
            read(s, "tie_tolerance", c.solver.tie_tolerance);
            if (s.contains("drift") && !s["drift"].is_null()) c.solver.drift = s["drift"].get<double>();
            read(s, "align_target", c.solver.align_target);
        }
        if (j.contains("monte_carlo")) {
            const json& m = j["monte_carlo"];
            read(m, "n_paths", c.monte_carlo.n_paths);
            read(m, "seed", c.monte_carlo.seed);
            read(m, "histogram_bins", c.monte_carlo.histogram_bins);
            if (m.contains("histogram_range") && !m["histogram_range"].is_null()) {
                const auto r = m["histogram_range"].get<std::vector<double>>();
                if (r.size() != 2) throw InputError("config: histogram_range must be [lo, hi]");
                c.monte_carlo.histogram_range = std::make_pair(r[0], r[1]);
            }
        }
        if (j.contains("fit")) {
            const json& f = j["fit"];
            read(f, "k_components", c.fit.k_components);
            read(f, "max_iterations", c.fit.max_iterations);
            read(f, "tolerance", c.fit.tolerance);
            read(f, "require_unimodal", c.fit.require_unimodal);
            read(f, "seed", c.fit.seed);
            read(f, "restarts", c.fit.restarts);
        }
        if (j.contains("frontier")) {
            const json& f = j["frontier"];
            read(f, "n_points", c.frontier.n_points);
            if (f.contains("mode")) c.frontier.mode = mode_from(f["mode"].get<std::string>());
            read(f, "annualize", c.frontier.annualize);
        }
        if (j.contains("simulate")) {
            const json& s = j["simulate"];
            if (s.contains("policy")) {
                const auto p = s["policy"].get<std::string>();
                if (p != "optimal" && p != "static") throw InputError("config: simulate.policy must be 'optimal' or 'static'");
                c.simulate.dynamic = p == "optimal";
            }
            read(s, "allocation", c.simulate.allocation);
            if (s.contains("mode")) c.simulate.mode = mode_from(s["mode"].get<std::string>());
        }
        if (j.contains("analysis")) read(j["analysis"], "confidence_level", c.confidence_level);
        if (j.contains("output")) c.output = resolve(base_dir, j["output"].get<std::string>());
        read(j, "threads", c.threads);
    } catch (const json::exception& e) {
        throw InputError(std::string("config: ") + e.what());
    }
    if (c.threads < 1) throw InputError("config: threads must be positive");
    if (c.periods_per_year < 1) throw InputError("config: periods_per_year must be positive");
    for (const auto* p : {&c.prices, &c.returns, &c.model, &c.moments}) {
        if (*p && !std::filesystem::exists(**p)) throw InputError("config: file not found: " + (*p)->string());
    }
    return c;
}

RunConfig load_config(const std::filesystem::path& path) {
    RunConfig c = config_from_json(read_text(path), path.parent_path());
    c.source = path;
    return c;
}

}  // namespace odaa
