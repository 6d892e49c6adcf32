#include "odaa/commands.hpp"

#include "odaa/csv.hpp"
#include "odaa/econometrics.hpp"
#include "odaa/markowitz.hpp"
#include "odaa/mixture_model.hpp"
#include "odaa/serialization.hpp"
#include "odaa/simulation.hpp"

#include <json.hpp>

#include <chrono>
#include <cmath>
#include <ctime>
#include <iomanip>
#include <ostream>
#include <sstream>

namespace odaa {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string stage_file(int k) {
    std::ostringstream os;
    os << "stage_" << std::setw(3) << std::setfill('0') << k << ".csv";
    return os.str();
}

std::string timestamp() {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

ReturnSeries load_returns(const RunConfig& cfg) {
    if (cfg.returns) return read_returns_csv(*cfg.returns, cfg.periods_per_year);
    if (cfg.prices) return compute_returns(read_prices_csv(*cfg.prices, cfg.periods_per_year));
    throw InputError("config: data.prices or data.returns is required");
}

MixtureModel load_model(const RunConfig& cfg) {
    if (!cfg.model) throw InputError("config: 'model' (mixture fixture) is required");
    return load_mixture(*cfg.model);
}

std::vector<std::string> labels_of(const MixtureModel& mm) {
    if (!mm.labels().empty()) return mm.labels();
    std::vector<std::string> out;
    for (Eigen::Index j = 0; j < mm.dim(); ++j) out.push_back("A" + std::to_string(j + 1));
    return out;
}

json allocation_json(const Eigen::VectorXd& u, const std::vector<std::string>& labels) {
    json j = json::object();
    for (Eigen::Index i = 0; i < u.size(); ++i) j[labels[static_cast<std::size_t>(i)]] = u(i);
    return j;
}

json load_json(const fs::path& path, const char* producer) {
    if (!fs::exists(path)) {
        throw InputError("missing artifact " + path.string() + " (run '" + producer + "' first)");
    }
    try {
        return json::parse(read_text(path));
    } catch (const json::exception& e) {
        throw InputError(path.string() + ": " + e.what());
    }
}

double pct(double p) { return 100.0 * p; }

}  // namespace

void cmd_analyze(const RunConfig& cfg, std::ostream& log) {
    const ReturnSeries rs = load_returns(cfg);
    const MomentSummary ms = compute_moments(rs);
    const MomentSummary ann = annualize(ms);
    const long n = static_cast<long>(rs.observations());

    CsvWriter mw(cfg.output / "moments.csv");
    mw.cell("asset").cell("er").cell("sd").cell("sk").cell("ku").cell("er_annual").cell("sd_annual");
    mw.cell("jarque_bera").cell("jb_p_value");
    mw.end_row();
    CsvWriter rw(cfg.output / "regions.csv");
    rw.cell("asset").cell("region").cell("lambda_sk").cell("lambda_ku").cell("cl").cell("n");
    rw.end_row();
    log << "asset        ER(ann)%   SD(ann)%       SK       KU   region\n";
    for (Eigen::Index j = 0; j < ms.assets(); ++j) {
        const auto& label = ms.labels[static_cast<std::size_t>(j)];
        const double jb = is_missing(ms.sk(j)) ? kMissing : jarque_bera(ms.sk(j), ms.ku(j), n);
        const RegionClassification rc = classify_region(ms.sk(j), ms.ku(j), cfg.confidence_level, n);
        mw.cell(label).cell(ms.er(j)).cell(ms.sd(j)).cell(ms.sk(j)).cell(ms.ku(j)).cell(ann.er(j)).cell(ann.sd(j));
        mw.cell(jb).cell(is_missing(jb) ? kMissing : jarque_bera_p_value(jb));
        mw.end_row();
        rw.cell(label).cell(rc.region).cell(rc.lambda_sk).cell(rc.lambda_ku).cell(rc.cl).cell(rc.n);
        rw.end_row();
        log << std::left << std::setw(10) << label << std::right << std::fixed << std::setprecision(2)
            << std::setw(11) << pct(ann.er(j)) << std::setw(11) << pct(ann.sd(j)) << std::setw(9) << ms.sk(j)
            << std::setw(9) << ms.ku(j) << std::setw(9) << rc.region << "\n";
    }
    log.unsetf(std::ios::floatfield);
    mw.close();
    rw.close();

    CsvWriter cw(cfg.output / "correlation.csv");
    cw.cell("asset");
    for (const auto& l : ms.labels) cw.cell(l);
    cw.end_row();
    for (Eigen::Index i = 0; i < ms.assets(); ++i) {
        cw.cell(ms.labels[static_cast<std::size_t>(i)]);
        for (Eigen::Index j = 0; j < ms.assets(); ++j) cw.cell(ms.corr(i, j));
        cw.end_row();
    }
    cw.close();
    write_text(cfg.output / "moments.json", moments_to_json(ms));
    log << "observations: " << n << "\n";
}

void cmd_fit(const RunConfig& cfg, std::ostream& log) {
    MomentSummary target;
    if (cfg.moments) {
        target = load_moments(*cfg.moments);
        if (target.scale == MomentScale::kAnnual) target = deannualize(target);
    } else {
        target = compute_moments(load_returns(cfg));
    }
    const FitResult fr = fit_moment_matching(target, cfg.fit);
    save_mixture(cfg.output / "model.json", fr.model, target.periods_per_year);
    json j;
    j["fit_error"] = fr.fit_error;
    j["unimodal"] = fr.unimodal;
    j["k_components"] = cfg.fit.k_components;
    j["target"] = json::parse(moments_to_json(target));
    j["fitted"] = json::parse(moments_to_json(mixture_moments(fr.model, target.periods_per_year)));
    write_text(cfg.output / "fit.json", j.dump(2) + "\n");
    log << "fit_error " << std::setprecision(6) << fr.fit_error << (fr.unimodal ? "" : " (not unimodal)") << "\n";
}

void cmd_solve(const RunConfig& cfg, std::ostream& log) {
    const auto started = std::chrono::steady_clock::now();
    const MixtureModel mm = load_model(cfg);
    const auto labels = labels_of(mm);
    const TargetSequence ts = cfg.target_sequence();
    const ConstraintSet cs = cfg.constraints();
    SolverConfig sc = cfg.solver;
    sc.threads = cfg.threads;
    const SolveResult r = solve(ts, cs, mm, cfg.x0, sc);

    for (int k = 0; k < r.policy.horizon(); ++k) {
        const StateGrid& g = *r.policy.grids[static_cast<std::size_t>(k)];
        const auto& vals = r.values[static_cast<std::size_t>(k)].values;
        const auto& alloc = r.policy.allocations[static_cast<std::size_t>(k)];
        CsvWriter w(cfg.output / "policy" / stage_file(k));
        w.cell("x");
        for (const auto& l : labels) w.cell(l);
        w.cell("J");
        w.end_row();
        for (int i = 0; i < g.size(); ++i) {
            w.cell(g.node(i));
            for (Eigen::Index a = 0; a < alloc.cols(); ++a) w.cell(alloc(i, a));
            w.cell(vals[static_cast<std::size_t>(i)]);
            w.end_row();
        }
        w.close();
    }
    for (const auto& vf : r.values) {
        CsvWriter w(cfg.output / "values" / stage_file(vf.stage));
        w.cell("x").cell("J");
        w.end_row();
        for (int i = 0; i < vf.grid->size(); ++i) {
            w.cell(vf.grid->node(i)).cell(vf.values[static_cast<std::size_t>(i)]);
            w.end_row();
        }
        w.close();
    }

    const PolicyQuery q0 = query_policy(r.policy, 0, cfg.x0);
    json s;
    s["run"] = {{"timestamp", timestamp()},
                {"wall_seconds", std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count()},
                {"solver_seconds", r.seconds}};
    s["p_star"] = r.p_star;
    s["x0"] = cfg.x0;
    s["horizon"] = ts.horizon();
    s["grid_drift"] = r.drift;
    s["stage_value_evaluations"] = r.evaluations;
    s["stage0_allocation"] = allocation_json(q0.allocation, labels);
    if (const auto sa = cfg.sigma_max_annual()) {
        s["sigma_max_annual"] = *sa;
        s["sigma_max_per_period"] = *cs.sigma_max;
    }
    s["config"] = json::parse(cfg.to_json());
    write_text(cfg.output / "summary.json", s.dump(2) + "\n");

    log << "p_star " << std::setprecision(6) << r.p_star << "\nstage-0 allocation at x0:";
    for (Eigen::Index i = 0; i < q0.allocation.size(); ++i) {
        log << " " << labels[static_cast<std::size_t>(i)] << "=" << std::setprecision(4) << q0.allocation(i);
    }
    log << "\nsolver time " << std::setprecision(3) << r.seconds << " s\n";
}

PolicyMap load_policy(const fs::path& dir, int horizon, Eigen::Index assets) {
    PolicyMap pm;
    for (int k = 0; k < horizon; ++k) {
        const fs::path path = dir / stage_file(k);
        if (!fs::exists(path)) throw InputError("missing artifact " + path.string() + " (run 'solve' first)");
        const CsvTable t = read_numeric_csv(path);
        if (static_cast<Eigen::Index>(t.header.size()) != assets + 2) {
            throw InputError(path.string() + ": expected x, one column per asset, and J");
        }
        const auto n = static_cast<int>(t.rows.size());
        if (n < 2) throw InputError(path.string() + ": need at least two grid nodes");
        auto grid = std::make_shared<const StateGrid>(t.rows.front()[0], t.rows.back()[0], n);
        Eigen::MatrixXd alloc(n, assets);
        for (int i = 0; i < n; ++i) {
            const auto& row = t.rows[static_cast<std::size_t>(i)];
            if (std::abs(row[0] / grid->node(i) - 1.0) > 1e-9) {
                throw InputError(path.string() + ": grid nodes are not log-uniform");
            }
            for (Eigen::Index a = 0; a < assets; ++a) alloc(i, a) = row[static_cast<std::size_t>(a + 1)];
        }
        pm.grids.push_back(std::move(grid));
        pm.allocations.push_back(std::move(alloc));
    }
    return pm;
}

void cmd_simulate(const RunConfig& cfg, std::ostream& log) {
    const MixtureModel mm = load_model(cfg);
    const auto labels = labels_of(mm);
    const TargetSequence ts = cfg.target_sequence();
    SimulationConfig sc = cfg.monte_carlo;
    sc.threads = cfg.threads;
    SimulationResult r;
    json j;
    if (cfg.simulate.dynamic) {
        const PolicyMap pm = load_policy(cfg.output / "policy", ts.horizon(), mm.dim());
        r = simulate(pm, mm, ts, cfg.x0, sc);
        j["policy"] = "optimal";
    } else {
        const auto& a = cfg.simulate.allocation;
        if (static_cast<Eigen::Index>(a.size()) != mm.dim()) {
            throw InputError("config: simulate.allocation needs one weight per asset");
        }
        const Eigen::VectorXd u = Eigen::Map<const Eigen::VectorXd>(a.data(), static_cast<Eigen::Index>(a.size()));
        r = simulate(u, mm, ts, cfg.x0, sc, cfg.simulate.mode);
        j["policy"] = "static";
        j["allocation"] = allocation_json(u, labels);
        j["mode"] = cfg.simulate.mode == StaticMode::kBuyAndHold ? "buy_and_hold" : "constant_mix";
    }
    const auto [lo, hi] = r.interval();
    j["n_paths"] = r.n_paths;
    j["seed"] = sc.seed;
    j["success_count"] = r.success_count;
    j["probability"] = r.probability;
    j["standard_error"] = r.standard_error;
    j["ci95"] = {lo, hi};
    write_text(cfg.output / "simulation.json", j.dump(2) + "\n");

    CsvWriter w(cfg.output / "histogram.csv");
    w.cell("lower").cell("upper").cell("count");
    w.end_row();
    for (std::size_t b = 0; b < r.histogram.counts.size(); ++b) {
        w.cell(r.histogram.edges[b]).cell(r.histogram.edges[b + 1]).cell(r.histogram.counts[b]);
        w.end_row();
    }
    w.close();
    log << "probability " << std::fixed << std::setprecision(4) << r.probability << " (95% CI [" << lo << ", " << hi
        << "]) over " << r.n_paths << " paths\n";
    log.unsetf(std::ios::floatfield);
}

void cmd_frontier(const RunConfig& cfg, std::ostream& log) {
    const MixtureModel mm = load_model(cfg);
    const auto labels = labels_of(mm);
    const TargetSequence ts = cfg.target_sequence();
    MomentSummary ms = mixture_moments(mm, cfg.periods_per_year);
    ConstraintSet cs = cfg.constraints();
    if (cfg.frontier.annualize) {
        ms = annualize(ms);
        if (const auto sa = cfg.sigma_max_annual()) cs.sigma_max = *sa;
    }
    const auto frontier = efficient_frontier(ms.er, ms.cov, cs, cfg.frontier.n_points);
    SimulationConfig sc = cfg.monte_carlo;
    sc.threads = cfg.threads;
    const SelectionResult sel = select_max_success(frontier, mm, ts, cfg.x0, sc, cfg.frontier.mode);

    CsvWriter w(cfg.output / "frontier.csv");
    w.cell("target_return").cell("variance").cell("sd");
    for (const auto& l : labels) w.cell(l);
    w.cell("probability");
    w.end_row();
    for (std::size_t i = 0; i < frontier.size(); ++i) {
        const auto& p = frontier[i];
        w.cell(p.target_return).cell(p.variance).cell(std::sqrt(p.variance));
        for (Eigen::Index a = 0; a < p.allocation.size(); ++a) w.cell(p.allocation(a));
        w.cell(sel.probabilities[i]);
        w.end_row();
    }
    w.close();

    json j;
    j["index"] = sel.index;
    j["target_return"] = frontier[sel.index].target_return;
    j["allocation"] = allocation_json(sel.allocation, labels);
    j["probability"] = sel.probability;
    j["standard_error"] = sel.standard_error;
    j["mode"] = cfg.frontier.mode == StaticMode::kBuyAndHold ? "buy_and_hold" : "constant_mix";
    j["units"] = cfg.frontier.annualize ? "annual" : "per_period";
    j["n_paths"] = sc.n_paths;
    j["seed"] = sc.seed;
    write_text(cfg.output / "markowitz.json", j.dump(2) + "\n");

    log << "selected frontier point " << sel.index << ":";
    for (Eigen::Index i = 0; i < sel.allocation.size(); ++i) {
        log << " " << labels[static_cast<std::size_t>(i)] << "=" << std::setprecision(4) << sel.allocation(i);
    }
    log << "\nsuccess probability " << std::setprecision(6) << sel.probability << " (se " << sel.standard_error
        << ")\n";
}

void cmd_compare(const RunConfig& cfg, std::ostream& log) {
    const json summary = load_json(cfg.output / "summary.json", "solve");
    const json mk = load_json(cfg.output / "markowitz.json", "frontier");
    const double p_star = summary.at("p_star").get<double>();
    const double p_mk = mk.at("probability").get<double>();
    json j;
    j["odaa_p_star"] = p_star;
    j["markowitz_probability"] = p_mk;
    j["markowitz_standard_error"] = mk.value("standard_error", 0.0);
    j["markowitz_allocation"] = mk.at("allocation");
    j["odaa_stage0_allocation"] = summary.at("stage0_allocation");
    j["differential_pp"] = 100.0 * (p_star - p_mk);
    const fs::path sim = cfg.output / "simulation.json";
    if (fs::exists(sim)) {
        const json s = load_json(sim, "simulate");
        if (s.value("policy", "") == "optimal") j["odaa_monte_carlo"] = s.at("probability");
    }
    write_text(cfg.output / "comparison.json", j.dump(2) + "\n");

    CsvWriter w(cfg.output / "comparison.csv");
    w.cell("method").cell("probability");
    w.end_row();
    w.cell("odaa").cell(p_star);
    w.end_row();
    if (j.contains("odaa_monte_carlo")) {
        w.cell("odaa_monte_carlo").cell(j["odaa_monte_carlo"].get<double>());
        w.end_row();
    }
    w.cell("markowitz").cell(p_mk);
    w.end_row();
    w.close();

    log << std::fixed << std::setprecision(2) << "ODAA p*        " << pct(p_star) << "%\n"
        << "Markowitz      " << pct(p_mk) << "%\n"
        << "differential   " << 100.0 * (p_star - p_mk) << " pp\n";
    log.unsetf(std::ios::floatfield);
}

int exit_code_for_current_exception(std::ostream& err) {
    try {
        throw;
    } catch (const InfeasibleError& e) {
        err << "infeasible: " << e.what() << "\n";
        return static_cast<int>(ExitCode::kInfeasible);
    } catch (const NumericalError& e) {
        err << "numerical failure: " << e.what() << "\n";
        return static_cast<int>(ExitCode::kNumericalFailure);
    } catch (const InputError& e) {
        err << "input error: " << e.what() << "\n";
        return static_cast<int>(ExitCode::kInputError);
    } catch (const fs::filesystem_error& e) {
        err << "input error: " << e.what() << "\n";
        return static_cast<int>(ExitCode::kInputError);
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return static_cast<int>(ExitCode::kNumericalFailure);
    }
}

int run_command(const std::string& name, const RunConfig& cfg, std::ostream& log, std::ostream& err) {
    try {
        if (name == "analyze") {
            cmd_analyze(cfg, log);
        } else if (name == "fit") {
            cmd_fit(cfg, log);
        } else if (name == "solve") {
            cmd_solve(cfg, log);
        } else if (name == "frontier") {
            cmd_frontier(cfg, log);
        } else if (name == "simulate") {
            cmd_simulate(cfg, log);
        } else if (name == "compare") {
            cmd_compare(cfg, log);
        } else {
            throw InputError("unknown command '" + name + "'");
        }
    } catch (...) {
        return exit_code_for_current_exception(err);
    }
    return static_cast<int>(ExitCode::kOk);
}

}  // namespace odaa
