#include "odaa/serialization.hpp"

#include "odaa/errors.hpp"

#include <json.hpp>

#include <fstream>
#include <sstream>

namespace odaa {

using nlohmann::json;

namespace {

json vec_json(const Eigen::VectorXd& v) {
    json a = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        if (std::isnan(v(i))) {
            a.push_back(nullptr);
        } else {
            a.push_back(v(i));
        }
    }
    return a;
}

json mat_json(const Eigen::MatrixXd& m) {
    json a = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) a.push_back(vec_json(m.row(i).transpose()));
    return a;
}

Eigen::VectorXd json_vec(const json& j, const char* what) {
    if (!j.is_array()) throw InputError(std::string(what) + " must be an array");
    Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) {
        if (j[i].is_null()) {
            v(static_cast<Eigen::Index>(i)) = kMissing;
        } else if (j[i].is_number()) {
            v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
        } else {
            throw InputError(std::string(what) + " must contain numbers");
        }
    }
    return v;
}

Eigen::MatrixXd json_mat(const json& j, Eigen::Index n, const char* what) {
    if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != n) {
        throw InputError(std::string(what) + " must be a " + std::to_string(n) + "x" + std::to_string(n) + " array");
    }
    Eigen::MatrixXd m(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const Eigen::VectorXd row = json_vec(j[static_cast<std::size_t>(i)], what);
        if (row.size() != n) throw InputError(std::string(what) + " rows must have " + std::to_string(n) + " entries");
        m.row(i) = row.transpose();
    }
    return m;
}

json parse(const std::string& text) {
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw InputError(std::string("invalid JSON: ") + e.what());
    }
}

}  // namespace

std::string mixture_to_json(const MixtureModel& mm, int periods_per_year) {
    json j;
    j["labels"] = mm.labels();
    j["periods_per_year"] = periods_per_year;
    j["weights"] = mm.weights();
    json comps = json::array();
    for (const auto& c : mm.components()) comps.push_back({{"mean", vec_json(c.mean)}, {"cov", mat_json(c.cov)}});
    j["components"] = comps;
    return j.dump(2) + "\n";
}

MixtureModel mixture_from_json(const std::string& text) {
    const json j = parse(text);
    try {
        const auto weights = j.at("weights").get<std::vector<double>>();
        const json& comps = j.at("components");
        if (!comps.is_array() || comps.size() != weights.size()) {
            throw InputError("mixture: need one component per weight");
        }
        std::vector<GaussianComponent> components;
        for (const auto& c : comps) {
            GaussianComponent g;
            g.mean = json_vec(c.at("mean"), "mean");
            const Eigen::Index m = g.mean.size();
            if (c.contains("cov")) {
                g.cov = json_mat(c["cov"], m, "cov");
            } else {
                const Eigen::VectorXd sd = json_vec(c.at("sd"), "sd");
                if (sd.size() != m) throw InputError("mixture: sd and mean lengths differ");
                const json& corr_j = c.contains("corr") ? c["corr"] : j.at("corr");
                const Eigen::MatrixXd corr = json_mat(corr_j, m, "corr");
                g.cov = sd.asDiagonal() * corr * sd.asDiagonal();
            }
            components.push_back(std::move(g));
        }
        std::vector<std::string> labels;
        if (j.contains("labels")) labels = j["labels"].get<std::vector<std::string>>();
        return MixtureModel(weights, std::move(components), std::move(labels));
    } catch (const json::exception& e) {
        throw InputError(std::string("mixture JSON: ") + e.what());
    }
}

MixtureModel load_mixture(const std::filesystem::path& path) {
    try {
        return mixture_from_json(read_text(path));
    } catch (const InputError& e) {
        throw InputError(path.string() + ": " + e.what());
    }
}

void save_mixture(const std::filesystem::path& path, const MixtureModel& mm, int periods_per_year) {
    write_text(path, mixture_to_json(mm, periods_per_year));
}

std::string moments_to_json(const MomentSummary& ms) {
    json j;
    j["labels"] = ms.labels;
    j["periods_per_year"] = ms.periods_per_year;
    j["scale"] = ms.scale == MomentScale::kAnnual ? "annual" : "per_period";
    j["er"] = vec_json(ms.er);
    j["sd"] = vec_json(ms.sd);
    j["sk"] = vec_json(ms.sk);
    j["ku"] = vec_json(ms.ku);
    j["corr"] = mat_json(ms.corr);
    j["cov"] = mat_json(ms.cov);
    return j.dump(2) + "\n";
}

MomentSummary moments_from_json(const std::string& text) {
    const json j = parse(text);
    try {
        MomentSummary ms;
        ms.er = json_vec(j.at("er"), "er");
        const Eigen::Index m = ms.er.size();
        ms.sk = json_vec(j.at("sk"), "sk");
        ms.ku = json_vec(j.at("ku"), "ku");
        if (ms.sk.size() != m || ms.ku.size() != m) throw InputError("moments: er, sk and ku lengths differ");
        ms.corr = j.contains("corr") ? json_mat(j["corr"], m, "corr") : Eigen::MatrixXd::Identity(m, m);
        if (j.contains("sd")) {
            ms.sd = json_vec(j["sd"], "sd");
            if (ms.sd.size() != m) throw InputError("moments: sd length differs");
            ms.cov = j.contains("cov") ? json_mat(j["cov"], m, "cov")
                                       : Eigen::MatrixXd(ms.sd.asDiagonal() * ms.corr * ms.sd.asDiagonal());
        } else {
            ms.cov = json_mat(j.at("cov"), m, "cov");
            ms.sd = ms.cov.diagonal().cwiseMax(0.0).cwiseSqrt();
        }
        ms.periods_per_year = j.value("periods_per_year", 52);
        const std::string scale = j.value("scale", "per_period");
        if (scale == "annual") {
            ms.scale = MomentScale::kAnnual;
        } else if (scale == "per_period") {
            ms.scale = MomentScale::kPerPeriod;
        } else {
            throw InputError("moments: scale must be 'annual' or 'per_period'");
        }
        if (j.contains("labels")) {
            ms.labels = j["labels"].get<std::vector<std::string>>();
        } else {
            for (Eigen::Index i = 0; i < m; ++i) ms.labels.push_back("A" + std::to_string(i + 1));
        }
        if (static_cast<Eigen::Index>(ms.labels.size()) != m) throw InputError("moments: label count differs");
        return ms;
    } catch (const json::exception& e) {
        throw InputError(std::string("moments JSON: ") + e.what());
    }
}

MomentSummary load_moments(const std::filesystem::path& path) {
    try {
        return moments_from_json(read_text(path));
    } catch (const InputError& e) {
        throw InputError(path.string() + ": " + e.what());
    }
}

std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open " + path.string());
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot write " + path.string());
    out << text;
    if (!out) throw InputError("failed writing " + path.string());
}

}  // namespace odaa
