#include "odaa/mixture_model.hpp"

#include "odaa/errors.hpp"
#include "odaa/gaussian.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

namespace odaa {

namespace {

Eigen::MatrixXd psd_factor(const Eigen::MatrixXd& cov) {
    Eigen::LLT<Eigen::MatrixXd> llt(cov);
    if (llt.info() == Eigen::Success) {
        return llt.matrixL();
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
    const Eigen::VectorXd root = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    return es.eigenvectors() * root.asDiagonal();
}

double psd_tolerance(const Eigen::MatrixXd& cov) {
    return 1e-10 * std::max(1.0, cov.diagonal().cwiseAbs().maxCoeff());
}

}  // namespace

MixtureModel::MixtureModel(std::vector<double> weights, std::vector<GaussianComponent> components,
                           std::vector<std::string> labels)
    : weights_(std::move(weights)), components_(std::move(components)), labels_(std::move(labels)) {
    if (weights_.empty() || weights_.size() != components_.size()) {
        throw InputError("MixtureModel: need one weight per component and at least one component");
    }
    dim_ = components_.front().mean.size();
    if (dim_ < 1) throw InputError("MixtureModel: zero-dimensional component");
    if (!labels_.empty() && static_cast<Eigen::Index>(labels_.size()) != dim_) {
        throw InputError("MixtureModel: label count does not match dimension");
    }
    double total = 0.0;
    for (double w : weights_) {
        if (!(w >= 0.0 && w <= 1.0)) throw InputError("MixtureModel: weight outside [0, 1]");
        total += w;
    }
    if (std::abs(total - 1.0) > 1e-12) {
        std::ostringstream os;
        os.precision(17);
        os << "MixtureModel: weights sum to " << total << ", expected 1";
        throw InputError(os.str());
    }
    for (const auto& c : components_) {
        if (c.mean.size() != dim_ || c.cov.rows() != dim_ || c.cov.cols() != dim_) {
            throw InputError("MixtureModel: component dimension mismatch");
        }
        if (!c.mean.allFinite() || !c.cov.allFinite()) {
            throw InputError("MixtureModel: non-finite component parameter");
        }
        if ((c.cov - c.cov.transpose()).cwiseAbs().maxCoeff() > psd_tolerance(c.cov)) {
            throw InputError("MixtureModel: covariance is not symmetric");
        }
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(c.cov, Eigen::EigenvaluesOnly);
        if (es.eigenvalues().minCoeff() < -psd_tolerance(c.cov)) {
            throw InputError("MixtureModel: covariance is not positive semi-definite");
        }
        factors_.push_back(psd_factor(c.cov));
    }
    cumulative_.resize(weights_.size());
    std::partial_sum(weights_.begin(), weights_.end(), cumulative_.begin());
}

Eigen::VectorXd MixtureModel::mean() const {
    Eigen::VectorXd mu = Eigen::VectorXd::Zero(dim_);
    for (std::size_t i = 0; i < size(); ++i) mu += weights_[i] * components_[i].mean;
    return mu;
}

Eigen::MatrixXd MixtureModel::covariance() const {
    const Eigen::VectorXd mu = mean();
    Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(dim_, dim_);
    for (std::size_t i = 0; i < size(); ++i) {
        const Eigen::VectorXd d = components_[i].mean - mu;
        cov += weights_[i] * (components_[i].cov + d * d.transpose());
    }
    return cov;
}

double UnivariateMixture::mean() const {
    double mu = 0.0;
    for (std::size_t i = 0; i < weights.size(); ++i) mu += weights[i] * means[i];
    return mu;
}

double UnivariateMixture::variance() const {
    const double mu = mean();
    double v = 0.0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        const double d = means[i] - mu;
        v += weights[i] * (sds[i] * sds[i] + d * d);
    }
    return v;
}

double UnivariateMixture::pdf(double y) const {
    double p = 0.0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        if (sds[i] > 0.0) p += weights[i] * gaussian::pdf(y, means[i], sds[i]);
    }
    return p;
}

double UnivariateMixture::cdf(double y) const {
    double c = 0.0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        if (sds[i] > 0.0) {
            c += weights[i] * gaussian::cdf((y - means[i]) / sds[i]);
        } else if (y >= means[i]) {
            c += weights[i];
        }
    }
    return c;
}

double density(const MixtureModel& mm, const Eigen::VectorXd& y) {
    if (y.size() != mm.dim()) {
        throw InputError("density: point dimension does not match model");
    }
    const double m = static_cast<double>(mm.dim());
    double p = 0.0;
    for (std::size_t i = 0; i < mm.size(); ++i) {
        const auto& c = mm.components()[i];
        Eigen::LLT<Eigen::MatrixXd> llt(c.cov);
        if (llt.info() != Eigen::Success) continue;
        const Eigen::MatrixXd L = llt.matrixL();
        if (L.diagonal().minCoeff() <= 0.0) continue;
        const Eigen::VectorXd z = L.triangularView<Eigen::Lower>().solve(y - c.mean);
        const double log_det = 2.0 * L.diagonal().array().log().sum();
        const double log_pdf = -0.5 * (m * std::log(2.0 * std::numbers::pi) + log_det + z.squaredNorm());
        p += mm.weights()[i] * std::exp(log_pdf);
    }
    return p;
}

Eigen::MatrixXd sample(const MixtureModel& mm, Eigen::Index n, std::uint64_t seed) {
    if (n < 1) throw InputError("sample: n must be positive");
    std::mt19937_64 rng(seed);
    Eigen::MatrixXd out(n, mm.dim());
    Eigen::VectorXd w(mm.dim());
    for (Eigen::Index r = 0; r < n; ++r) {
        mm.draw(rng, w);
        out.row(r) = w.transpose();
    }
    return out;
}

namespace {

// Moments of a mixture given raw parameters; shared by mixture_moments and the fitter.
MomentSummary moments_from(const std::vector<double>& weights, const std::vector<Eigen::VectorXd>& means,
                           const std::vector<Eigen::MatrixXd>& covs) {
    const Eigen::Index m = means.front().size();
    MomentSummary ms;
    ms.er = Eigen::VectorXd::Zero(m);
    for (std::size_t i = 0; i < weights.size(); ++i) ms.er += weights[i] * means[i];

    ms.cov = Eigen::MatrixXd::Zero(m, m);
    Eigen::VectorXd m3 = Eigen::VectorXd::Zero(m);
    Eigen::VectorXd m4 = Eigen::VectorXd::Zero(m);
    for (std::size_t i = 0; i < weights.size(); ++i) {
        const Eigen::VectorXd d = means[i] - ms.er;
        ms.cov += weights[i] * (covs[i] + d * d.transpose());
        for (Eigen::Index j = 0; j < m; ++j) {
            const double s2 = covs[i](j, j);
            const double dj = d(j);
            m3(j) += weights[i] * (dj * dj * dj + 3.0 * dj * s2);
            m4(j) += weights[i] * (dj * dj * dj * dj + 6.0 * dj * dj * s2 + 3.0 * s2 * s2);
        }
    }
    ms.sd.resize(m);
    ms.sk.resize(m);
    ms.ku.resize(m);
    ms.corr = Eigen::MatrixXd::Identity(m, m);
    for (Eigen::Index j = 0; j < m; ++j) {
        const double v = ms.cov(j, j);
        ms.sd(j) = std::sqrt(std::max(v, 0.0));
        if (v > 0.0) {
            ms.sk(j) = m3(j) / (v * ms.sd(j));
            ms.ku(j) = m4(j) / (v * v);
        } else {
            ms.sk(j) = kMissing;
            ms.ku(j) = kMissing;
        }
    }
    for (Eigen::Index a = 0; a < m; ++a) {
        for (Eigen::Index b = a + 1; b < m; ++b) {
            double c = 0.0;
            if (ms.sd(a) > 0.0 && ms.sd(b) > 0.0) c = std::clamp(ms.cov(a, b) / (ms.sd(a) * ms.sd(b)), -1.0, 1.0);
            ms.corr(a, b) = ms.corr(b, a) = c;
        }
    }
    return ms;
}

}  // namespace

MomentSummary mixture_moments(const MixtureModel& mm, int periods_per_year) {
    std::vector<Eigen::VectorXd> means;
    std::vector<Eigen::MatrixXd> covs;
    for (const auto& c : mm.components()) {
        means.push_back(c.mean);
        covs.push_back(c.cov);
    }
    MomentSummary ms = moments_from(mm.weights(), means, covs);
    ms.labels = mm.labels();
    ms.periods_per_year = periods_per_year;
    return ms;
}

UnivariateMixture project(const MixtureModel& mm, const Eigen::VectorXd& u) {
    if (u.size() != mm.dim()) throw InputError("project: allocation dimension does not match model");
    if (!u.allFinite()) throw InputError("project: non-finite allocation");
    UnivariateMixture um;
    um.weights = mm.weights();
    for (const auto& c : mm.components()) {
        um.means.push_back(u.dot(c.mean));
        um.sds.push_back(std::sqrt(std::max(0.0, u.dot(c.cov * u))));
    }
    return um;
}

UnivariateMixture marginal(const MixtureModel& mm, Eigen::Index j) {
    return project(mm, Eigen::VectorXd::Unit(mm.dim(), j));
}

bool is_unimodal(const UnivariateMixture& um) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    double max_sd = 0.0;
    double min_sd = std::numeric_limits<double>::infinity();
    std::size_t active = 0;
    for (std::size_t i = 0; i < um.weights.size(); ++i) {
        if (um.weights[i] <= 0.0) continue;
        if (!(um.sds[i] > 0.0)) throw InputError("is_unimodal: component sds must be positive");
        ++active;
        lo = std::min(lo, um.means[i]);
        hi = std::max(hi, um.means[i]);
        max_sd = std::max(max_sd, um.sds[i]);
        min_sd = std::min(min_sd, um.sds[i]);
    }
    if (active <= 1) return true;
    lo -= 6.0 * max_sd;
    hi += 6.0 * max_sd;
    const double step_max = min_sd / 20.0;
    const auto steps = static_cast<long>(std::ceil((hi - lo) / step_max));
    const double step = (hi - lo) / static_cast<double>(steps);

    int maxima = 0;
    int last_sign = 0;
    for (long s = 0; s <= steps; ++s) {
        const double y = lo + step * static_cast<double>(s);
        double slope = 0.0;
        for (std::size_t i = 0; i < um.weights.size(); ++i) {
            if (um.weights[i] <= 0.0) continue;
            const double sd = um.sds[i];
            const double d = (y - um.means[i]) / sd;
            slope -= um.weights[i] * gaussian::pdf(d) * d / (sd * sd);
        }
        const int sign = (slope > 0.0) - (slope < 0.0);
        if (sign == 0) continue;
        if (last_sign > 0 && sign < 0) ++maxima;
        last_sign = sign;
    }
    return maxima == 1;
}

double moment_fit_error(const MomentSummary& model, const MomentSummary& target) {
    const Eigen::Index m = target.er.size();
    if (model.er.size() != m) throw InputError("moment_fit_error: dimension mismatch");
    double err = 0.0;
    auto add = [&err](double a, double b) {
        if (is_missing(b)) return;
        if (is_missing(a)) {
            err += 1.0;
            return;
        }
        err += (a - b) * (a - b);
    };
    for (Eigen::Index j = 0; j < m; ++j) {
        add(model.er(j), target.er(j));
        add(model.sd(j), target.sd(j));
        add(model.sk(j), target.sk(j));
        add(model.ku(j), target.ku(j));
    }
    for (Eigen::Index a = 0; a < m; ++a) {
        for (Eigen::Index b = a + 1; b < m; ++b) add(model.corr(a, b), target.corr(a, b));
    }
    return err;
}

// ---------------------------------------------------------------------------
// Moment-matching fit
// ---------------------------------------------------------------------------

namespace {

// Assets with zero target SD still need a scale for the standardized parameters.
constexpr double kScaleFloor = 1e-6;

class MomentFitProblem {
public:
    MomentFitProblem(const MomentSummary& target, int k, bool require_unimodal)
        : target_(target), k_(k), m_(target.er.size()), require_unimodal_(require_unimodal) {
        scale_ = target.sd.cwiseMax(kScaleFloor);
    }

    [[nodiscard]] Eigen::Index size() const {
        return (k_ - 1) + k_ * m_ + k_ * m_ * (m_ + 1) / 2;
    }

    struct Decoded {
        std::vector<double> weights;
        std::vector<Eigen::VectorXd> means;
        std::vector<Eigen::MatrixXd> covs;
    };

    [[nodiscard]] Decoded decode(const Eigen::VectorXd& theta) const {
        Decoded d;
        Eigen::Index p = 0;
        std::vector<double> logits(static_cast<std::size_t>(k_), 0.0);
        for (int i = 1; i < k_; ++i) logits[static_cast<std::size_t>(i)] = theta(p++);
        const double top = *std::max_element(logits.begin(), logits.end());
        double total = 0.0;
        for (double& l : logits) {
            l = std::exp(l - top);
            total += l;
        }
        for (double l : logits) d.weights.push_back(l / total);

        for (int i = 0; i < k_; ++i) {
            Eigen::VectorXd mu(m_);
            for (Eigen::Index j = 0; j < m_; ++j) mu(j) = target_.er(j) + scale_(j) * theta(p++);
            d.means.push_back(mu);
        }
        for (int i = 0; i < k_; ++i) {
            Eigen::MatrixXd L = Eigen::MatrixXd::Zero(m_, m_);
            for (Eigen::Index r = 0; r < m_; ++r) {
                for (Eigen::Index c = 0; c <= r; ++c) L(r, c) = theta(p++);
            }
            const Eigen::MatrixXd F = scale_.asDiagonal() * L;
            d.covs.push_back(F * F.transpose());
        }
        return d;
    }

    [[nodiscard]] MixtureModel model(const Eigen::VectorXd& theta) const {
        Decoded d = decode(theta);
        std::vector<GaussianComponent> comps;
        for (int i = 0; i < k_; ++i) {
            comps.push_back({d.means[static_cast<std::size_t>(i)], d.covs[static_cast<std::size_t>(i)]});
        }
        // softmax weights may miss 1 by a few ulps; renormalize once more
        double total = std::accumulate(d.weights.begin(), d.weights.end(), 0.0);
        for (double& w : d.weights) w /= total;
        return MixtureModel(d.weights, std::move(comps), target_.labels);
    }

    [[nodiscard]] double moment_error(const Eigen::VectorXd& theta) const {
        const Decoded d = decode(theta);
        return moment_fit_error(moments_from(d.weights, d.means, d.covs), target_);
    }

    [[nodiscard]] bool unimodal(const Eigen::VectorXd& theta) const {
        const Decoded d = decode(theta);
        for (Eigen::Index j = 0; j < m_; ++j) {
            UnivariateMixture um;
            um.weights = d.weights;
            bool degenerate = false;
            for (int i = 0; i < k_; ++i) {
                um.means.push_back(d.means[static_cast<std::size_t>(i)](j));
                const double sd = std::sqrt(d.covs[static_cast<std::size_t>(i)](j, j));
                if (!(sd > 0.0) && d.weights[static_cast<std::size_t>(i)] > 0.0) degenerate = true;
                um.sds.push_back(sd);
            }
            if (degenerate) return false;
            if (!is_unimodal(um)) return false;
        }
        return true;
    }

    [[nodiscard]] double objective(const Eigen::VectorXd& theta) const {
        const double e = moment_error(theta);
        if (!std::isfinite(e)) return std::numeric_limits<double>::max();
        if (require_unimodal_ && !unimodal(theta)) return e + 1.0;
        return e;
    }

    /// Residual vector used by the least-squares polish; squared norm equals moment_error.
    [[nodiscard]] Eigen::VectorXd residuals(const Eigen::VectorXd& theta) const {
        const Decoded d = decode(theta);
        const MomentSummary ms = moments_from(d.weights, d.means, d.covs);
        std::vector<double> r;
        auto add = [&r](double a, double b) {
            if (is_missing(b)) return;
            r.push_back(is_missing(a) ? 1.0 : a - b);
        };
        for (Eigen::Index j = 0; j < m_; ++j) {
            add(ms.er(j), target_.er(j));
            add(ms.sd(j), target_.sd(j));
            add(ms.sk(j), target_.sk(j));
            add(ms.ku(j), target_.ku(j));
        }
        for (Eigen::Index a = 0; a < m_; ++a) {
            for (Eigen::Index b = a + 1; b < m_; ++b) add(ms.corr(a, b), target_.corr(a, b));
        }
        return Eigen::Map<Eigen::VectorXd>(r.data(), static_cast<Eigen::Index>(r.size()));
    }

    /// Parameter vector whose components all equal the target Gaussian.
    [[nodiscard]] Eigen::VectorXd gaussian_start(const Eigen::MatrixXd& corr_factor) const {
        Eigen::VectorXd theta = Eigen::VectorXd::Zero(size());
        Eigen::Index p = (k_ - 1) + k_ * m_;
        for (int i = 0; i < k_; ++i) {
            for (Eigen::Index r = 0; r < m_; ++r) {
                for (Eigen::Index c = 0; c <= r; ++c) theta(p++) = corr_factor(r, c);
            }
        }
        return theta;
    }

    [[nodiscard]] int components() const { return k_; }
    [[nodiscard]] Eigen::Index assets() const { return m_; }

private:
    const MomentSummary& target_;
    int k_;
    Eigen::Index m_;
    bool require_unimodal_;
    Eigen::VectorXd scale_;
};

struct LocalResult {
    Eigen::VectorXd theta;
    double value;
};

// Nelder-Mead simplex search with standard coefficients.
template <class F>
LocalResult nelder_mead(const F& f, const Eigen::VectorXd& start, double step, int max_evals, double tol) {
    const Eigen::Index n = start.size();
    std::vector<Eigen::VectorXd> pts(static_cast<std::size_t>(n + 1), start);
    std::vector<double> vals(static_cast<std::size_t>(n + 1));
    for (Eigen::Index i = 0; i < n; ++i) pts[static_cast<std::size_t>(i + 1)](i) += step;
    int evals = 0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        vals[i] = f(pts[i]);
        ++evals;
    }
    std::vector<std::size_t> order(pts.size());
    while (evals < max_evals) {
        std::iota(order.begin(), order.end(), 0);
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return vals[a] < vals[b]; });
        const std::size_t best = order.front();
        const std::size_t worst = order.back();
        const std::size_t second = order[order.size() - 2];
        if (std::abs(vals[worst] - vals[best]) <= tol * (std::abs(vals[best]) + 1e-300) ||
            vals[worst] - vals[best] < 1e-300) {
            break;
        }
        Eigen::VectorXd centroid = Eigen::VectorXd::Zero(n);
        for (std::size_t i : order) {
            if (i != worst) centroid += pts[i];
        }
        centroid /= static_cast<double>(n);

        const Eigen::VectorXd reflected = centroid + (centroid - pts[worst]);
        const double fr = f(reflected);
        ++evals;
        if (fr < vals[best]) {
            const Eigen::VectorXd expanded = centroid + 2.0 * (centroid - pts[worst]);
            const double fe = f(expanded);
            ++evals;
            if (fe < fr) {
                pts[worst] = expanded;
                vals[worst] = fe;
            } else {
                pts[worst] = reflected;
                vals[worst] = fr;
            }
            continue;
        }
        if (fr < vals[second]) {
            pts[worst] = reflected;
            vals[worst] = fr;
            continue;
        }
        const bool outside = fr < vals[worst];
        const Eigen::VectorXd contracted =
            outside ? Eigen::VectorXd(centroid + 0.5 * (reflected - centroid))
                    : Eigen::VectorXd(centroid + 0.5 * (pts[worst] - centroid));
        const double fc = f(contracted);
        ++evals;
        if (fc < std::min(fr, vals[worst])) {
            pts[worst] = contracted;
            vals[worst] = fc;
            continue;
        }
        for (std::size_t i = 0; i < pts.size(); ++i) {
            if (i == best) continue;
            pts[i] = pts[best] + 0.5 * (pts[i] - pts[best]);
            vals[i] = f(pts[i]);
            ++evals;
        }
    }
    const auto it = std::min_element(vals.begin(), vals.end());
    return {pts[static_cast<std::size_t>(it - vals.begin())], *it};
}

// Levenberg-Marquardt on the moment residuals with a forward-difference Jacobian.
// Steps that break unimodality (when required) are rejected like uphill steps.
LocalResult polish(const MomentFitProblem& prob, const Eigen::VectorXd& start, bool require_unimodal) {
    Eigen::VectorXd theta = start;
    Eigen::VectorXd r = prob.residuals(theta);
    double cost = r.squaredNorm();
    double damping = 1e-3;
    const Eigen::Index n = theta.size();
    for (int iter = 0; iter < 200 && cost > 1e-30; ++iter) {
        Eigen::MatrixXd J(r.size(), n);
        for (Eigen::Index j = 0; j < n; ++j) {
            const double h = 1e-7 * std::max(1.0, std::abs(theta(j)));
            Eigen::VectorXd tp = theta;
            tp(j) += h;
            J.col(j) = (prob.residuals(tp) - r) / h;
        }
        const Eigen::MatrixXd JtJ = J.transpose() * J;
        const Eigen::VectorXd g = J.transpose() * r;
        bool improved = false;
        for (int attempt = 0; attempt < 12; ++attempt) {
            Eigen::MatrixXd A = JtJ;
            A.diagonal().array() += damping * (JtJ.diagonal().array() + 1e-12);
            const Eigen::VectorXd delta = A.ldlt().solve(-g);
            if (!delta.allFinite()) {
                damping *= 10.0;
                continue;
            }
            const Eigen::VectorXd cand = theta + delta;
            const Eigen::VectorXd rc = prob.residuals(cand);
            const double cc = rc.squaredNorm();
            if (std::isfinite(cc) && cc < cost && (!require_unimodal || prob.unimodal(cand))) {
                theta = cand;
                r = rc;
                const double rel = (cost - cc) / cost;
                cost = cc;
                damping = std::max(damping * 0.3, 1e-12);
                improved = rel > 1e-10;
                break;
            }
            damping *= 10.0;
        }
        if (!improved) break;
    }
    return {theta, cost};
}

void validate_target(const MomentSummary& t) {
    const Eigen::Index m = t.er.size();
    if (m < 1 || t.sd.size() != m || t.sk.size() != m || t.ku.size() != m || t.corr.rows() != m ||
        t.corr.cols() != m) {
        throw InputError("fit_moment_matching: target moment summary has inconsistent dimensions");
    }
    std::ostringstream diag;
    for (Eigen::Index j = 0; j < m; ++j) {
        if (!std::isfinite(t.er(j)) || !(t.sd(j) >= 0.0)) {
            diag << "asset " << j << ": ER/SD must be finite with SD >= 0; ";
        }
        if (!is_missing(t.sk(j)) && !is_missing(t.ku(j)) && t.ku(j) < t.sk(j) * t.sk(j) + 1.0) {
            diag << "asset " << j << ": KU " << t.ku(j) << " < SK^2 + 1 = " << t.sk(j) * t.sk(j) + 1.0 << "; ";
        }
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(t.corr, Eigen::EigenvaluesOnly);
    if (es.eigenvalues().minCoeff() < -1e-10) {
        diag << "correlation matrix is not positive semi-definite; ";
    }
    const std::string msg = diag.str();
    if (!msg.empty()) throw InfeasibleError("fit_moment_matching: infeasible target: " + msg);
}

}  // namespace

FitResult fit_moment_matching(const MomentSummary& target_in, const FitConfig& cfg) {
    if (cfg.k_components < 1) throw InputError("fit_moment_matching: k_components must be >= 1");
    MomentSummary target = target_in.scale == MomentScale::kAnnual ? deannualize(target_in) : target_in;
    validate_target(target);

    const MomentFitProblem prob(target, cfg.k_components, cfg.require_unimodal);
    const Eigen::Index m = target.er.size();

    Eigen::MatrixXd corr_factor = psd_factor(target.corr);
    const Eigen::VectorXd base = prob.gaussian_start(corr_factor);
    auto f = [&prob](const Eigen::VectorXd& th) { return prob.objective(th); };

    std::mt19937_64 rng(cfg.seed);
    std::normal_distribution<double> normal(0.0, 1.0);

    LocalResult best{base, f(base)};
    const int starts = cfg.k_components == 1 ? 1 : std::max(1, cfg.restarts);
    for (int s = 0; s < starts; ++s) {
        Eigen::VectorXd theta = base;
        if (cfg.k_components > 1) {
            Eigen::Index p = 0;
            // first start is the usual calm/stress split; later ones are random
            for (int i = 1; i < cfg.k_components; ++i) theta(p++) = s == 0 ? -3.0 : 2.0 * normal(rng) - 2.0;
            for (int i = 0; i < cfg.k_components; ++i) {
                for (Eigen::Index j = 0; j < m; ++j) {
                    theta(p++) = s == 0 ? (i == 0 ? 0.0 : -1.0) : 0.7 * normal(rng);
                }
            }
            for (int i = 0; i < cfg.k_components; ++i) {
                const double scale = s == 0 ? (i == 0 ? 0.8 : 2.0) : std::exp(0.5 * normal(rng));
                for (Eigen::Index r = 0; r < m; ++r) {
                    for (Eigen::Index c = 0; c <= r; ++c) theta(p++) = scale * corr_factor(r, c);
                }
            }
        }
        LocalResult local{theta, f(theta)};
        double step = 0.3;
        for (int round = 0; round < 6; ++round) {
            LocalResult next = nelder_mead(f, local.theta, step, cfg.max_iterations, cfg.tolerance);
            const bool stalled = next.value >= local.value * (1.0 - 1e-6);
            local = next;
            if (stalled) break;
            step *= 0.5;
        }
        LocalResult polished = polish(prob, local.theta, cfg.require_unimodal);
        if (polished.value < local.value) local = polished;
        if (cfg.require_unimodal && !prob.unimodal(local.theta)) local.value = prob.objective(local.theta);
        if (local.value < best.value) best = local;
        if (best.value < 1e-24) break;
    }

    MixtureModel model = prob.model(best.theta);
    const double err = moment_fit_error(mixture_moments(model, target.periods_per_year), target);
    const bool unimodal = prob.unimodal(best.theta);
    if (!std::isfinite(err)) throw NumericalError("fit_moment_matching: non-finite fit error");
    return FitResult{std::move(model), err, unimodal};
}

}  // namespace odaa
