#include "odaa/econometrics.hpp"

#include "odaa/errors.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace odaa {

ReturnSeries compute_returns(const PriceSeries& p) {
    const Eigen::Index rows = p.prices.rows();
    const Eigen::Index cols = p.prices.cols();
    if (rows < 2) {
        throw InputError("compute_returns: need at least two price rows");
    }
    if (!p.labels.empty() && static_cast<Eigen::Index>(p.labels.size()) != cols) {
        throw InputError("compute_returns: label count does not match price columns");
    }
    for (Eigen::Index k = 0; k < rows; ++k) {
        for (Eigen::Index i = 0; i < cols; ++i) {
            const double z = p.prices(k, i);
            if (!(z > 0.0) || !std::isfinite(z)) {
                std::ostringstream os;
                os << "compute_returns: non-positive price " << z << " at row " << k << ", column " << i;
                throw InputError(os.str());
            }
        }
    }

    ReturnSeries r;
    r.labels = p.labels;
    r.periods_per_year = p.periods_per_year;
    if (p.dates.size() == static_cast<std::size_t>(rows)) {
        r.dates.assign(p.dates.begin() + 1, p.dates.end());
    }
    r.returns = (p.prices.bottomRows(rows - 1).array() - p.prices.topRows(rows - 1).array()) /
                p.prices.topRows(rows - 1).array();
    return r;
}

PriceSeries compound_prices(const ReturnSeries& r, const Eigen::VectorXd& initial) {
    if (initial.size() != r.assets()) {
        throw InputError("compound_prices: initial price vector has wrong dimension");
    }
    PriceSeries p;
    p.labels = r.labels;
    p.periods_per_year = r.periods_per_year;
    p.prices.resize(r.observations() + 1, r.assets());
    p.prices.row(0) = initial.transpose();
    for (Eigen::Index k = 0; k < r.observations(); ++k) {
        p.prices.row(k + 1) = p.prices.row(k).array() * (1.0 + r.returns.row(k).array());
    }
    return p;
}

MomentSummary compute_moments(const ReturnSeries& r) {
    const Eigen::Index n = r.observations();
    const Eigen::Index m = r.assets();
    if (n < 4) {
        throw InputError("compute_moments: need at least four observations per asset");
    }
    if (!r.returns.allFinite()) {
        throw InputError("compute_moments: non-finite return");
    }

    MomentSummary ms;
    ms.labels = r.labels;
    ms.periods_per_year = r.periods_per_year;
    ms.er = r.returns.colwise().mean().transpose();
    ms.sd.resize(m);
    ms.sk.resize(m);
    ms.ku.resize(m);

    const Eigen::MatrixXd centered = r.returns.rowwise() - ms.er.transpose();
    const double inv_n = 1.0 / static_cast<double>(n);
    ms.cov = (centered.transpose() * centered) * inv_n;

    std::vector<bool> degenerate(static_cast<std::size_t>(m), false);
    for (Eigen::Index i = 0; i < m; ++i) {
        const auto c = centered.col(i).array();
        const double m2 = c.square().sum() * inv_n;
        const double m3 = c.cube().sum() * inv_n;
        const double m4 = c.square().square().sum() * inv_n;
        const double scale = r.returns.col(i).cwiseAbs().maxCoeff();
        ms.sd(i) = std::sqrt(m2);
        if (ms.sd(i) <= 64.0 * std::numeric_limits<double>::epsilon() * scale || m2 == 0.0) {
            degenerate[static_cast<std::size_t>(i)] = true;
            ms.sd(i) = 0.0;
            ms.sk(i) = kMissing;
            ms.ku(i) = kMissing;
            ms.cov.row(i).setZero();
            ms.cov.col(i).setZero();
        } else {
            ms.sk(i) = m3 / (m2 * ms.sd(i));
            ms.ku(i) = m4 / (m2 * m2);
        }
    }

    ms.corr = Eigen::MatrixXd::Identity(m, m);
    for (Eigen::Index i = 0; i < m; ++i) {
        for (Eigen::Index j = i + 1; j < m; ++j) {
            double c = 0.0;
            if (!degenerate[static_cast<std::size_t>(i)] && !degenerate[static_cast<std::size_t>(j)]) {
                c = std::clamp(ms.cov(i, j) / (ms.sd(i) * ms.sd(j)), -1.0, 1.0);
            }
            ms.corr(i, j) = ms.corr(j, i) = c;
        }
    }
    return ms;
}

double jarque_bera(double sk, double ku, long n) {
    const double excess = ku - 3.0;
    return static_cast<double>(n) / 6.0 * (sk * sk + excess * excess / 4.0);
}

double jarque_bera_p_value(double statistic) {
    // chi-square with two degrees of freedom has survival exp(-x/2)
    return statistic <= 0.0 ? 1.0 : std::exp(-0.5 * statistic);
}

namespace {

// 0 = negative/leptokurtic side, 1 = gaussian-like/mesokurtic, 2 = positive/platykurtic
int skew_class(double sk, double lambda) {
    if (sk <= -lambda) return 0;
    if (sk >= lambda) return 2;
    return 1;
}

int kurtosis_row(double ku, double lambda) {
    if (ku >= 3.0 + lambda) return 0;
    if (ku <= 3.0 - lambda) return 2;
    return 1;
}

}  // namespace

RegionClassification classify_region(double sk, double ku, double cl, long n) {
    if (!(cl > 0.0) || n < 2) {
        throw InputError("classify_region: requires cl > 0 and n >= 2");
    }
    RegionClassification rc;
    rc.cl = cl;
    rc.n = n;
    rc.lambda_sk = std::sqrt(6.0 * cl / static_cast<double>(n - 1));
    rc.lambda_ku = std::sqrt(24.0 * cl / static_cast<double>(n - 1));
    rc.region = 3 * kurtosis_row(ku, rc.lambda_ku) + skew_class(sk, rc.lambda_sk) + 1;
    return rc;
}

MomentSummary annualize(const MomentSummary& ms) {
    if (ms.scale == MomentScale::kAnnual) return ms;
    if (ms.periods_per_year < 1) {
        throw InputError("annualize: periods_per_year must be positive");
    }
    const double ppy = static_cast<double>(ms.periods_per_year);
    MomentSummary out = ms;
    out.er = (1.0 + ms.er.array()).pow(ppy) - 1.0;
    out.sd = ms.sd * std::sqrt(ppy);
    out.cov = ms.cov * ppy;
    out.scale = MomentScale::kAnnual;
    return out;
}

MomentSummary deannualize(const MomentSummary& ms) {
    if (ms.scale == MomentScale::kPerPeriod) return ms;
    if (ms.periods_per_year < 1) {
        throw InputError("deannualize: periods_per_year must be positive");
    }
    const double ppy = static_cast<double>(ms.periods_per_year);
    MomentSummary out = ms;
    out.er = (1.0 + ms.er.array()).pow(1.0 / ppy) - 1.0;
    out.sd = ms.sd / std::sqrt(ppy);
    out.cov = ms.cov / ppy;
    out.scale = MomentScale::kPerPeriod;
    return out;
}

}  // namespace odaa
