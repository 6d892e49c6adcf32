#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <string>
#include <vector>

namespace odaa {

/// Per-asset price history sampled at a fixed frequency.
struct PriceSeries {
    std::vector<std::string> labels;
    std::vector<std::string> dates;  ///< optional; empty or one entry per row
    Eigen::MatrixXd prices;          ///< T x m, strictly positive
    int periods_per_year = 52;
};

/// Simple per-period returns, one column per asset.
struct ReturnSeries {
    std::vector<std::string> labels;
    std::vector<std::string> dates;
    Eigen::MatrixXd returns;  ///< (T-1) x m
    int periods_per_year = 52;

    [[nodiscard]] Eigen::Index observations() const { return returns.rows(); }
    [[nodiscard]] Eigen::Index assets() const { return returns.cols(); }
};

enum class MomentScale { kPerPeriod, kAnnual };

/// First four moments plus dependence structure of a return vector.
///
/// SK and KU are standardized central moments (KU = 3 for a Gaussian) and are
/// always per-period quantities, even after annualize(). An asset with zero
/// variance has undefined SK/KU, reported as NaN (see is_missing()).
struct MomentSummary {
    std::vector<std::string> labels;
    Eigen::VectorXd er;
    Eigen::VectorXd sd;
    Eigen::VectorXd sk;
    Eigen::VectorXd ku;
    Eigen::MatrixXd corr;
    Eigen::MatrixXd cov;
    int periods_per_year = 52;
    MomentScale scale = MomentScale::kPerPeriod;

    [[nodiscard]] Eigen::Index assets() const { return er.size(); }
};

inline constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();

[[nodiscard]] inline bool is_missing(double v) { return std::isnan(v); }

struct RegionClassification {
    int region = 5;  ///< 1..9, row-major over (leptokurtic, mesokurtic, platykurtic) x (negative, gaussian-like, positive)
    double lambda_sk = 0.0;
    double lambda_ku = 0.0;
    double cl = 0.95;
    long n = 0;
};

/// w_k = (z_k - z_{k-1}) / z_{k-1} for every asset. Throws InputError on non-positive prices or T < 2.
[[nodiscard]] ReturnSeries compute_returns(const PriceSeries& prices);

/// Inverse of compute_returns given the first row of prices.
[[nodiscard]] PriceSeries compound_prices(const ReturnSeries& returns, const Eigen::VectorXd& initial);

/// Population (1/n) moment estimators. Requires at least four observations.
[[nodiscard]] MomentSummary compute_moments(const ReturnSeries& returns);

/// n/6 * (sk^2 + (ku - 3)^2 / 4); compare against a chi-square(2) quantile.
[[nodiscard]] double jarque_bera(double sk, double ku, long n);

/// Upper-tail probability of the chi-square(2) distribution, i.e. the JB p-value.
[[nodiscard]] double jarque_bera_p_value(double statistic);

/// Places (sk, ku) in the nine-region skewness/kurtosis taxonomy.
///
/// lambda_sk = sqrt(6 cl / (n - 1)), lambda_ku = sqrt(24 cl / (n - 1)).
/// Ties at the thresholds resolve to the non-gaussian class. Missing (NaN)
/// inputs fall into the gaussian-like / mesokurtic classes.
[[nodiscard]] RegionClassification classify_region(double sk, double ku, double cl, long n);

/// Compound ER, sqrt-time SD, linear-time covariance. SK/KU stay per-period.
[[nodiscard]] MomentSummary annualize(const MomentSummary& ms);

/// Inverse of annualize for ER/SD/cov; used to turn annual tables into model targets.
[[nodiscard]] MomentSummary deannualize(const MomentSummary& ms);

}  // namespace odaa
