#include "odaa/econometrics.hpp"
#include "odaa/errors.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace odaa;

namespace {

// Straight long-double sums, independent of the library's accumulation order.
struct Brute {
    long double mean = 0, sd = 0, sk = 0, ku = 0;
};

Brute brute_moments(const Eigen::VectorXd& x) {
    const long double n = x.size();
    Brute b;
    for (double v : x) b.mean += v;
    b.mean /= n;
    long double m2 = 0, m3 = 0, m4 = 0;
    for (double v : x) {
        const long double d = v - b.mean;
        m2 += d * d;
        m3 += d * d * d;
        m4 += d * d * d * d;
    }
    m2 /= n;
    m3 /= n;
    m4 /= n;
    b.sd = std::sqrt(m2);
    b.sk = m3 / std::pow(m2, 1.5L);
    b.ku = m4 / (m2 * m2);
    return b;
}

ReturnSeries series(const Eigen::MatrixXd& r) {
    ReturnSeries rs;
    rs.returns = r;
    for (Eigen::Index j = 0; j < r.cols(); ++j) rs.labels.push_back("a" + std::to_string(j));
    return rs;
}

}  // namespace

TEST(Returns, SimpleReturnsFromPrices) {
    PriceSeries ps;
    ps.labels = {"x", "y"};
    ps.prices.resize(3, 2);
    ps.prices << 100, 10, 110, 9, 99, 9;
    const ReturnSeries rs = compute_returns(ps);
    ASSERT_EQ(rs.observations(), 2);
    EXPECT_DOUBLE_EQ(rs.returns(0, 0), 0.1);
    EXPECT_DOUBLE_EQ(rs.returns(1, 0), -0.1);
    EXPECT_DOUBLE_EQ(rs.returns(0, 1), -0.1);
    EXPECT_DOUBLE_EQ(rs.returns(1, 1), 0.0);
}

TEST(Returns, RejectsNonPositivePriceAndShortHistory) {
    PriceSeries ps;
    ps.labels = {"x"};
    ps.prices.resize(3, 1);
    ps.prices << 1, 0, 2;
    EXPECT_THROW((void)compute_returns(ps), InputError);
    ps.prices.resize(1, 1);
    ps.prices << 1;
    EXPECT_THROW((void)compute_returns(ps), InputError);
}

TEST(Returns, CompoundPricesInvertsReturns) {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.5, 2.0);
    PriceSeries ps;
    ps.labels = {"a", "b", "c"};
    ps.prices.resize(50, 3);
    for (Eigen::Index i = 0; i < ps.prices.size(); ++i) ps.prices.data()[i] = u(rng);
    const PriceSeries back = compound_prices(compute_returns(ps), ps.prices.row(0).transpose());
    EXPECT_LT((back.prices - ps.prices).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Moments, MatchBruteForceOnRandomData) {
    std::mt19937_64 rng(11);
    std::gamma_distribution<double> g(2.0, 0.01);
    std::normal_distribution<double> n(0.001, 0.02);
    Eigen::MatrixXd r(500, 2);
    for (Eigen::Index i = 0; i < r.rows(); ++i) {
        r(i, 0) = g(rng);
        r(i, 1) = n(rng) + 0.3 * r(i, 0);
    }
    const MomentSummary ms = compute_moments(series(r));
    for (Eigen::Index j = 0; j < 2; ++j) {
        const Brute b = brute_moments(r.col(j));
        EXPECT_NEAR(ms.er(j), static_cast<double>(b.mean), 1e-15);
        EXPECT_NEAR(ms.sd(j), static_cast<double>(b.sd), 1e-14);
        EXPECT_NEAR(ms.sk(j), static_cast<double>(b.sk), 1e-10);
        EXPECT_NEAR(ms.ku(j), static_cast<double>(b.ku), 1e-10);
    }
    const Brute b0 = brute_moments(r.col(0));
    const Brute b1 = brute_moments(r.col(1));
    long double c = 0;
    for (Eigen::Index i = 0; i < r.rows(); ++i) c += (r(i, 0) - b0.mean) * (r(i, 1) - b1.mean);
    c /= r.rows();
    EXPECT_NEAR(ms.cov(0, 1), static_cast<double>(c), 1e-16);
    EXPECT_NEAR(ms.corr(0, 1), static_cast<double>(c / (b0.sd * b1.sd)), 1e-12);
    EXPECT_DOUBLE_EQ(ms.corr(0, 0), 1.0);
}

TEST(Moments, ConstantSeriesHasMissingShape) {
    Eigen::MatrixXd r(6, 2);
    r << 0.001, 0.01, 0.001, -0.02, 0.001, 0.03, 0.001, 0.0, 0.001, 0.01, 0.001, -0.01;
    const MomentSummary ms = compute_moments(series(r));
    EXPECT_DOUBLE_EQ(ms.sd(0), 0.0);
    EXPECT_TRUE(is_missing(ms.sk(0)));
    EXPECT_TRUE(is_missing(ms.ku(0)));
    EXPECT_DOUBLE_EQ(ms.corr(0, 1), 0.0);
    EXPECT_FALSE(is_missing(ms.sk(1)));
}

TEST(Moments, NeedFourObservations) {
    Eigen::MatrixXd r(3, 1);
    r << 0.1, 0.2, 0.3;
    EXPECT_THROW((void)compute_moments(series(r)), InputError);
}

TEST(JarqueBera, MatchesHandComputedValue) {
    const double oracle = 1043.0 / 6.0 * (0.46 * 0.46 + 1.25 * 1.25 / 4.0);
    EXPECT_NEAR(jarque_bera(-0.46, 4.25, 1043), oracle, 1e-12);
    EXPECT_NEAR(jarque_bera(-0.46, 4.25, 1043), 104.687, 1e-3);
    EXPECT_DOUBLE_EQ(jarque_bera(0.0, 3.0, 500), 0.0);
}

TEST(JarqueBera, PValueIsChiSquareTwoTail) {
    for (double s : {0.0, 0.5, 2.0, 5.991464547107979, 20.0}) {
        EXPECT_NEAR(jarque_bera_p_value(s), std::exp(-s / 2.0), 1e-14);
    }
    EXPECT_NEAR(jarque_bera_p_value(5.991464547107979), 0.05, 1e-12);
}

TEST(JarqueBera, GaussianSampleRarelyRejected) {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> n(0.0, 1.0);
    int rejected = 0;
    for (int t = 0; t < 40; ++t) {
        Eigen::MatrixXd r(400, 1);
        for (Eigen::Index i = 0; i < r.rows(); ++i) r(i, 0) = n(rng);
        const MomentSummary ms = compute_moments(series(r));
        if (jarque_bera_p_value(jarque_bera(ms.sk(0), ms.ku(0), 400)) < 0.01) ++rejected;
    }
    EXPECT_LE(rejected, 3);
}

TEST(Regions, ThresholdsFollowSampleSize) {
    const RegionClassification rc = classify_region(0.0, 3.0, 0.95, 1043);
    EXPECT_NEAR(rc.lambda_sk, std::sqrt(6.0 * 0.95 / 1042.0), 1e-15);
    EXPECT_NEAR(rc.lambda_ku, std::sqrt(24.0 * 0.95 / 1042.0), 1e-15);
    EXPECT_EQ(rc.region, 5);
}

TEST(Regions, NineCellsRowMajor) {
    const long n = 1001;
    const double ls = std::sqrt(6.0 * 0.95 / 1000.0);
    const double lk = std::sqrt(24.0 * 0.95 / 1000.0);
    const double sk[3] = {-3 * ls, 0.0, 3 * ls};
    const double ku[3] = {3 + 3 * lk, 3.0, 3 - 3 * lk};
    for (int row = 0; row < 3; ++row) {
        for (int col = 0; col < 3; ++col) {
            EXPECT_EQ(classify_region(sk[col], ku[row], 0.95, n).region, 3 * row + col + 1);
        }
    }
}

TEST(Regions, TiesGoToNonGaussianClass) {
    const long n = 101;
    const double ls = std::sqrt(6.0 * 0.95 / 100.0);
    const double lk = std::sqrt(24.0 * 0.95 / 100.0);
    EXPECT_EQ(classify_region(ls, 3.0, 0.95, n).region, 6);
    EXPECT_EQ(classify_region(-ls, 3.0, 0.95, n).region, 4);
    EXPECT_EQ(classify_region(0.0, 3.0 + lk, 0.95, n).region, 2);
    EXPECT_EQ(classify_region(0.0, 3.0 - lk, 0.95, n).region, 8);
}

TEST(Regions, MissingShapeIsGaussianLike) {
    EXPECT_EQ(classify_region(kMissing, kMissing, 0.95, 1043).region, 5);
}

TEST(Regions, WeeklyBondsAreLeptokurticNegative) {
    EXPECT_EQ(classify_region(-0.46, 4.25, 0.95, 1043).region, 1);
    EXPECT_EQ(classify_region(-0.34, 5.51, 0.95, 1043).region, 1);
}

TEST(Annualize, CompoundsMeanAndScalesSpread) {
    MomentSummary ms;
    ms.labels = {"c", "e"};
    ms.er = Eigen::Vector2d(0.0006134, 0.0019);
    ms.sd = Eigen::Vector2d(0.0, 0.0205);
    ms.sk = Eigen::Vector2d(kMissing, -0.34);
    ms.ku = Eigen::Vector2d(kMissing, 5.51);
    ms.corr = Eigen::Matrix2d::Identity();
    ms.cov = (ms.sd.array().square()).matrix().asDiagonal();
    const MomentSummary a = annualize(ms);
    EXPECT_NEAR(a.er(0), std::pow(1.0006134, 52) - 1.0, 1e-15);
    EXPECT_NEAR(a.er(0), 0.0324, 5e-5);
    EXPECT_NEAR(a.sd(1), 0.0205 * std::sqrt(52.0), 1e-15);
    EXPECT_NEAR(a.cov(1, 1), 0.0205 * 0.0205 * 52, 1e-15);
    EXPECT_DOUBLE_EQ(a.ku(1), 5.51);
    EXPECT_EQ(a.scale, MomentScale::kAnnual);
    const MomentSummary back = deannualize(a);
    EXPECT_LT((back.er - ms.er).cwiseAbs().maxCoeff(), 1e-15);
    EXPECT_LT((back.sd - ms.sd).cwiseAbs().maxCoeff(), 1e-15);
    EXPECT_LT((back.cov - ms.cov).cwiseAbs().maxCoeff(), 1e-17);
}
