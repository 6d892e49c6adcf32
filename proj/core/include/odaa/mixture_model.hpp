#pragma once

#include "odaa/econometrics.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace odaa {

struct GaussianComponent {
    Eigen::VectorXd mean;
    Eigen::MatrixXd cov;
};

/// Mixture of multivariate Gaussians, the market scenario model for per-period returns.
///
/// Immutable after construction. The constructor validates the weights (each in
/// [0, 1], summing to 1 within 1e-12), dimensions, and positive
/// semi-definiteness of every covariance, and caches a square-root factor of
/// each covariance for sampling.
class MixtureModel {
public:
    MixtureModel(std::vector<double> weights, std::vector<GaussianComponent> components,
                 std::vector<std::string> labels = {});

    [[nodiscard]] Eigen::Index dim() const { return dim_; }
    [[nodiscard]] std::size_t size() const { return weights_.size(); }
    [[nodiscard]] const std::vector<double>& weights() const { return weights_; }
    [[nodiscard]] const std::vector<GaussianComponent>& components() const { return components_; }
    [[nodiscard]] const std::vector<std::string>& labels() const { return labels_; }
    /// F with F F^T = cov of component i.
    [[nodiscard]] const Eigen::MatrixXd& factor(std::size_t i) const { return factors_[i]; }

    /// Overall mean sum_i lambda_i mu^i.
    [[nodiscard]] Eigen::VectorXd mean() const;
    /// Overall covariance of the mixture (within plus between components).
    [[nodiscard]] Eigen::MatrixXd covariance() const;

    /// One draw using the supplied engine; `work` must have dim() entries.
    template <class Rng>
    void draw(Rng& rng, Eigen::Ref<Eigen::VectorXd> out, Eigen::Ref<Eigen::VectorXd> work) const {
        std::uniform_real_distribution<double> pick(0.0, 1.0);
        std::normal_distribution<double> normal(0.0, 1.0);
        const double u = pick(rng);
        std::size_t c = 0;
        while (c + 1 < cumulative_.size() && u >= cumulative_[c]) ++c;
        for (Eigen::Index j = 0; j < dim_; ++j) work(j) = normal(rng);
        out.noalias() = components_[c].mean + factors_[c] * work;
    }

    template <class Rng>
    void draw(Rng& rng, Eigen::Ref<Eigen::VectorXd> out) const {
        Eigen::VectorXd work(dim_);
        draw(rng, out, work);
    }

private:
    std::vector<double> weights_;
    std::vector<double> cumulative_;
    std::vector<GaussianComponent> components_;
    std::vector<Eigen::MatrixXd> factors_;
    std::vector<std::string> labels_;
    Eigen::Index dim_ = 0;
};

/// Law of u^T w for w distributed as a MixtureModel.
struct UnivariateMixture {
    std::vector<double> weights;
    std::vector<double> means;
    std::vector<double> sds;

    [[nodiscard]] double mean() const;
    [[nodiscard]] double variance() const;
    [[nodiscard]] double pdf(double y) const;
    /// Zero-sd components are point masses.
    [[nodiscard]] double cdf(double y) const;
};

struct FitConfig {
    int k_components = 2;
    int max_iterations = 20000;  ///< objective evaluations per local search
    double tolerance = 1e-14;
    bool require_unimodal = true;
    std::uint64_t seed = 1;
    int restarts = 12;
};

struct FitResult {
    MixtureModel model;
    double fit_error = 0.0;
    bool unimodal = true;
};

/// Mixture density at y. Components with singular covariance have no Lebesgue
/// density and contribute zero.
[[nodiscard]] double density(const MixtureModel& mm, const Eigen::VectorXd& y);

/// n i.i.d. draws (n x m), reproducible from seed.
[[nodiscard]] Eigen::MatrixXd sample(const MixtureModel& mm, Eigen::Index n, std::uint64_t seed);

/// Closed-form per-period moments of the mixture (no sampling).
[[nodiscard]] MomentSummary mixture_moments(const MixtureModel& mm, int periods_per_year = 52);

/// Means u^T mu^i, sds sqrt(u^T Sigma^i u), weights unchanged.
[[nodiscard]] UnivariateMixture project(const MixtureModel& mm, const Eigen::VectorXd& u);

/// Marginal of asset j.
[[nodiscard]] UnivariateMixture marginal(const MixtureModel& mm, Eigen::Index j);

/// True iff the density has exactly one local maximum on a grid spanning the
/// component means +/- 6 max sd at a step of at most min sd / 20.
[[nodiscard]] bool is_unimodal(const UnivariateMixture& um);

/// Unweighted squared deviation over ER/SD/SK/KU per asset and the upper-triangle
/// correlations. Entries missing in the target are skipped.
[[nodiscard]] double moment_fit_error(const MomentSummary& model, const MomentSummary& target);

/// Fits a K-component mixture whose closed-form moments match target.
/// Throws InfeasibleError when the target violates KU >= SK^2 + 1 or has a
/// non-PSD correlation matrix.
[[nodiscard]] FitResult fit_moment_matching(const MomentSummary& target, const FitConfig& cfg);

}  // namespace odaa
