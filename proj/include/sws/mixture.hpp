#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

#include <Eigen/Dense>

#include "sws/network.hpp"
#include "sws/random.hpp"

namespace sws {

/// Whether the zero component's mixing proportion is pinned or learned.
enum class ZeroMixing : std::uint8_t { fixed = 0, trainable = 1 };

/// Factorised Gaussian mixture prior over the shared weights.
///
/// Component 0 is the zero (pruning) spike: its mean is identically 0.
/// Components 1..J are free. Variances are stored as rho = log sigma^2 and
/// mixing proportions as logits. In fixed mode pi_0 is `pi0_fixed` and the
/// free block shares (1 - pi_0) through a softmax over logits[1..J]; in
/// trainable mode a single softmax runs over all J+1 logits.
struct MixtureModel {
    Eigen::VectorXd means;     // J+1, means[0] == 0
    Eigen::VectorXd log_vars;  // J+1
    Eigen::VectorXd logits;    // J+1
    double pi0_fixed = 0.999;
    ZeroMixing zero_mode = ZeroMixing::fixed;
    double tau = 0.0;  // complexity weight the model was trained with

    Eigen::Index components() const { return means.size(); }
    Eigen::Index free_components() const { return means.size() - 1; }

    Eigen::VectorXd mixing() const;
    Eigen::VectorXd variances() const { return log_vars.array().exp().matrix(); }
    double pi0() const;

    /// Shape, finiteness and zero-mean checks; throws ConfigError.
    void validate() const;

    bool operator==(const MixtureModel&) const = default;
};

/// Gamma(alpha, beta) on a precision lambda = 1 / sigma^2.
struct GammaPrior {
    double alpha = 1.0;
    double beta = 1.0;
    bool enabled = false;

    double mode() const { return (alpha - 1.0) / beta; }
    double variance() const { return alpha / (beta * beta); }

    /// Parameters whose mode and variance equal the given values.
    static GammaPrior from_mode_variance(double mode, double variance);
};

/// Beta(alpha, beta) on the zero component's mixing proportion.
struct BetaPrior {
    double alpha = 1.0;
    double beta = 1.0;
    bool enabled = false;

    double mode() const { return (alpha - 1.0) / (alpha + beta - 2.0); }

    /// Parameters with the given mode and pseudo-count alpha + beta.
    static BetaPrior from_mode_pseudocount(double mode, double pseudo_count);
};

struct HyperPriorConfig {
    GammaPrior gamma_zero;
    GammaPrior gamma_rest;
    BetaPrior beta_pi0;
    /// When false the hyper-prior terms enter the loss with weight 1 instead of tau.
    bool tau_scales_hyperprior = true;

    void validate() const;
};

/// Non-owning views of the weight arrays the prior acts on.
using WeightSegments = std::vector<Eigen::Map<const Eigen::ArrayXd>>;

/// One segment per layer weight matrix (column-major storage order).
WeightSegments weight_segments(const Network& net);

struct PriorGradients {
    double log_prior = 0.0;          // log p(w)
    double hyper_log_density = 0.0;  // enabled hyper-prior terms
    std::vector<Eigen::ArrayXd> weights;
    Eigen::VectorXd means;
    Eigen::VectorXd log_vars;
    Eigen::VectorXd logits;  // logits[0] is the pi_0 logit

    /// log p(w, theta): data term plus hyper-prior terms.
    double log_joint() const { return log_prior + hyper_log_density; }
};

/// Evenly spaced means on [min(w), max(w)], equal free mixing proportions.
MixtureModel init_mixture(const Eigen::Ref<const Eigen::ArrayXd>& pretrained, int free_components,
                          double pi0, double weight_decay, ZeroMixing mode = ZeroMixing::fixed);

double log_prior(const Eigen::Ref<const Eigen::ArrayXd>& w, const MixtureModel& m);
double log_prior(const WeightSegments& w, const MixtureModel& m);

/// Posterior component probabilities, one row per weight, component 0 first.
Eigen::ArrayXXd responsibilities(const Eigen::Ref<const Eigen::ArrayXd>& w, const MixtureModel& m);

/// Index of the maximum-responsibility component for every weight; ties go
/// to the lower index.
std::vector<std::uint16_t> argmax_components(const Eigen::Ref<const Eigen::ArrayXd>& w,
                                             const MixtureModel& m);

double hyper_log_density(const MixtureModel& m, const HyperPriorConfig& h);

struct HyperGradients {
    double log_density = 0.0;
    Eigen::VectorXd log_vars;  // J+1
    Eigen::VectorXd logits;    // J+1, nonzero only for a trainable pi_0
};

/// Value and gradients of the enabled hyper-prior log-densities.
HyperGradients hyper_grads(const MixtureModel& m, const HyperPriorConfig& h);

/// Exact gradients of log p(w) + hyper_log_density with respect to the
/// weights and all mixture parameters. Fixed quantities get zero gradient.
PriorGradients prior_grads(const WeightSegments& w, const MixtureModel& m, const HyperPriorConfig& h);
PriorGradients prior_grads(const Eigen::Ref<const Eigen::ArrayXd>& w, const MixtureModel& m,
                           const HyperPriorConfig& h);

/// Unbiased estimate of prior_grads from `sample_size` weights drawn
/// uniformly without replacement, scaled by I / K. Hyper-prior terms exact.
PriorGradients subsampled_prior_grads(const WeightSegments& w, const MixtureModel& m,
                                      const HyperPriorConfig& h, Eigen::Index sample_size, Rng& rng);
PriorGradients subsampled_prior_grads(const Eigen::Ref<const Eigen::ArrayXd>& w,
                                      const MixtureModel& m, const HyperPriorConfig& h,
                                      Eigen::Index sample_size, Rng& rng);

template <typename Scalar>
Scalar log_normal_density(Scalar x, Scalar mean, Scalar variance) {
    using std::log;
    const Scalar d = x - mean;
    return Scalar(-0.5) * log(Scalar(2) * std::numbers::pi_v<Scalar> * variance) -
           d * d / (Scalar(2) * variance);
}

}  // namespace sws
