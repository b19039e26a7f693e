#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "sws/adam.hpp"
#include "sws/errors.hpp"
#include "sws/mixture.hpp"
#include "sws/network.hpp"

namespace sws {

/// Plain error-loss training (the model that gets compressed).
struct PretrainConfig {
    int epochs = 30;
    int batch_size = 128;
    double lr = 1e-3;
    double weight_decay = 1e-4;  // L2 on weight matrices only
    AdamParams adam;
    std::uint64_t seed = 1;

    void validate() const;
};

/// Soft weight-sharing retraining: L = L^E + tau * L^C.
struct TrainConfig {
    double tau = 0.005;
    /// When true the complexity weight is tau / N (N = training-set size),
    /// i.e. the dataset-summed error loss of the objective is averaged.
    bool per_sample_complexity = true;
    int epochs = 40;
    int batch_size = 128;
    double lr_weights = 1e-3;
    double lr_means = 5e-4;
    double lr_logvars = 5e-4;
    double lr_logits = 5e-4;
    AdamParams adam;
    std::optional<Eigen::Index> subsample_k;
    std::uint64_t seed = 1;
    double variance_floor = 1e-8;
    bool divergence_guard = true;

    void validate() const;
};

struct TraceRow {
    int epoch = 0;
    double error_loss = 0.0;       // mean minibatch L^E over the epoch
    double complexity_loss = 0.0;  // -log p(w, theta) at epoch end
    double test_error = 0.0;       // NaN when no test set was given
    Eigen::VectorXd means;
    Eigen::VectorXd variances;
    Eigen::VectorXd mixing;
};

std::string trace_csv(const std::vector<TraceRow>& trace);

/// Thrown when a loss turns non-finite; carries the state at the start of
/// the failing epoch.
class DivergenceError : public NumericError {
public:
    DivergenceError(const std::string& what, Network last_net, MixtureModel last_mixture)
        : NumericError(what), last_good_network(std::move(last_net)), last_good_mixture(std::move(last_mixture)) {}

    Network last_good_network;
    MixtureModel last_good_mixture;
};

using EpochCallback = std::function<void(const TraceRow&)>;

Network pretrain(Network net, const Dataset& train, const PretrainConfig& cfg,
                 const Dataset* test = nullptr, const EpochCallback& on_epoch = {});

struct RetrainResult {
    Network network;
    MixtureModel mixture;
    std::vector<TraceRow> trace;
    bool guard_triggered = false;
};

RetrainResult retrain(Network net, MixtureModel mixture, const HyperPriorConfig& hyper,
                      const Dataset& train, const TrainConfig& cfg, const Dataset* test = nullptr,
                      const EpochCallback& on_epoch = {});

/// L^C = -log p(w) - hyper terms (unweighted).
double complexity_loss(const Network& net, const MixtureModel& m, const HyperPriorConfig& h);

/// Effective weight of the complexity term for a training set of `train_size`.
double complexity_weight(const TrainConfig& cfg, Eigen::Index train_size);

/// L^E(batch) + w * (-log p(w)) + w_h * (-hyper), w = complexity_weight,
/// w_h = w or 1 depending on HyperPriorConfig::tau_scales_hyperprior.
double total_loss(const Network& net, const MixtureModel& m, const HyperPriorConfig& h,
                  const BatchView& batch, double weight);

/// Gradients of total_loss with respect to network parameters and the mixture.
struct TotalGradients {
    NetworkGradients network;
    Eigen::VectorXd means;
    Eigen::VectorXd log_vars;
    Eigen::VectorXd logits;
    double error_loss = 0.0;
};

TotalGradients total_loss_grads(const Network& net, const MixtureModel& m, const HyperPriorConfig& h,
                                const BatchView& batch, double weight,
                                std::optional<Eigen::Index> subsample_k = std::nullopt,
                                Rng* rng = nullptr);

}  // namespace sws
