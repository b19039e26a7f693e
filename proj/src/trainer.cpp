#include "sws/trainer.hpp"

#include <cmath>
#include <iomanip>
#include <iostream>
#include <limits>
#include <numeric>
#include <sstream>

#include "sws/random.hpp"

namespace sws {

namespace {

std::vector<std::uint32_t> shuffled_indices(Eigen::Index n, Rng& rng) {
    std::vector<std::uint32_t> idx(static_cast<std::size_t>(n));
    std::iota(idx.begin(), idx.end(), 0u);
    rng.shuffle(std::span<std::uint32_t>(idx));
    return idx;
}

Eigen::Map<Eigen::ArrayXd> flat(Eigen::MatrixXd& m) { return {m.data(), m.size()}; }
Eigen::Map<Eigen::ArrayXd> flat(Eigen::VectorXd& v) { return {v.data(), v.size()}; }
Eigen::Map<const Eigen::ArrayXd> flat(const Eigen::MatrixXd& m) { return {m.data(), m.size()}; }
Eigen::Map<const Eigen::ArrayXd> flat(const Eigen::VectorXd& v) { return {v.data(), v.size()}; }

/// One Adam state per weight matrix and bias vector, sharing a learning rate.
struct NetworkOptimizer {
    std::vector<AdamState> weights;
    std::vector<AdamState> bias;

    explicit NetworkOptimizer(const Network& net) {
        for (const auto& layer : net.layers()) {
            weights.emplace_back(layer.weights.size());
            bias.emplace_back(layer.bias.size());
        }
    }

    void step(Network& net, const NetworkGradients& g, double lr, const AdamParams& hp) {
        for (std::size_t l = 0; l < net.depth(); ++l) {
            auto& layer = net.layers()[l];
            adam_step(weights[l], flat(layer.weights), flat(g.weights[l]), lr, hp);
            adam_step(bias[l], flat(layer.bias), flat(g.bias[l]), lr, hp);
        }
    }
};

struct MixtureOptimizer {
    AdamState means;
    AdamState log_vars;
    AdamState logits;

    explicit MixtureOptimizer(const MixtureModel& m)
        : means(m.components()), log_vars(m.components()), logits(m.components()) {}
};

bool hyper_enabled(const HyperPriorConfig& h) {
    return h.gamma_zero.enabled || h.gamma_rest.enabled || h.beta_pi0.enabled;
}

}  // namespace

void PretrainConfig::validate() const {
    if (epochs < 1) throw ConfigError("pretrain epochs must be >= 1");
    if (batch_size < 1) throw ConfigError("pretrain batch size must be >= 1");
    if (!(lr > 0.0)) throw ConfigError("pretrain learning rate must be > 0");
    if (!(weight_decay >= 0.0)) throw ConfigError("weight decay must be >= 0");
}

void TrainConfig::validate() const {
    if (!(tau >= 0.0) || !std::isfinite(tau)) throw ConfigError("tau must be finite and >= 0");
    if (epochs < 1) throw ConfigError("epochs must be >= 1");
    if (batch_size < 1) throw ConfigError("batch size must be >= 1");
    if (!(lr_weights > 0.0 && lr_means > 0.0 && lr_logvars > 0.0 && lr_logits > 0.0)) {
        throw ConfigError("all learning rates must be > 0");
    }
    if (!(variance_floor > 0.0)) throw ConfigError("variance floor must be > 0");
    if (subsample_k && *subsample_k < 1) throw ConfigError("subsample K must be >= 1");
}

std::string trace_csv(const std::vector<TraceRow>& trace) {
    std::ostringstream out;
    out << std::setprecision(17);
    out << "epoch,error_loss,complexity_loss,test_error";
    const Eigen::Index c = trace.empty() ? 0 : trace.front().means.size();
    for (Eigen::Index j = 0; j < c; ++j) out << ",mu_" << j << ",var_" << j << ",pi_" << j;
    out << '\n';
    for (const auto& row : trace) {
        out << row.epoch << ',' << row.error_loss << ',' << row.complexity_loss << ',' << row.test_error;
        for (Eigen::Index j = 0; j < row.means.size(); ++j) {
            out << ',' << row.means(j) << ',' << row.variances(j) << ',' << row.mixing(j);
        }
        out << '\n';
    }
    return out.str();
}

double complexity_loss(const Network& net, const MixtureModel& m, const HyperPriorConfig& h) {
    return -log_prior(weight_segments(net), m) - hyper_log_density(m, h);
}

double complexity_weight(const TrainConfig& cfg, Eigen::Index train_size) {
    if (!cfg.per_sample_complexity) return cfg.tau;
    return cfg.tau / static_cast<double>(std::max<Eigen::Index>(train_size, 1));
}

double total_loss(const Network& net, const MixtureModel& m, const HyperPriorConfig& h,
                  const BatchView& batch, double weight) {
    const double hyper_weight = h.tau_scales_hyperprior ? weight : 1.0;
    return error_loss(net, batch) - weight * log_prior(weight_segments(net), m) -
           hyper_weight * hyper_log_density(m, h);
}

TotalGradients total_loss_grads(const Network& net, const MixtureModel& m, const HyperPriorConfig& h,
                                const BatchView& batch, double weight,
                                std::optional<Eigen::Index> subsample_k, Rng* rng) {
    ErrorLoss e = error_loss_and_grad(net, batch);
    TotalGradients out;
    out.error_loss = e.loss;
    out.network = std::move(e.grads);
    const Eigen::Index c = m.components();
    out.means = Eigen::VectorXd::Zero(c);
    out.log_vars = Eigen::VectorXd::Zero(c);
    out.logits = Eigen::VectorXd::Zero(c);

    if (weight != 0.0) {
        const HyperPriorConfig data_only;
        const WeightSegments segs = weight_segments(net);
        PriorGradients p = subsample_k && rng ? subsampled_prior_grads(segs, m, data_only, *subsample_k, *rng)
                                              : prior_grads(segs, m, data_only);
        for (std::size_t l = 0; l < net.depth(); ++l) flat(out.network.weights[l]) -= weight * p.weights[l];
        out.means = -weight * p.means;
        out.log_vars = -weight * p.log_vars;
        out.logits = -weight * p.logits;
    }
    if (hyper_enabled(h)) {
        const double hyper_weight = h.tau_scales_hyperprior ? weight : 1.0;
        if (hyper_weight != 0.0) {
            HyperGradients hg = hyper_grads(m, h);
            out.log_vars -= hyper_weight * hg.log_vars;
            out.logits -= hyper_weight * hg.logits;
        }
    }
    return out;
}

Network pretrain(Network net, const Dataset& train, const PretrainConfig& cfg, const Dataset* test,
                 const EpochCallback& on_epoch) {
    cfg.validate();
    net.validate();
    Rng rng(cfg.seed);
    NetworkOptimizer opt(net);
    const Eigen::Index n = train.size();
    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        const auto order = shuffled_indices(n, rng);
        double loss_sum = 0.0;
        int batches = 0;
        for (Eigen::Index begin = 0; begin < n; begin += cfg.batch_size) {
            const Eigen::Index count = std::min<Eigen::Index>(cfg.batch_size, n - begin);
            const Dataset batch = train.gather(std::span(order).subspan(static_cast<std::size_t>(begin),
                                                                         static_cast<std::size_t>(count)));
            ErrorLoss e = error_loss_and_grad(net, batch.view());
            if (cfg.weight_decay > 0.0) {
                for (std::size_t l = 0; l < net.depth(); ++l) {
                    e.grads.weights[l] += cfg.weight_decay * net.layers()[l].weights;
                }
            }
            opt.step(net, e.grads, cfg.lr, cfg.adam);
            loss_sum += e.loss;
            ++batches;
        }
        if (on_epoch) {
            TraceRow row;
            row.epoch = epoch;
            row.error_loss = loss_sum / batches;
            row.test_error = test ? evaluate(net, *test) : std::numeric_limits<double>::quiet_NaN();
            on_epoch(row);
        }
    }
    return net;
}

RetrainResult retrain(Network net, MixtureModel mixture, const HyperPriorConfig& hyper,
                      const Dataset& train, const TrainConfig& cfg, const Dataset* test,
                      const EpochCallback& on_epoch) {
    cfg.validate();
    hyper.validate();
    net.validate();
    mixture.validate();
    if (cfg.subsample_k && *cfg.subsample_k > net.weight_count()) {
        throw ConfigError("subsample K exceeds the number of weights");
    }

    Rng rng(cfg.seed);
    Rng sample_rng(cfg.seed ^ 0x9e3779b97f4a7c15ull);
    NetworkOptimizer net_opt(net);
    MixtureOptimizer mix_opt(mixture);
    const double weight = complexity_weight(cfg, train.size());
    const double log_floor = std::log(cfg.variance_floor);
    double lr_means = cfg.lr_means;
    double lr_logvars = cfg.lr_logvars;
    double lr_logits = cfg.lr_logits;

    RetrainResult result;
    mixture.tau = cfg.tau;
    double previous_complexity = complexity_loss(net, mixture, hyper);
    const Eigen::Index n = train.size();

    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        const Network epoch_start_net = net;
        const MixtureModel epoch_start_mixture = mixture;
        const auto order = shuffled_indices(n, rng);
        double loss_sum = 0.0;
        int batches = 0;
        try {
            for (Eigen::Index begin = 0; begin < n; begin += cfg.batch_size) {
                const Eigen::Index count = std::min<Eigen::Index>(cfg.batch_size, n - begin);
                const Dataset batch = train.gather(std::span(order).subspan(
                    static_cast<std::size_t>(begin), static_cast<std::size_t>(count)));
                TotalGradients g = total_loss_grads(net, mixture, hyper, batch.view(), weight,
                                                    cfg.subsample_k, &sample_rng);
                net_opt.step(net, g.network, cfg.lr_weights, cfg.adam);

                const double mean0 = mixture.means(0);
                adam_step(mix_opt.means, flat(mixture.means), g.means.array(), lr_means, cfg.adam);
                adam_step(mix_opt.log_vars, flat(mixture.log_vars), g.log_vars.array(), lr_logvars, cfg.adam);
                const double logit0 = mixture.logits(0);
                adam_step(mix_opt.logits, flat(mixture.logits), g.logits.array(), lr_logits, cfg.adam);
                mixture.means(0) = mean0;
                if (mixture.zero_mode == ZeroMixing::fixed) mixture.logits(0) = logit0;
                mixture.log_vars = mixture.log_vars.cwiseMax(log_floor);

                loss_sum += g.error_loss;
                ++batches;
            }
        } catch (const NumericError& e) {
            throw DivergenceError(std::string("epoch ") + std::to_string(epoch) + ": " + e.what(),
                                  epoch_start_net, epoch_start_mixture);
        }

        TraceRow row;
        row.epoch = epoch;
        row.error_loss = loss_sum / batches;
        try {
            row.complexity_loss = complexity_loss(net, mixture, hyper);
        } catch (const NumericError& e) {
            throw DivergenceError(std::string("epoch ") + std::to_string(epoch) + ": " + e.what(),
                                  epoch_start_net, epoch_start_mixture);
        }
        if (!std::isfinite(row.error_loss) || !std::isfinite(row.complexity_loss)) {
            throw DivergenceError("epoch " + std::to_string(epoch) + ": non-finite loss", epoch_start_net,
                                  epoch_start_mixture);
        }
        row.test_error = test ? evaluate(net, *test) : std::numeric_limits<double>::quiet_NaN();
        row.means = mixture.means;
        row.variances = mixture.variances();
        row.mixing = mixture.mixing();

        // L^C may be negative once the mixture sharpens; compare the increase
        // against the previous magnitude.
        if (cfg.divergence_guard && !result.guard_triggered &&
            row.complexity_loss - previous_complexity > 9.0 * std::abs(previous_complexity)) {
            lr_means *= 0.5;
            lr_logvars *= 0.5;
            lr_logits *= 0.5;
            result.guard_triggered = true;
            std::clog << "divergence guard: complexity loss jumped from " << previous_complexity << " to "
                      << row.complexity_loss << " at epoch " << epoch << "; halving mixture learning rates\n";
        }
        previous_complexity = row.complexity_loss;
        if (on_epoch) on_epoch(row);
        result.trace.push_back(std::move(row));
    }
    result.network = std::move(net);
    result.mixture = std::move(mixture);
    return result;
}

}  // namespace sws
