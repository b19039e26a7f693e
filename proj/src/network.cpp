#include "sws/network.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "sws/errors.hpp"
#include "sws/random.hpp"

namespace sws {

namespace {

constexpr double kProbabilityFloor = 1e-300;

void check_input(const Network& net, const BatchView& batch) {
    if (net.depth() == 0) throw ConfigError("network has no layers");
    if (batch.inputs.cols() != net.input_width()) {
        throw ConfigError("batch width " + std::to_string(batch.inputs.cols()) +
                          " does not match network input width " +
                          std::to_string(net.input_width()));
    }
    if (static_cast<Eigen::Index>(batch.labels.size()) != batch.inputs.rows()) {
        throw ConfigError("batch has " + std::to_string(batch.inputs.rows()) + " rows but " +
                          std::to_string(batch.labels.size()) + " labels");
    }
}

RowMatrixXd affine(const Layer& layer, const Eigen::Ref<const RowMatrixXd>& x) {
    RowMatrixXd z = x * layer.weights.transpose();
    z.rowwise() += layer.bias.transpose();
    return z;
}

/// Pre-activations of every layer plus the post-activations feeding it.
struct Activations {
    std::vector<RowMatrixXd> pre;   // z_l
    std::vector<RowMatrixXd> post;  // a_l for hidden layers
};

Activations run_hidden(const Network& net, const BatchView& batch) {
    Activations acts;
    const auto& layers = net.layers();
    acts.pre.reserve(layers.size());
    acts.post.reserve(layers.size());
    for (std::size_t l = 0; l < layers.size(); ++l) {
        RowMatrixXd z = l == 0 ? affine(layers[l], batch.inputs) : affine(layers[l], acts.post.back());
        if (layers[l].activation == Activation::relu) {
            acts.post.push_back(z.cwiseMax(0.0));
        }
        acts.pre.push_back(std::move(z));
    }
    return acts;
}

RowMatrixXd log_softmax_rows(const RowMatrixXd& logits) {
    Eigen::VectorXd row_max = logits.rowwise().maxCoeff();
    RowMatrixXd shifted = logits.colwise() - row_max;
    Eigen::VectorXd lse = shifted.array().exp().rowwise().sum().log().matrix();
    return shifted.colwise() - lse;
}

std::string layer_diagnostics(const Network& net, const Activations& acts) {
    std::string msg;
    for (std::size_t l = 0; l < net.depth(); ++l) {
        const auto& layer = net.layers()[l];
        msg += " [layer " + std::to_string(l) + ": weights finite=" +
               (layer.weights.allFinite() ? "yes" : "no") +
               ", max|w|=" + std::to_string(layer.weights.cwiseAbs().maxCoeff()) +
               ", logits finite=" + (acts.pre[l].allFinite() ? "yes" : "no") + "]";
    }
    return msg;
}

}  // namespace

Network::Network(std::vector<Layer> layers) : layers_(std::move(layers)) { validate(); }

Network Network::dense(std::span<const int> sizes, std::uint64_t seed) {
    if (sizes.size() < 2) throw ConfigError("a network needs at least input and output widths");
    Rng rng(seed);
    std::vector<Layer> layers;
    for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
        const int in = sizes[l];
        const int out = sizes[l + 1];
        if (in <= 0 || out <= 0) throw ConfigError("layer widths must be positive");
        const double limit = std::sqrt(6.0 / in);
        Layer layer;
        layer.weights.resize(out, in);
        for (Eigen::Index j = 0; j < in; ++j) {
            for (Eigen::Index i = 0; i < out; ++i) layer.weights(i, j) = rng.uniform(-limit, limit);
        }
        layer.bias = Eigen::VectorXd::Zero(out);
        layer.activation = l + 2 == sizes.size() ? Activation::softmax : Activation::relu;
        layers.push_back(std::move(layer));
    }
    return Network(std::move(layers));
}

Eigen::Index Network::weight_count() const {
    Eigen::Index n = 0;
    for (const auto& layer : layers_) n += layer.weights.size();
    return n;
}

Eigen::Index Network::bias_count() const {
    Eigen::Index n = 0;
    for (const auto& layer : layers_) n += layer.bias.size();
    return n;
}

void Network::validate() const {
    if (layers_.empty()) throw ConfigError("network has no layers");
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        const auto& layer = layers_[l];
        if (layer.bias.size() != layer.outputs()) {
            throw ConfigError("layer " + std::to_string(l) + ": bias length does not match rows");
        }
        if (l > 0 && layer.inputs() != layers_[l - 1].outputs()) {
            throw ConfigError("layer " + std::to_string(l) + ": input width " +
                              std::to_string(layer.inputs()) + " does not chain with previous output " +
                              std::to_string(layers_[l - 1].outputs()));
        }
        const bool last = l + 1 == layers_.size();
        if (last != (layer.activation == Activation::softmax)) {
            throw ConfigError("only the final layer may (and must) use softmax");
        }
    }
}

bool Network::operator==(const Network& other) const {
    if (layers_.size() != other.layers_.size()) return false;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        const auto& a = layers_[l];
        const auto& b = other.layers_[l];
        if (a.activation != b.activation || a.weights.rows() != b.weights.rows() ||
            a.weights.cols() != b.weights.cols() || a.weights != b.weights || a.bias != b.bias) {
            return false;
        }
    }
    return true;
}

BatchView Dataset::rows(Eigen::Index begin, Eigen::Index count) const {
    return {inputs.middleRows(begin, count),
            std::span<const std::uint8_t>(labels).subspan(static_cast<std::size_t>(begin),
                                                          static_cast<std::size_t>(count))};
}

Dataset Dataset::gather(std::span<const std::uint32_t> indices) const {
    Dataset out;
    out.inputs.resize(static_cast<Eigen::Index>(indices.size()), inputs.cols());
    out.labels.resize(indices.size());
    for (std::size_t r = 0; r < indices.size(); ++r) {
        out.inputs.row(static_cast<Eigen::Index>(r)) = inputs.row(indices[r]);
        out.labels[r] = labels[indices[r]];
    }
    return out;
}

NetworkGradients NetworkGradients::zeros_like(const Network& net) {
    NetworkGradients g;
    for (const auto& layer : net.layers()) {
        g.weights.push_back(Eigen::MatrixXd::Zero(layer.weights.rows(), layer.weights.cols()));
        g.bias.push_back(Eigen::VectorXd::Zero(layer.bias.size()));
    }
    return g;
}

RowMatrixXd softmax_rows(const RowMatrixXd& logits) {
    RowMatrixXd p = log_softmax_rows(logits).array().exp().matrix();
    // renormalise so rows sum to one to machine precision
    Eigen::VectorXd sums = p.rowwise().sum();
    return sums.asDiagonal().inverse() * p;
}

RowMatrixXd forward(const Network& net, const BatchView& batch) {
    check_input(net, batch);
    Activations acts = run_hidden(net, batch);
    return softmax_rows(acts.pre.back());
}

double error_loss(const Network& net, const BatchView& batch) {
    check_input(net, batch);
    Activations acts = run_hidden(net, batch);
    RowMatrixXd logp = log_softmax_rows(acts.pre.back());
    const double log_floor = std::log(kProbabilityFloor);
    double total = 0.0;
    for (Eigen::Index b = 0; b < logp.rows(); ++b) {
        total -= std::max(logp(b, batch.labels[static_cast<std::size_t>(b)]), log_floor);
    }
    const double loss = total / static_cast<double>(logp.rows());
    if (!std::isfinite(loss)) throw NumericError("non-finite error loss;" + layer_diagnostics(net, acts));
    return loss;
}

ErrorLoss error_loss_and_grad(const Network& net, const BatchView& batch) {
    check_input(net, batch);
    const auto& layers = net.layers();
    const Eigen::Index rows = batch.inputs.rows();
    if (rows == 0) throw ConfigError("empty batch");

    Activations acts = run_hidden(net, batch);
    RowMatrixXd logp = log_softmax_rows(acts.pre.back());
    const double log_floor = std::log(kProbabilityFloor);

    ErrorLoss out;
    double total = 0.0;
    for (Eigen::Index b = 0; b < rows; ++b) {
        total -= std::max(logp(b, batch.labels[static_cast<std::size_t>(b)]), log_floor);
    }
    out.loss = total / static_cast<double>(rows);
    if (!std::isfinite(out.loss)) {
        throw NumericError("non-finite error loss;" + layer_diagnostics(net, acts));
    }

    // d(mean CE)/d(logits) = (p - onehot) / B
    RowMatrixXd delta = logp.array().exp().matrix();
    for (Eigen::Index b = 0; b < rows; ++b) delta(b, batch.labels[static_cast<std::size_t>(b)]) -= 1.0;
    delta /= static_cast<double>(rows);

    out.grads.weights.resize(layers.size());
    out.grads.bias.resize(layers.size());
    for (std::size_t l = layers.size(); l-- > 0;) {
        if (l == 0) {
            out.grads.weights[l].noalias() = delta.transpose() * batch.inputs;
        } else {
            out.grads.weights[l].noalias() = delta.transpose() * acts.post[l - 1];
        }
        out.grads.bias[l] = delta.colwise().sum().transpose();
        if (l > 0) {
            RowMatrixXd back = delta * layers[l].weights;
            delta = (acts.pre[l - 1].array() > 0.0).select(back, 0.0);
        }
    }
    return out;
}

double evaluate(const Network& net, const Dataset& data, Eigen::Index chunk) {
    if (data.size() == 0) throw ConfigError("cannot evaluate on an empty dataset");
    Eigen::Index wrong = 0;
    for (Eigen::Index begin = 0; begin < data.size(); begin += chunk) {
        const Eigen::Index count = std::min(chunk, data.size() - begin);
        BatchView batch = data.rows(begin, count);
        check_input(net, batch);
        Activations acts = run_hidden(net, batch);
        const RowMatrixXd& logits = acts.pre.back();
        for (Eigen::Index b = 0; b < count; ++b) {
            Eigen::Index arg;
            logits.row(b).maxCoeff(&arg);
            if (arg != batch.labels[static_cast<std::size_t>(b)]) ++wrong;
        }
    }
    return static_cast<double>(wrong) / static_cast<double>(data.size());
}

}  // namespace sws
