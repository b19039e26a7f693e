#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace sws {

using RowMatrixXd = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

enum class Activation : std::uint8_t { relu = 0, softmax = 1 };

struct Layer {
    Eigen::MatrixXd weights;  // out x in
    Eigen::VectorXd bias;     // out
    Activation activation = Activation::relu;

    Eigen::Index inputs() const { return weights.cols(); }
    Eigen::Index outputs() const { return weights.rows(); }
};

/// Dense feedforward classifier: ReLU hidden layers, softmax output.
class Network {
public:
    Network() = default;
    explicit Network(std::vector<Layer> layers);

    /// He-uniform initialised network with the given layer widths,
    /// e.g. {784, 300, 100, 10}.
    static Network dense(std::span<const int> sizes, std::uint64_t seed);

    const std::vector<Layer>& layers() const { return layers_; }
    std::vector<Layer>& layers() { return layers_; }
    std::size_t depth() const { return layers_.size(); }

    Eigen::Index input_width() const { return layers_.front().inputs(); }
    Eigen::Index output_width() const { return layers_.back().outputs(); }

    /// Total number of weight-matrix entries (biases excluded).
    Eigen::Index weight_count() const;
    Eigen::Index bias_count() const;

    /// Throws ConfigError when dimensions do not chain or the head is not softmax.
    void validate() const;

    bool operator==(const Network& other) const;

private:
    std::vector<Layer> layers_;
};

/// Non-owning view of a minibatch: one sample per row, pixels in [0, 1].
struct BatchView {
    Eigen::Ref<const RowMatrixXd> inputs;
    std::span<const std::uint8_t> labels;
};

/// Owned samples + labels (a whole split, or a gathered minibatch).
struct Dataset {
    RowMatrixXd inputs;
    std::vector<std::uint8_t> labels;

    Eigen::Index size() const { return inputs.rows(); }
    BatchView view() const { return {inputs, labels}; }
    BatchView rows(Eigen::Index begin, Eigen::Index count) const;
    Dataset gather(std::span<const std::uint32_t> indices) const;
};

struct NetworkGradients {
    std::vector<Eigen::MatrixXd> weights;
    std::vector<Eigen::VectorXd> bias;

    static NetworkGradients zeros_like(const Network& net);
};

/// Row-wise class probabilities, B x classes.
RowMatrixXd forward(const Network& net, const BatchView& batch);

struct ErrorLoss {
    double loss = 0.0;  // mean negative log-likelihood of the true class
    NetworkGradients grads;
};

ErrorLoss error_loss_and_grad(const Network& net, const BatchView& batch);

/// Mean cross-entropy only, no gradients.
double error_loss(const Network& net, const BatchView& batch);

/// Top-1 error rate over the whole dataset, evaluated in chunks.
double evaluate(const Network& net, const Dataset& data, Eigen::Index chunk = 1000);

/// Stable softmax of each row; rows sum to one.
RowMatrixXd softmax_rows(const RowMatrixXd& logits);

}  // namespace sws
