#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "sws/errors.hpp"
#include "sws/network.hpp"
#include "test_support.hpp"

using namespace sws;
using sws::testing::central_difference;
using sws::testing::random_dataset;
using sws::testing::random_network;
using sws::testing::relative_error;

namespace {

// Straight-loop forward pass, no Eigen expressions.
std::vector<std::vector<double>> loop_forward(const Network& net, const RowMatrixXd& x) {
    std::vector<std::vector<double>> out;
    for (Eigen::Index s = 0; s < x.rows(); ++s) {
        std::vector<double> a(x.cols());
        for (Eigen::Index j = 0; j < x.cols(); ++j) a[j] = x(s, j);
        for (const auto& layer : net.layers()) {
            std::vector<double> z(layer.outputs());
            for (Eigen::Index o = 0; o < layer.outputs(); ++o) {
                double acc = layer.bias[o];
                for (Eigen::Index i = 0; i < layer.inputs(); ++i) acc += layer.weights(o, i) * a[i];
                z[o] = acc;
            }
            if (layer.activation == Activation::relu) {
                for (auto& v : z) v = v > 0.0 ? v : 0.0;
            } else {
                double mx = z[0];
                for (double v : z) mx = std::max(mx, v);
                double sum = 0.0;
                for (auto& v : z) sum += (v = std::exp(v - mx));
                for (auto& v : z) v /= sum;
            }
            a = std::move(z);
        }
        out.push_back(a);
    }
    return out;
}

Network zero_network() {
    Layer a{Eigen::MatrixXd::Zero(5, 4), Eigen::VectorXd::Zero(5), Activation::relu};
    Layer b{Eigen::MatrixXd::Zero(10, 5), Eigen::VectorXd::Zero(10), Activation::softmax};
    return Network({a, b});
}

}  // namespace

TEST(Forward, ZeroNetworkGivesUniformRows) {
    Rng rng(3);
    const Dataset d = random_dataset(7, 4, 10, rng);
    const RowMatrixXd p = forward(zero_network(), d.view());
    ASSERT_EQ(p.rows(), 7);
    ASSERT_EQ(p.cols(), 10);
    for (Eigen::Index i = 0; i < p.size(); ++i) EXPECT_NEAR(p.data()[i], 0.1, 1e-15);
}

TEST(Forward, IdentityLayerPeaksAtHotIndex) {
    Layer id{Eigen::MatrixXd::Identity(6, 6) * 3.0, Eigen::VectorXd::Zero(6), Activation::softmax};
    const Network net({id});
    Dataset d;
    d.inputs = RowMatrixXd::Identity(6, 6);
    d.labels.assign(6, 0);
    const RowMatrixXd p = forward(net, d.view());
    for (Eigen::Index r = 0; r < 6; ++r) {
        Eigen::Index best;
        p.row(r).maxCoeff(&best);
        EXPECT_EQ(best, r);
    }
}

TEST(Forward, MatchesLoopOracle) {
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        Rng rng(seed);
        const Network net = random_network({13, 9, 4}, rng);
        const Dataset d = random_dataset(11, 13, 4, rng);
        const RowMatrixXd p = forward(net, d.view());
        const auto oracle = loop_forward(net, d.inputs);
        for (Eigen::Index s = 0; s < p.rows(); ++s) {
            for (Eigen::Index k = 0; k < p.cols(); ++k) EXPECT_NEAR(p(s, k), oracle[s][k], 1e-14);
        }
    }
}

TEST(Forward, RowsAreDistributions) {
    Rng rng(8);
    for (int trial = 0; trial < 50; ++trial) {
        const Network net = random_network({6, 8, 5}, rng, 3.0);
        const Dataset d = random_dataset(9, 6, 5, rng);
        const RowMatrixXd p = forward(net, d.view());
        EXPECT_TRUE((p.array() >= 0.0).all());
        for (Eigen::Index r = 0; r < p.rows(); ++r) EXPECT_NEAR(p.row(r).sum(), 1.0, 1e-12);
    }
}

TEST(Softmax, ExtremeLogitsStayFinite) {
    RowMatrixXd z(2, 3);
    z << 1000.0, 0.0, -1000.0, -5e5, -5e5, -5e5;
    const RowMatrixXd p = softmax_rows(z);
    EXPECT_TRUE(p.allFinite());
    EXPECT_NEAR(p(0, 0), 1.0, 1e-15);
    EXPECT_NEAR(p(1, 1), 1.0 / 3.0, 1e-15);
}

TEST(ErrorLoss, UniformOutputIsLogTen) {
    Rng rng(5);
    const Dataset d = random_dataset(12, 4, 10, rng);
    EXPECT_NEAR(error_loss(zero_network(), d.view()), std::log(10.0), 1e-14);
    EXPECT_NEAR(error_loss_and_grad(zero_network(), d.view()).loss, 2.302585, 1e-6);
}

TEST(ErrorLoss, ConfidentCorrectPredictionApproachesZero) {
    Network net = zero_network();
    net.layers()[1].bias[3] = 60.0;
    Dataset d;
    d.inputs = RowMatrixXd::Zero(3, 4);
    d.labels.assign(3, 3);
    EXPECT_LT(error_loss(net, d.view()), 1e-20);
}

TEST(ErrorLoss, GradientMatchesCentralDifferences) {
    Rng rng(2024);
    Network net = random_network({784, 16, 10}, rng, 0.05);
    const Dataset d = random_dataset(8, 784, 10, rng);
    const ErrorLoss e = error_loss_and_grad(net, d.view());
    const auto f = [&] { return error_loss(net, d.view()); };
    // L ~ 2.3, h = 1e-5: rounding noise of the difference quotient is ~2.3 eps / h ~ 5e-11,
    // so entries below 1e-5 are judged on absolute error 1e-10.
    const double floor = 1e-5;
    double worst = 0.0;
    for (std::size_t l = 0; l < net.depth(); ++l) {
        auto& w = net.layers()[l].weights;
        for (Eigen::Index i = 0; i < w.size(); ++i) {
            const double fd = central_difference(f, w.data()[i], 1e-5);
            worst = std::max(worst, relative_error(e.grads.weights[l].data()[i], fd, floor));
        }
        auto& b = net.layers()[l].bias;
        for (Eigen::Index i = 0; i < b.size(); ++i) {
            const double fd = central_difference(f, b[i], 1e-5);
            worst = std::max(worst, relative_error(e.grads.bias[l][i], fd, floor));
        }
    }
    EXPECT_LT(worst, 1e-5);
}

TEST(ErrorLoss, GradientShapesMatchNetwork) {
    Rng rng(4);
    const Network net = random_network({5, 7, 3, 4}, rng);
    const Dataset d = random_dataset(6, 5, 4, rng);
    const ErrorLoss e = error_loss_and_grad(net, d.view());
    ASSERT_EQ(e.grads.weights.size(), net.depth());
    for (std::size_t l = 0; l < net.depth(); ++l) {
        EXPECT_EQ(e.grads.weights[l].rows(), net.layers()[l].outputs());
        EXPECT_EQ(e.grads.weights[l].cols(), net.layers()[l].inputs());
        EXPECT_EQ(e.grads.bias[l].size(), net.layers()[l].outputs());
    }
}

TEST(ErrorLoss, NonFiniteInputRaisesNumericError) {
    Rng rng(4);
    const Network net = random_network({3, 4, 2}, rng);
    Dataset d = random_dataset(2, 3, 2, rng);
    d.inputs(1, 2) = std::numeric_limits<double>::quiet_NaN();
    EXPECT_THROW(error_loss_and_grad(net, d.view()), NumericError);
}

TEST(Evaluate, ConstantPredictorOnBalancedDataIsNinetyPercentWrong) {
    Network net = zero_network();
    net.layers()[1].bias[7] = 1.0;
    Dataset d;
    d.inputs = RowMatrixXd::Zero(100, 4);
    for (int i = 0; i < 100; ++i) d.labels.push_back(static_cast<std::uint8_t>(i % 10));
    EXPECT_DOUBLE_EQ(evaluate(net, d), 0.9);
    EXPECT_DOUBLE_EQ(evaluate(net, d, 7), 0.9);
}

TEST(Evaluate, CopyGivesIdenticalError) {
    Rng rng(12);
    const Network net = random_network({10, 6, 3}, rng);
    const Network copy = net;
    const Dataset d = random_dataset(300, 10, 3, rng);
    EXPECT_EQ(evaluate(net, d), evaluate(copy, d));
    EXPECT_TRUE(net == copy);
}

TEST(Evaluate, EmptyDatasetIsAConfigError) {
    Dataset d;
    d.inputs.resize(0, 4);
    EXPECT_THROW(evaluate(zero_network(), d), ConfigError);
}

TEST(NetworkShape, CountsAndValidation) {
    const std::vector<int> sizes{784, 300, 100, 10};
    const Network net = Network::dense(sizes, 9);
    EXPECT_EQ(net.weight_count(), 784 * 300 + 300 * 100 + 100 * 10);
    EXPECT_EQ(net.bias_count(), 410);
    EXPECT_EQ(net.layers().back().activation, Activation::softmax);
    EXPECT_TRUE(Network::dense(sizes, 9) == net);
    EXPECT_FALSE(Network::dense(sizes, 10) == net);

    Layer a{Eigen::MatrixXd::Zero(5, 4), Eigen::VectorXd::Zero(5), Activation::relu};
    Layer b{Eigen::MatrixXd::Zero(3, 6), Eigen::VectorXd::Zero(3), Activation::softmax};
    EXPECT_THROW(Network({a, b}), ConfigError);
    Layer c{Eigen::MatrixXd::Zero(3, 5), Eigen::VectorXd::Zero(3), Activation::relu};
    EXPECT_THROW(Network({a, c}), ConfigError);
}

TEST(DatasetViews, GatherAndRowsSelectSamples) {
    Rng rng(1);
    const Dataset d = random_dataset(10, 3, 5, rng);
    const std::vector<std::uint32_t> idx{7, 2, 2};
    const Dataset g = d.gather(idx);
    ASSERT_EQ(g.size(), 3);
    EXPECT_EQ(g.inputs.row(0), d.inputs.row(7));
    EXPECT_EQ(g.labels[2], d.labels[2]);
    const BatchView v = d.rows(4, 3);
    EXPECT_EQ(v.inputs.rows(), 3);
    EXPECT_EQ(v.inputs.row(0), d.inputs.row(4));
    EXPECT_EQ(v.labels[2], d.labels[6]);
}
