#pragma once

#include <cstdint>

#include <Eigen/Dense>

namespace sws {

struct AdamParams {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

/// Moment accumulators for one parameter tensor.
struct AdamState {
    Eigen::ArrayXd first;
    Eigen::ArrayXd second;
    std::int64_t step = 0;

    AdamState() = default;
    explicit AdamState(Eigen::Index size)
        : first(Eigen::ArrayXd::Zero(size)), second(Eigen::ArrayXd::Zero(size)) {}
};

/// Bias-corrected Adam update, minimising: params -= lr * m_hat / (sqrt(v_hat) + eps).
void adam_step(AdamState& state, Eigen::Ref<Eigen::ArrayXd> params,
               const Eigen::Ref<const Eigen::ArrayXd>& grads, double lr, const AdamParams& hp = {});

}  // namespace sws
