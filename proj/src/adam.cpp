#include "sws/adam.hpp"

#include <cmath>

#include "sws/errors.hpp"

namespace sws {

void adam_step(AdamState& state, Eigen::Ref<Eigen::ArrayXd> params,
               const Eigen::Ref<const Eigen::ArrayXd>& grads, double lr, const AdamParams& hp) {
    if (params.size() != grads.size() || state.first.size() != params.size()) {
        throw ConfigError("adam_step: parameter, gradient and state sizes differ");
    }
    ++state.step;
    state.first = hp.beta1 * state.first + (1.0 - hp.beta1) * grads;
    state.second = hp.beta2 * state.second + (1.0 - hp.beta2) * grads.square();
    const double t = static_cast<double>(state.step);
    const double c1 = 1.0 - std::pow(hp.beta1, t);
    const double c2 = 1.0 - std::pow(hp.beta2, t);
    params -= lr * (state.first / c1) / ((state.second / c2).sqrt() + hp.epsilon);
}

}  // namespace sws
