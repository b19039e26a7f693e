#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "sws/errors.hpp"
#include "sws/mixture.hpp"
#include "sws/network.hpp"

namespace sws {

/// Weighted Gaussian component: mixing proportion, mean, variance.
template <typename Scalar>
struct ComponentStats {
    Scalar weight;
    Scalar mean;
    Scalar variance;
};

/// KL(N(mu_p, var_p) || N(mu_q, var_q)) for univariate Gaussians.
template <typename Scalar>
Scalar kl_gaussian(Scalar mean_p, Scalar var_p, Scalar mean_q, Scalar var_q) {
    using std::log;
    if (!(var_p > Scalar(0)) || !(var_q > Scalar(0))) throw DomainError("KL needs positive variances");
    const Scalar d = mean_p - mean_q;
    return Scalar(0.5) * (log(var_q / var_p) + (var_p + d * d) / var_q - Scalar(1));
}

template <typename Scalar>
Scalar symmetric_kl(Scalar mean_p, Scalar var_p, Scalar mean_q, Scalar var_q) {
    return kl_gaussian(mean_p, var_p, mean_q, var_q) + kl_gaussian(mean_q, var_q, mean_p, var_p);
}

/// Moment-preserving merge of two weighted components.
template <typename Scalar>
ComponentStats<Scalar> merge_stats(const ComponentStats<Scalar>& a, const ComponentStats<Scalar>& b) {
    const Scalar w = a.weight + b.weight;
    return {w, (a.weight * a.mean + b.weight * b.mean) / w,
            (a.weight * a.variance + b.weight * b.variance) / w};
}

struct MergeConfig {
    double kl_threshold = 1e-2;  // on KL(i||j) + KL(j||i)
    int max_passes = 1000;       // upper bound on merges
    double zero_snap = 1e-4;     // |mu| below which a merge into component 0 is allowed

    void validate() const;
};

/// Merges components i and j into the lower index. Merging with the zero
/// component is only allowed when the merged mean would lie within
/// `zero_snap` of 0; the mean is then reset to exactly 0.
MixtureModel merge_components(const MixtureModel& m, Eigen::Index i, Eigen::Index j,
                              double zero_snap = 1e-4);

struct MergeRecord {
    Eigen::Index kept;
    Eigen::Index removed;
    double divergence;
};

/// Repeatedly merges the closest pair (smallest symmetrised KL, ties to
/// the lower index pair) while it is below the threshold.
MixtureModel merge_pass(const MixtureModel& m, const MergeConfig& cfg,
                        std::vector<MergeRecord>* log = nullptr);

using AssignmentMatrix = Eigen::Matrix<std::uint16_t, Eigen::Dynamic, Eigen::Dynamic>;

struct QuantizedLayer {
    AssignmentMatrix assignments;  // component index per weight, out x in
    Eigen::VectorXd bias;
    Activation activation = Activation::relu;
};

/// Weights as component indices into a shared mean table. Index 0 is the
/// zero component, i.e. a pruned weight.
struct QuantizedNetwork {
    std::vector<QuantizedLayer> layers;
    Eigen::VectorXd means;  // means(0) == 0

    void validate() const;
    Network reconstruct() const;

    Eigen::Index weight_count() const;
    Eigen::Index pruned_count() const;
    std::vector<double> pruned_fraction_per_layer() const;

    std::vector<std::uint8_t> serialize() const;
    static QuantizedNetwork deserialize(std::span<const std::uint8_t> bytes);

    bool operator==(const QuantizedNetwork& other) const;
};

/// Replaces every weight by the mean of its maximum-responsibility component.
QuantizedNetwork quantize(const Network& net, const MixtureModel& m);

}  // namespace sws
