#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "sws/mixture.hpp"
#include "sws/postprocess.hpp"
#include "sws/trainer.hpp"

namespace sws {

/// Every tunable of a compression run. Read from a flat `key = value` file
/// ('#' starts a comment); command-line overrides go through set().
struct ExperimentConfig {
    ExperimentConfig() {
        pretrain.seed = seed + 1;
        train.seed = seed + 2;
        // Precision priors strong enough to outweigh the per-weight terms
        // (alpha acts like 2(alpha-1) pseudo-weights): std 0.01 for the
        // pruning component, std 0.05 for the rest.
        hyper.gamma_zero = {1.0e6, 100.0, true};
        hyper.gamma_rest = {5.0e4, 125.0, true};
    }

    std::string data_dir = "data/mnist";
    std::string output_dir = "out";
    std::string pretrained_path;  // reuse this checkpoint instead of pre-training
    std::vector<int> layers{784, 300, 100, 10};
    std::uint64_t seed = 42;
    Eigen::Index train_limit = 0;  // 0 = whole split
    Eigen::Index test_limit = 0;

    PretrainConfig pretrain;
    TrainConfig train;
    HyperPriorConfig hyper;
    MergeConfig merge;
    int components = 16;  // free components J
    double pi0 = 0.999;
    bool pi0_trainable = false;
    int p_fc = 5;
    int p_conv = 8;

    void set(std::string_view key, std::string_view value);
    void apply_text(std::string_view text);
    void validate() const;
    std::string to_text() const;

    static ExperimentConfig from_file(const std::string& path);
    static const std::vector<std::string>& keys();
};

}  // namespace sws
