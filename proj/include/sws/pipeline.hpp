#pragma once

#include <filesystem>
#include <vector>

#include "sws/checkpoint.hpp"
#include "sws/config.hpp"
#include "sws/encoder.hpp"
#include "sws/mnist.hpp"
#include "sws/postprocess.hpp"

namespace sws {

/// Fixed artifact names under the output directory.
struct ArtifactPaths {
    std::filesystem::path dir;

    std::filesystem::path pretrained() const { return dir / "pretrained.swsc"; }
    std::filesystem::path model() const { return dir / "model.swsc"; }
    std::filesystem::path trace() const { return dir / "trace.csv"; }
    std::filesystem::path quantized() const { return dir / "quantized.bin"; }
    std::filesystem::path blob() const { return dir / "weights.swsb"; }
    std::filesystem::path report() const { return dir / "report.json"; }
    std::filesystem::path config() const { return dir / "config.txt"; }
};

/// MNIST with train_limit / test_limit applied.
MnistDataset load_experiment_data(const ExperimentConfig& cfg);

/// Pre-trains (or loads cfg.pretrained_path) and writes pretrained.swsc.
Network stage_pretrain(const ExperimentConfig& cfg, const MnistDataset& data);

struct CompressOutcome {
    Network retrained;
    MixtureModel trained_mixture;
    MixtureModel merged_mixture;
    std::vector<MergeRecord> merges;
    QuantizedNetwork quantized;
    std::vector<TraceRow> trace;
};

/// Retrains under the mixture prior, merges and quantizes. Writes
/// model.swsc (with mixture block), trace.csv and quantized.bin.
CompressOutcome stage_compress(const ExperimentConfig& cfg, const MnistDataset& data, const Network& pretrained);

/// Encodes quantized.bin into weights.swsb and writes report.json. Errors
/// are measured on the pretrained checkpoint and on the decoded blob.
CompressionReport stage_encode(const ExperimentConfig& cfg, const MnistDataset& data,
                               const QuantizedNetwork& quantized, int components_before_merge);

struct PipelineResult {
    Network pretrained;
    CompressOutcome compress;
    CompressionReport report;
};

PipelineResult run_pipeline(const ExperimentConfig& cfg);

}  // namespace sws
