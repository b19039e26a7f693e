#include "sws/pipeline.hpp"

#include <fstream>
#include <iostream>

#include "sws/binary_io.hpp"
#include "sws/errors.hpp"

namespace sws {

namespace {

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + path.string());
    out << text;
}

Dataset head(const Dataset& d, Eigen::Index limit) {
    if (limit <= 0 || limit >= d.size()) return d;
    Dataset out;
    out.inputs = d.inputs.topRows(limit);
    out.labels.assign(d.labels.begin(), d.labels.begin() + limit);
    return out;
}

/// Re-throws stage failures with the stage name, keeping the error category.
template <typename F>
auto run_stage(const char* name, F&& body) -> decltype(body()) {
    try {
        return body();
    } catch (const DivergenceError&) {
        throw;
    } catch (const ConfigError& e) {
        throw ConfigError(std::string(name) + ": " + e.what());
    } catch (const CorruptionError& e) {
        throw CorruptionError(std::string(name) + ": " + e.what());
    } catch (const DataError& e) {
        throw DataError(std::string(name) + ": " + e.what());
    } catch (const NumericError& e) {
        throw NumericError(std::string(name) + ": " + e.what());
    }
}

void log_epoch(const char* stage, const TraceRow& row) {
    std::clog << stage << " epoch " << row.epoch << ": error loss " << row.error_loss;
    if (row.means.size() > 0) std::clog << ", complexity " << row.complexity_loss;
    std::clog << ", test error " << row.test_error << '\n';
}

}  // namespace

MnistDataset load_experiment_data(const ExperimentConfig& cfg) {
    return run_stage("load", [&] {
        MnistDataset ds = load_mnist(cfg.data_dir);
        ds.train = head(ds.train, cfg.train_limit);
        ds.test = head(ds.test, cfg.test_limit);
        return ds;
    });
}

Network stage_pretrain(const ExperimentConfig& cfg, const MnistDataset& data) {
    return run_stage("pretrain", [&] {
        cfg.validate();
        const ArtifactPaths paths{cfg.output_dir};
        std::filesystem::create_directories(paths.dir);
        Network net;
        if (!cfg.pretrained_path.empty()) {
            net = load_checkpoint(cfg.pretrained_path).network;
        } else {
            net = Network::dense(cfg.layers, cfg.seed);
            net = pretrain(std::move(net), data.train, cfg.pretrain, &data.test,
                           [](const TraceRow& r) { log_epoch("pretrain", r); });
        }
        save_checkpoint(paths.pretrained().string(), net);
        return net;
    });
}

CompressOutcome stage_compress(const ExperimentConfig& cfg, const MnistDataset& data, const Network& pretrained) {
    return run_stage("compress", [&] {
        cfg.validate();
        const ArtifactPaths paths{cfg.output_dir};
        std::filesystem::create_directories(paths.dir);

        Eigen::ArrayXd flat(pretrained.weight_count());
        Eigen::Index at = 0;
        for (const auto& layer : pretrained.layers()) {
            flat.segment(at, layer.weights.size()) =
                Eigen::Map<const Eigen::ArrayXd>(layer.weights.data(), layer.weights.size());
            at += layer.weights.size();
        }
        MixtureModel mixture = init_mixture(flat, cfg.components, cfg.pi0, cfg.pretrain.weight_decay,
                                            cfg.pi0_trainable ? ZeroMixing::trainable : ZeroMixing::fixed);

        CompressOutcome out;
        try {
            RetrainResult r = retrain(pretrained, std::move(mixture), cfg.hyper, data.train, cfg.train, &data.test,
                                      [](const TraceRow& row) { log_epoch("retrain", row); });
            out.retrained = std::move(r.network);
            out.trained_mixture = std::move(r.mixture);
            out.trace = std::move(r.trace);
        } catch (const DivergenceError& e) {
            save_checkpoint(paths.model().string(), e.last_good_network, &e.last_good_mixture, &cfg.hyper);
            throw;
        }
        save_checkpoint(paths.model().string(), out.retrained, &out.trained_mixture, &cfg.hyper);
        write_text(paths.trace(), trace_csv(out.trace));

        out.merged_mixture = merge_pass(out.trained_mixture, cfg.merge, &out.merges);
        out.quantized = quantize(out.retrained, out.merged_mixture);
        write_file(paths.quantized().string(), out.quantized.serialize());
        std::clog << "compress: " << out.trained_mixture.components() << " components, "
                  << out.merged_mixture.components() << " after merging\n";
        return out;
    });
}

CompressionReport stage_encode(const ExperimentConfig& cfg, const MnistDataset& data,
                               const QuantizedNetwork& quantized, int components_before_merge) {
    return run_stage("encode", [&] {
        cfg.validate();
        const ArtifactPaths paths{cfg.output_dir};
        EncodedModel enc = encode_network(quantized, cfg.p_fc, cfg.p_conv);
        write_file(paths.blob().string(), enc.blob);

        const Network before = load_checkpoint(paths.pretrained().string()).network;
        const Network after = decode_network(read_file(paths.blob().string()));
        enc.report.error_before = evaluate(before, data.test);
        enc.report.error_after = evaluate(after, data.test);
        enc.report.components_before_merge = components_before_merge;
        write_text(paths.report(), enc.report.to_json());
        return enc.report;
    });
}

PipelineResult run_pipeline(const ExperimentConfig& cfg) {
    cfg.validate();
    const ArtifactPaths paths{cfg.output_dir};
    std::filesystem::create_directories(paths.dir);
    write_text(paths.config(), cfg.to_text());

    const MnistDataset data = load_experiment_data(cfg);
    PipelineResult result;
    result.pretrained = stage_pretrain(cfg, data);
    result.compress = stage_compress(cfg, data, result.pretrained);
    result.report = stage_encode(cfg, data, result.compress.quantized,
                                 static_cast<int>(result.compress.trained_mixture.components()));
    return result;
}

}  // namespace sws
