// sws: soft weight-sharing compression driver.
//
//   sws run --data /path/to/mnist --out runs/a
//   sws compress --config exp.cfg --set tau=0.01 --set epochs=20
//   sws report --out runs/a

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "sws/binary_io.hpp"
#include "sws/errors.hpp"
#include "sws/pipeline.hpp"

namespace {

struct Options {
    std::string config_path;
    std::vector<std::string> overrides;
    std::string data_dir;
    std::string out_dir;
    std::optional<std::uint64_t> seed;
};

sws::ExperimentConfig build_config(const Options& o) {
    sws::ExperimentConfig cfg;
    if (!o.config_path.empty()) cfg = sws::ExperimentConfig::from_file(o.config_path);
    for (const auto& kv : o.overrides) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw sws::ConfigError("--set expects key=value, got '" + kv + "'");
        cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (!o.data_dir.empty()) cfg.data_dir = o.data_dir;
    if (!o.out_dir.empty()) cfg.output_dir = o.out_dir;
    if (o.seed) cfg.set("seed", std::to_string(*o.seed));
    cfg.validate();
    return cfg;
}

void print_summary(const sws::CompressionReport& r) {
    std::cout << "error before: " << 100.0 * r.error_before << " %\n"
              << "error after:  " << 100.0 * r.error_after << " %\n"
              << "nonzero:      " << r.nonzero << " / " << r.weights << " (" << 100.0 * r.nonzero_fraction()
              << " %)\n"
              << "components:   " << r.components << " (before merge " << r.components_before_merge << ")\n"
              << "CR:           " << r.compression_rate << " (payload only " << r.compression_rate_without_overhead
              << ", with biases " << r.compression_rate_with_biases << ")\n";
}

int run(const std::string& cmd, const Options& o) {
    const sws::ExperimentConfig cfg = build_config(o);
    const sws::ArtifactPaths paths{cfg.output_dir};

    if (cmd == "run") {
        print_summary(sws::run_pipeline(cfg).report);
        return 0;
    }
    if (cmd == "report") {
        std::ifstream in(paths.report());
        if (!in) throw sws::DataError("cannot read " + paths.report().string());
        std::cout << in.rdbuf() << '\n';
        return 0;
    }

    std::filesystem::create_directories(paths.dir);
    const sws::MnistDataset data = sws::load_experiment_data(cfg);
    if (cmd == "pretrain") {
        const sws::Network net = sws::stage_pretrain(cfg, data);
        std::cout << "test error: " << 100.0 * sws::evaluate(net, data.test) << " %\n";
    } else if (cmd == "compress") {
        sws::Network pre = std::filesystem::exists(paths.pretrained()) && cfg.pretrained_path.empty()
                               ? sws::load_checkpoint(paths.pretrained().string()).network
                               : sws::stage_pretrain(cfg, data);
        const sws::CompressOutcome c = sws::stage_compress(cfg, data, pre);
        std::cout << "components: " << c.trained_mixture.components() << " -> " << c.merged_mixture.components()
                  << "\npruned:     " << 100.0 * static_cast<double>(c.quantized.pruned_count()) /
                                                      c.quantized.weight_count()
                  << " %\n";
    } else if (cmd == "encode") {
        const auto q = sws::QuantizedNetwork::deserialize(sws::read_file(paths.quantized().string()));
        int before = 0;
        if (std::filesystem::exists(paths.model())) {
            const auto ck = sws::load_checkpoint(paths.model().string());
            if (ck.mixture) before = static_cast<int>(ck.mixture->components());
        }
        print_summary(sws::stage_encode(cfg, data, q, before));
    } else if (cmd == "eval") {
        const auto net = sws::decode_network(sws::read_file(paths.blob().string()));
        std::cout << "test error: " << 100.0 * sws::evaluate(net, data.test) << " %\n";
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Soft weight-sharing compression of dense networks"};
    app.require_subcommand(1);
    Options opts;
    const std::vector<std::pair<std::string, std::string>> commands{
        {"pretrain", "Train the reference network"},
        {"compress", "Retrain under the mixture prior, merge components and quantize"},
        {"encode", "Write the sparse Huffman blob and report.json"},
        {"eval", "Test error of the decoded blob"},
        {"report", "Print report.json"},
        {"run", "pretrain + compress + encode"},
    };
    for (const auto& [name, help] : commands) {
        auto* sub = app.add_subcommand(name, help);
        sub->add_option("--config", opts.config_path, "key = value file")->check(CLI::ExistingFile);
        sub->add_option("--set", opts.overrides, "Override one key (key=value), repeatable");
        sub->add_option("--data", opts.data_dir, "MNIST directory");
        sub->add_option("--out", opts.out_dir, "Output directory");
        sub->add_option("--seed", opts.seed, "Master seed");
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    const std::string cmd = app.get_subcommands().front()->get_name();
    try {
        return run(cmd, opts);
    } catch (const sws::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const sws::DataError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return 3;
    } catch (const sws::NumericError& e) {
        std::cerr << "numeric error: " << e.what() << '\n';
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
