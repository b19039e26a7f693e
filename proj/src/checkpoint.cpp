#include "sws/checkpoint.hpp"

#include "sws/binary_io.hpp"
#include "sws/errors.hpp"

namespace sws {

namespace {

constexpr std::uint16_t kCheckpointVersion = 1;

enum MixtureFlags : std::uint8_t {
    kPi0Trainable = 1u << 0,
    kGammaZero = 1u << 1,
    kGammaRest = 1u << 2,
    kBetaPi0 = 1u << 3,
    kTauScalesHyper = 1u << 4,
};

}  // namespace

std::vector<std::uint8_t> serialize_checkpoint(const Network& net, const MixtureModel* mixture,
                                               const HyperPriorConfig* hyper) {
    net.validate();
    ByteWriter out;
    out.tag("SWSC");
    out.u16(kCheckpointVersion);
    out.u32(static_cast<std::uint32_t>(net.depth()));
    for (const auto& layer : net.layers()) {
        out.u32(static_cast<std::uint32_t>(layer.weights.rows()));
        out.u32(static_cast<std::uint32_t>(layer.weights.cols()));
        out.u8(static_cast<std::uint8_t>(layer.activation));
        for (Eigen::Index r = 0; r < layer.weights.rows(); ++r) {
            for (Eigen::Index c = 0; c < layer.weights.cols(); ++c) out.f64(layer.weights(r, c));
        }
        for (Eigen::Index r = 0; r < layer.bias.size(); ++r) out.f64(layer.bias(r));
    }
    if (mixture) {
        mixture->validate();
        const HyperPriorConfig h = hyper ? *hyper : HyperPriorConfig{};
        out.u32(static_cast<std::uint32_t>(mixture->components()));
        for (Eigen::Index j = 0; j < mixture->components(); ++j) {
            out.f64(mixture->means(j));
            out.f64(mixture->log_vars(j));
            out.f64(mixture->logits(j));
        }
        std::uint8_t flags = 0;
        if (mixture->zero_mode == ZeroMixing::trainable) flags |= kPi0Trainable;
        if (h.gamma_zero.enabled) flags |= kGammaZero;
        if (h.gamma_rest.enabled) flags |= kGammaRest;
        if (h.beta_pi0.enabled) flags |= kBetaPi0;
        if (h.tau_scales_hyperprior) flags |= kTauScalesHyper;
        out.u8(flags);
        out.f64(mixture->pi0_fixed);
        out.f64(mixture->tau);
        for (double v : {h.gamma_zero.alpha, h.gamma_zero.beta, h.gamma_rest.alpha, h.gamma_rest.beta,
                         h.beta_pi0.alpha, h.beta_pi0.beta}) {
            out.f64(v);
        }
    }
    return out.release();
}

Checkpoint parse_checkpoint(std::span<const std::uint8_t> bytes) {
    ByteReader in(bytes, "checkpoint");
    in.expect_tag("SWSC");
    if (in.u16() != kCheckpointVersion) throw DataError("checkpoint: unsupported version");
    const std::uint32_t depth = in.u32();
    std::vector<Layer> layers;
    for (std::uint32_t l = 0; l < depth; ++l) {
        Layer layer;
        const std::uint32_t rows = in.u32();
        const std::uint32_t cols = in.u32();
        const std::uint8_t act = in.u8();
        if (act > 1) throw CorruptionError("checkpoint: bad activation tag");
        layer.activation = static_cast<Activation>(act);
        layer.weights.resize(rows, cols);
        for (std::uint32_t r = 0; r < rows; ++r) {
            for (std::uint32_t c = 0; c < cols; ++c) layer.weights(r, c) = in.f64();
        }
        layer.bias.resize(rows);
        for (std::uint32_t r = 0; r < rows; ++r) layer.bias(r) = in.f64();
        layers.push_back(std::move(layer));
    }
    Checkpoint ck;
    try {
        ck.network = Network(std::move(layers));
    } catch (const ConfigError& e) {
        throw CorruptionError(std::string("checkpoint: ") + e.what());
    }
    if (in.at_end()) return ck;

    MixtureModel m;
    const std::uint32_t c = in.u32();
    m.means.resize(c);
    m.log_vars.resize(c);
    m.logits.resize(c);
    for (std::uint32_t j = 0; j < c; ++j) {
        m.means(j) = in.f64();
        m.log_vars(j) = in.f64();
        m.logits(j) = in.f64();
    }
    const std::uint8_t flags = in.u8();
    m.zero_mode = (flags & kPi0Trainable) ? ZeroMixing::trainable : ZeroMixing::fixed;
    m.pi0_fixed = in.f64();
    m.tau = in.f64();
    ck.hyper.gamma_zero = {in.f64(), in.f64(), (flags & kGammaZero) != 0};
    ck.hyper.gamma_rest = {in.f64(), in.f64(), (flags & kGammaRest) != 0};
    ck.hyper.beta_pi0 = {in.f64(), in.f64(), (flags & kBetaPi0) != 0};
    ck.hyper.tau_scales_hyperprior = (flags & kTauScalesHyper) != 0;
    if (!in.at_end()) throw CorruptionError("checkpoint: trailing bytes after mixture block");
    try {
        m.validate();
    } catch (const ConfigError& e) {
        throw CorruptionError(std::string("checkpoint mixture: ") + e.what());
    }
    ck.mixture = std::move(m);
    return ck;
}

void save_checkpoint(const std::string& path, const Network& net, const MixtureModel* mixture,
                     const HyperPriorConfig* hyper) {
    write_file(path, serialize_checkpoint(net, mixture, hyper));
}

Checkpoint load_checkpoint(const std::string& path) {
    const auto bytes = read_file(path);
    try {
        return parse_checkpoint(bytes);
    } catch (const DataError& e) {
        throw DataError(path + ": " + e.what());
    }
}

}  // namespace sws
