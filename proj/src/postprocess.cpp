#include "sws/postprocess.hpp"

#include <limits>
#include <string>

#include "sws/binary_io.hpp"

namespace sws {

namespace {

constexpr std::uint16_t kQuantizedVersion = 1;

Eigen::VectorXd drop(const Eigen::VectorXd& v, Eigen::Index k) {
    Eigen::VectorXd out(v.size() - 1);
    out << v.head(k), v.tail(v.size() - k - 1);
    return out;
}

}  // namespace

void MergeConfig::validate() const {
    if (!std::isfinite(kl_threshold) || kl_threshold < 0.0) throw ConfigError("KL threshold must be finite and >= 0");
    if (max_passes < 0) throw ConfigError("max_passes must be >= 0");
}

MixtureModel merge_components(const MixtureModel& m, Eigen::Index i, Eigen::Index j, double zero_snap) {
    m.validate();
    if (i == j) throw ConfigError("cannot merge a component with itself");
    if (i < 0 || j < 0 || i >= m.components() || j >= m.components()) {
        throw ConfigError("merge index out of range");
    }
    if (i > j) std::swap(i, j);
    if (m.components() <= 2) throw ConfigError("merge would leave no free component");

    const Eigen::VectorXd pi = m.mixing();
    const Eigen::VectorXd var = m.variances();
    ComponentStats<double> merged =
        merge_stats<double>({pi(i), m.means(i), var(i)}, {pi(j), m.means(j), var(j)});
    if (i == 0) {
        if (!(std::abs(merged.mean) < zero_snap)) {
            throw DomainError("merging component " + std::to_string(j) +
                              " into the zero component would move its mean to " + std::to_string(merged.mean));
        }
        merged.mean = 0.0;
    }

    MixtureModel out = m;
    Eigen::VectorXd new_pi = pi;
    new_pi(i) = merged.weight;
    out.means(i) = merged.mean;
    out.log_vars(i) = std::log(merged.variance);
    out.means = drop(out.means, j);
    out.log_vars = drop(out.log_vars, j);
    new_pi = drop(new_pi, j);

    // re-express the proportions in the model's logit parameterisation
    out.logits = new_pi.array().log().matrix();
    if (m.zero_mode == ZeroMixing::fixed) out.pi0_fixed = new_pi(0);
    return out;
}

MixtureModel merge_pass(const MixtureModel& m, const MergeConfig& cfg, std::vector<MergeRecord>* log) {
    cfg.validate();
    MixtureModel cur = m;
    for (int pass = 0; pass < cfg.max_passes && cur.components() > 2; ++pass) {
        const Eigen::VectorXd var = cur.variances();
        const Eigen::VectorXd pi = cur.mixing();
        double best = std::numeric_limits<double>::infinity();
        Eigen::Index bi = -1;
        Eigen::Index bj = -1;
        for (Eigen::Index i = 0; i < cur.components(); ++i) {
            for (Eigen::Index j = i + 1; j < cur.components(); ++j) {
                const double d = symmetric_kl(cur.means(i), var(i), cur.means(j), var(j));
                if (!(d < best)) continue;
                if (i == 0) {
                    const double mean = (pi(i) * cur.means(i) + pi(j) * cur.means(j)) / (pi(i) + pi(j));
                    if (!(std::abs(mean) < cfg.zero_snap)) continue;
                }
                best = d;
                bi = i;
                bj = j;
            }
        }
        if (bi < 0 || !(best < cfg.kl_threshold)) break;
        cur = merge_components(cur, bi, bj, cfg.zero_snap);
        if (log) log->push_back({bi, bj, best});
    }
    return cur;
}

void QuantizedNetwork::validate() const {
    if (means.size() < 1 || means(0) != 0.0) throw ConfigError("mean table must start with the zero component");
    for (std::size_t l = 0; l < layers.size(); ++l) {
        const auto& layer = layers[l];
        if (layer.bias.size() != layer.assignments.rows()) {
            throw ConfigError("quantized layer " + std::to_string(l) + ": bias length mismatch");
        }
        if (layer.assignments.size() > 0 && layer.assignments.maxCoeff() >= means.size()) {
            throw ConfigError("quantized layer " + std::to_string(l) + ": assignment out of range");
        }
    }
}

Network QuantizedNetwork::reconstruct() const {
    validate();
    std::vector<Layer> out;
    for (const auto& q : layers) {
        Layer layer;
        layer.weights = q.assignments.unaryExpr([this](std::uint16_t k) { return means(k); });
        layer.bias = q.bias;
        layer.activation = q.activation;
        out.push_back(std::move(layer));
    }
    return Network(std::move(out));
}

Eigen::Index QuantizedNetwork::weight_count() const {
    Eigen::Index n = 0;
    for (const auto& l : layers) n += l.assignments.size();
    return n;
}

Eigen::Index QuantizedNetwork::pruned_count() const {
    Eigen::Index n = 0;
    for (const auto& l : layers) n += (l.assignments.array() == 0).count();
    return n;
}

std::vector<double> QuantizedNetwork::pruned_fraction_per_layer() const {
    std::vector<double> out;
    for (const auto& l : layers) {
        const auto total = static_cast<double>(l.assignments.size());
        out.push_back(total > 0 ? static_cast<double>((l.assignments.array() == 0).count()) / total : 0.0);
    }
    return out;
}

bool QuantizedNetwork::operator==(const QuantizedNetwork& other) const {
    if (means.size() != other.means.size() || means != other.means || layers.size() != other.layers.size()) {
        return false;
    }
    for (std::size_t l = 0; l < layers.size(); ++l) {
        const auto& a = layers[l];
        const auto& b = other.layers[l];
        if (a.activation != b.activation || a.assignments.rows() != b.assignments.rows() ||
            a.assignments.cols() != b.assignments.cols() || a.assignments != b.assignments || a.bias != b.bias) {
            return false;
        }
    }
    return true;
}

std::vector<std::uint8_t> QuantizedNetwork::serialize() const {
    validate();
    ByteWriter out;
    out.tag("SWSQ");
    out.u16(kQuantizedVersion);
    out.u16(static_cast<std::uint16_t>(layers.size()));
    out.u16(static_cast<std::uint16_t>(means.size()));
    for (Eigen::Index k = 0; k < means.size(); ++k) out.f64(means(k));
    const std::uint8_t width = means.size() <= 256 ? 1 : 2;
    for (const auto& layer : layers) {
        out.u32(static_cast<std::uint32_t>(layer.assignments.rows()));
        out.u32(static_cast<std::uint32_t>(layer.assignments.cols()));
        out.u8(static_cast<std::uint8_t>(layer.activation));
        out.u8(width);
        for (Eigen::Index r = 0; r < layer.assignments.rows(); ++r) {
            for (Eigen::Index c = 0; c < layer.assignments.cols(); ++c) {
                const std::uint16_t k = layer.assignments(r, c);
                if (width == 1) {
                    out.u8(static_cast<std::uint8_t>(k));
                } else {
                    out.u16(k);
                }
            }
        }
        for (Eigen::Index r = 0; r < layer.bias.size(); ++r) out.f64(layer.bias(r));
    }
    return out.release();
}

QuantizedNetwork QuantizedNetwork::deserialize(std::span<const std::uint8_t> bytes) {
    ByteReader in(bytes, "quantized network");
    in.expect_tag("SWSQ");
    if (in.u16() != kQuantizedVersion) throw DataError("quantized network: unsupported version");
    const std::uint16_t layer_count = in.u16();
    QuantizedNetwork q;
    q.means.resize(in.u16());
    for (Eigen::Index k = 0; k < q.means.size(); ++k) q.means(k) = in.f64();
    for (std::uint16_t l = 0; l < layer_count; ++l) {
        QuantizedLayer layer;
        const std::uint32_t rows = in.u32();
        const std::uint32_t cols = in.u32();
        const std::uint8_t act = in.u8();
        if (act > 1) throw CorruptionError("quantized network: bad activation tag");
        layer.activation = static_cast<Activation>(act);
        const std::uint8_t width = in.u8();
        if (width != 1 && width != 2) throw CorruptionError("quantized network: bad assignment width");
        layer.assignments.resize(rows, cols);
        for (std::uint32_t r = 0; r < rows; ++r) {
            for (std::uint32_t c = 0; c < cols; ++c) layer.assignments(r, c) = width == 1 ? in.u8() : in.u16();
        }
        layer.bias.resize(rows);
        for (std::uint32_t r = 0; r < rows; ++r) layer.bias(r) = in.f64();
        q.layers.push_back(std::move(layer));
    }
    if (!in.at_end()) throw CorruptionError("quantized network: trailing bytes");
    try {
        q.validate();
    } catch (const ConfigError& e) {
        throw CorruptionError(std::string("quantized network: ") + e.what());
    }
    return q;
}

QuantizedNetwork quantize(const Network& net, const MixtureModel& m) {
    m.validate();
    QuantizedNetwork q;
    q.means = m.means;
    for (const auto& layer : net.layers()) {
        QuantizedLayer ql;
        const Eigen::Map<const Eigen::ArrayXd> w(layer.weights.data(), layer.weights.size());
        const std::vector<std::uint16_t> idx = argmax_components(w, m);
        ql.assignments = Eigen::Map<const AssignmentMatrix>(idx.data(), layer.weights.rows(), layer.weights.cols());
        ql.bias = layer.bias;
        ql.activation = layer.activation;
        q.layers.push_back(std::move(ql));
    }
    return q;
}

}  // namespace sws
