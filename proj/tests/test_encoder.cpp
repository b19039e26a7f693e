#include <gtest/gtest.h>

#include "json.hpp"
#include "sws/encoder.hpp"
#include "sws/errors.hpp"
#include "sws/sparse.hpp"
#include "test_support.hpp"

using namespace sws;

namespace {

QuantizedNetwork random_quantized(Rng& rng, std::vector<int> sizes, double keep = 0.1, int means = 6) {
    QuantizedNetwork q;
    q.means.resize(means + 1);
    q.means[0] = 0.0;
    for (int k = 1; k <= means; ++k) q.means[k] = rng.normal() * 0.2 + (k % 2 ? 0.05 : -0.05);
    for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
        QuantizedLayer layer;
        layer.assignments.resize(sizes[l + 1], sizes[l]);
        for (Eigen::Index i = 0; i < layer.assignments.size(); ++i) {
            layer.assignments.data()[i] =
                rng.uniform() < keep ? static_cast<std::uint16_t>(1 + rng.below(static_cast<std::uint64_t>(means))) : 0;
        }
        layer.bias.resize(sizes[l + 1]);
        for (Eigen::Index i = 0; i < layer.bias.size(); ++i) layer.bias[i] = rng.normal();
        layer.activation = l + 2 == sizes.size() ? Activation::softmax : Activation::relu;
        q.layers.push_back(std::move(layer));
    }
    return q;
}

// Relative-index entries of one matrix (nonzeros plus fillers), counted row by row.
std::uint64_t relative_entries(const Eigen::MatrixXd& w, int p) {
    std::uint64_t entries = 0;
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
        std::int64_t prev = -1;
        for (Eigen::Index c = 0; c < w.cols(); ++c) {
            if (w(r, c) == 0.0) continue;
            std::int64_t gap = c - prev;
            while (gap > (std::int64_t{1} << p)) {
                ++entries;
                gap -= std::int64_t{1} << p;
            }
            ++entries;
            prev = c;
        }
    }
    return entries;
}

}  // namespace

TEST(Encoder, RoundTripReproducesQuantizedWeights) {
    Rng rng(1);
    for (int t = 0; t < 40; ++t) {
        const QuantizedNetwork q = random_quantized(rng, {40, 30, 20, 10}, rng.uniform(0.0, 0.6),
                                                    1 + static_cast<int>(rng.below(20)));
        const EncodedModel e = encode_network(q, 1 + static_cast<int>(rng.below(8)));
        const Network decoded = decode_network(e.blob);
        EXPECT_TRUE(decoded == q.reconstruct());
    }
}

TEST(Encoder, BitAccountingIsExact) {
    Rng rng(2);
    for (int t = 0; t < 20; ++t) {
        const QuantizedNetwork q = random_quantized(rng, {64, 32, 10}, rng.uniform(0.01, 0.3));
        const EncodedModel e = encode_network(q);
        const CompressionReport& r = e.report;
        EXPECT_EQ(r.blob_bits, 8 * e.blob.size());
        std::uint64_t sum = r.file_header_bits, bias = 0;
        for (const auto& l : r.layers) {
            sum += l.total_bits;
            bias += l.bias_bits;
            EXPECT_EQ(l.total_bits % 8, 0u);
        }
        EXPECT_EQ(sum, r.blob_bits);
        EXPECT_EQ(bias, r.bias_bits);
        EXPECT_EQ(r.weight_storage_bits, r.blob_bits - r.bias_bits);
        EXPECT_EQ(r.dense_bits, 32u * static_cast<std::uint64_t>(q.weight_count()));
        EXPECT_DOUBLE_EQ(r.compression_rate, static_cast<double>(r.dense_bits) / r.weight_storage_bits);
        EXPECT_DOUBLE_EQ(r.compression_rate_with_biases,
                         32.0 * static_cast<double>(r.weights + r.biases) / static_cast<double>(r.blob_bits));
        EXPECT_LT(r.payload_bits, r.weight_storage_bits);
        EXPECT_GT(r.compression_rate_without_overhead, r.compression_rate);
    }
}

TEST(Encoder, LayerStagesMatchIndependentCounts) {
    Rng rng(3);
    const QuantizedNetwork q = random_quantized(rng, {300, 100, 10}, 0.04);
    const Network dense = q.reconstruct();
    for (int p : {3, 5, 8}) {
        const EncodedModel e = encode_network(q, p);
        for (std::size_t l = 0; l < q.layers.size(); ++l) {
            const LayerReport& lr = e.report.layers[l];
            const Eigen::MatrixXd& w = dense.layers()[l].weights;
            const auto nnz = static_cast<Eigen::Index>((w.array() != 0.0).count());
            const std::uint64_t entries = relative_entries(w, p);
            EXPECT_EQ(lr.nonzero, nnz);
            EXPECT_EQ(lr.weights, w.size());
            EXPECT_EQ(static_cast<std::uint64_t>(lr.fillers), entries - static_cast<std::uint64_t>(nnz));
            EXPECT_EQ(lr.index_bits, p);
            EXPECT_EQ(lr.relative_ic_bits, entries * static_cast<std::uint64_t>(p));
            EXPECT_EQ(lr.row_ptr_bits, bits_for(entries));
            EXPECT_EQ(lr.reduced_ir_bits, static_cast<std::uint64_t>(w.rows() + 1) * bits_for(entries));
            EXPECT_EQ(lr.csr_a_bits, 32u * static_cast<std::uint64_t>(nnz));
            EXPECT_EQ(lr.csr_ir_bits, 32u * static_cast<std::uint64_t>(w.rows() + 1));
            EXPECT_DOUBLE_EQ(lr.naive_rate, naive_rate(to_csr(w)));
            EXPECT_DOUBLE_EQ(lr.pruned_fraction, 1.0 - static_cast<double>(nnz) / w.size());
            EXPECT_EQ(lr.codebook_table_bits, 64u * static_cast<std::uint64_t>(lr.codebook_size));
        }
    }
}

TEST(Encoder, FullyPrunedLayerCostsOnlyStructure) {
    Rng rng(4);
    QuantizedNetwork q = random_quantized(rng, {20, 10, 5}, 0.3);
    q.layers[0].assignments.setZero();
    const EncodedModel e = encode_network(q);
    const LayerReport& lr = e.report.layers[0];
    EXPECT_EQ(lr.nonzero, 0);
    EXPECT_EQ(lr.relative_ic_bits, 0u);
    EXPECT_EQ(lr.huffman_ic_bits, 0u);
    EXPECT_EQ(lr.huffman_a_bits, 0u);
    EXPECT_EQ(lr.codebook_size, 0);
    EXPECT_TRUE(decode_network(e.blob) == q.reconstruct());
}

TEST(Encoder, SparserNetworksCompressBetter) {
    Rng rng(5);
    const QuantizedNetwork dense = random_quantized(rng, {100, 50, 10}, 0.5);
    const QuantizedNetwork sparse = random_quantized(rng, {100, 50, 10}, 0.02);
    EXPECT_GT(encode_network(sparse).report.compression_rate, encode_network(dense).report.compression_rate);
}

TEST(Encoder, ReportJsonCarriesTotalsAndLayers) {
    Rng rng(6);
    const EncodedModel e = encode_network(random_quantized(rng, {30, 20, 10}, 0.1));
    const auto j = nlohmann::json::parse(e.report.to_json());
    EXPECT_EQ(j.at("weights").get<std::int64_t>(), e.report.weights);
    EXPECT_EQ(j.at("blob_bits").get<std::uint64_t>(), e.report.blob_bits);
    EXPECT_DOUBLE_EQ(j.at("compression_rate").get<double>(), e.report.compression_rate);
    ASSERT_EQ(j.at("layers").size(), 2u);
    EXPECT_EQ(j.at("layers")[1].at("nonzero").get<std::int64_t>(), e.report.layers[1].nonzero);
    EXPECT_TRUE(j.contains("error_before"));
    EXPECT_TRUE(j.contains("compression_rate_without_overhead"));
}

TEST(Encoder, DamagedBlobsAreRejected) {
    Rng rng(7);
    const EncodedModel e = encode_network(random_quantized(rng, {30, 20, 10}, 0.2));
    for (std::size_t cut = 0; cut < e.blob.size(); cut += 7) {
        const std::vector<std::uint8_t> part(e.blob.begin(), e.blob.begin() + static_cast<std::ptrdiff_t>(cut));
        EXPECT_THROW(decode_network(part), DataError) << "cut at " << cut;
    }
    auto magic = e.blob;
    magic[1] = 'Z';
    EXPECT_THROW(decode_network(magic), DataError);
    auto extra = e.blob;
    extra.push_back(1);
    EXPECT_THROW(decode_network(extra), CorruptionError);
    // random bit flips must never crash: either a DataError or some network
    for (int t = 0; t < 300; ++t) {
        auto flipped = e.blob;
        flipped[rng.below(flipped.size())] ^= static_cast<std::uint8_t>(1u << rng.below(8));
        try {
            (void)decode_network(flipped);
        } catch (const DataError&) {
        } catch (const ConfigError&) {
        }
    }
}

TEST(Encoder, RejectsBadWidths) {
    Rng rng(8);
    const QuantizedNetwork q = random_quantized(rng, {10, 5}, 0.2);
    EXPECT_THROW(encode_network(q, 0), ConfigError);
    EXPECT_THROW(encode_network(q, 17), ConfigError);
}
