#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "sws/network.hpp"
#include "sws/postprocess.hpp"

namespace sws {

enum class LayerKind : std::uint8_t { fully_connected = 0, convolutional = 1 };

/// Bit counts for one layer through each storage stage.
struct LayerReport {
    Eigen::Index rows = 0;
    Eigen::Index cols = 0;
    Eigen::Index weights = 0;
    Eigen::Index nonzero = 0;
    Eigen::Index fillers = 0;
    double pruned_fraction = 0.0;
    int index_bits = 0;        // p
    int row_ptr_bits = 0;      // p_prun
    int codebook_size = 0;
    int codebook_index_bits = 0;
    double naive_rate = 0.0;

    // plain CSR at 32 bits per entry
    std::uint64_t csr_a_bits = 0;
    std::uint64_t csr_ir_bits = 0;
    std::uint64_t csr_ic_bits = 0;
    // IR at p_prun bits
    std::uint64_t reduced_ir_bits = 0;
    // relative indexing (fillers included)
    std::uint64_t relative_ic_bits = 0;
    std::uint64_t relative_a_bits = 0;
    // codebook indices for A plus the full-precision table
    std::uint64_t codebook_a_bits = 0;
    std::uint64_t codebook_table_bits = 0;
    // Huffman payloads (unpadded) and their length tables
    std::uint64_t huffman_ic_bits = 0;
    std::uint64_t huffman_a_bits = 0;
    std::uint64_t huffman_table_bits = 0;
    // everything else written for the layer
    std::uint64_t header_bits = 0;
    std::uint64_t padding_bits = 0;
    std::uint64_t bias_bits = 0;
    std::uint64_t total_bits = 0;  // all bytes of the layer record, biases included
};

struct CompressionReport {
    std::vector<LayerReport> layers;
    Eigen::Index weights = 0;
    Eigen::Index nonzero = 0;
    Eigen::Index biases = 0;
    int components = 0;
    std::uint64_t file_header_bits = 0;
    std::uint64_t blob_bits = 0;            // 8 * blob size
    std::uint64_t bias_bits = 0;
    std::uint64_t weight_storage_bits = 0;  // blob_bits - bias_bits
    std::uint64_t payload_bits = 0;         // IR + Huffman payloads, no tables/headers/padding
    std::uint64_t dense_bits = 0;           // 32 * |W|
    double naive_rate = 0.0;
    double compression_rate = 0.0;                   // dense_bits / weight_storage_bits
    double compression_rate_without_overhead = 0.0;  // dense_bits / payload_bits
    double compression_rate_with_biases = 0.0;       // 32 (|W| + |b|) / blob_bits
    double error_before = -1.0;
    double error_after = -1.0;
    int components_before_merge = 0;

    double nonzero_fraction() const { return weights ? static_cast<double>(nonzero) / weights : 0.0; }
    std::string to_json() const;
};

struct EncodedModel {
    std::vector<std::uint8_t> blob;
    CompressionReport report;
};

/// Sparse storage: CSR -> relative indexing -> codebook -> Huffman, per layer.
/// `fc_bits` / `conv_bits` select the relative-index width per layer kind.
EncodedModel encode_network(const QuantizedNetwork& q, int fc_bits = 5, int conv_bits = 8);

/// Inverse of encode_network; biases and activations are restored exactly.
Network decode_network(std::span<const std::uint8_t> blob);

}  // namespace sws
