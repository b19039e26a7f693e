#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace sws {

/// Compressed sparse row storage: values A, cumulative row counts IR
/// (rows + 1 entries) and column indices IC.
struct CsrMatrix {
    Eigen::Index rows = 0;
    Eigen::Index cols = 0;
    std::vector<double> values;
    std::vector<std::uint32_t> row_ptr;
    std::vector<std::uint32_t> col_idx;

    std::size_t nonzeros() const { return values.size(); }

    /// Throws CorruptionError if IR/IC are inconsistent.
    void validate() const;

    bool operator==(const CsrMatrix&) const = default;
};

CsrMatrix to_csr(const Eigen::Ref<const Eigen::MatrixXd>& dense);
Eigen::MatrixXd from_csr(const CsrMatrix& csr);

/// |W| / (2 |W != 0| + (K + 1)): the rate of storing CSR at full width.
double naive_rate(const CsrMatrix& csr);

/// Smallest p >= 1 with value < 2^p.
int bits_for(std::uint64_t value);

/// Relative column indices at a fixed bit width. Each entry stores gap - 1
/// (gaps are >= 1); gaps wider than 2^bits are bridged by filler entries
/// of value 0 that advance the position by exactly 2^bits.
struct RelIndexStream {
    int bits = 5;
    std::vector<std::uint32_t> gaps;  // stored (gap - 1), each < 2^bits
    std::vector<double> values;       // 0 for fillers

    std::size_t size() const { return gaps.size(); }
    std::size_t filler_count() const;
};

/// Indices must be strictly increasing and values nonzero; 1 <= bits <= 16.
RelIndexStream rel_encode(std::span<const std::uint32_t> indices, std::span<const double> values, int bits);
std::pair<std::vector<std::uint32_t>, std::vector<double>> rel_decode(const RelIndexStream& stream);

/// Distinct values (ascending) addressed by fixed-width indices.
struct Codebook {
    std::vector<double> table;
    int index_bits = 1;  // ceil(log2(table size)), minimum 1
};

struct CodebookEncoding {
    Codebook codebook;
    std::vector<std::uint32_t> indices;
};

CodebookEncoding build_codebook(std::span<const double> values);
std::vector<double> apply_codebook(const Codebook& codebook, std::span<const std::uint32_t> indices);

}  // namespace sws
