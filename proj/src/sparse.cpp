#include "sws/sparse.hpp"

#include <algorithm>
#include <string>

#include "sws/errors.hpp"

namespace sws {

void CsrMatrix::validate() const {
    if (rows < 0 || cols < 0) throw CorruptionError("CSR: negative dimensions");
    if (row_ptr.size() != static_cast<std::size_t>(rows) + 1) {
        throw CorruptionError("CSR: IR has " + std::to_string(row_ptr.size()) + " entries, expected " +
                              std::to_string(rows + 1));
    }
    if (row_ptr.front() != 0) throw CorruptionError("CSR: IR[0] must be 0");
    for (std::size_t k = 1; k < row_ptr.size(); ++k) {
        if (row_ptr[k] < row_ptr[k - 1]) throw CorruptionError("CSR: IR decreases at " + std::to_string(k));
    }
    if (row_ptr.back() != values.size() || col_idx.size() != values.size()) {
        throw CorruptionError("CSR: IR[K], |A| and |IC| disagree");
    }
    for (std::size_t r = 0; r + 1 < row_ptr.size(); ++r) {
        for (std::uint32_t k = row_ptr[r]; k < row_ptr[r + 1]; ++k) {
            if (col_idx[k] >= cols) throw CorruptionError("CSR: column index out of range at " + std::to_string(k));
            if (k > row_ptr[r] && col_idx[k] <= col_idx[k - 1]) {
                throw CorruptionError("CSR: column indices not increasing in row " + std::to_string(r));
            }
        }
    }
}

CsrMatrix to_csr(const Eigen::Ref<const Eigen::MatrixXd>& dense) {
    CsrMatrix csr;
    csr.rows = dense.rows();
    csr.cols = dense.cols();
    csr.row_ptr.reserve(static_cast<std::size_t>(dense.rows()) + 1);
    csr.row_ptr.push_back(0);
    for (Eigen::Index r = 0; r < dense.rows(); ++r) {
        for (Eigen::Index c = 0; c < dense.cols(); ++c) {
            const double v = dense(r, c);
            if (v != 0.0) {
                csr.values.push_back(v);
                csr.col_idx.push_back(static_cast<std::uint32_t>(c));
            }
        }
        csr.row_ptr.push_back(static_cast<std::uint32_t>(csr.values.size()));
    }
    return csr;
}

Eigen::MatrixXd from_csr(const CsrMatrix& csr) {
    csr.validate();
    Eigen::MatrixXd dense = Eigen::MatrixXd::Zero(csr.rows, csr.cols);
    for (Eigen::Index r = 0; r < csr.rows; ++r) {
        for (std::uint32_t k = csr.row_ptr[r]; k < csr.row_ptr[r + 1]; ++k) dense(r, csr.col_idx[k]) = csr.values[k];
    }
    return dense;
}

double naive_rate(const CsrMatrix& csr) {
    const double dense = static_cast<double>(csr.rows) * static_cast<double>(csr.cols);
    return dense / (2.0 * static_cast<double>(csr.nonzeros()) + static_cast<double>(csr.rows + 1));
}

int bits_for(std::uint64_t value) {
    int p = 1;
    while (p < 64 && (value >> p) != 0) ++p;
    return p;
}

std::size_t RelIndexStream::filler_count() const {
    return static_cast<std::size_t>(std::count(values.begin(), values.end(), 0.0));
}

RelIndexStream rel_encode(std::span<const std::uint32_t> indices, std::span<const double> values, int bits) {
    if (bits < 1 || bits > 16) throw ConfigError("relative index width must be in [1, 16]");
    if (indices.size() != values.size()) throw ConfigError("relative encoding: indices and values differ in length");
    RelIndexStream s;
    s.bits = bits;
    const std::int64_t span = std::int64_t{1} << bits;
    std::int64_t prev = -1;
    for (std::size_t k = 0; k < indices.size(); ++k) {
        const std::int64_t idx = indices[k];
        if (idx <= prev) throw ConfigError("relative encoding: indices must be strictly increasing");
        if (values[k] == 0.0) throw ConfigError("relative encoding: values must be nonzero");
        while (idx - prev > span) {
            s.gaps.push_back(static_cast<std::uint32_t>(span - 1));
            s.values.push_back(0.0);
            prev += span;
        }
        s.gaps.push_back(static_cast<std::uint32_t>(idx - prev - 1));
        s.values.push_back(values[k]);
        prev = idx;
    }
    return s;
}

std::pair<std::vector<std::uint32_t>, std::vector<double>> rel_decode(const RelIndexStream& stream) {
    if (stream.gaps.size() != stream.values.size()) throw CorruptionError("relative stream: length mismatch");
    const std::uint64_t limit = std::uint64_t{1} << stream.bits;
    std::pair<std::vector<std::uint32_t>, std::vector<double>> out;
    std::int64_t pos = -1;
    for (std::size_t k = 0; k < stream.gaps.size(); ++k) {
        if (stream.gaps[k] >= limit) throw CorruptionError("relative stream: gap exceeds bit width at " + std::to_string(k));
        pos += static_cast<std::int64_t>(stream.gaps[k]) + 1;
        if (stream.values[k] == 0.0) continue;
        out.first.push_back(static_cast<std::uint32_t>(pos));
        out.second.push_back(stream.values[k]);
    }
    return out;
}

CodebookEncoding build_codebook(std::span<const double> values) {
    CodebookEncoding enc;
    std::vector<double> table(values.begin(), values.end());
    std::sort(table.begin(), table.end());
    table.erase(std::unique(table.begin(), table.end()), table.end());
    if (table.size() > 65536) throw ConfigError("codebook overflow: more than 2^16 distinct values");
    enc.codebook.table = std::move(table);
    enc.codebook.index_bits = enc.codebook.table.size() <= 1 ? 1 : bits_for(enc.codebook.table.size() - 1);
    enc.indices.reserve(values.size());
    const auto& t = enc.codebook.table;
    for (double v : values) {
        enc.indices.push_back(static_cast<std::uint32_t>(std::lower_bound(t.begin(), t.end(), v) - t.begin()));
    }
    return enc;
}

std::vector<double> apply_codebook(const Codebook& codebook, std::span<const std::uint32_t> indices) {
    std::vector<double> out;
    out.reserve(indices.size());
    for (std::uint32_t i : indices) {
        if (i >= codebook.table.size()) throw CorruptionError("codebook index " + std::to_string(i) + " out of range");
        out.push_back(codebook.table[i]);
    }
    return out;
}

}  // namespace sws
