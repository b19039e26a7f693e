#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace sws {

/// MSB-first bit packer.
class BitWriter {
public:
    void put(std::uint64_t bits, int count);
    std::uint64_t bit_count() const { return bit_count_; }
    /// Bytes with the final partial byte zero-padded.
    const std::vector<std::uint8_t>& bytes() const { return bytes_; }

private:
    std::vector<std::uint8_t> bytes_;
    std::uint64_t bit_count_ = 0;
};

class BitReader {
public:
    explicit BitReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

    /// Throws CorruptionError past the end of the data.
    std::uint32_t bit();
    std::uint64_t get(int count);
    std::uint64_t position() const { return pos_; }

private:
    std::span<const std::uint8_t> bytes_;
    std::uint64_t pos_ = 0;
};

/// Canonical prefix code described by one code length per alphabet symbol
/// (0 = symbol unused).
class HuffmanTable {
public:
    HuffmanTable() = default;

    /// Optimal code lengths from symbol frequencies. A lone used symbol gets length 1.
    static HuffmanTable from_frequencies(std::span<const std::uint64_t> frequencies);
    /// Rebuilds canonical codes from stored lengths; rejects over-full codes.
    static HuffmanTable from_lengths(std::vector<std::uint8_t> lengths);

    const std::vector<std::uint8_t>& lengths() const { return lengths_; }
    const std::vector<std::uint64_t>& codes() const { return codes_; }
    std::size_t alphabet_size() const { return lengths_.size(); }
    std::size_t used_symbols() const;
    int max_length() const;

    /// Sum of 2^-len over used symbols.
    double kraft_sum() const;

    void encode(std::uint32_t symbol, BitWriter& out) const;
    std::uint32_t decode(BitReader& in) const;

private:
    void build_canonical();

    std::vector<std::uint8_t> lengths_;
    std::vector<std::uint64_t> codes_;
    // canonical decoding tables, indexed by length
    std::vector<std::uint64_t> first_code_;
    std::vector<std::uint32_t> first_index_;
    std::vector<std::uint32_t> count_;
    std::vector<std::uint32_t> sorted_symbols_;
};

struct HuffmanEncoded {
    HuffmanTable table;
    std::vector<std::uint8_t> payload;  // byte-padded
    std::uint64_t bit_count = 0;        // payload bits before padding
};

/// Builds a code from the stream's own frequencies and encodes it.
/// Requires a non-empty stream with every symbol < alphabet_size.
HuffmanEncoded huffman_encode(std::span<const std::uint32_t> symbols, std::size_t alphabet_size);

std::vector<std::uint32_t> huffman_decode(const HuffmanTable& table, std::span<const std::uint8_t> payload,
                                          std::size_t count);

}  // namespace sws
