#include "sws/huffman.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <string>
#include <tuple>

#include "sws/errors.hpp"

namespace sws {

namespace {
constexpr int kMaxCodeLength = 57;
}

void BitWriter::put(std::uint64_t bits, int count) {
    for (int i = count - 1; i >= 0; --i) {
        if (bit_count_ % 8 == 0) bytes_.push_back(0);
        if ((bits >> i) & 1u) bytes_.back() |= static_cast<std::uint8_t>(0x80u >> (bit_count_ % 8));
        ++bit_count_;
    }
}

std::uint32_t BitReader::bit() {
    if (pos_ >= 8 * static_cast<std::uint64_t>(bytes_.size())) {
        throw CorruptionError("bit stream exhausted at bit " + std::to_string(pos_));
    }
    const std::uint32_t b = (bytes_[pos_ / 8] >> (7 - pos_ % 8)) & 1u;
    ++pos_;
    return b;
}

std::uint64_t BitReader::get(int count) {
    std::uint64_t v = 0;
    for (int i = 0; i < count; ++i) v = (v << 1) | bit();
    return v;
}

HuffmanTable HuffmanTable::from_frequencies(std::span<const std::uint64_t> frequencies) {
    HuffmanTable t;
    t.lengths_.assign(frequencies.size(), 0);

    struct Node {
        std::uint64_t weight;
        std::uint32_t order;  // deterministic tie-break
        int left;
        int right;
        int symbol;
    };
    std::vector<Node> nodes;
    using Entry = std::tuple<std::uint64_t, std::uint32_t, int>;  // weight, order, node id
    std::priority_queue<Entry, std::vector<Entry>, std::greater<>> heap;
    for (std::size_t s = 0; s < frequencies.size(); ++s) {
        if (frequencies[s] == 0) continue;
        const int id = static_cast<int>(nodes.size());
        nodes.push_back({frequencies[s], static_cast<std::uint32_t>(id), -1, -1, static_cast<int>(s)});
        heap.emplace(frequencies[s], static_cast<std::uint32_t>(id), id);
    }
    if (nodes.empty()) return t;
    if (nodes.size() == 1) {
        t.lengths_[static_cast<std::size_t>(nodes.front().symbol)] = 1;
        t.build_canonical();
        return t;
    }
    while (heap.size() > 1) {
        auto [wa, oa, a] = heap.top();
        heap.pop();
        auto [wb, ob, b] = heap.top();
        heap.pop();
        const int id = static_cast<int>(nodes.size());
        nodes.push_back({wa + wb, static_cast<std::uint32_t>(id), a, b, -1});
        heap.emplace(wa + wb, static_cast<std::uint32_t>(id), id);
    }
    // depth-first walk from the root to assign lengths
    std::vector<std::pair<int, int>> stack{{std::get<2>(heap.top()), 0}};
    while (!stack.empty()) {
        auto [id, depth] = stack.back();
        stack.pop_back();
        const Node& n = nodes[static_cast<std::size_t>(id)];
        if (n.symbol >= 0) {
            if (depth > kMaxCodeLength) throw ConfigError("Huffman code length exceeds 57 bits");
            t.lengths_[static_cast<std::size_t>(n.symbol)] = static_cast<std::uint8_t>(depth);
        } else {
            stack.emplace_back(n.left, depth + 1);
            stack.emplace_back(n.right, depth + 1);
        }
    }
    t.build_canonical();
    return t;
}

HuffmanTable HuffmanTable::from_lengths(std::vector<std::uint8_t> lengths) {
    HuffmanTable t;
    t.lengths_ = std::move(lengths);
    for (auto len : t.lengths_) {
        if (len > kMaxCodeLength) throw CorruptionError("Huffman table: code length too large");
    }
    if (t.kraft_sum() > 1.0) throw CorruptionError("Huffman table: lengths violate the Kraft inequality");
    t.build_canonical();
    return t;
}

void HuffmanTable::build_canonical() {
    const int max_len = max_length();
    codes_.assign(lengths_.size(), 0);
    count_.assign(static_cast<std::size_t>(max_len) + 1, 0);
    for (auto len : lengths_) {
        if (len > 0) ++count_[len];
    }
    sorted_symbols_.clear();
    for (int len = 1; len <= max_len; ++len) {
        for (std::size_t s = 0; s < lengths_.size(); ++s) {
            if (lengths_[s] == len) sorted_symbols_.push_back(static_cast<std::uint32_t>(s));
        }
    }
    first_code_.assign(static_cast<std::size_t>(max_len) + 1, 0);
    first_index_.assign(static_cast<std::size_t>(max_len) + 1, 0);
    std::uint64_t code = 0;
    std::uint32_t index = 0;
    for (int len = 1; len <= max_len; ++len) {
        first_code_[len] = code;
        first_index_[len] = index;
        for (std::uint32_t k = 0; k < count_[len]; ++k) codes_[sorted_symbols_[index + k]] = code + k;
        code = (code + count_[len]) << 1;
        index += count_[len];
    }
}

std::size_t HuffmanTable::used_symbols() const {
    return static_cast<std::size_t>(std::count_if(lengths_.begin(), lengths_.end(), [](auto l) { return l > 0; }));
}

int HuffmanTable::max_length() const {
    return lengths_.empty() ? 0 : *std::max_element(lengths_.begin(), lengths_.end());
}

double HuffmanTable::kraft_sum() const {
    double sum = 0.0;
    for (auto len : lengths_) {
        if (len > 0) sum += std::ldexp(1.0, -len);
    }
    return sum;
}

void HuffmanTable::encode(std::uint32_t symbol, BitWriter& out) const {
    if (symbol >= lengths_.size() || lengths_[symbol] == 0) {
        throw ConfigError("Huffman encode: symbol " + std::to_string(symbol) + " has no code");
    }
    out.put(codes_[symbol], lengths_[symbol]);
}

std::uint32_t HuffmanTable::decode(BitReader& in) const {
    const std::uint64_t start = in.position();
    std::uint64_t code = 0;
    for (int len = 1; len < static_cast<int>(count_.size()); ++len) {
        code = (code << 1) | in.bit();
        if (count_[len] > 0 && code >= first_code_[len] && code - first_code_[len] < count_[len]) {
            return sorted_symbols_[first_index_[len] + static_cast<std::uint32_t>(code - first_code_[len])];
        }
    }
    throw CorruptionError("Huffman decode: invalid code at bit " + std::to_string(start));
}

HuffmanEncoded huffman_encode(std::span<const std::uint32_t> symbols, std::size_t alphabet_size) {
    if (symbols.empty()) throw ConfigError("Huffman encode: empty stream");
    std::vector<std::uint64_t> freq(alphabet_size, 0);
    for (std::uint32_t s : symbols) {
        if (s >= alphabet_size) throw ConfigError("Huffman encode: symbol outside alphabet");
        ++freq[s];
    }
    HuffmanEncoded out;
    out.table = HuffmanTable::from_frequencies(freq);
    BitWriter writer;
    for (std::uint32_t s : symbols) out.table.encode(s, writer);
    out.bit_count = writer.bit_count();
    out.payload = writer.bytes();
    return out;
}

std::vector<std::uint32_t> huffman_decode(const HuffmanTable& table, std::span<const std::uint8_t> payload,
                                          std::size_t count) {
    BitReader reader(payload);
    std::vector<std::uint32_t> out;
    out.reserve(count);
    for (std::size_t k = 0; k < count; ++k) out.push_back(table.decode(reader));
    return out;
}

}  // namespace sws
