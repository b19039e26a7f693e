#include "sws/encoder.hpp"

#include "json.hpp"

#include "sws/binary_io.hpp"
#include "sws/errors.hpp"
#include "sws/huffman.hpp"
#include "sws/sparse.hpp"

namespace sws {

namespace {

constexpr std::uint16_t kBlobVersion = 1;
constexpr std::uint64_t kDenseBits = 32;

void write_table(ByteWriter& out, const HuffmanTable& table) {
    out.u32(static_cast<std::uint32_t>(table.alphabet_size()));
    for (auto len : table.lengths()) out.u8(len);
}

HuffmanTable read_table(ByteReader& in) {
    const std::uint32_t n = in.u32();
    if (n > (1u << 16)) throw CorruptionError("blob: Huffman alphabet too large");
    std::vector<std::uint8_t> lengths(n);
    for (auto& len : lengths) len = in.u8();
    return HuffmanTable::from_lengths(std::move(lengths));
}

std::uint64_t padded(std::uint64_t bits) { return (bits + 7) / 8 * 8; }

}  // namespace

EncodedModel encode_network(const QuantizedNetwork& q, int fc_bits, int conv_bits) {
    q.validate();
    if (fc_bits < 1 || fc_bits > 16 || conv_bits < 1 || conv_bits > 16) {
        throw ConfigError("relative index widths must be in [1, 16]");
    }
    const Network net = q.reconstruct();

    EncodedModel result;
    CompressionReport& report = result.report;
    report.components = static_cast<int>(q.means.size());

    ByteWriter out;
    out.tag("SWSB");
    out.u16(kBlobVersion);
    out.u16(static_cast<std::uint16_t>(net.depth()));
    report.file_header_bits = 8 * out.bytes().size();

    for (const auto& layer : net.layers()) {
        const std::size_t start = out.bytes().size();
        LayerReport lr;
        const LayerKind kind = LayerKind::fully_connected;
        const int p = kind == LayerKind::fully_connected ? fc_bits : conv_bits;

        const CsrMatrix csr = to_csr(layer.weights);
        lr.rows = csr.rows;
        lr.cols = csr.cols;
        lr.weights = csr.rows * csr.cols;
        lr.nonzero = static_cast<Eigen::Index>(csr.nonzeros());
        lr.pruned_fraction = lr.weights ? 1.0 - static_cast<double>(lr.nonzero) / lr.weights : 0.0;
        lr.naive_rate = naive_rate(csr);
        lr.csr_a_bits = kDenseBits * csr.nonzeros();
        lr.csr_ic_bits = kDenseBits * csr.nonzeros();
        lr.csr_ir_bits = kDenseBits * (csr.rows + 1);

        // relative indexing row by row; IR counts stream entries (fillers included)
        std::vector<std::uint32_t> gaps;
        std::vector<double> stream_values;
        std::vector<std::uint32_t> row_ptr{0};
        for (Eigen::Index r = 0; r < csr.rows; ++r) {
            const auto b = csr.row_ptr[r];
            const auto e = csr.row_ptr[r + 1];
            const RelIndexStream rs = rel_encode(std::span(csr.col_idx).subspan(b, e - b),
                                                 std::span(csr.values).subspan(b, e - b), p);
            gaps.insert(gaps.end(), rs.gaps.begin(), rs.gaps.end());
            stream_values.insert(stream_values.end(), rs.values.begin(), rs.values.end());
            row_ptr.push_back(static_cast<std::uint32_t>(gaps.size()));
        }
        const std::size_t entries = gaps.size();
        lr.fillers = static_cast<Eigen::Index>(entries - csr.nonzeros());
        lr.index_bits = p;
        lr.row_ptr_bits = bits_for(entries);
        lr.reduced_ir_bits = static_cast<std::uint64_t>(lr.row_ptr_bits) * (csr.rows + 1);
        lr.relative_ic_bits = static_cast<std::uint64_t>(p) * entries;
        lr.relative_a_bits = kDenseBits * entries;

        const CodebookEncoding cb = build_codebook(stream_values);
        if (cb.codebook.table.size() > 0xFFFF) throw ConfigError("codebook too large for the blob format");
        lr.codebook_size = static_cast<int>(cb.codebook.table.size());
        lr.codebook_index_bits = cb.codebook.index_bits;
        lr.codebook_a_bits = static_cast<std::uint64_t>(cb.codebook.index_bits) * entries;
        lr.codebook_table_bits = 64 * cb.codebook.table.size();

        HuffmanEncoded gap_code;
        HuffmanEncoded value_code;
        if (entries > 0) {
            gap_code = huffman_encode(gaps, std::size_t{1} << p);
            value_code = huffman_encode(cb.indices, cb.codebook.table.size());
        }
        lr.huffman_ic_bits = gap_code.bit_count;
        lr.huffman_a_bits = value_code.bit_count;

        // layer header
        out.u8(static_cast<std::uint8_t>(kind));
        out.u32(static_cast<std::uint32_t>(csr.rows));
        out.u32(static_cast<std::uint32_t>(csr.cols));
        out.u8(static_cast<std::uint8_t>(p));
        out.u8(static_cast<std::uint8_t>(lr.row_ptr_bits));
        lr.header_bits = 8 * 11;

        out.u16(static_cast<std::uint16_t>(cb.codebook.table.size()));
        for (double v : cb.codebook.table) out.f64(v);
        lr.header_bits += 16;

        const std::size_t before_tables = out.bytes().size();
        write_table(out, gap_code.table);
        write_table(out, value_code.table);
        lr.huffman_table_bits = 8 * (out.bytes().size() - before_tables);

        BitWriter ir;
        for (auto v : row_ptr) ir.put(v, lr.row_ptr_bits);
        out.raw(ir.bytes());
        out.raw(gap_code.payload);
        out.raw(value_code.payload);
        lr.padding_bits = (padded(ir.bit_count()) - ir.bit_count()) +
                          (padded(gap_code.bit_count) - gap_code.bit_count) +
                          (padded(value_code.bit_count) - value_code.bit_count);

        const std::size_t before_bias = out.bytes().size();
        out.u8(static_cast<std::uint8_t>(layer.activation));
        for (Eigen::Index r = 0; r < layer.bias.size(); ++r) out.f64(layer.bias(r));
        lr.bias_bits = 8 * (out.bytes().size() - before_bias);

        lr.total_bits = 8 * (out.bytes().size() - start);
        const std::uint64_t accounted = lr.header_bits + lr.codebook_table_bits + lr.huffman_table_bits +
                                        lr.reduced_ir_bits + lr.huffman_ic_bits + lr.huffman_a_bits +
                                        lr.padding_bits + lr.bias_bits;
        if (accounted != lr.total_bits) throw NumericError("encoder bit accounting mismatch");

        report.weights += lr.weights;
        report.nonzero += lr.nonzero;
        report.biases += layer.bias.size();
        report.bias_bits += lr.bias_bits;
        report.payload_bits += lr.reduced_ir_bits + lr.huffman_ic_bits + lr.huffman_a_bits;
        report.layers.push_back(lr);
    }

    result.blob = out.release();
    report.blob_bits = 8 * result.blob.size();
    report.weight_storage_bits = report.blob_bits - report.bias_bits;
    report.dense_bits = kDenseBits * static_cast<std::uint64_t>(report.weights);
    Eigen::Index total_rows = 0;
    for (const auto& l : report.layers) total_rows += l.rows;
    report.naive_rate = static_cast<double>(report.weights) /
                        (2.0 * static_cast<double>(report.nonzero) + static_cast<double>(total_rows + report.layers.size()));
    report.compression_rate = static_cast<double>(report.dense_bits) / static_cast<double>(report.weight_storage_bits);
    report.compression_rate_without_overhead =
        static_cast<double>(report.dense_bits) / static_cast<double>(std::max<std::uint64_t>(report.payload_bits, 1));
    report.compression_rate_with_biases =
        static_cast<double>(kDenseBits * static_cast<std::uint64_t>(report.weights + report.biases)) /
        static_cast<double>(report.blob_bits);
    return result;
}

Network decode_network(std::span<const std::uint8_t> blob) {
    ByteReader in(blob, "weights blob");
    in.expect_tag("SWSB");
    if (in.u16() != kBlobVersion) throw DataError("weights blob: unsupported version");
    const std::uint16_t layer_count = in.u16();
    std::vector<Layer> layers;
    for (std::uint16_t l = 0; l < layer_count; ++l) {
        const std::uint8_t kind = in.u8();
        if (kind > 1) throw CorruptionError("weights blob: bad layer kind");
        const std::uint32_t rows = in.u32();
        const std::uint32_t cols = in.u32();
        const int p = in.u8();
        const int p_prun = in.u8();
        if (p < 1 || p > 16 || p_prun < 1 || p_prun > 32) throw CorruptionError("weights blob: bad bit widths");

        Codebook cb;
        cb.table.resize(in.u16());
        for (auto& v : cb.table) v = in.f64();
        const HuffmanTable gap_table = read_table(in);
        const HuffmanTable value_table = read_table(in);

        const std::size_t ir_bytes = (static_cast<std::size_t>(rows + 1) * static_cast<std::size_t>(p_prun) + 7) / 8;
        BitReader ir_reader(in.raw(ir_bytes));
        std::vector<std::uint32_t> row_ptr(rows + 1);
        for (auto& v : row_ptr) v = static_cast<std::uint32_t>(ir_reader.get(p_prun));
        if (row_ptr.front() != 0) throw CorruptionError("weights blob: IR[0] != 0");
        for (std::size_t k = 1; k < row_ptr.size(); ++k) {
            if (row_ptr[k] < row_ptr[k - 1]) throw CorruptionError("weights blob: IR decreases");
        }
        const std::size_t entries = row_ptr.back();

        // Huffman payloads are byte-aligned; decode from the remaining bytes
        // and advance by the bits actually consumed.
        std::vector<std::uint32_t> gaps;
        std::vector<std::uint32_t> value_idx;
        if (entries > 0) {
            const std::size_t at = in.position();
            BitReader gr(blob.subspan(at));
            gaps.reserve(entries);
            for (std::size_t k = 0; k < entries; ++k) gaps.push_back(gap_table.decode(gr));
            in.raw((gr.position() + 7) / 8);
            BitReader vr(blob.subspan(in.position()));
            value_idx.reserve(entries);
            for (std::size_t k = 0; k < entries; ++k) value_idx.push_back(value_table.decode(vr));
            in.raw((vr.position() + 7) / 8);
        }
        const std::vector<double> values = apply_codebook(cb, value_idx);

        CsrMatrix csr;
        csr.rows = rows;
        csr.cols = cols;
        csr.row_ptr.push_back(0);
        for (std::uint32_t r = 0; r < rows; ++r) {
            RelIndexStream rs;
            rs.bits = p;
            rs.gaps.assign(gaps.begin() + row_ptr[r], gaps.begin() + row_ptr[r + 1]);
            rs.values.assign(values.begin() + row_ptr[r], values.begin() + row_ptr[r + 1]);
            auto [idx, vals] = rel_decode(rs);
            csr.col_idx.insert(csr.col_idx.end(), idx.begin(), idx.end());
            csr.values.insert(csr.values.end(), vals.begin(), vals.end());
            csr.row_ptr.push_back(static_cast<std::uint32_t>(csr.values.size()));
        }

        Layer layer;
        layer.weights = from_csr(csr);
        const std::uint8_t act = in.u8();
        if (act > 1) throw CorruptionError("weights blob: bad activation tag");
        layer.activation = static_cast<Activation>(act);
        layer.bias.resize(rows);
        for (std::uint32_t r = 0; r < rows; ++r) layer.bias(r) = in.f64();
        layers.push_back(std::move(layer));
    }
    if (!in.at_end()) throw CorruptionError("weights blob: trailing bytes");
    try {
        return Network(std::move(layers));
    } catch (const ConfigError& e) {
        throw CorruptionError(std::string("weights blob: ") + e.what());
    }
}

std::string CompressionReport::to_json() const {
    using nlohmann::ordered_json;
    ordered_json j;
    j["weights"] = weights;
    j["nonzero"] = nonzero;
    j["nonzero_fraction"] = nonzero_fraction();
    j["pruned_fraction"] = 1.0 - nonzero_fraction();
    j["biases"] = biases;
    j["components_before_merge"] = components_before_merge;
    j["components"] = components;
    j["dense_bits"] = dense_bits;
    j["blob_bits"] = blob_bits;
    j["file_header_bits"] = file_header_bits;
    j["bias_bits"] = bias_bits;
    j["weight_storage_bits"] = weight_storage_bits;
    j["payload_bits"] = payload_bits;
    j["naive_rate"] = naive_rate;
    j["compression_rate"] = compression_rate;
    j["compression_rate_without_overhead"] = compression_rate_without_overhead;
    j["compression_rate_with_biases"] = compression_rate_with_biases;
    j["error_before"] = error_before;
    j["error_after"] = error_after;
    ordered_json ls = ordered_json::array();
    for (const auto& l : layers) {
        ordered_json o;
        o["rows"] = l.rows;
        o["cols"] = l.cols;
        o["weights"] = l.weights;
        o["nonzero"] = l.nonzero;
        o["fillers"] = l.fillers;
        o["pruned_fraction"] = l.pruned_fraction;
        o["p"] = l.index_bits;
        o["p_prun"] = l.row_ptr_bits;
        o["codebook_size"] = l.codebook_size;
        o["codebook_index_bits"] = l.codebook_index_bits;
        o["naive_rate"] = l.naive_rate;
        o["bits"] = {
            {"csr_a", l.csr_a_bits},
            {"csr_ir", l.csr_ir_bits},
            {"csr_ic", l.csr_ic_bits},
            {"reduced_ir", l.reduced_ir_bits},
            {"relative_ic", l.relative_ic_bits},
            {"relative_a", l.relative_a_bits},
            {"codebook_a", l.codebook_a_bits},
            {"codebook_table", l.codebook_table_bits},
            {"huffman_ic", l.huffman_ic_bits},
            {"huffman_a", l.huffman_a_bits},
            {"huffman_tables", l.huffman_table_bits},
            {"header", l.header_bits},
            {"padding", l.padding_bits},
            {"bias", l.bias_bits},
            {"total", l.total_bits},
        };
        ls.push_back(std::move(o));
    }
    j["layers"] = std::move(ls);
    return j.dump(2) + "\n";
}

}  // namespace sws
