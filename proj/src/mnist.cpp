#include "sws/mnist.hpp"

#include <filesystem>
#include <memory>

#include <zlib.h>

#include "sws/errors.hpp"

namespace sws {

namespace {

constexpr std::uint32_t kImageMagic = 0x00000803;
constexpr std::uint32_t kLabelMagic = 0x00000801;

/// gzread reads plain files transparently.
class GzFile {
public:
    explicit GzFile(const std::string& path) : path_(path), file_(gzopen(path.c_str(), "rb")) {
        if (!file_) throw DataError(path + ": cannot open");
    }
    ~GzFile() {
        if (file_) gzclose(file_);
    }
    GzFile(const GzFile&) = delete;
    GzFile& operator=(const GzFile&) = delete;

    void read(void* dst, std::size_t n) {
        auto* out = static_cast<unsigned char*>(dst);
        std::size_t done = 0;
        while (done < n) {
            const unsigned chunk = static_cast<unsigned>(std::min<std::size_t>(n - done, 1u << 30));
            const int got = gzread(file_, out + done, chunk);
            if (got <= 0) {
                throw DataError(path_ + ": truncated (wanted " + std::to_string(n) + " bytes, got " +
                                std::to_string(done) + ")");
            }
            done += static_cast<std::size_t>(got);
        }
    }

    std::uint32_t big_endian_u32() {
        unsigned char b[4];
        read(b, 4);
        return (std::uint32_t{b[0]} << 24) | (std::uint32_t{b[1]} << 16) | (std::uint32_t{b[2]} << 8) | b[3];
    }

    bool at_end() {
        unsigned char b;
        return gzread(file_, &b, 1) == 0;
    }

private:
    std::string path_;
    gzFile file_;
};

std::string find_file(const std::string& dir, const std::string& stem) {
    namespace fs = std::filesystem;
    for (const std::string& name : {stem, stem + ".gz"}) {
        const fs::path p = fs::path(dir) / name;
        if (fs::exists(p)) return p.string();
    }
    throw DataError("missing MNIST file " + stem + " in " + dir);
}

}  // namespace

RowMatrixXd load_idx_images(const std::string& path) {
    GzFile f(path);
    const std::uint32_t magic = f.big_endian_u32();
    if (magic != kImageMagic) throw DataError(path + ": bad image magic");
    const std::uint32_t n = f.big_endian_u32();
    const std::uint32_t rows = f.big_endian_u32();
    const std::uint32_t cols = f.big_endian_u32();
    const std::size_t pixels = static_cast<std::size_t>(rows) * cols;
    std::vector<unsigned char> raw(static_cast<std::size_t>(n) * pixels);
    f.read(raw.data(), raw.size());
    if (!f.at_end()) throw DataError(path + ": trailing data after " + std::to_string(n) + " images");
    RowMatrixXd images(n, static_cast<Eigen::Index>(pixels));
    for (std::size_t i = 0; i < raw.size(); ++i) images.data()[i] = raw[i] / 255.0;
    return images;
}

std::vector<std::uint8_t> load_idx_labels(const std::string& path) {
    GzFile f(path);
    const std::uint32_t magic = f.big_endian_u32();
    if (magic != kLabelMagic) throw DataError(path + ": bad label magic");
    const std::uint32_t n = f.big_endian_u32();
    std::vector<std::uint8_t> labels(n);
    f.read(labels.data(), labels.size());
    if (!f.at_end()) throw DataError(path + ": trailing data after " + std::to_string(n) + " labels");
    for (auto l : labels) {
        if (l > 9) throw DataError(path + ": label out of range");
    }
    return labels;
}

MnistDataset load_mnist(const std::string& dir, bool require_standard_sizes) {
    MnistDataset ds;
    ds.train.inputs = load_idx_images(find_file(dir, "train-images-idx3-ubyte"));
    ds.train.labels = load_idx_labels(find_file(dir, "train-labels-idx1-ubyte"));
    ds.test.inputs = load_idx_images(find_file(dir, "t10k-images-idx3-ubyte"));
    ds.test.labels = load_idx_labels(find_file(dir, "t10k-labels-idx1-ubyte"));
    for (const auto* split : {&ds.train, &ds.test}) {
        if (static_cast<std::size_t>(split->inputs.rows()) != split->labels.size()) {
            throw DataError(dir + ": image and label counts differ");
        }
    }
    if (require_standard_sizes && (ds.train.size() != 60000 || ds.test.size() != 10000)) {
        throw DataError(dir + ": expected 60000 training and 10000 test items");
    }
    return ds;
}

}  // namespace sws
