#pragma once

#include <string>

#include "sws/network.hpp"

namespace sws {

struct MnistDataset {
    Dataset train;
    Dataset test;
};

/// Reads an IDX3 image file (magic 0x00000803), plain or gzip-compressed.
/// Pixels are scaled to [0, 1]; each image becomes one row.
RowMatrixXd load_idx_images(const std::string& path);

/// Reads an IDX1 label file (magic 0x00000801), plain or gzip-compressed.
std::vector<std::uint8_t> load_idx_labels(const std::string& path);

/// Loads {train,t10k}-{images-idx3,labels-idx1}-ubyte[.gz] from `dir`.
/// With `require_standard_sizes` the splits must hold 60000 and 10000 items.
MnistDataset load_mnist(const std::string& dir, bool require_standard_sizes = true);

}  // namespace sws
