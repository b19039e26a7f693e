#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sws/mixture.hpp"
#include "sws/network.hpp"

namespace sws {

/// Network weights with an optional trailing mixture block.
struct Checkpoint {
    Network network;
    std::optional<MixtureModel> mixture;
    HyperPriorConfig hyper;
};

std::vector<std::uint8_t> serialize_checkpoint(const Network& net, const MixtureModel* mixture = nullptr,
                                               const HyperPriorConfig* hyper = nullptr);
Checkpoint parse_checkpoint(std::span<const std::uint8_t> bytes);

void save_checkpoint(const std::string& path, const Network& net, const MixtureModel* mixture = nullptr,
                     const HyperPriorConfig* hyper = nullptr);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace sws
