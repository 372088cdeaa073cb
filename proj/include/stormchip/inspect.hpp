#pragma once

#include <cstddef>
#include <filesystem>
#include <vector>

#include "stormchip/network.hpp"

namespace stormchip {

// Writes one 8-bit grayscale PNG per filter of layer `layer_index` (0-based)
// for batch sample `sample`, named layer{L}_filter{F}.png with 1-based L and
// F. Each map is min-max normalised on its own; constant maps come out black.
std::vector<std::filesystem::path> export_activation_maps(const ForwardPass<float>& fp, std::size_t layer_index,
                                                          const std::filesystem::path& out_dir,
                                                          std::size_t sample = 0);

}  // namespace stormchip
