#pragma once

#include <filesystem>

#include "stormchip/tensor.hpp"

namespace stormchip {

// Reads an 8- or 16-bit PNG as a C x H x W tensor scaled to [0, 1]. Alpha is
// dropped. With force_rgb, grayscale images are replicated to three channels.
Tensor read_png(const std::filesystem::path& path, bool force_rgb = true);

// Writes a 1- or 3-channel C x H x W tensor as an 8-bit PNG. Values are
// clamped to [0, 1] and rounded to the nearest level.
void write_png(const std::filesystem::path& path, const Tensor& image);

}  // namespace stormchip
