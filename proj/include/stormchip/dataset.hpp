#pragma once

#include <filesystem>
#include <vector>

#include "stormchip/datapipe.hpp"
#include "stormchip/train.hpp"

namespace stormchip {

// Usable manifest rows that belong to the evaluation set `split`.
Manifest select_split(const Manifest& manifest, Split split);

// Reads chip PNGs named by manifest rows (paths relative to `base_dir`) and
// resizes them bilinearly to the network input shape. Damaged is label 1.
class ChipSource final : public SampleSource {
 public:
  ChipSource(Manifest rows, std::filesystem::path base_dir, Shape input_shape);

  std::size_t size() const override { return rows_.size(); }
  float label(std::size_t i) const override;
  Tensor load(std::size_t i) const override;
  const Manifest& rows() const noexcept { return rows_; }

 private:
  Manifest rows_;
  std::filesystem::path base_dir_;
  Shape input_shape_;
};

// Brings an arbitrary C x H x W image to `input_shape` (channel count must
// match, or be 3 -> 1 by averaging).
Tensor prepare_input(const Tensor& image, const Shape& input_shape);

}  // namespace stormchip
