#include "stormchip/dataset.hpp"

#include "stormchip/errors.hpp"
#include "stormchip/image_io.hpp"
#include "stormchip/kernels.hpp"

namespace stormchip {

Manifest select_split(const Manifest& manifest, Split split) {
  Manifest out;
  for (const ChipRecord& r : manifest)
    if (!r.excluded && in_eval_set(r.split, split)) out.push_back(r);
  return out;
}

ChipSource::ChipSource(Manifest rows, std::filesystem::path base_dir, Shape input_shape)
    : rows_(std::move(rows)), base_dir_(std::move(base_dir)), input_shape_(std::move(input_shape)) {
  if (input_shape_.size() != 3) throw ShapeError("chip source needs a CxHxW input shape");
  for (const ChipRecord& r : rows_)
    if (r.chip_path.empty()) throw DataError("manifest row '" + r.id + "' has no chip file");
}

float ChipSource::label(std::size_t i) const { return rows_.at(i).label == Label::damaged ? 1.0f : 0.0f; }

Tensor ChipSource::load(std::size_t i) const {
  return prepare_input(read_png(base_dir_ / rows_.at(i).chip_path, input_shape_[0] == 3), input_shape_);
}

Tensor prepare_input(const Tensor& image, const Shape& input_shape) {
  if (image.rank() != 3 || input_shape.size() != 3) throw ShapeError("prepare_input expects CxHxW shapes");
  Tensor src = image;
  if (src.dim(0) != input_shape[0]) {
    if (src.dim(0) != 3 || input_shape[0] != 1)
      throw ShapeError("image has " + std::to_string(src.dim(0)) + " channels, network expects " +
                       std::to_string(input_shape[0]));
    const std::size_t plane = src.dim(1) * src.dim(2);
    Tensor gray({1, src.dim(1), src.dim(2)});
    for (std::size_t i = 0; i < plane; ++i) gray[i] = (src[i] + src[plane + i] + src[2 * plane + i]) / 3.0f;
    src = std::move(gray);
  }
  return resize_bilinear(src, input_shape[1], input_shape[2]);
}

}  // namespace stormchip
