#include "stormchip/inspect.hpp"

#include <algorithm>
#include <string>

#include "stormchip/errors.hpp"
#include "stormchip/image_io.hpp"

namespace stormchip {

std::vector<std::filesystem::path> export_activation_maps(const ForwardPass<float>& fp, std::size_t layer_index,
                                                          const std::filesystem::path& out_dir, std::size_t sample) {
  if (layer_index + 1 >= fp.outputs.size())
    throw UsageError("layer " + std::to_string(layer_index + 1) + " has no recorded activations");
  const Tensor& a = fp.layer_output(layer_index);
  if (a.rank() != 4) throw UsageError("layer " + std::to_string(layer_index + 1) + " does not produce feature maps");
  if (sample >= a.dim(0)) throw UsageError("sample index outside the batch");
  const std::size_t filters = a.dim(1), h = a.dim(2), w = a.dim(3);
  std::filesystem::create_directories(out_dir);

  std::vector<std::filesystem::path> written;
  for (std::size_t f = 0; f < filters; ++f) {
    const float* map = a.data() + (sample * filters + f) * h * w;
    const auto [lo, hi] = std::minmax_element(map, map + h * w);
    const float range = *hi - *lo;
    Tensor img({1, h, w});
    for (std::size_t i = 0; i < h * w; ++i) img[i] = range > 0.0f ? (map[i] - *lo) / range : 0.0f;
    const auto path = out_dir / ("layer" + std::to_string(layer_index + 1) + "_filter" + std::to_string(f + 1) + ".png");
    write_png(path, img);
    written.push_back(path);
  }
  return written;
}

}  // namespace stormchip
