#include <algorithm>
#include <vector>

#include "anicurate/media.hpp"

namespace anicurate::media {

// Flood fill with an explicit stack, 4-connectivity. Regions are numbered in
// raster order of their first pixel.
Labeling label_components(const BinaryMask& mask) {
  const int w = mask.width();
  const int h = mask.height();
  Labeling out;
  out.labels.assign(static_cast<std::size_t>(w) * h, 0);
  std::vector<std::pair<int, int>> stack;

  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::size_t idx = static_cast<std::size_t>(y) * w + x;
      if (!mask.get(x, y) || out.labels[idx] != 0) continue;

      const auto label = static_cast<std::int32_t>(out.regions.size() + 1);
      Region region{0, {x, y, x, y}};
      out.labels[idx] = label;
      stack.emplace_back(x, y);
      while (!stack.empty()) {
        const auto [cx, cy] = stack.back();
        stack.pop_back();
        ++region.pixel_count;
        region.box.x0 = std::min(region.box.x0, cx);
        region.box.y0 = std::min(region.box.y0, cy);
        region.box.x1 = std::max(region.box.x1, cx);
        region.box.y1 = std::max(region.box.y1, cy);
        constexpr int kDx[4] = {1, -1, 0, 0};
        constexpr int kDy[4] = {0, 0, 1, -1};
        for (int k = 0; k < 4; ++k) {
          const int nx = cx + kDx[k];
          const int ny = cy + kDy[k];
          if (nx < 0 || ny < 0 || nx >= w || ny >= h || !mask.get(nx, ny)) continue;
          auto& l = out.labels[static_cast<std::size_t>(ny) * w + nx];
          if (l != 0) continue;
          l = label;
          stack.emplace_back(nx, ny);
        }
      }
      out.regions.push_back(region);
    }
  }
  return out;
}

std::vector<Region> connected_components(const BinaryMask& mask) {
  return label_components(mask).regions;
}

}  // namespace anicurate::media
