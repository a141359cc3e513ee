#include <algorithm>
#include <cmath>

#include "anicurate/analysis.hpp"
#include "anicurate/error.hpp"

namespace anicurate::analysis {

std::array<double, 3> rgb_to_hsv255(media::Rgb rgb) {
  const double r = rgb[0], g = rgb[1], b = rgb[2];
  const double mx = std::max({r, g, b});
  const double mn = std::min({r, g, b});
  const double chroma = mx - mn;
  double hue_deg = 0.0;
  if (chroma > 0) {
    if (mx == r) {
      hue_deg = 60.0 * std::fmod((g - b) / chroma + 6.0, 6.0);
    } else if (mx == g) {
      hue_deg = 60.0 * ((b - r) / chroma + 2.0);
    } else {
      hue_deg = 60.0 * ((r - g) / chroma + 4.0);
    }
  }
  const double sat = mx > 0 ? chroma / mx * 255.0 : 0.0;
  return {hue_deg / 360.0 * 255.0, sat, mx};
}

double content_delta(const media::Frame& a, const media::Frame& b) {
  if (a.width() != b.width() || a.height() != b.height()) {
    throw ShapeError("content_delta: frame sizes differ (" + std::to_string(a.width()) + "x" +
                     std::to_string(a.height()) + " vs " + std::to_string(b.width()) + "x" +
                     std::to_string(b.height()) + ")");
  }
  double dh = 0, ds = 0, dv = 0;
  auto pa = a.pixels();
  auto pb = b.pixels();
  for (std::size_t i = 0; i < a.pixel_count(); ++i) {
    const auto ha = rgb_to_hsv255({pa[3 * i], pa[3 * i + 1], pa[3 * i + 2]});
    const auto hb = rgb_to_hsv255({pb[3 * i], pb[3 * i + 1], pb[3 * i + 2]});
    dh += std::abs(ha[0] - hb[0]);
    ds += std::abs(ha[1] - hb[1]);
    dv += std::abs(ha[2] - hb[2]);
  }
  const double n = static_cast<double>(a.pixel_count());
  return (dh / n + ds / n + dv / n) / 3.0;
}

std::vector<ClipRange> detect_scenes(const media::FrameSequence& seq, const SceneParams& params) {
  if (!(params.threshold > 0)) throw InvalidArgument("detect_scenes: threshold must be > 0");
  if (params.min_scene_len < 1) throw InvalidArgument("detect_scenes: min_scene_len must be >= 1");
  std::vector<ClipRange> clips;
  std::size_t last_cut = 0;
  for (std::size_t i = 1; i < seq.size(); ++i) {
    if (i - last_cut < params.min_scene_len) continue;
    if (content_delta(seq[i - 1], seq[i]) > params.threshold) {
      clips.push_back({last_cut, i});
      last_cut = i;
    }
  }
  clips.push_back({last_cut, seq.size()});
  return clips;
}

}  // namespace anicurate::analysis
