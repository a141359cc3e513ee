#include <algorithm>
#include <array>
#include <cmath>

#include "anicurate/analysis.hpp"

namespace anicurate::analysis {
namespace {

// Otsu's threshold over values in [0, hi], 256 bins. Returns the upper edge
// of the last bin assigned to the background class.
double otsu_threshold(const std::vector<double>& values, double hi) {
  constexpr int kBins = 256;
  std::array<double, kBins> hist{};
  for (double v : values) {
    const int bin = std::min(kBins - 1, static_cast<int>(v / hi * kBins));
    hist[bin] += 1;
  }
  const double total = static_cast<double>(values.size());
  double sum_all = 0;
  for (int i = 0; i < kBins; ++i) sum_all += i * hist[i];

  double w0 = 0, sum0 = 0, best_var = -1;
  int best = 0;
  for (int t = 0; t < kBins; ++t) {
    w0 += hist[t];
    sum0 += t * hist[t];
    const double w1 = total - w0;
    if (w0 == 0 || w1 == 0) continue;
    const double m0 = sum0 / w0;
    const double m1 = (sum_all - sum0) / w1;
    const double between = w0 * w1 * (m0 - m1) * (m0 - m1);
    if (between > best_var) {
      best_var = between;
      best = t;
    }
  }
  return (best + 1) * hi / kBins;
}

}  // namespace

double text_cover_score(const media::Frame& frame, const TextCoverParams& params) {
  const auto luma = media::to_luma(frame);
  const int w = frame.width();
  const int h = frame.height();
  const double fraction = std::clamp(params.band_fraction, 0.0, 1.0);
  const int band_h = std::clamp(static_cast<int>(std::ceil(h * fraction - 1e-9)), 1, h);
  const int band_y0 = h - band_h;

  std::vector<double> mag(static_cast<std::size_t>(w) * band_h);
  double max_mag = 0;
  for (int y = 0; y < band_h; ++y) {
    const int fy = band_y0 + y;
    for (int x = 0; x < w; ++x) {
      auto p = [&](int dx, int dy) { return static_cast<double>(luma.clamped(x + dx, fy + dy)); };
      const double gx = (p(1, -1) + 2 * p(1, 0) + p(1, 1)) - (p(-1, -1) + 2 * p(-1, 0) + p(-1, 1));
      const double gy = (p(-1, 1) + 2 * p(0, 1) + p(1, 1)) - (p(-1, -1) + 2 * p(0, -1) + p(1, -1));
      // A unit luma step gives |g| = 4; scale so the magnitude reads in luma units.
      const double m = std::hypot(gx, gy) / 4.0;
      mag[static_cast<std::size_t>(y) * w + x] = m;
      max_mag = std::max(max_mag, m);
    }
  }
  if (max_mag < params.min_gradient) return 0.0;

  const double threshold = std::max(otsu_threshold(mag, max_mag), params.min_gradient);
  media::BinaryMask edges(w, band_h);
  for (int y = 0; y < band_h; ++y) {
    for (int x = 0; x < w; ++x) edges.set(x, y, mag[static_cast<std::size_t>(y) * w + x] >= threshold);
  }

  const double band_area = static_cast<double>(w) * band_h;
  media::BinaryMask covered(w, band_h);
  for (const auto& r : media::connected_components(edges)) {
    const double aspect = static_cast<double>(r.box.width()) / r.box.height();
    if (r.pixel_count < params.min_area) continue;
    if (static_cast<double>(r.pixel_count) > params.max_area_fraction * band_area) continue;
    if (aspect < params.min_aspect || aspect > params.max_aspect) continue;
    for (int y = r.box.y0; y <= r.box.y1; ++y) {
      for (int x = r.box.x0; x <= r.box.x1; ++x) covered.set(x, y, true);
    }
  }
  return static_cast<double>(covered.popcount()) / band_area;
}

AestheticBreakdown aesthetic_breakdown(const media::Frame& frame, const AestheticParams& params) {
  const double n = static_cast<double>(frame.pixel_count());
  auto px = frame.pixels();

  // Hasler & Susstrunk colorfulness.
  double rg_sum = 0, rg_sq = 0, yb_sum = 0, yb_sq = 0;
  for (std::size_t i = 0; i < frame.pixel_count(); ++i) {
    const double r = px[3 * i], g = px[3 * i + 1], b = px[3 * i + 2];
    const double rg = r - g;
    const double yb = 0.5 * (r + g) - b;
    rg_sum += rg;
    rg_sq += rg * rg;
    yb_sum += yb;
    yb_sq += yb * yb;
  }
  const double rg_mean = rg_sum / n, yb_mean = yb_sum / n;
  const double rg_var = std::max(0.0, rg_sq / n - rg_mean * rg_mean);
  const double yb_var = std::max(0.0, yb_sq / n - yb_mean * yb_mean);
  const double colorfulness =
      std::sqrt(rg_var + yb_var) + 0.3 * std::sqrt(rg_mean * rg_mean + yb_mean * yb_mean);

  const auto luma = media::to_luma(frame);
  double l_sum = 0, l_sq = 0;
  for (float v : luma.values) {
    l_sum += v;
    l_sq += static_cast<double>(v) * v;
  }
  const double l_mean = l_sum / n;
  const double contrast = std::sqrt(std::max(0.0, l_sq / n - l_mean * l_mean));

  double lap_sum = 0, lap_sq = 0;
  for (int y = 0; y < luma.height; ++y) {
    for (int x = 0; x < luma.width; ++x) {
      const double lap = 4.0 * luma.at(x, y) - luma.clamped(x - 1, y) - luma.clamped(x + 1, y) -
                         luma.clamped(x, y - 1) - luma.clamped(x, y + 1);
      lap_sum += lap;
      lap_sq += lap * lap;
    }
  }
  const double lap_mean = lap_sum / n;
  const double sharpness = std::max(0.0, lap_sq / n - lap_mean * lap_mean);

  AestheticBreakdown out;
  out.colorfulness = std::clamp(colorfulness / params.colorfulness_scale, 0.0, 1.0);
  out.contrast = std::clamp(contrast / params.contrast_scale, 0.0, 1.0);
  out.sharpness = std::clamp(sharpness / params.sharpness_scale, 0.0, 1.0);
  const double wsum = params.weight_colorfulness + params.weight_contrast + params.weight_sharpness;
  const double s = (params.weight_colorfulness * out.colorfulness +
                    params.weight_contrast * out.contrast + params.weight_sharpness * out.sharpness) /
                   wsum;
  out.score = std::clamp(10.0 * s, 0.0, 10.0);
  return out;
}

}  // namespace anicurate::analysis
