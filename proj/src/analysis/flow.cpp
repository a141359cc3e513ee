#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <tuple>

#include "anicurate/analysis.hpp"
#include "anicurate/error.hpp"

namespace anicurate::analysis {
namespace {

struct MatchResult {
  FlowField field;
  double total_sad = 0;  // summed over every pixel of the frame
};

// `b` padded by `pad` on every side with edge replication, so candidate
// windows never need bounds checks.
struct PaddedPlane {
  int pad;
  int stride;
  std::vector<float> values;

  PaddedPlane(const media::LumaPlane& plane, int pad_) : pad(pad_), stride(plane.width + 2 * pad_) {
    values.resize(static_cast<std::size_t>(stride) * (plane.height + 2 * pad));
    for (int y = -pad; y < plane.height + pad; ++y) {
      for (int x = -pad; x < plane.width + pad; ++x) {
        values[static_cast<std::size_t>(y + pad) * stride + (x + pad)] = plane.clamped(x, y);
      }
    }
  }
  const float* row(int y) const { return &values[static_cast<std::size_t>(y + pad) * stride + pad]; }
};

MatchResult block_match(const media::LumaPlane& a, const media::LumaPlane& b, int block, int radius) {
  if (a.width != b.width || a.height != b.height) {
    throw ShapeError("block_flow: frame sizes differ (" + std::to_string(a.width) + "x" +
                     std::to_string(a.height) + " vs " + std::to_string(b.width) + "x" +
                     std::to_string(b.height) + ")");
  }
  if (block < 2) throw InvalidArgument("block_flow: block size must be >= 2");
  if (radius < 0) throw InvalidArgument("block_flow: radius must be >= 0");

  MatchResult out;
  auto& f = out.field;
  f.block = block;
  f.width = (a.width + block - 1) / block;
  f.height = (a.height + block - 1) / block;
  f.vectors.resize(static_cast<std::size_t>(f.width) * f.height);

  const PaddedPlane pb(b, radius);
  for (int by = 0; by < f.height; ++by) {
    const int y0 = by * block;
    const int y1 = std::min(a.height, y0 + block);
    for (int bx = 0; bx < f.width; ++bx) {
      const int x0 = bx * block;
      const int x1 = std::min(a.width, x0 + block);
      // Ordered by (sad, |dx|+|dy|, dy, dx).
      auto best = std::make_tuple(std::numeric_limits<double>::infinity(), 0, 0, 0);
      for (int dy = -radius; dy <= radius; ++dy) {
        for (int dx = -radius; dx <= radius; ++dx) {
          double sad = 0;
          for (int y = y0; y < y1; ++y) {
            const float* ra = &a.values[static_cast<std::size_t>(y) * a.width];
            const float* rb = pb.row(y + dy) + dx;
            for (int x = x0; x < x1; ++x) sad += std::abs(ra[x] - rb[x]);
          }
          const auto cand = std::make_tuple(sad, std::abs(dx) + std::abs(dy), dy, dx);
          if (cand < best) best = cand;
        }
      }
      f.vectors[static_cast<std::size_t>(by) * f.width + bx] = {std::get<3>(best), std::get<2>(best)};
      out.total_sad += std::get<0>(best);
    }
  }
  return out;
}

}  // namespace

double FlowField::mean_magnitude() const {
  if (vectors.empty()) return 0.0;
  double sum = 0;
  for (const auto& v : vectors) sum += std::hypot(v.dx, v.dy);
  return sum / static_cast<double>(vectors.size());
}

FlowField block_flow(const media::LumaPlane& a, const media::LumaPlane& b, int block, int radius) {
  return block_match(a, b, block, radius).field;
}

FlowField block_flow(const media::Frame& a, const media::Frame& b, int block, int radius) {
  if (a.width() != b.width() || a.height() != b.height()) {
    throw ShapeError("block_flow: frame sizes differ (" + std::to_string(a.width()) + "x" +
                     std::to_string(a.height()) + " vs " + std::to_string(b.width()) + "x" +
                     std::to_string(b.height()) + ")");
  }
  return block_match(media::to_luma(a), media::to_luma(b), block, radius).field;
}

double flow_score(const media::FrameSequence& clip, const FlowParams& params) {
  if (clip.size() < 2) throw InvalidArgument("flow undefined for a single-frame clip");
  const double fps = clip.fps().value();
  auto step = static_cast<std::size_t>(std::ceil(fps / params.max_sample_fps - 1e-9));
  step = std::clamp<std::size_t>(step, 1, clip.size() - 1);
  const double effective_fps = fps / static_cast<double>(step);

  double sum = 0;
  std::size_t pairs = 0;
  media::LumaPlane prev = media::to_luma(clip[0]);
  for (std::size_t i = step; i < clip.size(); i += step) {
    media::LumaPlane cur = media::to_luma(clip[i]);
    sum += block_match(prev, cur, params.block, params.radius).field.mean_magnitude();
    ++pairs;
    prev = std::move(cur);
  }
  return sum / static_cast<double>(pairs) * effective_fps;
}

double warp_residual(const media::FrameSequence& clip, const FlowParams& params) {
  if (clip.size() < 2) return 0.0;
  double sum = 0;
  media::LumaPlane prev = media::to_luma(clip[0]);
  for (std::size_t i = 1; i < clip.size(); ++i) {
    media::LumaPlane cur = media::to_luma(clip[i]);
    sum += block_match(prev, cur, params.block, params.radius).total_sad;
    prev = std::move(cur);
  }
  const double pixels = static_cast<double>(clip.width()) * clip.height();
  return sum / (pixels * static_cast<double>(clip.size() - 1));
}

int motion_class_of(double score, const MotionClassParams& params) {
  int degree = 1;
  for (double bp : params.breakpoints) {
    if (score > bp) ++degree;
  }
  return degree;
}

int motion_class(const media::FrameSequence& clip, const FlowParams& flow,
                 const MotionClassParams& params) {
  return motion_class_of(flow_score(clip, flow), params);
}

}  // namespace anicurate::analysis
