#pragma once

#include <array>
#include <cstddef>
#include <vector>

#include "anicurate/media.hpp"

namespace anicurate::analysis {

struct ClipRange {
  std::size_t start = 0;  // inclusive
  std::size_t end = 0;    // exclusive
  std::size_t length() const { return end - start; }
  bool operator==(const ClipRange&) const = default;
};

struct SceneParams {
  double threshold = 27.0;
  std::size_t min_scene_len = 15;
};

struct FlowParams {
  int block = 8;
  int radius = 7;
  double max_sample_fps = 8.0;
};

struct TextCoverParams {
  double band_fraction = 0.25;  // 1.0 = full frame
  double min_gradient = 0.25;   // Sobel magnitude floor on [0,1] luma
  std::size_t min_area = 4;
  double max_area_fraction = 0.05;  // of band area, per component
  double min_aspect = 0.1;
  double max_aspect = 10.0;
};

struct AestheticParams {
  double weight_colorfulness = 0.3;
  double weight_contrast = 0.3;
  double weight_sharpness = 0.4;
  double colorfulness_scale = 100.0;  // Hasler-Susstrunk units
  double contrast_scale = 0.5;        // luma standard deviation
  double sharpness_scale = 2.0;       // variance of the 4-neighbour Laplacian on [0,1] luma
};

struct MotionClassParams {
  // Five increasing flow_score breakpoints (px/s) separating degrees 1..6.
  std::array<double, 5> breakpoints{2.0, 8.0, 20.0, 40.0, 80.0};
};

struct Vec2 {
  int dx = 0;
  int dy = 0;
  bool operator==(const Vec2&) const = default;
};

/// Block-grid motion field; one vector per block of the first frame.
struct FlowField {
  int width = 0;   // blocks
  int height = 0;  // blocks
  int block = 8;
  std::vector<Vec2> vectors;

  const Vec2& at(int bx, int by) const { return vectors[static_cast<std::size_t>(by) * width + bx]; }
  double mean_magnitude() const;
};

/// Mean over pixels of (|dH| + |dS| + |dV|) / 3, channels on a 0..255 scale.
double content_delta(const media::Frame& a, const media::Frame& b);

/// Content-delta cut detector. Returned clips tile [0, seq.size()).
std::vector<ClipRange> detect_scenes(const media::FrameSequence& seq, const SceneParams& params = {});

/// Exhaustive SAD block matching on luma, from `a` to `b`: block at p in a
/// best matches b at p + (dx, dy). Out-of-frame samples replicate the edge.
FlowField block_flow(const media::Frame& a, const media::Frame& b, int block = 8, int radius = 7);
FlowField block_flow(const media::LumaPlane& a, const media::LumaPlane& b, int block = 8,
                     int radius = 7);

/// Mean block-flow magnitude in px/s over frame pairs sampled at no more
/// than `max_sample_fps`.
double flow_score(const media::FrameSequence& clip, const FlowParams& params = {});

/// Mean absolute luma residual after compensating each consecutive pair with
/// its block flow. 0 for a single-frame clip.
double warp_residual(const media::FrameSequence& clip, const FlowParams& params = {});

double text_cover_score(const media::Frame& frame, const TextCoverParams& params = {});

struct AestheticBreakdown {
  double colorfulness = 0;  // each normalized to [0,1]
  double contrast = 0;
  double sharpness = 0;
  double score = 0;  // [0,10]
};

AestheticBreakdown aesthetic_breakdown(const media::Frame& frame, const AestheticParams& params = {});
inline double aesthetic_ref_score(const media::Frame& frame, const AestheticParams& params = {}) {
  return aesthetic_breakdown(frame, params).score;
}

int motion_class_of(double flow_score, const MotionClassParams& params = {});
int motion_class(const media::FrameSequence& clip, const FlowParams& flow = {},
                 const MotionClassParams& params = {});

/// HSV with all three channels scaled to [0, 255].
std::array<double, 3> rgb_to_hsv255(media::Rgb rgb);

}  // namespace anicurate::analysis
