#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "anicurate/analysis.hpp"
#include "anicurate/media.hpp"

namespace anicurate::conditioning {

struct Shape4 {
  int w = 0;
  int h = 0;
  int t = 0;
  int c = 0;

  std::size_t size() const { return static_cast<std::size_t>(w) * h * t * c; }
  bool operator==(const Shape4&) const = default;
  std::string str() const;
};

/// Dense float tensor indexed (x, y, t, channel), stored t-major then row,
/// column, channel (THWC) so a channel vector is contiguous.
class Tensor4 {
 public:
  Tensor4() = default;
  explicit Tensor4(Shape4 shape, float fill = 0.0f);
  Tensor4(Shape4 shape, std::vector<float> values);

  const Shape4& shape() const { return shape_; }
  std::span<const float> values() const { return values_; }
  std::span<float> values() { return values_; }

  std::size_t index(int x, int y, int t, int c) const {
    return ((static_cast<std::size_t>(t) * shape_.h + y) * shape_.w + x) * shape_.c + c;
  }
  float at(int x, int y, int t, int c) const { return values_[index(x, y, t, c)]; }
  float& at(int x, int y, int t, int c) { return values_[index(x, y, t, c)]; }

  bool operator==(const Tensor4&) const = default;

 private:
  Shape4 shape_{};
  std::vector<float> values_;
};

/// Binary volume (x, y, t) used for guide masks at pixel or latent grid.
class MaskVolume {
 public:
  MaskVolume() = default;
  MaskVolume(int w, int h, int t, bool fill = false);

  int width() const { return w_; }
  int height() const { return h_; }
  int frames() const { return t_; }
  bool get(int x, int y, int t) const { return bits_[idx(x, y, t)] != 0; }
  void set(int x, int y, int t, bool v) { bits_[idx(x, y, t)] = v ? 1 : 0; }
  std::size_t popcount() const;

  media::BinaryMask frame(int t) const;
  void set_frame(int t, const media::BinaryMask& mask);
  static MaskVolume from_frames(const std::vector<media::BinaryMask>& frames);

  bool operator==(const MaskVolume&) const = default;

 private:
  std::size_t idx(int x, int y, int t) const {
    return (static_cast<std::size_t>(t) * h_ + y) * w_ + x;
  }
  int w_ = 0, h_ = 0, t_ = 0;
  std::vector<std::uint8_t> bits_;
};

inline constexpr int kSpatialDown = 8;
inline constexpr int kTemporalDown = 4;
inline constexpr int kLatentChannels = 16;

/// Fixed 3 -> 16 lift: channel k carries RGB component (k % 3) scaled by
/// 1 / (1 + k / 3) (integer division), i.e. scales 1, 1/2, ..., 1/6.
float lift_weight(int channel, int rgb);

/// Video as floats in [0,1], shape (W, H, T, 3).
Tensor4 video_to_tensor(const media::FrameSequence& seq);

/// 8x8 spatial and 4x temporal mean pooling, then the fixed channel lift.
/// Requires W, H divisible by 8 and T divisible by 4.
Tensor4 encode_latent_stub(const Tensor4& video);
Tensor4 encode_latent_stub(const media::FrameSequence& seq);

/// Single latent frame (w, h, 1, 16) of a still image (pooled spatially only).
Tensor4 encode_latent_image(const media::Frame& frame);

struct GuideEntry {
  int position = 0;     // latent frame index
  Tensor4 latent;       // (w, h, 1, c)
  std::optional<media::BinaryMask> spatial_mask;  // M_F at mask grid; absent = all ones
};

struct GuidePlan {
  int n_latent_frames = 0;
  int mask_width = 0;   // grid of M; defaults to 8 * latent width
  int mask_height = 0;
  std::vector<GuideEntry> entries;
};

struct GuideSequence {
  Tensor4 G;      // (w, h, n, c), zero off-position
  MaskVolume M;   // (mask_width, mask_height, n)
};

GuideSequence build_guide(const GuidePlan& plan);

/// Majority pooling: a target cell is 1 iff more than half of its source
/// block is 1. Source dims must be integer multiples of the target dims.
MaskVolume reproject_mask(const MaskVolume& mask, int w, int h, int t);
media::BinaryMask reproject_mask(const media::BinaryMask& mask, int w, int h);

struct ChannelSlot {
  int offset = 0;
  int count = 0;
};

struct ConditionBundle {
  Tensor4 X;
  ChannelSlot noise, mask, guide, text;
};

/// Channel concatenation [noise | mask | G | text], text broadcast over
/// (w, h, t).
ConditionBundle assemble_condition_input(const Tensor4& noise, const MaskVolume& mask_latent,
                                         const Tensor4& guide, std::span<const float> text_embedding);

Tensor4 slice_channels(const Tensor4& x, ChannelSlot slot);

/// Writes `<stem>.f32` (little-endian float32, THWC) and `<stem>.json`.
void write_bundle(const ConditionBundle& bundle, const std::filesystem::path& stem);
ConditionBundle read_bundle(const std::filesystem::path& stem);
void write_tensor(const Tensor4& t, const std::filesystem::path& stem, const std::string& kind);
Tensor4 read_tensor(const std::filesystem::path& stem);

// --- diffusion schedule ------------------------------------------------------

class ScheduleParams {
 public:
  explicit ScheduleParams(std::vector<double> betas);
  static ScheduleParams linear(std::size_t steps, double beta_start = 1e-4, double beta_end = 0.02);

  std::size_t steps() const { return betas_.size(); }
  const std::vector<double>& betas() const { return betas_; }
  /// Cumulative product of (1 - beta_i) for i = 1..t.
  double alpha_bar(std::size_t t) const;

 private:
  std::vector<double> betas_;
  std::vector<double> alpha_bar_;
};

inline double alpha_bar(const ScheduleParams& params, std::size_t t) { return params.alpha_bar(t); }

/// sqrt(a) x0 + sqrt(1 - a) eps
Tensor4 noisy_latent(const Tensor4& x0, const Tensor4& eps, const ScheduleParams& params, std::size_t t);
/// sqrt(1 - a) x0 - sqrt(a) eps
Tensor4 v_target(const Tensor4& x0, const Tensor4& eps, const ScheduleParams& params, std::size_t t);

// --- training-time sampling and motion-area data ------------------------------

/// First, last and `interior` evenly spaced frames, deduplicated and sorted.
std::vector<int> unmask_candidates(int n_frames, int interior);

/// Keeps each candidate independently with probability 1/2, redrawing with
/// the next sub-seed while the draw is empty.
std::set<int> sample_unmask_plan(int n_frames, std::uint64_t seed, int interior = 6);

std::vector<media::BinaryMask> track_foreground(const media::FrameSequence& seq,
                                                const media::BinaryMask& initial_mask,
                                                const analysis::FlowParams& flow = {});

media::BinaryMask union_masks(const std::vector<media::BinaryMask>& masks);

/// Where the mask is 0 every latent frame takes the guide value.
Tensor4 clamp_static_latent(const Tensor4& video_latent, const Tensor4& guide_frame,
                            const media::BinaryMask& mask_latent);

/// Standard normal tensor from a seed (Box-Muller over mt19937_64 bits).
Tensor4 gaussian_tensor(Shape4 shape, std::uint64_t seed);

}  // namespace anicurate::conditioning
