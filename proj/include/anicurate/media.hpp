#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace anicurate::media {

using Rgb = std::array<std::uint8_t, 3>;

/// An 8-bit RGB image, row-major, three bytes per pixel. Dimensions are
/// fixed at construction; pixel values may be edited in place.
class Frame {
 public:
  Frame(int width, int height);
  Frame(int width, int height, Rgb fill);
  Frame(int width, int height, std::vector<std::uint8_t> pixels);

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t pixel_count() const { return static_cast<std::size_t>(width_) * height_; }

  std::span<const std::uint8_t> pixels() const { return pixels_; }
  std::span<std::uint8_t> pixels() { return pixels_; }

  Rgb at(int x, int y) const {
    const auto* p = &pixels_[offset(x, y)];
    return {p[0], p[1], p[2]};
  }
  void set(int x, int y, Rgb c) {
    auto* p = &pixels_[offset(x, y)];
    p[0] = c[0];
    p[1] = c[1];
    p[2] = c[2];
  }

  bool operator==(const Frame&) const = default;

 private:
  std::size_t offset(int x, int y) const {
    return (static_cast<std::size_t>(y) * width_ + x) * 3;
  }

  int width_;
  int height_;
  std::vector<std::uint8_t> pixels_;
};

struct Rational {
  std::int64_t num = 1;
  std::int64_t den = 1;

  double value() const { return static_cast<double>(num) / static_cast<double>(den); }
  bool operator==(const Rational&) const = default;
};

/// Decoded video: at least one frame, all frames the same size.
class FrameSequence {
 public:
  FrameSequence(std::vector<Frame> frames, Rational fps, std::string source_id = {});

  const std::vector<Frame>& frames() const { return frames_; }
  const Frame& operator[](std::size_t i) const { return frames_[i]; }
  std::size_t size() const { return frames_.size(); }
  int width() const { return frames_.front().width(); }
  int height() const { return frames_.front().height(); }
  Rational fps() const { return fps_; }
  const std::string& source_id() const { return source_id_; }
  double duration_seconds() const { return static_cast<double>(frames_.size()) / fps_.value(); }

  /// Frames [begin, end) as a new sequence sharing fps and source id.
  FrameSequence slice(std::size_t begin, std::size_t end) const;

 private:
  std::vector<Frame> frames_;
  Rational fps_;
  std::string source_id_;
};

class BinaryMask {
 public:
  BinaryMask(int width, int height, bool fill = false);

  int width() const { return width_; }
  int height() const { return height_; }
  bool get(int x, int y) const { return bits_[static_cast<std::size_t>(y) * width_ + x] != 0; }
  void set(int x, int y, bool v) { bits_[static_cast<std::size_t>(y) * width_ + x] = v ? 1 : 0; }
  std::size_t popcount() const;
  std::span<const std::uint8_t> bits() const { return bits_; }

  bool operator==(const BinaryMask&) const = default;

 private:
  int width_;
  int height_;
  std::vector<std::uint8_t> bits_;
};

/// Grayscale plane with values in [0, 1].
struct LumaPlane {
  int width = 0;
  int height = 0;
  std::vector<float> values;

  float at(int x, int y) const { return values[static_cast<std::size_t>(y) * width + x]; }
  // Edge-replicating access.
  float clamped(int x, int y) const;
};

struct BoundingBox {
  int x0 = 0, y0 = 0, x1 = 0, y1 = 0;  // inclusive
  int width() const { return x1 - x0 + 1; }
  int height() const { return y1 - y0 + 1; }
  bool operator==(const BoundingBox&) const = default;
};

struct Region {
  std::size_t pixel_count = 0;
  BoundingBox box;
};

struct Labeling {
  // 0 = background, k > 0 = region k-1.
  std::vector<std::int32_t> labels;
  std::vector<Region> regions;
};

// --- ingest -----------------------------------------------------------------

/// YUV4MPEG2 stream. Supports C420 (all siting variants) and C444, 8-bit.
/// Default color range is limited (studio swing, Y in [16,235]); the
/// `XCOLORRANGE=FULL` extension selects full range.
FrameSequence parse_y4m(std::string_view bytes, std::string source_id = {});
FrameSequence read_y4m(const std::filesystem::path& path);

/// Debug writer: C444, limited range. Round-trips frame count, size and fps.
std::string serialize_y4m(const FrameSequence& seq);
void write_y4m(const FrameSequence& seq, const std::filesystem::path& path);

Frame parse_ppm(std::string_view bytes);
Frame read_ppm(const std::filesystem::path& path);
std::string serialize_ppm(const Frame& frame);
void write_ppm(const Frame& frame, const std::filesystem::path& path);

/// Reads every *.ppm file of `dir` in lexicographic filename order.
FrameSequence read_frame_dir(const std::filesystem::path& dir, Rational fps);

/// Y4M file or P6 frame directory (the latter at `dir_fps`).
FrameSequence load_video(const std::filesystem::path& path, Rational dir_fps = {8, 1});

// --- pixel utilities --------------------------------------------------------

LumaPlane to_luma(const Frame& frame);

Labeling label_components(const BinaryMask& mask);
std::vector<Region> connected_components(const BinaryMask& mask);

std::vector<std::size_t> sample_frames(std::size_t frame_count, std::size_t n);
inline std::vector<std::size_t> sample_frames(const FrameSequence& seq, std::size_t n) {
  return sample_frames(seq.size(), n);
}

}  // namespace anicurate::media
