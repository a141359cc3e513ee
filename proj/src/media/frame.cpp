#include <algorithm>
#include <string>

#include "anicurate/error.hpp"
#include "anicurate/media.hpp"

namespace anicurate::media {

Frame::Frame(int width, int height) : Frame(width, height, Rgb{0, 0, 0}) {}

Frame::Frame(int width, int height, Rgb fill) : width_(width), height_(height) {
  if (width <= 0 || height <= 0) {
    throw InvalidArgument("frame dimensions must be positive, got " + std::to_string(width) + "x" +
                          std::to_string(height));
  }
  pixels_.resize(pixel_count() * 3);
  for (std::size_t i = 0; i < pixel_count(); ++i) {
    pixels_[3 * i] = fill[0];
    pixels_[3 * i + 1] = fill[1];
    pixels_[3 * i + 2] = fill[2];
  }
}

Frame::Frame(int width, int height, std::vector<std::uint8_t> pixels)
    : width_(width), height_(height), pixels_(std::move(pixels)) {
  if (width <= 0 || height <= 0) {
    throw InvalidArgument("frame dimensions must be positive, got " + std::to_string(width) + "x" +
                          std::to_string(height));
  }
  if (pixels_.size() != pixel_count() * 3) {
    throw ShapeError("pixel buffer holds " + std::to_string(pixels_.size()) + " bytes, expected " +
                     std::to_string(pixel_count() * 3));
  }
}

FrameSequence::FrameSequence(std::vector<Frame> frames, Rational fps, std::string source_id)
    : frames_(std::move(frames)), fps_(fps), source_id_(std::move(source_id)) {
  if (frames_.empty()) throw InvalidArgument("frame sequence needs at least one frame");
  if (fps_.num <= 0 || fps_.den <= 0) {
    throw InvalidArgument("fps must be positive, got " + std::to_string(fps_.num) + ":" +
                          std::to_string(fps_.den));
  }
  const int w = frames_.front().width();
  const int h = frames_.front().height();
  for (std::size_t i = 1; i < frames_.size(); ++i) {
    if (frames_[i].width() != w || frames_[i].height() != h) {
      throw ShapeError("frame " + std::to_string(i) + " is " + std::to_string(frames_[i].width()) +
                       "x" + std::to_string(frames_[i].height()) + ", expected " +
                       std::to_string(w) + "x" + std::to_string(h));
    }
  }
}

FrameSequence FrameSequence::slice(std::size_t begin, std::size_t end) const {
  if (begin >= end || end > frames_.size()) {
    throw InvalidArgument("bad slice [" + std::to_string(begin) + "," + std::to_string(end) +
                          ") of " + std::to_string(frames_.size()) + " frames");
  }
  return FrameSequence({frames_.begin() + static_cast<std::ptrdiff_t>(begin),
                        frames_.begin() + static_cast<std::ptrdiff_t>(end)},
                       fps_, source_id_);
}

BinaryMask::BinaryMask(int width, int height, bool fill) : width_(width), height_(height) {
  if (width <= 0 || height <= 0) throw InvalidArgument("mask dimensions must be positive");
  bits_.assign(static_cast<std::size_t>(width) * height, fill ? 1 : 0);
}

std::size_t BinaryMask::popcount() const {
  return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
}

float LumaPlane::clamped(int x, int y) const {
  x = std::clamp(x, 0, width - 1);
  y = std::clamp(y, 0, height - 1);
  return at(x, y);
}

LumaPlane to_luma(const Frame& frame) {
  LumaPlane out{frame.width(), frame.height(), {}};
  out.values.resize(frame.pixel_count());
  auto px = frame.pixels();
  for (std::size_t i = 0; i < out.values.size(); ++i) {
    const double y = 0.299 * px[3 * i] + 0.587 * px[3 * i + 1] + 0.114 * px[3 * i + 2];
    out.values[i] = static_cast<float>(std::min(1.0, y / 255.0));
  }
  return out;
}

std::vector<std::size_t> sample_frames(std::size_t frame_count, std::size_t n) {
  if (n == 0) throw InvalidArgument("sample_frames: n must be >= 1");
  if (frame_count == 0) throw InvalidArgument("sample_frames: empty sequence");
  std::vector<std::size_t> out;
  if (n == 1 || frame_count == 1) {
    out.push_back(0);
    return out;
  }
  const std::size_t span = frame_count - 1;
  for (std::size_t i = 0; i < n; ++i) {
    // round(i * span / (n - 1)), half up
    const std::size_t idx = (2 * i * span + (n - 1)) / (2 * (n - 1));
    if (out.empty() || out.back() != idx) out.push_back(idx);
  }
  return out;
}

}  // namespace anicurate::media
