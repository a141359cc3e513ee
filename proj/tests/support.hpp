#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <unistd.h>

#include "anicurate/media.hpp"

namespace anicurate::testing {

inline media::Frame solid(int w, int h, media::Rgb c) { return media::Frame(w, h, c); }

inline media::Frame noise_frame(int w, int h, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  media::Frame f(w, h);
  for (auto& p : f.pixels()) p = static_cast<std::uint8_t>(rng() & 0xff);
  return f;
}

/// Grayscale random texture, smooth enough that block matching has a
/// single clear optimum.
inline media::Frame texture(int w, int h, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  media::Frame f(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const auto v = static_cast<std::uint8_t>(rng() & 0xff);
      f.set(x, y, {v, v, v});
    }
  }
  return f;
}

/// Wrapped translation: out(x, y) = in(x - dx, y - dy).
inline media::Frame shifted(const media::Frame& in, int dx, int dy) {
  const int w = in.width(), h = in.height();
  media::Frame out(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) out.set(x, y, in.at(((x - dx) % w + w) % w, ((y - dy) % h + h) % h));
  }
  return out;
}

inline void fill_rect(media::Frame& f, int x0, int y0, int w, int h, media::Rgb c) {
  for (int y = std::max(0, y0); y < std::min(f.height(), y0 + h); ++y) {
    for (int x = std::max(0, x0); x < std::min(f.width(), x0 + w); ++x) f.set(x, y, c);
  }
}

/// Pastes `patch` with its top-left corner at (x0, y0), clipped to `f`.
inline void paste(media::Frame& f, const media::Frame& patch, int x0, int y0) {
  for (int y = 0; y < patch.height(); ++y) {
    for (int x = 0; x < patch.width(); ++x) {
      const int tx = x0 + x, ty = y0 + y;
      if (tx >= 0 && ty >= 0 && tx < f.width() && ty < f.height()) f.set(tx, ty, patch.at(x, y));
    }
  }
}

inline media::FrameSequence constant_video(int w, int h, std::size_t n, media::Rgb c, media::Rational fps = {8, 1}) {
  return media::FrameSequence(std::vector<media::Frame>(n, media::Frame(w, h, c)), fps, "const");
}

/// Solid-color scenes; `cuts` are the first frames of every scene after the first.
inline media::FrameSequence cut_video(int w, int h, std::size_t n, const std::vector<std::size_t>& cuts,
                                      const std::vector<media::Rgb>& colors) {
  std::vector<media::Frame> frames;
  std::size_t scene = 0;
  for (std::size_t i = 0; i < n; ++i) {
    while (scene < cuts.size() && i >= cuts[scene]) ++scene;
    frames.emplace_back(w, h, colors[scene % colors.size()]);
  }
  return media::FrameSequence(std::move(frames), {8, 1}, "cuts");
}

/// A sprite translating by (vx, vy) per frame over a flat background.
inline media::FrameSequence sprite_video(int w, int h, std::size_t n, int x0, int y0, int sw, int sh, int vx, int vy,
                                         media::Rgb bg = {30, 30, 30}, media::Rgb fg = {230, 60, 40}) {
  std::vector<media::Frame> frames;
  for (std::size_t i = 0; i < n; ++i) {
    media::Frame f(w, h, bg);
    fill_rect(f, x0 + vx * static_cast<int>(i), y0 + vy * static_cast<int>(i), sw, sh, fg);
    frames.push_back(std::move(f));
  }
  return media::FrameSequence(std::move(frames), {8, 1}, "sprite");
}

/// Scratch directory removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("anicurate-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

}  // namespace anicurate::testing
