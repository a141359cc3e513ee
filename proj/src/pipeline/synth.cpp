#include <cmath>
#include <random>

#include "anicurate/pipeline.hpp"

namespace anicurate::pipeline {
namespace {

media::Rgb hsv(double h, double s, double v) {
  const double c = v * s;
  const double hp = std::fmod(h, 360.0) / 60.0;
  const double x = c * (1 - std::fabs(std::fmod(hp, 2.0) - 1));
  double r = 0, g = 0, b = 0;
  if (hp < 1) { r = c; g = x; }
  else if (hp < 2) { r = x; g = c; }
  else if (hp < 3) { g = c; b = x; }
  else if (hp < 4) { g = x; b = c; }
  else if (hp < 5) { r = x; b = c; }
  else { r = c; b = x; }
  const double m = v - c;
  auto q = [&](double u) { return static_cast<std::uint8_t>(std::lround(std::clamp(u + m, 0.0, 1.0) * 255)); };
  return {q(r), q(g), q(b)};
}

struct Scene {
  std::size_t length;
  double hue;
  media::Rgb sprite;
  double x, y, vx, vy;
  int sprite_w, sprite_h;
  bool caption_band;
};

}  // namespace

media::FrameSequence synthetic_video(std::size_t i, std::uint64_t seed, int width, int height,
                                     std::vector<std::size_t>* cuts) {
  std::mt19937_64 rng(stage_seed(seed, "synth") + i);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const int n_scenes = 2 + static_cast<int>(rng() % 3);
  const double base_hue = u(rng) * 360.0;

  std::vector<Scene> scenes;
  for (int k = 0; k < n_scenes; ++k) {
    Scene s;
    // Lengths straddle the 2 s lower duration bound at 8 fps.
    s.length = 15 + rng() % 50;
    s.hue = base_hue + 137.5 * k;  // consecutive backdrops far apart in hue
    s.sprite = hsv(s.hue + 180.0, 0.3 + 0.7 * u(rng), 0.6 + 0.4 * u(rng));
    s.sprite_w = 8 + static_cast<int>(rng() % 12);
    s.sprite_h = 8 + static_cast<int>(rng() % 12);
    s.x = u(rng) * (width - s.sprite_w);
    s.y = u(rng) * (height - s.sprite_h);
    s.vx = (u(rng) * 2 - 1) * 3.0;
    s.vy = (u(rng) * 2 - 1) * 2.0;
    s.caption_band = u(rng) < 0.3;
    scenes.push_back(s);
  }

  std::vector<media::Frame> frames;
  std::size_t start = 0;
  for (const auto& s : scenes) {
    if (cuts && start > 0) cuts->push_back(start);
    // Static textured backdrop for the whole scene.
    media::Frame backdrop(width, height);
    for (int y = 0; y < height; ++y) {
      for (int x = 0; x < width; ++x) {
        const double shade = 0.55 + 0.25 * static_cast<double>(y) / height + 0.08 * (u(rng) - 0.5);
        backdrop.set(x, y, hsv(s.hue, 0.75, std::clamp(shade, 0.0, 1.0)));
      }
    }
    if (s.caption_band) {
      // Rows of small glyph-like blocks in the bottom band.
      const int row = height - height / 8;
      for (int gx = 4; gx + 3 < width - 4; gx += 6) {
        for (int y = row; y < row + 4 && y < height; ++y) {
          for (int x = gx; x < gx + 3; ++x) backdrop.set(x, y, {250, 250, 250});
        }
      }
    }
    double x = s.x, y = s.y, vx = s.vx, vy = s.vy;
    for (std::size_t f = 0; f < s.length; ++f) {
      media::Frame frame = backdrop;
      const int x0 = static_cast<int>(std::lround(x)), y0 = static_cast<int>(std::lround(y));
      for (int yy = std::max(0, y0); yy < std::min(height, y0 + s.sprite_h); ++yy) {
        for (int xx = std::max(0, x0); xx < std::min(width, x0 + s.sprite_w); ++xx) frame.set(xx, yy, s.sprite);
      }
      frames.push_back(std::move(frame));
      x += vx;
      y += vy;
      if (x < 0 || x > width - s.sprite_w) vx = -vx;
      if (y < 0 || y > height - s.sprite_h) vy = -vy;
    }
    start += s.length;
  }
  return media::FrameSequence(std::move(frames), {8, 1}, "synth-" + std::to_string(i));
}

std::vector<SynthVideo> write_synthetic_videos(const std::filesystem::path& dir, std::size_t count,
                                               std::uint64_t seed, int width, int height) {
  std::filesystem::create_directories(dir);
  std::vector<SynthVideo> out;
  for (std::size_t i = 0; i < count; ++i) {
    SynthVideo v;
    char name[32];
    std::snprintf(name, sizeof name, "synth-%03zu.y4m", i);
    v.path = dir / name;
    const auto seq = synthetic_video(i, seed, width, height, &v.cuts);
    write_atomic(v.path, media::serialize_y4m(seq));
    out.push_back(std::move(v));
  }
  return out;
}

}  // namespace anicurate::pipeline
