#include <gtest/gtest.h>

#include <algorithm>

#include "anicurate/analysis.hpp"
#include "anicurate/error.hpp"
#include "support.hpp"

using namespace anicurate;
using namespace anicurate::analysis;
namespace t = anicurate::testing;

namespace {

// Five small glyphs on a dark backdrop, in the bottom band or the top band.
media::Frame text_frame(bool bottom) {
  media::Frame f(64, 64, media::Rgb{20, 20, 20});
  const int y0 = bottom ? 54 : 4;
  for (int g = 0; g < 5; ++g) t::fill_rect(f, 6 + g * 11, y0, 3, 5, {240, 240, 240});
  return f;
}

media::FrameSequence moving_texture(int vx, int vy, std::size_t n, media::Rational fps) {
  const auto base = t::texture(64, 64, 11);
  std::vector<media::Frame> frames;
  for (std::size_t i = 0; i < n; ++i) {
    frames.push_back(t::shifted(base, vx * static_cast<int>(i), vy * static_cast<int>(i)));
  }
  return media::FrameSequence(std::move(frames), fps, "tex");
}

}  // namespace

TEST(ContentDelta, IdenticalIsZero) {
  const auto f = t::noise_frame(16, 16, 1);
  EXPECT_EQ(content_delta(f, f), 0.0);
}

TEST(ContentDelta, BlackVsWhite) {
  EXPECT_NEAR(content_delta(t::solid(8, 8, {0, 0, 0}), t::solid(8, 8, {255, 255, 255})), 85.0, 1e-9);
}

TEST(ContentDelta, Symmetric) {
  const auto a = t::noise_frame(16, 16, 1), b = t::noise_frame(16, 16, 2);
  EXPECT_DOUBLE_EQ(content_delta(a, b), content_delta(b, a));
}

TEST(ContentDelta, DimensionMismatch) {
  EXPECT_THROW(content_delta(media::Frame(4, 4), media::Frame(4, 5)), ShapeError);
}

TEST(Scenes, HardCutRedToBlue) {
  const auto v = t::cut_video(16, 16, 60, {30}, {{255, 0, 0}, {0, 0, 255}});
  const auto clips = detect_scenes(v, {27.0, 15});
  EXPECT_EQ(clips, (std::vector<ClipRange>{{0, 30}, {30, 60}}));
}

TEST(Scenes, ConstantVideoIsOneClip) {
  const auto v = t::constant_video(16, 16, 40, {10, 200, 30});
  EXPECT_EQ(detect_scenes(v), (std::vector<ClipRange>{{0, 40}}));
}

TEST(Scenes, MinSceneLenSuppressesEarlyCut) {
  const auto v = t::cut_video(16, 16, 12, {2}, {{255, 0, 0}, {0, 0, 255}});
  EXPECT_EQ(detect_scenes(v, {27.0, 4}), (std::vector<ClipRange>{{0, 12}}));
}

TEST(Scenes, ClipsTileTheSequence) {
  const auto v = t::cut_video(8, 8, 100, {10, 13, 40, 41, 80}, {{255, 0, 0}, {0, 0, 255}, {0, 255, 0}});
  const auto clips = detect_scenes(v, {27.0, 5});
  ASSERT_FALSE(clips.empty());
  EXPECT_EQ(clips.front().start, 0u);
  EXPECT_EQ(clips.back().end, 100u);
  for (std::size_t i = 1; i < clips.size(); ++i) EXPECT_EQ(clips[i - 1].end, clips[i].start);
  for (const auto& c : clips) EXPECT_GE(c.length(), 1u);
}

TEST(BlockFlow, IdenticalFramesAreStill) {
  const auto f = t::texture(32, 24, 5);
  const auto field = block_flow(f, f);
  EXPECT_EQ(field.width, 4);
  EXPECT_EQ(field.height, 3);
  for (const auto& v : field.vectors) EXPECT_EQ(v, (Vec2{0, 0}));
}

TEST(BlockFlow, GridRoundsUp) {
  const auto f = t::texture(30, 17, 5);
  const auto field = block_flow(f, f);
  EXPECT_EQ(field.width, 4);
  EXPECT_EQ(field.height, 3);
}

TEST(BlockFlow, RecoversWrappedShift) {
  const auto a = t::texture(64, 64, 3);
  const auto b = t::shifted(a, 2, 0);
  const auto field = block_flow(a, b);
  for (int by = 1; by < field.height - 1; ++by) {
    for (int bx = 1; bx < field.width - 1; ++bx) EXPECT_EQ(field.at(bx, by), (Vec2{2, 0}));
  }
}

TEST(BlockFlow, SaturatesAtRadius) {
  const auto a = t::texture(64, 64, 3);
  const auto field = block_flow(a, t::shifted(a, 9, 0));
  for (const auto& v : field.vectors) {
    EXPECT_LE(std::abs(v.dx), 7);
    EXPECT_LE(std::abs(v.dy), 7);
  }
}

TEST(BlockFlow, UniformBlocksPreferZero) {
  // Flat frames: every displacement ties, the tie-break picks (0,0).
  const auto f = t::solid(16, 16, {50, 50, 50});
  for (const auto& v : block_flow(f, f).vectors) EXPECT_EQ(v, (Vec2{0, 0}));
}

TEST(FlowScore, StaticIsZero) {
  EXPECT_EQ(flow_score(t::constant_video(32, 32, 10, {1, 2, 3})), 0.0);
}

TEST(FlowScore, UniformMotionInPixelsPerSecond) {
  const auto clip = moving_texture(2, 0, 9, {8, 1});
  EXPECT_NEAR(flow_score(clip), 16.0, 1e-9);
}

TEST(FlowScore, ReversalInvariant) {
  const auto clip = moving_texture(3, 1, 9, {8, 1});
  std::vector<media::Frame> rev(clip.frames().rbegin(), clip.frames().rend());
  const media::FrameSequence back(rev, clip.fps());
  EXPECT_NEAR(flow_score(clip), flow_score(back), 1e-9);
}

TEST(FlowScore, SamplingCapKeepsRate) {
  // 24 fps source with 1 px/frame: sampled every 3rd frame at 8 fps -> 3 px per pair x 8 = 24 px/s.
  const auto clip = moving_texture(1, 0, 25, {24, 1});
  EXPECT_NEAR(flow_score(clip), 24.0, 1e-9);
}

TEST(FlowScore, SingleFrameIsAnError) {
  try {
    flow_score(t::constant_video(8, 8, 1, {0, 0, 0}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("flow undefined"), std::string::npos);
  }
}

TEST(WarpResidual, ZeroForPureTranslation) {
  EXPECT_EQ(warp_residual(t::constant_video(16, 16, 4, {9, 9, 9})), 0.0);
  const auto clip = moving_texture(2, 1, 4, {8, 1});
  EXPECT_LT(warp_residual(clip), 0.02);
}

TEST(TextCover, UniformFrameIsZero) { EXPECT_EQ(text_cover_score(t::solid(64, 64, {128, 128, 128})), 0.0); }

TEST(TextCover, TextRowInBand) {
  const double s = text_cover_score(text_frame(true));
  EXPECT_GE(s, 0.05);
  EXPECT_LE(s, 0.2);
}

TEST(TextCover, TopBandTextIsIgnored) {
  EXPECT_EQ(text_cover_score(text_frame(false)), 0.0);
  TextCoverParams full;
  full.band_fraction = 1.0;
  EXPECT_GT(text_cover_score(text_frame(false), full), 0.0);
}

TEST(TextCover, LargeBlobIsNotText) {
  media::Frame f(64, 64, media::Rgb{20, 20, 20});
  t::fill_rect(f, 0, 48, 64, 16, {240, 240, 240});
  EXPECT_LT(text_cover_score(f), 0.05);
}

TEST(Aesthetic, UniformGrayIsZero) {
  const auto b = aesthetic_breakdown(t::solid(32, 32, {128, 128, 128}));
  EXPECT_EQ(b.colorfulness, 0.0);
  EXPECT_EQ(b.contrast, 0.0);
  EXPECT_EQ(b.sharpness, 0.0);
  EXPECT_EQ(b.score, 0.0);
}

TEST(Aesthetic, CheckerboardBeatsGray) {
  media::Frame f(32, 32);
  for (int y = 0; y < 32; ++y) {
    for (int x = 0; x < 32; ++x) {
      const std::uint8_t v = (x + y) % 2 ? 255 : 0;
      f.set(x, y, {v, v, v});
    }
  }
  EXPECT_GT(aesthetic_ref_score(f), aesthetic_ref_score(t::solid(32, 32, {128, 128, 128})));
}

TEST(Aesthetic, BoundedOnRandomFrames) {
  for (int i = 0; i < 1000; ++i) {
    const double s = aesthetic_ref_score(t::noise_frame(12, 12, static_cast<std::uint64_t>(i)));
    ASSERT_GE(s, 0.0);
    ASSERT_LE(s, 10.0);
  }
}

TEST(MotionClass, FloorCeilingMonotone) {
  EXPECT_EQ(motion_class(t::constant_video(16, 16, 4, {5, 5, 5})), 1);
  EXPECT_EQ(motion_class_of(1000.0), 6);
  int prev = 1;
  for (double f = 0; f < 200; f += 0.5) {
    const int c = motion_class_of(f);
    EXPECT_GE(c, prev);
    EXPECT_GE(c, 1);
    EXPECT_LE(c, 6);
    prev = c;
  }
}

TEST(MotionClass, SweepOfVelocities) {
  int prev = 0;
  for (int v = 0; v <= 7; ++v) {
    const int c = motion_class(moving_texture(v, 0, 5, {8, 1}));
    EXPECT_GE(c, prev);
    prev = c;
  }
  EXPECT_GT(prev, 1);
}

TEST(Hsv, Anchors) {
  const auto red = rgb_to_hsv255({255, 0, 0});
  EXPECT_NEAR(red[0], 0.0, 1e-9);
  EXPECT_NEAR(red[1], 255.0, 1e-9);
  EXPECT_NEAR(red[2], 255.0, 1e-9);
  const auto gray = rgb_to_hsv255({128, 128, 128});
  EXPECT_NEAR(gray[1], 0.0, 1e-9);
}
