#include <gtest/gtest.h>

#include <fstream>

#include "anicurate/error.hpp"
#include "anicurate/media.hpp"
#include "support.hpp"

using namespace anicurate;
using namespace anicurate::media;
using anicurate::testing::TempDir;

namespace {

std::string y4m_444(int w, int h, int frames, std::uint8_t y, std::uint8_t u, std::uint8_t v,
                    const std::string& extra = "") {
  std::string s = "YUV4MPEG2 W" + std::to_string(w) + " H" + std::to_string(h) + " F25:1 Ip A1:1 C444" + extra + "\n";
  for (int f = 0; f < frames; ++f) {
    s += "FRAME\n";
    s += std::string(static_cast<std::size_t>(w) * h, static_cast<char>(y));
    s += std::string(static_cast<std::size_t>(w) * h, static_cast<char>(u));
    s += std::string(static_cast<std::size_t>(w) * h, static_cast<char>(v));
  }
  return s;
}

}  // namespace

TEST(Y4m, ParsesC444Header) {
  const auto seq = parse_y4m(y4m_444(4, 4, 2, 128, 128, 128));
  EXPECT_EQ(seq.width(), 4);
  EXPECT_EQ(seq.height(), 4);
  EXPECT_EQ(seq.size(), 2u);
  EXPECT_EQ(seq.fps(), (Rational{25, 1}));
  EXPECT_DOUBLE_EQ(seq.duration_seconds(), 2.0 / 25.0);
}

TEST(Y4m, NoFramesIsAnError) {
  try {
    parse_y4m("YUV4MPEG2 W4 H4 F25:1 C444\n");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("no frames"), std::string::npos);
  }
}

TEST(Y4m, BlackPointOfC420) {
  std::string s = "YUV4MPEG2 W4 H4 F8:1 C420jpeg\nFRAME\n";
  s += std::string(16, static_cast<char>(16));
  s += std::string(4, static_cast<char>(128));
  s += std::string(4, static_cast<char>(128));
  const auto seq = parse_y4m(s);
  for (int y = 0; y < 4; ++y) {
    for (int x = 0; x < 4; ++x) EXPECT_EQ(seq[0].at(x, y), (Rgb{0, 0, 0}));
  }
}

TEST(Y4m, FullRangeExtension) {
  const auto seq = parse_y4m(y4m_444(2, 2, 1, 16, 128, 128, " XCOLORRANGE=FULL"));
  EXPECT_EQ(seq[0].at(0, 0), (Rgb{16, 16, 16}));
}

TEST(Y4m, TruncatedPayloadNamesFrame) {
  auto s = y4m_444(4, 4, 3, 100, 128, 128);
  s.resize(s.size() - 5);
  try {
    parse_y4m(s);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("frame 2"), std::string::npos) << e.what();
  }
}

TEST(Y4m, MalformedHeaderNamesToken) {
  try {
    parse_y4m("YUV4MPEG2 W4 H4 F25:1 C411\nFRAME\n");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("C411"), std::string::npos) << e.what();
  }
  EXPECT_THROW(parse_y4m("YUV4MPEG W4 H4\n"), ParseError);
  EXPECT_THROW(parse_y4m("YUV4MPEG2 Wx H4 F25:1\nFRAME\n"), ParseError);
}

TEST(Y4m, RoundTripsShapeAndRate) {
  std::vector<Frame> frames;
  for (int i = 0; i < 5; ++i) frames.push_back(anicurate::testing::noise_frame(6, 4, i));
  const FrameSequence seq(frames, {30000, 1001}, "x");
  const auto back = parse_y4m(serialize_y4m(seq));
  EXPECT_EQ(back.size(), seq.size());
  EXPECT_EQ(back.width(), 6);
  EXPECT_EQ(back.height(), 4);
  EXPECT_EQ(back.fps(), seq.fps());
  // Colors survive within the limited-range quantization.
  for (int y = 0; y < 4; ++y) {
    for (int x = 0; x < 6; ++x) {
      for (int c = 0; c < 3; ++c) EXPECT_NEAR(back[2].at(x, y)[c], seq[2].at(x, y)[c], 3);
    }
  }
}

TEST(Ppm, RoundTrip) {
  const auto f = anicurate::testing::noise_frame(5, 3, 7);
  EXPECT_EQ(parse_ppm(serialize_ppm(f)), f);
  EXPECT_THROW(parse_ppm("P5\n1 1\n255\n\0"), ParseError);
}

TEST(FrameDir, ReadsInFilenameOrder) {
  TempDir dir;
  for (int i = 7; i >= 0; --i) {
    char name[16];
    std::snprintf(name, sizeof name, "%03d.ppm", i);
    const auto v = static_cast<std::uint8_t>(i * 10);
    write_ppm(Frame(8, 8, Rgb{v, v, v}), dir / name);
  }
  const auto seq = read_frame_dir(dir.path(), {8, 1});
  ASSERT_EQ(seq.size(), 8u);
  EXPECT_DOUBLE_EQ(seq.duration_seconds(), 1.0);
  for (int i = 0; i < 8; ++i) EXPECT_EQ(seq[i].at(0, 0)[0], i * 10);
}

TEST(FrameDir, MixedDimensionsNameTheFile) {
  TempDir dir;
  write_ppm(Frame(8, 8), dir / "a.ppm");
  write_ppm(Frame(4, 4), dir / "b.ppm");
  try {
    read_frame_dir(dir.path(), {8, 1});
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("b.ppm"), std::string::npos) << e.what();
  }
}

TEST(FrameDir, EmptyDirectoryIsAnError) {
  TempDir dir;
  EXPECT_THROW(read_frame_dir(dir.path(), {8, 1}), Error);
}

TEST(Luma, Anchors) {
  Frame f(3, 1);
  f.set(0, 0, {255, 255, 255});
  f.set(1, 0, {0, 0, 0});
  f.set(2, 0, {255, 0, 0});
  const auto l = to_luma(f);
  EXPECT_NEAR(l.at(0, 0), 1.0, 1e-6);
  EXPECT_NEAR(l.at(1, 0), 0.0, 1e-6);
  EXPECT_NEAR(l.at(2, 0), 0.299, 1e-6);
}

TEST(Luma, MonotoneAndBounded) {
  const auto f = anicurate::testing::noise_frame(16, 16, 3);
  const auto l = to_luma(f);
  for (float v : l.values) {
    EXPECT_GE(v, 0.0f);
    EXPECT_LE(v, 1.0f);
  }
  Frame a(1, 1, Rgb{10, 20, 30}), b(1, 1, Rgb{11, 20, 30});
  EXPECT_LT(to_luma(a).at(0, 0), to_luma(b).at(0, 0));
}

TEST(Components, EmptyMask) { EXPECT_TRUE(connected_components(BinaryMask(5, 5)).empty()); }

TEST(Components, TwoBlocks) {
  BinaryMask m(8, 8);
  for (int y = 1; y < 3; ++y) {
    for (int x = 1; x < 3; ++x) m.set(x, y, true);
  }
  for (int y = 5; y < 7; ++y) {
    for (int x = 4; x < 6; ++x) m.set(x, y, true);
  }
  const auto r = connected_components(m);
  ASSERT_EQ(r.size(), 2u);
  EXPECT_EQ(r[0].pixel_count, 4u);
  EXPECT_EQ(r[0].box, (BoundingBox{1, 1, 2, 2}));
  EXPECT_EQ(r[1].pixel_count, 4u);
  EXPECT_EQ(r[1].box, (BoundingBox{4, 5, 5, 6}));
}

TEST(Components, DiagonalPixelsAreSeparate) {
  BinaryMask m(2, 2);
  m.set(0, 0, true);
  m.set(1, 1, true);
  EXPECT_EQ(connected_components(m).size(), 2u);
}

TEST(Components, FullMaskAndConservation) {
  EXPECT_EQ(connected_components(BinaryMask(7, 5, true)).front().pixel_count, 35u);
  std::mt19937 rng(1);
  BinaryMask m(32, 32);
  for (int y = 0; y < 32; ++y) {
    for (int x = 0; x < 32; ++x) m.set(x, y, rng() % 3 == 0);
  }
  std::size_t sum = 0;
  for (const auto& r : connected_components(m)) sum += r.pixel_count;
  EXPECT_EQ(sum, m.popcount());
}

TEST(SampleFrames, Examples) {
  EXPECT_EQ(sample_frames(9, 3), (std::vector<std::size_t>{0, 4, 8}));
  EXPECT_EQ(sample_frames(5, 1), (std::vector<std::size_t>{0}));
  EXPECT_EQ(sample_frames(2, 5), (std::vector<std::size_t>{0, 1}));
  EXPECT_THROW(sample_frames(5, 0), InvalidArgument);
}

TEST(SampleFrames, EndpointsAndOrder) {
  for (std::size_t count = 1; count < 40; ++count) {
    for (std::size_t n = 1; n < 12; ++n) {
      const auto idx = sample_frames(count, n);
      ASSERT_FALSE(idx.empty());
      EXPECT_EQ(idx.front(), 0u);
      if (n >= 2 && count >= 2) EXPECT_EQ(idx.back(), count - 1);
      for (std::size_t i = 1; i < idx.size(); ++i) EXPECT_LT(idx[i - 1], idx[i]);
      EXPECT_EQ(idx.size(), std::min(n, count));
    }
  }
}

TEST(FrameSequence, RejectsMixedSizes) {
  EXPECT_THROW(FrameSequence({Frame(2, 2), Frame(3, 2)}, {8, 1}), Error);
  EXPECT_THROW(FrameSequence({}, {8, 1}), Error);
}
