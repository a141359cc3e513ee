#include <algorithm>
#include <cmath>

#include "anicurate/analysis.hpp"
#include "anicurate/error.hpp"
#include "anicurate/providers.hpp"

namespace anicurate::providers {
namespace {

constexpr int kHueBins = 8;
constexpr int kSatBins = 4;
constexpr int kValBins = 2;
constexpr int kHistBins = kHueBins * kSatBins * kValBins;  // 64

int hist_bin(media::Rgb rgb) {
  const auto hsv = analysis::rgb_to_hsv255(rgb);
  const int h = std::min(kHueBins - 1, static_cast<int>(hsv[0] * kHueBins / 255.0));
  const int s = std::min(kSatBins - 1, static_cast<int>(hsv[1] * kSatBins / 256.0));
  const int v = std::min(kValBins - 1, static_cast<int>(hsv[2] * kValBins / 256.0));
  return (h * kSatBins + s) * kValBins + v;
}

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

const json& require(const json& payload, const char* key) {
  if (!payload.contains(key)) throw ProtocolError(std::string("payload lacks '") + key + "'");
  return payload[key];
}

media::FrameSequence load_payload_video(const json& v) {
  if (!v.is_object() || !v.contains("path") || !v["path"].is_string()) {
    throw ProtocolError("video must be {\"path\": string}");
  }
  media::Rational fps{8, 1};
  if (v.contains("fps")) {
    const auto& f = v["fps"];
    if (!f.is_array() || f.size() != 2) throw ProtocolError("video fps must be [num, den]");
    fps = {f[0].get<std::int64_t>(), f[1].get<std::int64_t>()};
  }
  return media::load_video(v["path"].get<std::string>(), fps);
}

}  // namespace

Embedding ReferenceProvider::embed_image(const media::Frame& frame) const {
  Embedding e;
  e.values.assign(kHistBins, 0.0f);
  auto px = frame.pixels();
  for (std::size_t i = 0; i < frame.pixel_count(); ++i) {
    e.values[hist_bin({px[3 * i], px[3 * i + 1], px[3 * i + 2]})] += 1.0f;
  }
  return e.normalize();
}

Embedding ReferenceProvider::embed_video(const media::FrameSequence& seq) const {
  std::vector<double> mean(kHistBins, 0.0);
  for (std::size_t idx : media::sample_frames(seq, config_.video_samples)) {
    const Embedding fe = embed_image(seq[idx]);
    for (int i = 0; i < kHistBins; ++i) mean[i] += fe.values[i];
  }
  double norm = 0;
  for (double v : mean) norm += v * v;
  norm = std::sqrt(norm);

  const double flow = seq.size() >= 2 ? analysis::flow_score(seq, config_.flow) : 0.0;
  const double motion = flow / (flow + config_.motion_norm);

  Embedding e;
  e.values.reserve(kHistBins + 1);
  for (double v : mean) e.values.push_back(static_cast<float>(v / norm));
  e.values.push_back(static_cast<float>(motion));
  return e.normalize();
}

Embedding ReferenceProvider::embed_text(std::string_view text, std::size_t dim) const {
  if (dim == 0) dim = config_.text_dim;
  const std::uint64_t seed = fnv1a(text);
  Embedding e;
  e.values.resize(dim);
  for (std::size_t i = 0; i < dim; ++i) {
    const std::uint64_t r = splitmix64(seed + i);
    e.values[i] = static_cast<float>(static_cast<double>(r >> 11) * 0x1.0p-53 * 2.0 - 1.0);
  }
  return e.normalize();
}

std::vector<media::BinaryMask> ReferenceProvider::char_masks(const media::Frame& frame) const {
  const int w = frame.width();
  const int h = frame.height();
  double sum[3] = {0, 0, 0};
  std::size_t count = 0;
  auto add = [&](int x, int y) {
    const auto c = frame.at(x, y);
    for (int k = 0; k < 3; ++k) sum[k] += c[k];
    ++count;
  };
  for (int x = 0; x < w; ++x) {
    add(x, 0);
    if (h > 1) add(x, h - 1);
  }
  for (int y = 1; y + 1 < h; ++y) {
    add(0, y);
    if (w > 1) add(w - 1, y);
  }
  const double bg[3] = {sum[0] / count, sum[1] / count, sum[2] / count};

  media::BinaryMask fg(w, h);
  const double t2 = config_.mask_color_distance * config_.mask_color_distance;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const auto c = frame.at(x, y);
      double d2 = 0;
      for (int k = 0; k < 3; ++k) d2 += (c[k] - bg[k]) * (c[k] - bg[k]);
      fg.set(x, y, d2 > t2);
    }
  }

  const auto labeling = media::label_components(fg);
  std::vector<media::BinaryMask> masks;
  for (std::size_t r = 0; r < labeling.regions.size(); ++r) {
    if (labeling.regions[r].pixel_count < config_.mask_min_area) continue;
    media::BinaryMask m(w, h);
    const auto label = static_cast<std::int32_t>(r + 1);
    for (int y = labeling.regions[r].box.y0; y <= labeling.regions[r].box.y1; ++y) {
      for (int x = labeling.regions[r].box.x0; x <= labeling.regions[r].box.x1; ++x) {
        if (labeling.labels[static_cast<std::size_t>(y) * w + x] == label) m.set(x, y, true);
      }
    }
    masks.push_back(std::move(m));
  }
  return masks;
}

std::string ReferenceProvider::caption(const json& clip) const {
  if (clip.contains("caption_hint") && clip["caption_hint"].is_string()) {
    return clip["caption_hint"].get<std::string>();
  }
  std::string id = clip.contains("id") && clip["id"].is_string() ? clip["id"].get<std::string>() : "clip";
  std::string text = "An animation clip (" + id + ")";
  if (clip.contains("frame_start") && clip.contains("frame_end")) {
    const auto n = clip["frame_end"].get<std::int64_t>() - clip["frame_start"].get<std::int64_t>();
    text += " with " + std::to_string(n) + " frames";
  }
  return text + ".";
}

double ReferenceProvider::score_smoothness(const media::FrameSequence& seq) const {
  const double residual = analysis::warp_residual(seq, config_.flow);
  return 1.0 - std::clamp(residual / config_.smoothness_residual_scale, 0.0, 1.0);
}

double ReferenceProvider::score_aesthetic(const Embedding& e) const {
  // Mass-weighted preference for saturated, bright histogram bins.
  double num = 0, den = 0;
  for (std::size_t i = 0; i < e.dim(); ++i) {
    const double m = static_cast<double>(e.values[i]) * e.values[i];
    double weight = 0.5;
    if (i < static_cast<std::size_t>(kHistBins)) {
      const int v = static_cast<int>(i) % kValBins;
      const int s = (static_cast<int>(i) / kValBins) % kSatBins;
      weight = 0.5 * (s + 1.0) / kSatBins + 0.5 * (v + 1.0) / kValBins;
    }
    num += weight * m;
    den += m;
  }
  if (den == 0) throw InvalidArgument("score_aesthetic: zero embedding");
  return std::clamp(num / den, 0.0, 1.0);
}

double ReferenceProvider::score_regression(const Embedding& a, const Embedding& b) const {
  return std::clamp((cosine(a, b) + 1.0) / 2.0, 0.0, 1.0);
}

Response ReferenceProvider::handle(const Request& request) const {
  Response r;
  r.id = request.id;
  const json& p = request.payload;
  try {
    const std::string& o = request.op;
    if (o == op::kEmbedImage) {
      r.result = {{"embedding", to_json(embed_image(frame_from_json(require(p, "image"))))}};
    } else if (o == op::kEmbedVideo) {
      r.result = {{"embedding", to_json(embed_video(load_payload_video(require(p, "video"))))}};
    } else if (o == op::kEmbedText) {
      const auto& text = require(p, "text");
      if (!text.is_string()) throw ProtocolError("text must be a string");
      std::size_t dim = 0;
      if (p.contains("dim")) {
        if (!p["dim"].is_number_unsigned() || p["dim"].get<std::size_t>() == 0) {
          throw ProtocolError("dim must be a positive integer");
        }
        dim = p["dim"].get<std::size_t>();
      }
      r.result = {{"embedding", to_json(embed_text(text.get<std::string>(), dim))}};
    } else if (o == op::kCaption) {
      const auto& clip = require(p, "clip");
      if (!clip.is_object()) throw ProtocolError("clip must be an object");
      r.result = {{"caption", caption(clip)}};
    } else if (o == op::kCharMasks) {
      json masks = json::array();
      for (const auto& m : char_masks(frame_from_json(require(p, "image")))) masks.push_back(mask_to_json(m));
      r.result = {{"masks", std::move(masks)}};
    } else if (o == op::kScoreSmoothness) {
      r.result = {{"score", score_smoothness(load_payload_video(require(p, "video")))}};
    } else if (o == op::kScoreAesthetic) {
      r.result = {{"score", score_aesthetic(embedding_from_json(require(p, "embedding")))}};
    } else if (o == op::kScoreRegression) {
      r.result = {{"score", score_regression(embedding_from_json(require(p, "a")),
                                             embedding_from_json(require(p, "b")))}};
    } else {
      throw ProtocolError("unknown op '" + o + "'");
    }
    r.ok = true;
  } catch (const std::exception& e) {
    r.ok = false;
    r.result = json::object();
    r.error = e.what();
  }
  return r;
}

}  // namespace anicurate::providers
