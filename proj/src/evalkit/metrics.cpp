#include <algorithm>
#include <cmath>
#include <numeric>

#include "anicurate/error.hpp"
#include "anicurate/evalkit.hpp"

namespace anicurate::evalkit {

const char* dimension_key(Dimension d) {
  switch (d) {
    case Dimension::kSmoothness: return "smoothness";
    case Dimension::kMotion: return "motion";
    case Dimension::kAppeal: return "appeal";
    case Dimension::kTextVideo: return "text_video";
    case Dimension::kImageVideo: return "image_video";
    case Dimension::kCharacter: return "character";
  }
  return "?";
}

const char* dimension_title(Dimension d) {
  switch (d) {
    case Dimension::kSmoothness: return "Visual Smooth";
    case Dimension::kMotion: return "Visual Motion";
    case Dimension::kAppeal: return "Visual Appeal";
    case Dimension::kTextVideo: return "Text-Video Consistency";
    case Dimension::kImageVideo: return "Image-Video Consistency";
    case Dimension::kCharacter: return "Character Consistency";
  }
  return "?";
}

std::optional<Dimension> dimension_from_key(std::string_view key) {
  for (Dimension d : kDimensions) {
    if (key == dimension_key(d)) return d;
  }
  return std::nullopt;
}

MotionScore motion_softmax(double cos_moving, double cos_still) {
  // Logistic form of the two-way softmax; avoids overflow for any input.
  MotionScore s;
  s.moving = 1.0 / (1.0 + std::exp(cos_still - cos_moving));
  s.still = 1.0 - s.moving;
  return s;
}

MotionScore motion_score(const VideoRef& video, ModelClient& client) {
  const Embedding v = client.embed_video(video);
  const Embedding moving = client.embed_text(kMovingPrompt, v.dim());
  const Embedding still = client.embed_text(kStillPrompt, v.dim());
  return motion_softmax(providers::cosine(v, moving), providers::cosine(v, still));
}

std::vector<std::size_t> extract_keyframes(const media::FrameSequence& video, std::size_t k,
                                           const KeyframeParams& params) {
  if (k == 0) throw InvalidArgument("keyframe count must be at least 1");
  const std::size_t n = video.size();

  std::vector<std::pair<double, std::size_t>> peaks;
  for (std::size_t i = 1; i < n; ++i) {
    const double d = analysis::content_delta(video[i - 1], video[i]);
    if (d > 0) peaks.emplace_back(d, i);
  }
  std::sort(peaks.begin(), peaks.end(), [](const auto& a, const auto& b) {
    return a.first != b.first ? a.first > b.first : a.second < b.second;
  });

  const auto window = static_cast<std::size_t>(
      std::max<long long>(1, std::llround(video.fps().value() * params.nms_window_seconds)));
  std::vector<std::size_t> picked;
  for (const auto& [delta, i] : peaks) {
    if (picked.size() == k) break;
    const bool suppressed = std::any_of(picked.begin(), picked.end(), [&](std::size_t j) {
      return (i > j ? i - j : j - i) < window;
    });
    if (!suppressed) picked.push_back(i);
  }

  if (picked.size() < k) {
    for (std::size_t i : media::sample_frames(n, k)) {
      if (picked.size() == k) break;
      if (std::find(picked.begin(), picked.end(), i) == picked.end()) picked.push_back(i);
    }
  }
  std::sort(picked.begin(), picked.end());
  return picked;
}

double appeal_score(const VideoRef& video, ModelClient& client, std::size_t k) {
  const auto& seq = video.frames();
  const auto keys = extract_keyframes(seq, k);
  double sum = 0;
  for (std::size_t i : keys) sum += client.score_aesthetic(client.embed_image(seq[i]));
  return std::clamp(sum / static_cast<double>(keys.size()), 0.0, 1.0);
}

double reference_regression(double cos) { return std::clamp((cos + 1.0) / 2.0, 0.0, 1.0); }

double text_video_consistency(const VideoRef& video, const std::string& prompt, ModelClient& client) {
  const Embedding v = client.embed_video(video);
  const Embedding t = client.embed_text(prompt, v.dim());
  return client.score_regression(v, t);
}

double image_video_consistency(const VideoRef& video, const media::Frame& guide_image, ModelClient& client) {
  // Both sides go through the vision encoder: the guide is a one-frame video.
  const auto& seq = video.frames();
  const VideoRef guide = VideoRef::from_sequence(media::FrameSequence({guide_image}, seq.fps(), "guide"));
  return client.score_regression(client.embed_video(video), client.embed_video(guide));
}

std::optional<media::Frame> masked_crop(const media::Frame& frame, const media::BinaryMask& mask) {
  if (mask.width() != frame.width() || mask.height() != frame.height()) {
    throw ShapeError("mask is " + std::to_string(mask.width()) + "x" + std::to_string(mask.height()) +
                     ", frame is " + std::to_string(frame.width()) + "x" + std::to_string(frame.height()));
  }
  int x0 = frame.width(), y0 = frame.height(), x1 = -1, y1 = -1;
  for (int y = 0; y < mask.height(); ++y) {
    for (int x = 0; x < mask.width(); ++x) {
      if (!mask.get(x, y)) continue;
      x0 = std::min(x0, x);
      y0 = std::min(y0, y);
      x1 = std::max(x1, x);
      y1 = std::max(y1, y);
    }
  }
  if (x1 < 0) return std::nullopt;
  media::Frame out(x1 - x0 + 1, y1 - y0 + 1, media::Rgb{0, 0, 0});
  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) {
      if (mask.get(x, y)) out.set(x - x0, y - y0, frame.at(x, y));
    }
  }
  return out;
}

double store_match(const Embedding& e, const CharacterStore& store) {
  double best = 0;
  for (const auto& [id, list] : store.features()) {
    for (const auto& f : list) {
      if (f.dim() != e.dim()) {
        throw ShapeError("character '" + id + "' feature has dim " + std::to_string(f.dim()) +
                         ", embedding has " + std::to_string(e.dim()));
      }
      best = std::max(best, providers::cosine(e, f));
    }
  }
  return std::min(best, 1.0);
}

double character_consistency(const VideoRef& video, const CharacterStore& store, ModelClient& client,
                             std::size_t samples) {
  if (store.empty()) throw InvalidArgument("character store is empty");
  const auto& seq = video.frames();
  const auto indices = media::sample_frames(seq, samples);
  double sum = 0;
  for (std::size_t i : indices) {
    double frame_score = 0;
    for (const auto& mask : client.char_masks(seq[i])) {
      const auto crop = masked_crop(seq[i], mask);
      if (!crop) continue;
      frame_score = std::max(frame_score, store_match(client.embed_image(*crop), store));
    }
    sum += frame_score;
  }
  return sum / static_cast<double>(indices.size());
}

CharacterStore build_character_store(const std::vector<CharacterRef>& refs, ModelClient& client) {
  CharacterStore store;
  for (const auto& ref : refs) {
    for (const auto& path : ref.images) {
      const media::Frame image = media::read_ppm(path);
      for (const auto& mask : client.char_masks(image)) {
        if (auto crop = masked_crop(image, mask)) store.add(ref.character_id, client.embed_image(*crop));
      }
    }
  }
  return store;
}

const char* provenance_name(Provenance p) {
  switch (p) {
    case Provenance::kProvider: return "provider";
    case Provenance::kReference: return "reference";
    case Provenance::kReferenceFallback: return "reference-fallback";
  }
  return "?";
}

double reference_smoothness(const media::FrameSequence& video, const SmoothnessParams& params) {
  if (video.size() < 2) throw InvalidArgument("smoothness needs at least 2 frames");
  const double residual = analysis::warp_residual(video, params.flow);
  return 1.0 - std::clamp(residual / params.residual_scale, 0.0, 1.0);
}

SmoothnessResult smoothness_score(const VideoRef& video, ModelClient* client, const SmoothnessParams& params) {
  SmoothnessResult r;
  if (client != nullptr && params.use_provider) {
    try {
      r.score = client->score_smoothness(video);
      r.provenance = Provenance::kProvider;
      return r;
    } catch (const Error& e) {
      r.provenance = Provenance::kReferenceFallback;
      r.note = std::string("smoothness provider failed (") + e.what() + "); used reference scorer";
    }
  }
  r.score = reference_smoothness(video.frames(), params);
  return r;
}

double motion_mask_precision(const media::FrameSequence& video, const media::BinaryMask& mask, double flow_thresh,
                             const analysis::FlowParams& flow) {
  if (mask.width() != video.width() || mask.height() != video.height()) {
    throw ShapeError("motion mask is " + std::to_string(mask.width()) + "x" + std::to_string(mask.height()) +
                     ", video is " + std::to_string(video.width()) + "x" + std::to_string(video.height()));
  }
  std::size_t moving = 0, inside = 0;
  for (std::size_t i = 1; i < video.size(); ++i) {
    const auto field = analysis::block_flow(video[i - 1], video[i], flow.block, flow.radius);
    for (int by = 0; by < field.height; ++by) {
      for (int bx = 0; bx < field.width; ++bx) {
        const auto& v = field.at(bx, by);
        if (std::hypot(v.dx, v.dy) <= flow_thresh) continue;
        ++moving;
        const int x0 = bx * field.block, y0 = by * field.block;
        const int cx = std::min(x0 + field.block / 2, video.width() - 1);
        const int cy = std::min(y0 + field.block / 2, video.height() - 1);
        if (mask.get(cx, cy)) ++inside;
      }
    }
  }
  return moving == 0 ? 1.0 : static_cast<double>(inside) / static_cast<double>(moving);
}

std::vector<media::BoundingBox> saliency_boxes(const media::Frame& frame, ModelClient& client,
                                               std::size_t min_area) {
  const auto masks = client.char_masks(frame);
  media::BinaryMask all(frame.width(), frame.height());
  for (const auto& m : masks) {
    if (m.width() != frame.width() || m.height() != frame.height()) {
      throw ShapeError("segmenter returned a " + std::to_string(m.width()) + "x" + std::to_string(m.height()) +
                       " mask for a " + std::to_string(frame.width()) + "x" + std::to_string(frame.height()) +
                       " frame");
    }
    for (int y = 0; y < m.height(); ++y) {
      for (int x = 0; x < m.width(); ++x) {
        if (m.get(x, y)) all.set(x, y, true);
      }
    }
  }
  std::vector<media::BoundingBox> boxes;
  for (const auto& region : media::connected_components(all)) {
    if (region.pixel_count >= min_area) boxes.push_back(region.box);
  }
  return boxes;
}

SampleEvaluation evaluate_sample(const VideoRef& video, const BenchmarkEntry& entry,
                                 const std::optional<media::Frame>& guide_image, const CharacterStore* store,
                                 ModelClient& client, const EvalParams& params) {
  SampleEvaluation out;
  auto run = [&](Dimension d, auto&& fn) {
    try {
      out.metrics[d] = fn();
    } catch (const std::exception& e) {
      out.failures[dimension_key(d)] = e.what();
    }
  };

  run(Dimension::kSmoothness, [&] {
    const auto r = smoothness_score(video, &client, params.smoothness);
    out.notes["smoothness_provenance"] = provenance_name(r.provenance);
    if (!r.note.empty()) out.notes["smoothness"] = r.note;
    return r.score;
  });
  run(Dimension::kMotion, [&] { return motion_score(video, client).moving; });
  run(Dimension::kAppeal, [&] { return appeal_score(video, client, params.keyframes); });
  run(Dimension::kTextVideo, [&] { return text_video_consistency(video, entry.prompt, client); });
  if (guide_image) {
    run(Dimension::kImageVideo, [&] { return image_video_consistency(video, *guide_image, client); });
  }
  if (store != nullptr && !store->empty()) {
    run(Dimension::kCharacter,
        [&] { return character_consistency(video, *store, client, params.character_samples); });
  }
  return out;
}

}  // namespace anicurate::evalkit
