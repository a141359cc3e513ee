#include <array>
#include <cmath>

#include "anicurate/error.hpp"
#include "anicurate/providers.hpp"

namespace anicurate::providers {
namespace {

struct RoleInfo {
  Role role;
  const char* name;
};

constexpr std::array<RoleInfo, 8> kRoles{{
    {Role::kCaptioner, "captioner"},
    {Role::kVideoEncoder, "video_encoder"},
    {Role::kTextEncoder, "text_encoder"},
    {Role::kImageEncoder, "image_encoder"},
    {Role::kSegmenter, "segmenter"},
    {Role::kSmoothness, "smoothness"},
    {Role::kAesthetic, "aesthetic"},
    {Role::kRegression, "regression"},
}};

double score_from(const json& result) {
  if (!result.contains("score") || !result["score"].is_number()) {
    throw ProtocolError("result lacks numeric 'score'");
  }
  const double s = result["score"].get<double>();
  if (!std::isfinite(s) || s < 0.0 || s > 1.0) {
    throw ProtocolError("score " + std::to_string(s) + " outside [0,1]");
  }
  return s;
}

}  // namespace

const char* role_name(Role role) {
  for (const auto& r : kRoles) {
    if (r.role == role) return r.name;
  }
  return "unknown";
}

std::optional<Role> role_from_name(std::string_view name) {
  for (const auto& r : kRoles) {
    if (name == r.name) return r.role;
  }
  return std::nullopt;
}

const std::vector<Role>& all_roles() {
  static const std::vector<Role> roles = [] {
    std::vector<Role> v;
    for (const auto& r : kRoles) v.push_back(r.role);
    return v;
  }();
  return roles;
}

Role role_for_op(std::string_view o) {
  if (o == op::kCaption) return Role::kCaptioner;
  if (o == op::kEmbedVideo) return Role::kVideoEncoder;
  if (o == op::kEmbedText) return Role::kTextEncoder;
  if (o == op::kEmbedImage) return Role::kImageEncoder;
  if (o == op::kCharMasks) return Role::kSegmenter;
  if (o == op::kScoreSmoothness) return Role::kSmoothness;
  if (o == op::kScoreAesthetic) return Role::kAesthetic;
  if (o == op::kScoreRegression) return Role::kRegression;
  throw InvalidArgument("unknown provider op '" + std::string(o) + "'");
}

ModelClient::ModelClient(std::shared_ptr<Endpoint> fallback, int retries)
    : fallback_(std::move(fallback)), retries_(retries) {}

void ModelClient::set(Role role, std::shared_ptr<Endpoint> endpoint) {
  endpoints_[role] = std::move(endpoint);
}

bool ModelClient::has(Role role) const { return endpoints_.count(role) > 0 || fallback_ != nullptr; }

Endpoint& ModelClient::endpoint(Role role) const {
  if (auto it = endpoints_.find(role); it != endpoints_.end()) return *it->second;
  if (!fallback_) throw ConfigError(std::string("no provider configured for role ") + role_name(role));
  return *fallback_;
}

json ModelClient::request(std::string_view o, json payload) {
  Request req;
  {
    std::lock_guard lock(id_mutex_);
    req.id = next_id_++;
  }
  req.op = std::string(o);
  req.payload = std::move(payload);
  Endpoint& ep = endpoint(role_for_op(o));
  Response resp = call_provider(ep, req, retries_);
  if (!resp.ok) throw ProviderError(ep.describe() + " failed " + req.op + ": " + resp.error);
  return std::move(resp.result);
}

namespace {

Embedding embedding_result(const json& result) {
  if (!result.contains("embedding")) throw ProtocolError("result lacks 'embedding'");
  Embedding e = embedding_from_json(result["embedding"]);
  if (!(e.norm() > 0)) throw ProtocolError("provider returned a zero embedding");
  return e.normalize();
}

}  // namespace

Embedding ModelClient::embed_text(std::string_view text, std::size_t dim) {
  json payload{{"text", text}};
  if (dim > 0) payload["dim"] = dim;
  return embedding_result(request(op::kEmbedText, std::move(payload)));
}

Embedding ModelClient::embed_image(const media::Frame& frame) {
  return embedding_result(request(op::kEmbedImage, {{"image", frame_to_json(frame)}}));
}

Embedding ModelClient::embed_video(const VideoRef& video) {
  return embedding_result(request(op::kEmbedVideo, {{"video", video.to_json()}}));
}

std::string ModelClient::caption(const json& clip) {
  const json r = request(op::kCaption, {{"clip", clip}});
  if (!r.contains("caption") || !r["caption"].is_string()) throw ProtocolError("result lacks string 'caption'");
  return r["caption"].get<std::string>();
}

std::vector<media::BinaryMask> ModelClient::char_masks(const media::Frame& frame) {
  const json r = request(op::kCharMasks, {{"image", frame_to_json(frame)}});
  if (!r.contains("masks") || !r["masks"].is_array()) throw ProtocolError("result lacks array 'masks'");
  std::vector<media::BinaryMask> masks;
  for (const auto& m : r["masks"]) {
    auto mask = mask_from_json(m);
    if (mask.width() != frame.width() || mask.height() != frame.height()) {
      throw ProtocolError("char mask size does not match the frame");
    }
    masks.push_back(std::move(mask));
  }
  return masks;
}

double ModelClient::score_smoothness(const VideoRef& video) {
  return score_from(request(op::kScoreSmoothness, {{"video", video.to_json()}}));
}

double ModelClient::score_aesthetic(const Embedding& e) {
  return score_from(request(op::kScoreAesthetic, {{"embedding", to_json(e)}}));
}

double ModelClient::score_regression(const Embedding& a, const Embedding& b) {
  return score_from(request(op::kScoreRegression, {{"a", to_json(a)}, {"b", to_json(b)}}));
}

ConformanceReport conformance_check(Endpoint& endpoint) {
  ConformanceReport report;
  auto ep = std::shared_ptr<Endpoint>(&endpoint, [](Endpoint*) {});
  ModelClient client(ep, 0);

  media::Frame frame(16, 16, media::Rgb{20, 20, 20});
  for (int y = 4; y < 12; ++y) {
    for (int x = 4; x < 12; ++x) frame.set(x, y, {230, 40, 40});
  }
  std::vector<media::Frame> frames(4, frame);
  const auto video = VideoRef::from_sequence(media::FrameSequence(frames, {8, 1}, "conformance"));

  auto check = [&](const char* name, auto&& fn) {
    try {
      fn();
      report.lines.push_back(std::string("PASS ") + name);
    } catch (const std::exception& e) {
      report.lines.push_back(std::string("FAIL ") + name + ": " + e.what());
      report.failures.push_back(name);
    }
  };
  auto unit = [](const Embedding& e) {
    if (std::abs(e.norm() - 1.0) > 1e-5) throw ProtocolError("embedding is not unit-norm");
  };

  Embedding image_emb, video_emb;
  check(op::kEmbedText, [&] { unit(client.embed_text("a")); });
  check(op::kEmbedImage, [&] { unit(image_emb = client.embed_image(frame)); });
  check(op::kEmbedVideo, [&] { unit(video_emb = client.embed_video(video)); });
  check(op::kCaption, [&] {
    if (client.caption({{"id", "conformance_0000"}}).empty()) throw ProtocolError("empty caption");
  });
  check(op::kCharMasks, [&] { client.char_masks(frame); });
  check(op::kScoreSmoothness, [&] { client.score_smoothness(video); });
  check(op::kScoreAesthetic, [&] { client.score_aesthetic(image_emb.dim() ? image_emb : client.embed_image(frame)); });
  check(op::kScoreRegression, [&] {
    const Embedding e = image_emb.dim() ? image_emb : client.embed_image(frame);
    const double s = client.score_regression(e, e);
    if (s < 0.0 || s > 1.0) throw ProtocolError("regression score outside [0,1]");
  });
  check("error_reporting", [&] {
    Request bad{999999, "no_such_op", json::object()};
    Response r = call_provider(endpoint, bad, 0);
    if (r.ok || r.error.empty()) throw ProtocolError("unknown op was not reported as an error");
  });
  return report;
}

}  // namespace anicurate::providers
