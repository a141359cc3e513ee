#include <atomic>
#include <cmath>
#include <fstream>
#include <unistd.h>

#include "anicurate/error.hpp"
#include "anicurate/providers.hpp"

namespace anicurate::providers {

double Embedding::norm() const {
  double s = 0;
  for (float v : values) s += static_cast<double>(v) * v;
  return std::sqrt(s);
}

Embedding& Embedding::normalize() {
  const double n = norm();
  if (!(n > 0) || !std::isfinite(n)) throw InvalidArgument("cannot normalize a zero or non-finite embedding");
  for (float& v : values) v = static_cast<float>(v / n);
  return *this;
}

double cosine(const Embedding& a, const Embedding& b) {
  if (a.dim() != b.dim()) {
    throw ShapeError("cosine: embedding dims differ (" + std::to_string(a.dim()) + " vs " +
                     std::to_string(b.dim()) + ")");
  }
  double dot = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.dim(); ++i) {
    dot += static_cast<double>(a.values[i]) * b.values[i];
    na += static_cast<double>(a.values[i]) * a.values[i];
    nb += static_cast<double>(b.values[i]) * b.values[i];
  }
  if (na == 0 || nb == 0) throw InvalidArgument("cosine: zero embedding");
  return std::clamp(dot / std::sqrt(na * nb), -1.0, 1.0);
}

json to_json(const Embedding& e) { return json(e.values); }

Embedding embedding_from_json(const json& j) {
  if (!j.is_array() || j.empty()) throw ProtocolError("embedding must be a non-empty array of numbers");
  Embedding e;
  e.values.reserve(j.size());
  for (const auto& v : j) {
    if (!v.is_number()) throw ProtocolError("embedding must be a non-empty array of numbers");
    const auto f = v.get<double>();
    if (!std::isfinite(f)) throw ProtocolError("embedding holds a non-finite value");
    e.values.push_back(static_cast<float>(f));
  }
  return e;
}

const std::vector<std::string>& known_ops() {
  static const std::vector<std::string> ops = {op::kEmbedVideo,       op::kEmbedText,
                                               op::kEmbedImage,       op::kCaption,
                                               op::kCharMasks,        op::kScoreSmoothness,
                                               op::kScoreAesthetic,   op::kScoreRegression};
  return ops;
}

std::string encode_request(const Request& r) {
  return json{{"id", r.id}, {"op", r.op}, {"payload", r.payload}}.dump() + "\n";
}

std::string encode_response(const Response& r) {
  json j{{"id", r.id}, {"ok", r.ok}};
  if (r.ok) {
    j["result"] = r.result;
  } else {
    j["error"] = r.error;
  }
  return j.dump() + "\n";
}

namespace {

json parse_line(std::string_view line) {
  json j = json::parse(line.begin(), line.end(), nullptr, /*allow_exceptions=*/false);
  if (j.is_discarded()) throw ProtocolError("malformed JSON line");
  if (!j.is_object()) throw ProtocolError("protocol message is not a JSON object");
  return j;
}

}  // namespace

Request decode_request(std::string_view line) {
  const json j = parse_line(line);
  if (!j.contains("id") || !j["id"].is_number_integer()) throw ProtocolError("request lacks integer 'id'");
  if (!j.contains("op") || !j["op"].is_string()) throw ProtocolError("request lacks string 'op'");
  if (!j.contains("payload") || !j["payload"].is_object()) {
    throw ProtocolError("request lacks object 'payload'");
  }
  return {j["id"].get<std::int64_t>(), j["op"].get<std::string>(), j["payload"]};
}

Response decode_response(std::string_view line) {
  const json j = parse_line(line);
  if (!j.contains("id") || !j["id"].is_number_integer()) throw ProtocolError("response lacks integer 'id'");
  if (!j.contains("ok") || !j["ok"].is_boolean()) throw ProtocolError("response lacks boolean 'ok'");
  Response r;
  r.id = j["id"].get<std::int64_t>();
  r.ok = j["ok"].get<bool>();
  if (r.ok) {
    if (!j.contains("result") || !j["result"].is_object()) throw ProtocolError("ok response lacks object 'result'");
    r.result = j["result"];
  } else {
    if (!j.contains("error") || !j["error"].is_string()) throw ProtocolError("error response lacks string 'error'");
    r.error = j["error"].get<std::string>();
  }
  return r;
}

namespace {
constexpr char kAlphabet[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
}

std::string base64_encode(std::span<const std::uint8_t> bytes) {
  std::string out;
  out.reserve((bytes.size() + 2) / 3 * 4);
  std::size_t i = 0;
  for (; i + 2 < bytes.size(); i += 3) {
    const std::uint32_t v = (bytes[i] << 16) | (bytes[i + 1] << 8) | bytes[i + 2];
    out += kAlphabet[(v >> 18) & 63];
    out += kAlphabet[(v >> 12) & 63];
    out += kAlphabet[(v >> 6) & 63];
    out += kAlphabet[v & 63];
  }
  if (i < bytes.size()) {
    std::uint32_t v = bytes[i] << 16;
    if (i + 1 < bytes.size()) v |= bytes[i + 1] << 8;
    out += kAlphabet[(v >> 18) & 63];
    out += kAlphabet[(v >> 12) & 63];
    out += i + 1 < bytes.size() ? kAlphabet[(v >> 6) & 63] : '=';
    out += '=';
  }
  return out;
}

std::vector<std::uint8_t> base64_decode(std::string_view text) {
  auto value = [](char c) -> int {
    if (c >= 'A' && c <= 'Z') return c - 'A';
    if (c >= 'a' && c <= 'z') return c - 'a' + 26;
    if (c >= '0' && c <= '9') return c - '0' + 52;
    if (c == '+') return 62;
    if (c == '/') return 63;
    return -1;
  };
  if (text.size() % 4 != 0) throw ProtocolError("base64 length is not a multiple of 4");
  std::vector<std::uint8_t> out;
  out.reserve(text.size() / 4 * 3);
  for (std::size_t i = 0; i < text.size(); i += 4) {
    int v[4];
    int pad = 0;
    for (int k = 0; k < 4; ++k) {
      const char c = text[i + k];
      if (c == '=' && i + 4 == text.size() && k >= 2) {
        v[k] = 0;
        ++pad;
      } else {
        v[k] = value(c);
        if (v[k] < 0 || pad > 0) throw ProtocolError("invalid base64 data");
      }
    }
    const std::uint32_t n = (v[0] << 18) | (v[1] << 12) | (v[2] << 6) | v[3];
    out.push_back(static_cast<std::uint8_t>(n >> 16));
    if (pad < 2) out.push_back(static_cast<std::uint8_t>(n >> 8));
    if (pad < 1) out.push_back(static_cast<std::uint8_t>(n));
  }
  return out;
}

json frame_to_json(const media::Frame& frame) {
  const std::string ppm = media::serialize_ppm(frame);
  return base64_encode({reinterpret_cast<const std::uint8_t*>(ppm.data()), ppm.size()});
}

media::Frame frame_from_json(const json& j) {
  if (!j.is_string()) throw ProtocolError("image must be a base64 P6 string");
  const auto bytes = base64_decode(j.get<std::string>());
  try {
    return media::parse_ppm({reinterpret_cast<const char*>(bytes.data()), bytes.size()});
  } catch (const ParseError& e) {
    throw ProtocolError(std::string("image payload: ") + e.what());
  }
}

json mask_to_json(const media::BinaryMask& mask) {
  const auto bits = mask.bits();
  std::vector<std::uint8_t> packed((bits.size() + 7) / 8, 0);
  for (std::size_t i = 0; i < bits.size(); ++i) {
    if (bits[i]) packed[i / 8] |= static_cast<std::uint8_t>(0x80 >> (i % 8));
  }
  return {{"width", mask.width()}, {"height", mask.height()}, {"bits", base64_encode(packed)}};
}

media::BinaryMask mask_from_json(const json& j) {
  if (!j.is_object() || !j.contains("width") || !j.contains("height") || !j.contains("bits") ||
      !j["width"].is_number_integer() || !j["height"].is_number_integer() || !j["bits"].is_string()) {
    throw ProtocolError("mask must be {width, height, bits}");
  }
  const int w = j["width"].get<int>();
  const int h = j["height"].get<int>();
  if (w <= 0 || h <= 0) throw ProtocolError("mask dimensions must be positive");
  const auto packed = base64_decode(j["bits"].get<std::string>());
  const std::size_t n = static_cast<std::size_t>(w) * h;
  if (packed.size() != (n + 7) / 8) throw ProtocolError("mask bit payload has the wrong length");
  media::BinaryMask mask(w, h);
  for (std::size_t i = 0; i < n; ++i) {
    if (packed[i / 8] & (0x80 >> (i % 8))) mask.set(static_cast<int>(i % w), static_cast<int>(i / w), true);
  }
  return mask;
}

struct VideoRef::TempFile {
  std::filesystem::path path;
  ~TempFile() {
    std::error_code ec;
    std::filesystem::remove(path, ec);
  }
};

VideoRef VideoRef::from_path(std::filesystem::path path, media::Rational dir_fps) {
  VideoRef v;
  v.frames_ = std::make_shared<const media::FrameSequence>(media::load_video(path, dir_fps));
  v.path_ = std::move(path);
  return v;
}

VideoRef VideoRef::from_sequence(media::FrameSequence seq) {
  static std::atomic<std::uint64_t> counter{0};
  VideoRef v;
  v.temp_ = std::make_shared<TempFile>();
  v.temp_->path = std::filesystem::temp_directory_path() /
                  ("anicurate-" + std::to_string(::getpid()) + "-" + std::to_string(counter++) + ".y4m");
  media::write_y4m(seq, v.temp_->path);
  v.path_ = v.temp_->path;
  // Keep the decoded file contents so that local kernels and providers see
  // identical pixels.
  v.frames_ = std::make_shared<const media::FrameSequence>(media::read_y4m(v.path_));
  return v;
}

json VideoRef::to_json() const {
  return {{"path", path_.string()}, {"fps", {frames_->fps().num, frames_->fps().den}}};
}

Response call_provider(Endpoint& endpoint, const Request& request, int retries) {
  for (int attempt = 0;; ++attempt) {
    try {
      Response r = endpoint.call(request);
      if (r.id != request.id) {
        throw ProtocolError("response id " + std::to_string(r.id) + " does not match request id " +
                            std::to_string(request.id) + " from " + endpoint.describe());
      }
      return r;
    } catch (const TransportError&) {
      if (attempt >= retries) throw;
    }
  }
}

}  // namespace anicurate::providers
