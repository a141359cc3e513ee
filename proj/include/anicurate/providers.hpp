#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "anicurate/analysis.hpp"
#include "anicurate/media.hpp"
#include "json.hpp"

namespace anicurate::providers {

using json = nlohmann::json;

// --- embeddings -------------------------------------------------------------

struct Embedding {
  std::vector<float> values;

  std::size_t dim() const { return values.size(); }
  double norm() const;
  /// Scales to unit L2 norm. Throws if the norm is zero or not finite.
  Embedding& normalize();
};

double cosine(const Embedding& a, const Embedding& b);
json to_json(const Embedding& e);
Embedding embedding_from_json(const json& j);

// --- wire protocol ----------------------------------------------------------
//
// UTF-8, one JSON object per line.
//   request:  {"id": int, "op": string, "payload": object}
//   response: {"id": int, "ok": true, "result": object}
//           | {"id": int, "ok": false, "error": string}

namespace op {
inline constexpr const char* kEmbedVideo = "embed_video";
inline constexpr const char* kEmbedText = "embed_text";
inline constexpr const char* kEmbedImage = "embed_image";
inline constexpr const char* kCaption = "caption";
inline constexpr const char* kCharMasks = "char_masks";
inline constexpr const char* kScoreSmoothness = "score_smoothness";
inline constexpr const char* kScoreAesthetic = "score_aesthetic";
inline constexpr const char* kScoreRegression = "score_regression";
}  // namespace op

const std::vector<std::string>& known_ops();

struct Request {
  std::int64_t id = 0;
  std::string op;
  json payload = json::object();
};

struct Response {
  std::int64_t id = 0;
  bool ok = false;
  json result = json::object();
  std::string error;
};

std::string encode_request(const Request& r);
std::string encode_response(const Response& r);
/// Throws ProtocolError on malformed JSON or schema violations.
Request decode_request(std::string_view line);
Response decode_response(std::string_view line);

std::string base64_encode(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> base64_decode(std::string_view text);

json frame_to_json(const media::Frame& frame);  // base64 P6
media::Frame frame_from_json(const json& j);
json mask_to_json(const media::BinaryMask& mask);  // {width, height, bits: base64 of packed rows}
media::BinaryMask mask_from_json(const json& j);

/// A video handed to providers by path. In-memory sequences are written to
/// a private temporary Y4M file that lives as long as the last copy of the
/// reference.
class VideoRef {
 public:
  static VideoRef from_path(std::filesystem::path path, media::Rational dir_fps = {8, 1});
  static VideoRef from_sequence(media::FrameSequence seq);

  const media::FrameSequence& frames() const { return *frames_; }
  const std::filesystem::path& path() const { return path_; }
  json to_json() const;

 private:
  struct TempFile;
  std::shared_ptr<const media::FrameSequence> frames_;
  std::filesystem::path path_;
  std::shared_ptr<TempFile> temp_;
};

// --- endpoints --------------------------------------------------------------

struct CallOptions {
  std::chrono::milliseconds timeout{30000};
  int retries = 1;  // extra attempts after a TransportError
};

class Endpoint {
 public:
  virtual ~Endpoint() = default;
  /// One request/response exchange. Throws TransportError, ProtocolError.
  virtual Response call(const Request& request) = 0;
  virtual std::string describe() const = 0;
};

/// Checks that the response answers the request; throws ProtocolError on an
/// id mismatch. Retries TransportErrors up to `retries` times.
Response call_provider(Endpoint& endpoint, const Request& request, int retries = 0);

struct ReferenceConfig {
  std::size_t text_dim = 65;  // matches the 64 histogram bins + motion channel of video embeddings
  std::size_t video_samples = 8;
  double motion_norm = 16.0;  // px/s at which the motion channel reads 0.5
  analysis::FlowParams flow{};
  double mask_color_distance = 48.0;  // RGB euclidean distance from the border mean
  std::size_t mask_min_area = 16;
  double smoothness_residual_scale = 0.08;
};

/// Deterministic in-process implementations of every provider op.
class ReferenceProvider {
 public:
  explicit ReferenceProvider(ReferenceConfig config = {}) : config_(config) {}

  const ReferenceConfig& config() const { return config_; }

  /// Never throws; failures come back as {"ok": false}.
  Response handle(const Request& request) const;

  Embedding embed_image(const media::Frame& frame) const;
  Embedding embed_video(const media::FrameSequence& seq) const;
  Embedding embed_text(std::string_view text, std::size_t dim = 0) const;
  std::vector<media::BinaryMask> char_masks(const media::Frame& frame) const;
  std::string caption(const json& clip) const;
  double score_smoothness(const media::FrameSequence& seq) const;
  double score_aesthetic(const Embedding& e) const;
  double score_regression(const Embedding& a, const Embedding& b) const;

 private:
  ReferenceConfig config_;
};

/// Serves any handler in-process; each call round-trips through the line
/// encoder so schema conformance matches the out-of-process path.
class InProcessEndpoint : public Endpoint {
 public:
  using Handler = std::function<Response(const Request&)>;
  explicit InProcessEndpoint(Handler handler, std::string name = "in-process");
  explicit InProcessEndpoint(std::shared_ptr<const ReferenceProvider> provider);

  Response call(const Request& request) override;
  std::string describe() const override { return name_; }

 private:
  Handler handler_;
  std::string name_;
};

/// Spawns `argv` and talks to it over stdin/stdout. Calls are serialized;
/// the child is restarted after a transport failure.
class SubprocessEndpoint : public Endpoint {
 public:
  SubprocessEndpoint(std::vector<std::string> argv, CallOptions options = {});
  ~SubprocessEndpoint() override;
  SubprocessEndpoint(const SubprocessEndpoint&) = delete;
  SubprocessEndpoint& operator=(const SubprocessEndpoint&) = delete;

  Response call(const Request& request) override;
  std::string describe() const override;

 private:
  void start();
  void stop();
  Response exchange(const Request& request);

  std::vector<std::string> argv_;
  CallOptions options_;
  std::mutex mutex_;
  int pid_ = -1;
  int to_child_ = -1;
  int from_child_ = -1;
  std::string buffer_;
};

class TcpEndpoint : public Endpoint {
 public:
  TcpEndpoint(std::string host, int port, CallOptions options = {});
  ~TcpEndpoint() override;
  TcpEndpoint(const TcpEndpoint&) = delete;
  TcpEndpoint& operator=(const TcpEndpoint&) = delete;

  Response call(const Request& request) override;
  std::string describe() const override;

 private:
  void connect_socket();
  void close_socket();
  Response exchange(const Request& request);

  std::string host_;
  int port_;
  CallOptions options_;
  std::mutex mutex_;
  int fd_ = -1;
  std::string buffer_;
};

/// "ref" | "exec:<command line>" | "tcp:<host>:<port>"
std::shared_ptr<Endpoint> make_endpoint(const std::string& spec, CallOptions options = {},
                                        const ReferenceConfig& ref = {});

/// Reads requests line by line from `in`, answers on `out` until EOF.
void serve_lines(const ReferenceProvider& provider, std::istream& in, std::ostream& out);

/// Accepts connections on 127.0.0.1:`port` and serves each sequentially.
/// Returns after `max_connections` connections when it is positive.
/// `on_listening` receives the bound port (useful with port 0).
void serve_tcp(const ReferenceProvider& provider, int port, int max_connections = 0,
               const std::function<void(int)>& on_listening = {});

// --- typed client -----------------------------------------------------------

enum class Role {
  kCaptioner,
  kVideoEncoder,
  kTextEncoder,
  kImageEncoder,
  kSegmenter,
  kSmoothness,
  kAesthetic,
  kRegression,
};

const char* role_name(Role role);
std::optional<Role> role_from_name(std::string_view name);
Role role_for_op(std::string_view op);
const std::vector<Role>& all_roles();

/// Routes each op to the endpoint configured for its role.
class ModelClient {
 public:
  explicit ModelClient(std::shared_ptr<Endpoint> fallback, int retries = 1);

  void set(Role role, std::shared_ptr<Endpoint> endpoint);
  bool has(Role role) const;
  Endpoint& endpoint(Role role) const;

  /// Sends `op` and returns the result object; throws ProviderError when the
  /// provider reports failure.
  json request(std::string_view op, json payload);

  Embedding embed_text(std::string_view text, std::size_t dim = 0);
  Embedding embed_image(const media::Frame& frame);
  Embedding embed_video(const VideoRef& video);
  std::string caption(const json& clip);
  std::vector<media::BinaryMask> char_masks(const media::Frame& frame);
  double score_smoothness(const VideoRef& video);
  double score_aesthetic(const Embedding& e);
  double score_regression(const Embedding& a, const Embedding& b);

 private:
  std::shared_ptr<Endpoint> fallback_;
  std::map<Role, std::shared_ptr<Endpoint>> endpoints_;
  int retries_;
  std::int64_t next_id_ = 1;
  std::mutex id_mutex_;
};

/// Drives every op against `endpoint` with canned inputs and validates
/// the response schema. Returns one line per op; empty `failures` = pass.
struct ConformanceReport {
  std::vector<std::string> lines;
  std::vector<std::string> failures;
};
ConformanceReport conformance_check(Endpoint& endpoint);

}  // namespace anicurate::providers
