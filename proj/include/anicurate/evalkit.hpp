#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "anicurate/analysis.hpp"
#include "anicurate/media.hpp"
#include "anicurate/providers.hpp"

namespace anicurate::evalkit {

using json = nlohmann::json;
using providers::Embedding;
using providers::ModelClient;
using providers::VideoRef;

enum class Style { k2D, k3D };

struct GuideFrameRef {
  int position = 0;
  std::string image;  // path to a P6 file
};

struct CharacterRef {
  std::string character_id;
  std::vector<std::string> images;
};

struct BenchmarkEntry {
  std::string id;
  std::string action_label;
  Style style = Style::k2D;
  std::string prompt;
  std::vector<GuideFrameRef> guide_frames;
  std::vector<CharacterRef> character_refs;
  std::string gt_clip;
};

struct BenchmarkSet {
  bool full_set = false;
  std::vector<BenchmarkEntry> entries;
  std::map<std::string, std::size_t> label_counts;
  std::size_t count_2d = 0;
  std::size_t count_3d = 0;
  std::vector<std::string> warnings;
};

inline constexpr std::size_t kFullSetTotal = 948;
inline constexpr std::size_t kFullSet2D = 857;
inline constexpr std::size_t kFullSet3D = 91;
inline constexpr std::size_t kLabelMin = 10;
inline constexpr std::size_t kLabelMax = 30;

BenchmarkSet parse_benchmark(const json& manifest);
BenchmarkSet load_benchmark(const std::filesystem::path& path);
json benchmark_entry_to_json(const BenchmarkEntry& e);

/// character id -> stored unit-norm features.
class CharacterStore {
 public:
  void add(const std::string& id, Embedding e);
  bool empty() const { return features_.empty(); }
  const std::map<std::string, std::vector<Embedding>>& features() const { return features_; }

  json to_json() const;
  static CharacterStore from_json(const json& j);
  static CharacterStore load(const std::filesystem::path& path);

 private:
  std::map<std::string, std::vector<Embedding>> features_;
};

// --- the six dimensions ---------------------------------------------------------

enum class Dimension { kSmoothness, kMotion, kAppeal, kTextVideo, kImageVideo, kCharacter };
inline constexpr std::array<Dimension, 6> kDimensions{Dimension::kSmoothness, Dimension::kMotion,
                                                      Dimension::kAppeal,     Dimension::kTextVideo,
                                                      Dimension::kImageVideo, Dimension::kCharacter};
const char* dimension_key(Dimension d);     // "smoothness", "motion", ...
const char* dimension_title(Dimension d);   // "Visual Smooth", ...
std::optional<Dimension> dimension_from_key(std::string_view key);

/// Per-dimension score in [0,1]; absent = not applicable or failed.
struct MetricVector {
  std::array<std::optional<double>, 6> values{};
  std::optional<double>& operator[](Dimension d) { return values[static_cast<std::size_t>(d)]; }
  const std::optional<double>& operator[](Dimension d) const { return values[static_cast<std::size_t>(d)]; }
};

inline constexpr const char* kMovingPrompt =
    "The protagonist has a large range of movement, such as running, jumping, dancing, or waving arms.";
inline constexpr const char* kStillPrompt =
    "The protagonist remains stationary in the video with no apparent movement.";

struct MotionScore {
  double moving = 0;  // reported score
  double still = 0;   // 1 - moving
};

/// Two-way softmax (temperature 1) over cosines against the moving and still prompts.
MotionScore motion_softmax(double cos_moving, double cos_still);
MotionScore motion_score(const VideoRef& video, ModelClient& client);

struct KeyframeParams {
  double nms_window_seconds = 0.5;
};
std::vector<std::size_t> extract_keyframes(const media::FrameSequence& video, std::size_t k,
                                           const KeyframeParams& params = {});

double appeal_score(const VideoRef& video, ModelClient& client, std::size_t k = 5);

/// Reference regression head: (cos + 1) / 2.
double reference_regression(double cos);
double text_video_consistency(const VideoRef& video, const std::string& prompt, ModelClient& client);
double image_video_consistency(const VideoRef& video, const media::Frame& guide_image, ModelClient& client);

/// Background zeroed, cropped to the mask's bounding box. Returns nullopt
/// for an empty mask.
std::optional<media::Frame> masked_crop(const media::Frame& frame, const media::BinaryMask& mask);

/// Max cosine (clipped at 0) of one embedding against the whole store.
double store_match(const Embedding& e, const CharacterStore& store);
double character_consistency(const VideoRef& video, const CharacterStore& store, ModelClient& client,
                             std::size_t samples = 8);

/// Builds a store from reference images: every mask the segmenter returns
/// for an image contributes its masked-crop embedding.
CharacterStore build_character_store(const std::vector<CharacterRef>& refs, ModelClient& client);

enum class Provenance { kProvider, kReference, kReferenceFallback };
const char* provenance_name(Provenance p);

struct SmoothnessParams {
  analysis::FlowParams flow{};
  double residual_scale = 0.08;  // mean |luma residual| mapped to score 0
  bool use_provider = true;
};

struct SmoothnessResult {
  double score = 0;
  Provenance provenance = Provenance::kReference;
  std::string note;
};

double reference_smoothness(const media::FrameSequence& video, const SmoothnessParams& params = {});
SmoothnessResult smoothness_score(const VideoRef& video, ModelClient* client, const SmoothnessParams& params = {});

double motion_mask_precision(const media::FrameSequence& video, const media::BinaryMask& mask, double flow_thresh,
                             const analysis::FlowParams& flow = {});

std::vector<media::BoundingBox> saliency_boxes(const media::Frame& frame, ModelClient& client,
                                               std::size_t min_area = 16);

// --- per-sample driver ----------------------------------------------------------

struct EvalParams {
  std::size_t keyframes = 5;         // K
  std::size_t character_samples = 8;  // S
  SmoothnessParams smoothness{};
  KeyframeParams keyframe{};
};

struct SampleEvaluation {
  MetricVector metrics;
  std::map<std::string, std::string> failures;  // dimension key -> reason
  std::map<std::string, std::string> notes;
};

/// Scores one generated video on all six dimensions. Failures of one metric
/// never abort the others. Image-video and character scores are absent when
/// the entry has no guide frame / the store is empty.
SampleEvaluation evaluate_sample(const VideoRef& video, const BenchmarkEntry& entry,
                                 const std::optional<media::Frame>& guide_image, const CharacterStore* store,
                                 ModelClient& client, const EvalParams& params = {});

}  // namespace anicurate::evalkit
