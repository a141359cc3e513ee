#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "anicurate/analysis.hpp"
#include "anicurate/curation.hpp"
#include "anicurate/evalkit.hpp"
#include "anicurate/providers.hpp"

namespace anicurate::pipeline {

using json = nlohmann::json;

struct ProviderSettings {
  std::string fallback = "ref";                          // endpoint for roles not listed
  std::map<providers::Role, std::string> endpoints;      // role -> "ref" | "exec:..." | "tcp:host:port"
  int timeout_ms = 30000;
  int retries = 1;
};

struct ConditioningSettings {
  std::size_t text_dim = 65;
  int unmask_interior = 6;
  std::size_t schedule_steps = 1000;
  double beta_start = 1e-4;
  double beta_end = 0.02;
  bool motion_area = false;  // guide with the tracked foreground union instead of full frames
};

struct EvaluationSettings {
  std::string benchmark;                      // manifest JSON
  std::map<std::string, std::string> models;  // model id -> directory of <entry id>.y4m
  std::string characters;                     // optional global character store JSON
  std::string ratings;                        // optional human ratings CSV
  std::size_t character_samples = 8;
  std::size_t keyframes = 5;
  double residual_scale = 0.08;
};

struct PipelineConfig {
  std::vector<std::string> inputs;  // Y4M files, PPM frame directories, or directories of .y4m files
  media::Rational frame_dir_fps{8, 1};

  analysis::SceneParams scenes{};
  analysis::FlowParams flow{};
  analysis::TextCoverParams text_cover{};
  analysis::AestheticParams aesthetic{};
  std::size_t score_frames = 8;  // frames sampled per clip for text cover and aesthetics

  curation::FilterRule rule{};
  double target_retention = 0.10;
  std::size_t histogram_bins = 20;

  ProviderSettings providers{};
  ConditioningSettings conditioning{};
  EvaluationSettings evaluation{};

  std::size_t workers = 1;
  std::uint64_t seed = 0;
  std::filesystem::path out = "out";
};

/// Unknown keys anywhere in the document are rejected with ConfigError
/// naming the dotted key path.
PipelineConfig config_from_json(const json& j);
json config_to_json(const PipelineConfig& c);
PipelineConfig load_config(const std::filesystem::path& path);

/// ANICURATE_PROVIDER_<ROLE> (e.g. ANICURATE_PROVIDER_CAPTIONER) overrides
/// the configured endpoint for that role.
void apply_env_overrides(ProviderSettings& p);
std::unique_ptr<providers::ModelClient> make_client(const ProviderSettings& p);

/// Per-stage seed: splitmix64 of the config seed mixed with the FNV-1a hash
/// of the stage name.
std::uint64_t stage_seed(std::uint64_t seed, std::string_view stage);
std::uint64_t fnv1a(std::string_view text);

/// Runs fn(index, worker) for index in [0, n) on `workers` threads. The
/// exception of the lowest failing index is rethrown after all workers stop.
void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t, std::size_t)>& fn);

/// Writes through `<path>.tmp` and renames into place.
void write_atomic(const std::filesystem::path& path, std::string_view content);
std::string read_text(const std::filesystem::path& path);

// --- artifacts in the output directory --------------------------------------------

namespace artifact {
inline constexpr const char* kClips = "clips.jsonl";
inline constexpr const char* kScores = "scores.jsonl";
inline constexpr const char* kRule = "rule.json";
inline constexpr const char* kVerdicts = "verdicts.jsonl";
inline constexpr const char* kManifest = "manifest.jsonl";
inline constexpr const char* kHistogram = "histogram.csv";
inline constexpr const char* kConditionDir = "condition";
inline constexpr const char* kConditionIndex = "condition.jsonl";
inline constexpr const char* kResults = "results.jsonl";
inline constexpr const char* kReportMd = "report.md";
inline constexpr const char* kReportCsv = "report.csv";
inline constexpr const char* kAlignment = "alignment.md";
}  // namespace artifact

/// Stage outcome: artifact written plus a small summary for logging.
struct StageResult {
  std::filesystem::path artifact;
  json summary = json::object();
};

StageResult run_scenes(const PipelineConfig& c);
StageResult run_score(const PipelineConfig& c);
/// Reads `scores` (default <out>/scores.jsonl).
StageResult run_calibrate(const PipelineConfig& c, std::optional<double> target = std::nullopt,
                          const std::optional<std::filesystem::path>& scores = std::nullopt);
/// Rule precedence: `rule` argument, then <out>/rule.json, then the config rule.
StageResult run_filter(const PipelineConfig& c, const std::optional<std::filesystem::path>& rule = std::nullopt);
StageResult run_manifest(const PipelineConfig& c);
StageResult run_histogram(const PipelineConfig& c);
StageResult run_condition(const PipelineConfig& c);
StageResult run_evaluate(const PipelineConfig& c);
StageResult run_report(const PipelineConfig& c, const std::optional<std::filesystem::path>& results = std::nullopt);

/// Scores one clip with the configured analyzers.
curation::ClipScores score_clip(const media::FrameSequence& clip, const PipelineConfig& c);

// --- synthetic inputs --------------------------------------------------------------

struct SynthVideo {
  std::filesystem::path path;
  std::vector<std::size_t> cuts;  // frame indices where a new scene starts
};

/// Writes `count` Y4M videos of animated sprites over textured backdrops
/// with hard cuts into `dir`. Deterministic given `seed`.
std::vector<SynthVideo> write_synthetic_videos(const std::filesystem::path& dir, std::size_t count,
                                               std::uint64_t seed, int width = 96, int height = 64);

/// The video built by write_synthetic_videos for index `i`.
media::FrameSequence synthetic_video(std::size_t i, std::uint64_t seed, int width, int height,
                                     std::vector<std::size_t>* cuts = nullptr);

}  // namespace anicurate::pipeline
