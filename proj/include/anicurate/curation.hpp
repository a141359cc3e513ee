#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "anicurate/analysis.hpp"
#include "anicurate/providers.hpp"

namespace anicurate::curation {

using json = nlohmann::json;

struct ClipScores {
  std::optional<double> text_cover;  // [0,1]
  std::optional<double> flow;        // px/s
  std::optional<double> aesthetic;   // [0,10]
  double duration = 0;               // seconds
  std::size_t frame_count = 0;
};

struct FilterRule {
  double text_cover_max = 1.0;
  double flow_min = 0.0;
  double flow_max = 1e9;
  double aesthetic_min = 0.0;
  double duration_min = 2.0;
  double duration_max = 20.0;

  void validate() const;
};

/// Dimension names as they appear in verdicts, manifests and reports.
inline constexpr const char* kDuration = "duration";
inline constexpr const char* kTextCover = "text_cover";
inline constexpr const char* kFlow = "flow";
inline constexpr const char* kAesthetic = "aesthetic";

struct Verdict {
  bool pass = false;
  std::vector<std::string> reasons;  // failed dimensions, in the order above
};

struct ClipRecord {
  std::string id;
  std::string source;
  analysis::ClipRange range;
  double fps = 0;
  ClipScores scores;
  std::optional<Verdict> verdict;
  std::optional<std::string> caption;
  std::map<std::string, std::string> tags;
};

/// Throws InvalidArgument naming the first missing score.
Verdict apply_filter(const ClipScores& scores, const FilterRule& rule);

struct Calibration {
  FilterRule rule;
  double keep_fraction = 0;      // per-dimension quantile actually used
  double measured_retention = 0;  // on the calibration sample
};

/// Solves equal per-dimension keep quantiles so the joint pass rate on
/// `scores` lands within 10% (relative) of `target_retention`. Duration
/// bounds stay fixed at [2 s, 20 s].
Calibration calibrate(const std::vector<ClipScores>& scores, double target_retention);

double measure_retention(const std::vector<ClipScores>& scores, const FilterRule& rule);

struct HistogramRow {
  std::string dimension;
  double bin_lo = 0;
  double bin_hi = 0;
  std::size_t count = 0;
};

std::vector<HistogramRow> histogram_report(const std::vector<ClipScores>& scores, std::size_t bins_per_dim);
std::string histogram_csv(const std::vector<HistogramRow>& rows);

struct ManifestResult {
  std::vector<ClipRecord> emitted;
  std::vector<std::pair<std::string, std::string>> skipped;  // (id, reason)
};

/// Captions every passing record (ordered by id) through `captioner` and
/// drops records whose caption fails or comes back empty. Throws Error when
/// more than 10% of the passing records fail.
ManifestResult build_manifest(std::vector<ClipRecord> records, providers::ModelClient& captioner);

json record_to_json(const ClipRecord& r);
ClipRecord record_from_json(const json& j);
json rule_to_json(const FilterRule& rule);
FilterRule rule_from_json(const json& j);

/// One JSON object per line.
std::string to_jsonl(const std::vector<ClipRecord>& records);
std::vector<ClipRecord> from_jsonl(std::string_view text);

/// Deterministic clip-score corpus with independent uniform dimensions:
/// text_cover U[0,1], flow U[0,60] px/s, aesthetic U[0,10], frame_count
/// U{8..200} at 8 fps (durations 1-25 s).
std::vector<ClipScores> synthetic_score_corpus(std::size_t n, std::uint64_t seed);

}  // namespace anicurate::curation
