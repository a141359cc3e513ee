#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "anicurate/evalkit.hpp"

namespace anicurate::report {

using evalkit::Dimension;
using evalkit::MetricVector;
using json = nlohmann::json;

struct SampleResult {
  std::string model;
  std::string entry;
  MetricVector metrics;
  std::map<std::string, std::string> failures;  // dimension key -> reason
  std::map<std::string, std::string> notes;
};

json to_json(const SampleResult& r);
SampleResult sample_result_from_json(const json& j);
std::string to_jsonl(const std::vector<SampleResult>& results);
std::vector<SampleResult> results_from_jsonl(std::string_view text);

struct Cell {
  std::optional<double> value;  // 0..100, two decimals
  std::size_t used = 0;
  std::size_t total = 0;

  double coverage() const { return total == 0 ? 0.0 : static_cast<double>(used) / static_cast<double>(total); }
};

struct ModelRow {
  std::string model;
  std::array<Cell, 6> cells{};          // indexed like evalkit::kDimensions
  std::optional<double> human;          // Human Evaluation column, 0..100

  Cell& operator[](Dimension d) { return cells[static_cast<std::size_t>(d)]; }
  const Cell& operator[](Dimension d) const { return cells[static_cast<std::size_t>(d)]; }
};

struct Report {
  std::vector<ModelRow> rows;  // sorted by model id
  bool has_human = false;
};

double round2(double x);

/// Per model and dimension: mean over non-failed samples, x100, two
/// decimals. Independent of input order.
Report aggregate(const std::vector<SampleResult>& results);

struct HumanRating {
  std::string rater;
  std::string entry;
  std::string model;
  std::array<int, 6> ratings{};  // smooth, motion, appeal, tvc, ivc, ipc; each 1..5
  std::optional<int> overall;
};

/// CSV with header "rater,entry,model,smooth,motion,appeal,tvc,ivc,ipc" and
/// an optional trailing "overall" column.
std::vector<HumanRating> parse_ratings_csv(std::string_view text);
std::vector<HumanRating> read_ratings_csv(const std::filesystem::path& path);

struct HumanMeans {
  std::array<std::optional<double>, 6> dims{};  // 0..100
  std::optional<double> overall;

  /// The table's Human Evaluation value: the overall rating when ingested,
  /// otherwise the mean of the six dimension means.
  std::optional<double> headline() const;
};

/// Ratings mapped 1..5 -> 0..100 by (r - 1) / 4 * 100, averaged over raters
/// and entries.
std::map<std::string, HumanMeans> human_mean(const std::vector<HumanRating>& ratings);
double rating_to_percent(double rating);

/// Fills each row's Human Evaluation column.
void attach_human(Report& report, const std::map<std::string, HumanMeans>& human);

/// nullopt when either series has zero variance or fewer than 2 points.
std::optional<double> pearson(const std::vector<double>& x, const std::vector<double>& y);
/// Pearson over average ranks (ties share their mean rank).
std::optional<double> spearman(const std::vector<double>& x, const std::vector<double>& y);
std::vector<double> average_ranks(const std::vector<double>& x);

struct Alignment {
  Dimension dimension{};
  std::size_t models = 0;
  std::optional<double> pearson;
  std::optional<double> spearman;
  std::string note;
};

inline constexpr std::size_t kMinAlignmentModels = 3;

/// Per dimension, correlates model-level metric cells with human means over
/// the models present in both.
std::vector<Alignment> alignment(const Report& metrics, const std::map<std::string, HumanMeans>& human);

std::string render_markdown(const Report& report);
std::string render_csv(const Report& report);
Report parse_report_csv(std::string_view text);
std::string render_alignment_markdown(const std::vector<Alignment>& rows);

}  // namespace anicurate::report
