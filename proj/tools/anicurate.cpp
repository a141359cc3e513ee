// Command-line driver for the curation / conditioning / evaluation pipeline.
#include <iostream>
#include <optional>
#include <string>

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "CLI11.hpp"
#include "anicurate/error.hpp"
#include "anicurate/pipeline.hpp"

using namespace anicurate;
namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

void fail(const std::string& stage, const char* kind, const std::string& message) {
  std::cerr << json{{"error", kind}, {"stage", stage}, {"message", message}}.dump() << std::endl;
}

curation::ClipRecord synthetic_record(std::size_t i, const curation::ClipScores& s) {
  char id[32];
  std::snprintf(id, sizeof id, "synth-score-%05zu", i);
  curation::ClipRecord r;
  r.id = id;
  r.source = "synthetic";
  r.range = {0, s.frame_count};
  r.fps = 8.0;
  r.scores = s;
  return r;
}

}  // namespace

int main(int argc, char** argv) {
  spdlog::set_default_logger(spdlog::stderr_color_mt("anicurate"));

  CLI::App app{"anicurate: animation clip curation, conditioning and benchmark evaluation"};
  app.require_subcommand(1);
  std::string config_path;
  std::optional<std::size_t> workers;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  bool quiet = false;
  app.add_option("--config", config_path, "Pipeline config (JSON)");
  app.add_option("--workers", workers, "Worker threads")->check(CLI::PositiveNumber);
  app.add_option("--seed", seed, "Master seed");
  app.add_option("--out", out, "Output directory");
  app.add_flag("-q,--quiet", quiet, "Only log warnings and errors");

  auto* config_cmd = app.add_subcommand("config", "Print the effective config with all defaults");
  config_cmd->fallthrough();

  auto* synth = app.add_subcommand("synth", "Write a synthetic video corpus (or score corpus)");
  std::size_t synth_videos = 12, synth_scores = 0;
  int synth_w = 96, synth_h = 64;
  std::string synth_dir;
  synth->add_option("--videos", synth_videos, "Number of Y4M videos");
  synth->add_option("--width", synth_w)->check(CLI::Range(16, 4096));
  synth->add_option("--height", synth_h)->check(CLI::Range(16, 4096));
  synth->add_option("--dir", synth_dir, "Video directory (default <out>/synth)");
  synth->add_option("--scores", synth_scores, "Instead write N synthetic score records to <out>/scores.jsonl");

  auto* scenes = app.add_subcommand("scenes", "Detect scenes and emit the clip list");
  std::vector<std::string> inputs;
  scenes->add_option("--input", inputs, "Input video(s); replaces config inputs");

  auto* score = app.add_subcommand("score", "Score every clip (text cover, flow, aesthetics, duration)");
  auto* calibrate = app.add_subcommand("calibrate", "Solve filter thresholds for a retention target");
  std::optional<double> target;
  std::optional<std::string> scores_path;
  calibrate->add_option("--target", target, "Target retention in (0,1)");
  calibrate->add_option("--scores", scores_path, "Scores JSONL (default <out>/scores.jsonl)");
  auto* filter = app.add_subcommand("filter", "Apply the filter rule to scored clips");
  std::optional<std::string> rule_path;
  filter->add_option("--rule", rule_path, "Rule JSON (default <out>/rule.json, else config)");
  auto* manifest = app.add_subcommand("manifest", "Caption passing clips and emit the manifest");
  auto* histogram = app.add_subcommand("histogram", "Per-dimension score histograms as CSV");
  auto* condition = app.add_subcommand("condition", "Build conditioning bundles for manifest clips");
  auto* evaluate = app.add_subcommand("evaluate", "Score generated videos on the six benchmark dimensions");
  auto* report = app.add_subcommand("report", "Aggregate results into a Table-1 style report");
  std::optional<std::string> results_path, ratings_path;
  report->add_option("--results", results_path, "Results JSONL (default <out>/results.jsonl)");
  report->add_option("--ratings", ratings_path, "Human ratings CSV");

  auto* prov = app.add_subcommand("providers", "Provider utilities");
  auto* prov_test = prov->add_subcommand("test", "Schema-conformance check of a provider endpoint");
  prov->require_subcommand(1);
  std::string role_name, endpoint_spec;
  prov_test->add_option("--role", role_name, "Check the endpoint configured for this role");
  prov_test->add_option("--endpoint", endpoint_spec, "Check this endpoint spec directly");

  for (auto* sub : app.get_subcommands([](const CLI::App*) { return true; })) sub->fallthrough();
  prov_test->fallthrough();

  CLI11_PARSE(app, argc, argv);
  if (quiet) spdlog::set_level(spdlog::level::warn);

  std::string stage = app.get_subcommands().front()->get_name();
  pipeline::PipelineConfig cfg;
  try {
    if (!config_path.empty()) cfg = pipeline::load_config(config_path);
    if (workers) cfg.workers = *workers;
    if (seed) cfg.seed = *seed;
    if (out) cfg.out = *out;
    if (!inputs.empty()) cfg.inputs = inputs;
    if (ratings_path) cfg.evaluation.ratings = *ratings_path;
    pipeline::apply_env_overrides(cfg.providers);
  } catch (const Error& e) {
    fail("config", e.kind(), e.what());
    return 2;
  }

  try {
    pipeline::StageResult r;
    if (config_cmd->parsed()) {
      std::cout << pipeline::config_to_json(cfg).dump(2) << std::endl;
      return 0;
    } else if (synth->parsed()) {
      if (synth_scores > 0) {
        const auto corpus = curation::synthetic_score_corpus(synth_scores, pipeline::stage_seed(cfg.seed, "synth"));
        std::vector<curation::ClipRecord> records;
        for (std::size_t i = 0; i < corpus.size(); ++i) records.push_back(synthetic_record(i, corpus[i]));
        r.artifact = cfg.out / pipeline::artifact::kScores;
        pipeline::write_atomic(r.artifact, curation::to_jsonl(records));
        r.summary = {{"records", records.size()}};
      } else {
        const fs::path dir = synth_dir.empty() ? cfg.out / "synth" : fs::path(synth_dir);
        const auto videos = pipeline::write_synthetic_videos(dir, synth_videos, cfg.seed, synth_w, synth_h);
        json list = json::array();
        for (const auto& v : videos) list.push_back({{"path", v.path.string()}, {"cuts", v.cuts}});
        r.artifact = dir;
        r.summary = {{"videos", std::move(list)}};
      }
    } else if (scenes->parsed()) {
      r = pipeline::run_scenes(cfg);
    } else if (score->parsed()) {
      r = pipeline::run_score(cfg);
    } else if (calibrate->parsed()) {
      r = pipeline::run_calibrate(cfg, target, scores_path ? std::optional<fs::path>(*scores_path) : std::nullopt);
    } else if (filter->parsed()) {
      r = pipeline::run_filter(cfg, rule_path ? std::optional<fs::path>(*rule_path) : std::nullopt);
    } else if (manifest->parsed()) {
      r = pipeline::run_manifest(cfg);
    } else if (histogram->parsed()) {
      r = pipeline::run_histogram(cfg);
    } else if (condition->parsed()) {
      r = pipeline::run_condition(cfg);
    } else if (evaluate->parsed()) {
      r = pipeline::run_evaluate(cfg);
    } else if (report->parsed()) {
      r = pipeline::run_report(cfg, results_path ? std::optional<fs::path>(*results_path) : std::nullopt);
      std::cout << pipeline::read_text(r.artifact);
      return 0;
    } else if (prov_test->parsed()) {
      stage = "providers test";
      std::shared_ptr<providers::Endpoint> ep;
      providers::CallOptions opts;
      opts.timeout = std::chrono::milliseconds(cfg.providers.timeout_ms);
      opts.retries = cfg.providers.retries;
      if (!endpoint_spec.empty()) {
        ep = providers::make_endpoint(endpoint_spec, opts);
      } else if (!role_name.empty()) {
        const auto role = providers::role_from_name(role_name);
        if (!role) throw InvalidArgument("unknown role '" + role_name + "'");
        const auto it = cfg.providers.endpoints.find(*role);
        ep = providers::make_endpoint(it != cfg.providers.endpoints.end() ? it->second : cfg.providers.fallback, opts);
      } else {
        ep = providers::make_endpoint(cfg.providers.fallback, opts);
      }
      const auto rep = providers::conformance_check(*ep);
      for (const auto& line : rep.lines) std::cout << line << "\n";
      std::cout << (rep.failures.empty() ? "PASS " : "FAIL ") << ep->describe() << std::endl;
      return rep.failures.empty() ? 0 : 1;
    }
    std::cout << json{{"stage", stage}, {"artifact", r.artifact.string()}, {"summary", r.summary}}.dump() << std::endl;
    return 0;
  } catch (const Error& e) {
    fail(stage, e.kind(), e.what());
  } catch (const std::exception& e) {
    fail(stage, "internal_error", e.what());
  }
  return 1;
}
