#include <gtest/gtest.h>

#include <cstdlib>
#include <set>

#include "anicurate/error.hpp"
#include "anicurate/pipeline.hpp"
#include "anicurate/report.hpp"
#include "fixtures.hpp"

using namespace anicurate;
using namespace anicurate::pipeline;
namespace fs = std::filesystem;
namespace t = anicurate::testing;

namespace {

std::string cli() { return ANICURATE_CLI; }

PipelineConfig synthetic_config(const fs::path& root, std::size_t videos, std::size_t workers) {
  PipelineConfig c;
  write_synthetic_videos(root / "videos", videos, 5);
  c.inputs = {(root / "videos").string()};
  c.out = root / ("out-w" + std::to_string(workers));
  c.workers = workers;
  c.seed = 11;
  // Permissive rule so later stages see clips.
  c.rule.text_cover_max = 1.0;
  c.rule.flow_min = 0.0;
  c.rule.flow_max = 1e9;
  c.rule.aesthetic_min = 0.0;
  return c;
}

void run_all(const PipelineConfig& c) {
  run_scenes(c);
  run_score(c);
  run_filter(c);
  run_manifest(c);
  run_histogram(c);
  run_condition(c);
}

std::map<std::string, std::string> artifacts(const fs::path& out) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(out)) {
    if (e.is_regular_file()) files[fs::relative(e.path(), out).string()] = t::slurp(e.path());
  }
  return files;
}

}  // namespace

TEST(Config, DefaultsRoundTrip) {
  const PipelineConfig c;
  const auto j = config_to_json(c);
  EXPECT_EQ(config_to_json(config_from_json(j)), j);
  EXPECT_EQ(c.conditioning.unmask_interior, 6);
  EXPECT_EQ(c.scenes.threshold, 27.0);
}

TEST(Config, UnknownKeyNamesPath) {
  try {
    config_from_json(json{{"analysis", {{"flow", {{"blok", 8}}}}}});
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("analysis.flow.blok"), std::string::npos) << e.what();
  }
  EXPECT_THROW(config_from_json(json{{"workers", "four"}}), ConfigError);
  EXPECT_THROW(config_from_json(json{{"providers", {{"roles", {{"painter", "ref"}}}}}}), ConfigError);
}

TEST(Config, ParsesNestedSections) {
  const auto c = config_from_json(json::parse(R"({
    "inputs": ["a.y4m"], "workers": 3, "seed": 9,
    "filter": {"rule": {"flow_min": 1.5}, "target_retention": 0.2},
    "providers": {"roles": {"captioner": "exec:/bin/cat"}, "retries": 0},
    "conditioning": {"unmask_interior": 2}
  })"));
  EXPECT_EQ(c.workers, 3u);
  EXPECT_EQ(c.seed, 9u);
  EXPECT_EQ(c.rule.flow_min, 1.5);
  EXPECT_EQ(c.target_retention, 0.2);
  EXPECT_EQ(c.providers.endpoints.at(providers::Role::kCaptioner), "exec:/bin/cat");
  EXPECT_EQ(c.conditioning.unmask_interior, 2);
}

TEST(Config, EnvironmentOverridesRoles) {
  ::setenv("ANICURATE_PROVIDER_SEGMENTER", "tcp:127.0.0.1:9", 1);
  ProviderSettings p;
  apply_env_overrides(p);
  ::unsetenv("ANICURATE_PROVIDER_SEGMENTER");
  EXPECT_EQ(p.endpoints.at(providers::Role::kSegmenter), "tcp:127.0.0.1:9");
  EXPECT_EQ(p.endpoints.count(providers::Role::kCaptioner), 0u);
}

TEST(Seeds, StableAndDistinctPerStage) {
  EXPECT_EQ(stage_seed(1, "condition"), stage_seed(1, "condition"));
  EXPECT_NE(stage_seed(1, "condition"), stage_seed(1, "evaluate"));
  EXPECT_NE(stage_seed(1, "condition"), stage_seed(2, "condition"));
  EXPECT_EQ(fnv1a(""), 14695981039346656037ULL);
  EXPECT_EQ(fnv1a("a"), 0xaf63dc4c8601ec8cULL);
}

TEST(ParallelFor, VisitsEveryIndexOnce) {
  std::vector<std::atomic<int>> hits(1000);
  parallel_for(hits.size(), 4, [&](std::size_t i, std::size_t w) {
    EXPECT_LT(w, 4u);
    ++hits[i];
  });
  for (const auto& h : hits) EXPECT_EQ(h.load(), 1);
  parallel_for(0, 4, [](std::size_t, std::size_t) { FAIL(); });
}

TEST(ParallelFor, RethrowsFailure) {
  EXPECT_THROW(parallel_for(50, 3,
                            [](std::size_t i, std::size_t) {
                              if (i == 7) throw ParseError("bad item 7");
                            }),
               ParseError);
  try {
    parallel_for(10, 1, [](std::size_t i, std::size_t) {
      if (i >= 2) throw Error("item " + std::to_string(i));
    });
  } catch (const Error& e) {
    EXPECT_STREQ(e.what(), "item 2");
  }
}

TEST(WriteAtomic, ReplacesWholeFile) {
  t::TempDir dir;
  write_atomic(dir / "sub/a.txt", "first");
  write_atomic(dir / "sub/a.txt", "second");
  EXPECT_EQ(read_text(dir / "sub/a.txt"), "second");
  EXPECT_FALSE(fs::exists(dir / "sub/a.txt.tmp"));
}

TEST(Synthetic, CutsAreRecoveredByScenes) {
  t::TempDir dir;
  const auto videos = write_synthetic_videos(dir.path(), 3, 2);
  ASSERT_EQ(videos.size(), 3u);
  PipelineConfig c;
  c.out = dir / "out";
  for (const auto& v : videos) c.inputs.push_back(v.path.string());
  const auto res = run_scenes(c);
  const auto clips = curation::from_jsonl(read_text(res.artifact));
  std::size_t expected = 0;
  for (const auto& v : videos) expected += v.cuts.size() + 1;
  EXPECT_EQ(clips.size(), expected);
}

TEST(Stages, DeterministicAcrossWorkerCounts) {
  t::TempDir dir;
  const auto a = synthetic_config(dir.path(), 4, 1);
  run_all(a);
  auto b = a;
  b.workers = 4;
  b.out = dir / "out-w4";
  run_all(b);
  const auto fa = artifacts(a.out), fb = artifacts(b.out);
  ASSERT_FALSE(fa.empty());
  EXPECT_EQ(fa.size(), fb.size());
  for (const auto& [name, bytes] : fa) {
    ASSERT_TRUE(fb.count(name)) << name;
    EXPECT_TRUE(fb.at(name) == bytes) << name << " differs";
  }
  EXPECT_TRUE(fa.count("condition.jsonl"));
  EXPECT_TRUE(fa.count("manifest.jsonl"));
}

TEST(Stages, FilterNeedsScores) {
  t::TempDir dir;
  PipelineConfig c;
  c.out = dir / "out";
  EXPECT_THROW(run_filter(c), Error);
}

TEST(Stages, DuplicateInputStemsRejected) {
  t::TempDir dir;
  const auto v = write_synthetic_videos(dir / "a", 1, 1);
  fs::create_directories(dir / "b");
  fs::copy_file(v[0].path, dir / "b" / v[0].path.filename());
  PipelineConfig c;
  c.out = dir / "out";
  c.inputs = {v[0].path.string(), (dir / "b" / v[0].path.filename()).string()};
  EXPECT_THROW(run_scenes(c), ConfigError);
}

TEST(Stages, EvaluateAndReport) {
  t::TempDir dir;
  PipelineConfig c;
  c.out = dir / "out";
  c.evaluation = t::write_eval_fixture(dir / "bench", 3, 2);
  c.workers = 2;
  const auto ev = run_evaluate(c);
  const auto results = report::results_from_jsonl(read_text(ev.artifact));
  ASSERT_EQ(results.size(), 6u);
  for (const auto& r : results) {
    for (auto d : evalkit::kDimensions) EXPECT_TRUE(r.metrics[d]) << r.model << " " << evalkit::dimension_key(d);
  }
  run_report(c);
  const auto md = read_text(c.out / "report.md");
  EXPECT_NE(md.find("| m0 |"), std::string::npos);
  EXPECT_NE(md.find("| m2 |"), std::string::npos);
}

TEST(Cli, ScenesOnTwoSceneFixture) {
  t::TempDir dir;
  media::write_y4m(t::cut_video(32, 32, 60, {30}, {{255, 0, 0}, {0, 0, 255}}), dir / "two.y4m");
  const auto r = t::run_command(cli() + " -q --out " + (dir / "out").string() + " scenes --input " +
                                    (dir / "two.y4m").string(),
                                dir.path());
  ASSERT_EQ(r.status, 0) << r.err;
  const auto clips = curation::from_jsonl(read_text(dir / "out" / "clips.jsonl"));
  ASSERT_EQ(clips.size(), 2u);
  EXPECT_EQ(clips[0].range, (analysis::ClipRange{0, 30}));
  EXPECT_EQ(clips[1].range, (analysis::ClipRange{30, 60}));
  EXPECT_EQ(json::parse(r.out).at("summary").at("clips"), 2);
}

TEST(Cli, ErrorsAreJsonOnStderr) {
  t::TempDir dir;
  const auto r = t::run_command(cli() + " -q --out " + (dir / "out").string() + " scenes --input " +
                                    (dir / "missing.y4m").string(),
                                dir.path());
  EXPECT_EQ(r.status, 1);
  const auto lines = r.err.substr(r.err.rfind('{'));
  const auto j = json::parse(lines);
  EXPECT_TRUE(j.contains("error"));
  EXPECT_EQ(j.at("stage"), "scenes");
}

TEST(Cli, BadConfigExitsTwo) {
  t::TempDir dir;
  std::ofstream(dir / "c.json") << R"({"workerz": 2})";
  const auto r = t::run_command(cli() + " --config " + (dir / "c.json").string() + " config", dir.path());
  EXPECT_EQ(r.status, 2);
  EXPECT_NE(r.err.find("workerz"), std::string::npos);
}

TEST(Cli, ProvidersTestPasses) {
  t::TempDir dir;
  const auto r = t::run_command(cli() + " -q providers test --role captioner --endpoint \"exec:" +
                                    std::string(ANICURATE_REF_PROVIDER) + "\"",
                                dir.path());
  EXPECT_EQ(r.status, 0) << r.out << r.err;
  EXPECT_NE(r.out.find("PASS"), std::string::npos);
}
