#include <gtest/gtest.h>

#include <set>

#include "anicurate/curation.hpp"
#include "anicurate/error.hpp"

using namespace anicurate;
using namespace anicurate::curation;

namespace {

ClipScores inside(double duration = 5.0) {
  ClipScores s;
  s.text_cover = 0.0;
  s.flow = 10.0;
  s.aesthetic = 6.0;
  s.duration = duration;
  s.frame_count = static_cast<std::size_t>(duration * 8);
  return s;
}

FilterRule strict() {
  FilterRule r;
  r.text_cover_max = 0.1;
  r.flow_min = 2.0;
  r.flow_max = 40.0;
  r.aesthetic_min = 5.0;
  return r;
}

ClipRecord record(const std::string& id, bool pass) {
  ClipRecord r;
  r.id = id;
  r.source = "src.y4m";
  r.range = {0, 40};
  r.fps = 8;
  r.scores = inside();
  r.verdict = Verdict{pass, pass ? std::vector<std::string>{} : std::vector<std::string>{kFlow}};
  return r;
}

// Captions through a handler so failures can be scripted per clip id.
providers::ModelClient scripted_captioner(std::function<providers::Response(const providers::Request&)> fn) {
  return providers::ModelClient(std::make_shared<providers::InProcessEndpoint>(std::move(fn)), 0);
}

}  // namespace

TEST(Filter, ShortClipFailsDuration) {
  const auto v = apply_filter(inside(1.5), strict());
  EXPECT_FALSE(v.pass);
  EXPECT_EQ(v.reasons, (std::vector<std::string>{"duration"}));
}

TEST(Filter, ListsEveryViolation) {
  auto s = inside(25.0);
  s.text_cover = 0.9;
  const auto v = apply_filter(s, strict());
  EXPECT_EQ(v.reasons, (std::vector<std::string>{"duration", "text_cover"}));
}

TEST(Filter, InsideBoundsPasses) {
  const auto v = apply_filter(inside(), strict());
  EXPECT_TRUE(v.pass);
  EXPECT_TRUE(v.reasons.empty());
}

TEST(Filter, DurationBoundsAreClosed) {
  EXPECT_FALSE(apply_filter(inside(1.9), strict()).pass);
  EXPECT_TRUE(apply_filter(inside(2.0), strict()).pass);
  EXPECT_TRUE(apply_filter(inside(20.0), strict()).pass);
  EXPECT_FALSE(apply_filter(inside(20.1), strict()).pass);
}

TEST(Filter, MissingScoreNamesDimension) {
  auto s = inside();
  s.aesthetic.reset();
  try {
    apply_filter(s, strict());
    FAIL();
  } catch (const InvalidArgument& e) {
    EXPECT_NE(std::string(e.what()).find("aesthetic"), std::string::npos);
  }
}

TEST(Filter, RelaxingNeverFlipsPassToFail) {
  const auto corpus = synthetic_score_corpus(2000, 3);
  const FilterRule r = strict();
  FilterRule relaxed = r;
  relaxed.text_cover_max = 0.3;
  relaxed.flow_min = 1.0;
  relaxed.flow_max = 50.0;
  relaxed.aesthetic_min = 4.0;
  for (const auto& s : corpus) {
    if (apply_filter(s, r).pass) EXPECT_TRUE(apply_filter(s, relaxed).pass);
  }
}

TEST(Rule, ValidateRejectsInvertedBounds) {
  FilterRule r;
  r.flow_min = 5;
  r.flow_max = 1;
  EXPECT_THROW(r.validate(), InvalidArgument);
}

TEST(Calibrate, HitsTenPercent) {
  const auto corpus = synthetic_score_corpus(10000, 1);
  const auto c = calibrate(corpus, 0.10);
  EXPECT_GE(c.measured_retention, 0.09);
  EXPECT_LE(c.measured_retention, 0.11);
  EXPECT_DOUBLE_EQ(measure_retention(corpus, c.rule), c.measured_retention);
  EXPECT_EQ(c.rule.duration_min, 2.0);
  EXPECT_EQ(c.rule.duration_max, 20.0);
}

TEST(Calibrate, HitsHalfPercent) {
  const auto corpus = synthetic_score_corpus(10000, 1);
  const auto c = calibrate(corpus, 0.005);
  EXPECT_GE(c.measured_retention, 0.0045);
  EXPECT_LE(c.measured_retention, 0.0055);
}

TEST(Calibrate, OrderIndependent) {
  auto corpus = synthetic_score_corpus(3000, 9);
  const auto a = calibrate(corpus, 0.1);
  std::reverse(corpus.begin(), corpus.end());
  const auto b = calibrate(corpus, 0.1);
  EXPECT_EQ(curation::rule_to_json(a.rule), curation::rule_to_json(b.rule));
}

TEST(Calibrate, InfeasibleTargetReportsRange) {
  const auto corpus = synthetic_score_corpus(1000, 1);
  EXPECT_THROW(calibrate(corpus, 1.0), InvalidArgument);
  try {
    calibrate(corpus, 0.99);
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("achievable"), std::string::npos) << e.what();
  }
}

TEST(Calibrate, NeedsEnoughSamples) { EXPECT_THROW(calibrate(synthetic_score_corpus(50, 1), 0.1), InvalidArgument); }

TEST(Histogram, IdenticalRecordsUseOneBin) {
  std::vector<ClipScores> v(100, inside());
  const auto rows = histogram_report(v, 10);
  std::map<std::string, int> nonzero;
  for (const auto& r : rows) nonzero[r.dimension] += r.count > 0;
  EXPECT_EQ(nonzero.size(), 4u);
  for (const auto& [dim, n] : nonzero) EXPECT_EQ(n, 1) << dim;
}

TEST(Histogram, ConservesCountsAndOrdersEdges) {
  const auto corpus = synthetic_score_corpus(777, 5);
  const auto rows = histogram_report(corpus, 13);
  std::map<std::string, std::size_t> sums;
  std::map<std::string, double> last_hi;
  for (const auto& r : rows) {
    sums[r.dimension] += r.count;
    EXPECT_LT(r.bin_lo, r.bin_hi);
    if (last_hi.count(r.dimension)) EXPECT_DOUBLE_EQ(last_hi[r.dimension], r.bin_lo);
    last_hi[r.dimension] = r.bin_hi;
  }
  for (const auto& [dim, n] : sums) EXPECT_EQ(n, 777u) << dim;
  const auto csv = histogram_csv(rows);
  EXPECT_EQ(csv.rfind("dimension,bin_lo,bin_hi,count\n", 0), 0u);
}

TEST(Manifest, EchoCaptionsInIdOrder) {
  providers::ModelClient client(providers::make_endpoint("ref"));
  auto res = build_manifest({record("c", true), record("a", true), record("b", true)}, client);
  ASSERT_EQ(res.emitted.size(), 3u);
  EXPECT_EQ(res.emitted[0].id, "a");
  EXPECT_EQ(res.emitted[2].id, "c");
  for (const auto& r : res.emitted) EXPECT_TRUE(r.caption && !r.caption->empty());
  const auto text = to_jsonl(res.emitted);
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 3);
}

TEST(Manifest, FailingRecordsExcluded) {
  providers::ModelClient client(providers::make_endpoint("ref"));
  auto res = build_manifest({record("a", true), record("b", false)}, client);
  ASSERT_EQ(res.emitted.size(), 1u);
  EXPECT_EQ(res.emitted[0].id, "a");
}

TEST(Manifest, EmptyCaptionSkipped) {
  std::vector<ClipRecord> recs;
  for (int i = 0; i < 20; ++i) recs.push_back(record("r" + std::to_string(100 + i), true));
  auto client = scripted_captioner([](const providers::Request& q) {
    providers::Response r{q.id, true, {{"caption", ""}}, ""};
    if (q.payload.at("clip").at("id") != "r105") r.result["caption"] = "ok";
    return r;
  });
  const auto res = build_manifest(recs, client);
  EXPECT_EQ(res.emitted.size(), 19u);
  ASSERT_EQ(res.skipped.size(), 1u);
  EXPECT_EQ(res.skipped[0].first, "r105");
}

TEST(Manifest, AbortsAboveTenPercentFailures) {
  std::vector<ClipRecord> recs;
  for (int i = 0; i < 10; ++i) recs.push_back(record("r" + std::to_string(i), true));
  auto client = scripted_captioner([](const providers::Request& q) {
    const std::string id = q.payload.at("clip").at("id");
    if (id == "r1" || id == "r2") return providers::Response{q.id, false, {}, "captioner down"};
    return providers::Response{q.id, true, {{"caption", "fine"}}, ""};
  });
  EXPECT_THROW(build_manifest(recs, client), Error);
}

TEST(Manifest, JsonlRoundTrip) {
  auto r = record("x", true);
  r.caption = "A cat jumps.";
  r.tags["style"] = "2D";
  const auto back = from_jsonl(to_jsonl({r, record("y", false)}));
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(to_jsonl(back), to_jsonl({r, record("y", false)}));
  EXPECT_EQ(back[0].caption, r.caption);
  EXPECT_EQ(back[0].tags.at("style"), "2D");
  EXPECT_EQ(back[1].verdict->reasons, (std::vector<std::string>{"flow"}));
}

TEST(Manifest, MalformedLineIsParseError) { EXPECT_THROW(from_jsonl("{\"id\": 1}\n"), ParseError); }

TEST(SyntheticCorpus, DeterministicAndInRange) {
  const auto a = synthetic_score_corpus(500, 42), b = synthetic_score_corpus(500, 42);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(*a[i].flow, *b[i].flow);
    EXPECT_GE(*a[i].text_cover, 0.0);
    EXPECT_LE(*a[i].text_cover, 1.0);
    EXPECT_GE(*a[i].aesthetic, 0.0);
    EXPECT_LE(*a[i].aesthetic, 10.0);
    EXPECT_DOUBLE_EQ(a[i].duration, static_cast<double>(a[i].frame_count) / 8.0);
  }
}
