#include <algorithm>
#include <chrono>
#include <random>
#include <set>

#include <spdlog/spdlog.h>

#include "anicurate/conditioning.hpp"
#include "anicurate/error.hpp"
#include "anicurate/pipeline.hpp"
#include "anicurate/report.hpp"

namespace anicurate::pipeline {
namespace fs = std::filesystem;
using curation::ClipRecord;

namespace {

class StageTimer {
 public:
  explicit StageTimer(std::string stage) : stage_(std::move(stage)), start_(std::chrono::steady_clock::now()) {
    spdlog::info("{}: start", stage_);
  }
  ~StageTimer() {
    const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start_);
    spdlog::info("{}: done in {} ms", stage_, ms.count());
  }

 private:
  std::string stage_;
  std::chrono::steady_clock::time_point start_;
};

// Logs roughly every 10% of a parallel stage.
class Progress {
 public:
  Progress(std::string stage, std::size_t total) : stage_(std::move(stage)), total_(total) {}
  void tick() {
    const std::size_t done = ++done_;
    const std::size_t step = std::max<std::size_t>(1, total_ / 10);
    if (done % step == 0 || done == total_) spdlog::info("{}: {}/{}", stage_, done, total_);
  }

 private:
  std::string stage_;
  std::size_t total_;
  std::atomic<std::size_t> done_{0};
};

fs::path out_path(const PipelineConfig& c, const char* name) { return c.out / name; }

std::vector<ClipRecord> read_records(const fs::path& path, const char* producer) {
  if (!fs::exists(path)) {
    throw Error("missing " + path.string() + "; run `" + producer + "` first");
  }
  return curation::from_jsonl(read_text(path));
}

// Expands directories of .y4m files; PPM frame directories stay as they are.
std::vector<fs::path> expand_inputs(const std::vector<std::string>& inputs) {
  if (inputs.empty()) throw ConfigError("config 'inputs' is empty");
  std::vector<fs::path> out;
  for (const auto& in : inputs) {
    const fs::path p(in);
    if (!fs::exists(p)) throw Error("input " + in + " does not exist");
    if (fs::is_directory(p)) {
      std::vector<fs::path> videos;
      for (const auto& e : fs::directory_iterator(p)) {
        if (e.is_regular_file() && e.path().extension() == ".y4m") videos.push_back(e.path());
      }
      if (!videos.empty()) {
        std::sort(videos.begin(), videos.end());
        out.insert(out.end(), videos.begin(), videos.end());
        continue;
      }
    }
    out.push_back(p);
  }
  return out;
}

std::string source_key(const fs::path& p) {
  auto stem = p.stem().string();
  if (stem.empty()) stem = p.parent_path().filename().string();
  return stem;
}

std::string clip_id(const std::string& source, std::size_t index) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04zu", index);
  return source + "-c" + buf;
}

double mean_over(const media::FrameSequence& clip, std::size_t n, const std::function<double(const media::Frame&)>& f) {
  const auto idx = media::sample_frames(clip, n);
  double sum = 0;
  for (std::size_t i : idx) sum += f(clip[i]);
  return sum / static_cast<double>(idx.size());
}

conditioning::Tensor4 latent_frame(const conditioning::Tensor4& x, int t) {
  const auto& s = x.shape();
  conditioning::Tensor4 out({s.w, s.h, 1, s.c});
  for (int y = 0; y < s.h; ++y) {
    for (int xx = 0; xx < s.w; ++xx) {
      for (int c = 0; c < s.c; ++c) out.at(xx, y, 0, c) = x.at(xx, y, t, c);
    }
  }
  return out;
}

// Crops to the largest (8k x 8m, 4n frames) prefix the latent stub accepts.
std::optional<media::FrameSequence> crop_for_latent(const media::FrameSequence& seq) {
  const int w = seq.width() / conditioning::kSpatialDown * conditioning::kSpatialDown;
  const int h = seq.height() / conditioning::kSpatialDown * conditioning::kSpatialDown;
  const std::size_t t = seq.size() / conditioning::kTemporalDown * conditioning::kTemporalDown;
  if (w == 0 || h == 0 || t == 0) return std::nullopt;
  if (w == seq.width() && h == seq.height() && t == seq.size()) return seq;
  std::vector<media::Frame> frames;
  for (std::size_t i = 0; i < t; ++i) {
    media::Frame f(w, h);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) f.set(x, y, seq[i].at(x, y));
    }
    frames.push_back(std::move(f));
  }
  return media::FrameSequence(std::move(frames), seq.fps(), seq.source_id());
}

}  // namespace

curation::ClipScores score_clip(const media::FrameSequence& clip, const PipelineConfig& c) {
  curation::ClipScores s;
  s.frame_count = clip.size();
  s.duration = clip.duration_seconds();
  // A single frame shows no motion; score it as still rather than leave it unscorable.
  s.flow = clip.size() >= 2 ? analysis::flow_score(clip, c.flow) : 0.0;
  s.text_cover = mean_over(clip, c.score_frames,
                           [&](const media::Frame& f) { return analysis::text_cover_score(f, c.text_cover); });
  s.aesthetic = mean_over(clip, c.score_frames,
                          [&](const media::Frame& f) { return analysis::aesthetic_ref_score(f, c.aesthetic); });
  return s;
}

StageResult run_scenes(const PipelineConfig& c) {
  StageTimer timer("scenes");
  const auto inputs = expand_inputs(c.inputs);
  std::set<std::string> keys;
  for (const auto& p : inputs) {
    if (!keys.insert(source_key(p)).second) {
      throw ConfigError("two inputs share the name '" + source_key(p) + "'; clip ids would collide");
    }
  }

  std::vector<std::vector<ClipRecord>> per_source(inputs.size());
  Progress progress("scenes", inputs.size());
  parallel_for(inputs.size(), c.workers, [&](std::size_t i, std::size_t) {
    const auto seq = media::load_video(inputs[i], c.frame_dir_fps);
    const auto ranges = analysis::detect_scenes(seq, c.scenes);
    for (std::size_t k = 0; k < ranges.size(); ++k) {
      ClipRecord r;
      r.id = clip_id(source_key(inputs[i]), k);
      r.source = inputs[i].string();
      r.range = ranges[k];
      r.fps = seq.fps().value();
      r.scores.frame_count = ranges[k].length();
      r.scores.duration = static_cast<double>(ranges[k].length()) / seq.fps().value();
      per_source[i].push_back(std::move(r));
    }
    progress.tick();
  });

  std::vector<ClipRecord> all;
  for (auto& v : per_source) std::move(v.begin(), v.end(), std::back_inserter(all));
  std::sort(all.begin(), all.end(), [](const ClipRecord& a, const ClipRecord& b) { return a.id < b.id; });
  const auto path = out_path(c, artifact::kClips);
  write_atomic(path, curation::to_jsonl(all));
  return {path, {{"sources", inputs.size()}, {"clips", all.size()}}};
}

StageResult run_score(const PipelineConfig& c) {
  StageTimer timer("score");
  auto records = read_records(out_path(c, artifact::kClips), "scenes");

  // Decode each source once, then score clips independently.
  std::vector<std::string> sources;
  for (const auto& r : records) sources.push_back(r.source);
  std::sort(sources.begin(), sources.end());
  sources.erase(std::unique(sources.begin(), sources.end()), sources.end());
  std::vector<std::optional<media::FrameSequence>> decoded(sources.size());
  parallel_for(sources.size(), c.workers,
               [&](std::size_t i, std::size_t) { decoded[i] = media::load_video(sources[i], c.frame_dir_fps); });
  auto video_of = [&](const std::string& src) -> const media::FrameSequence& {
    const auto it = std::lower_bound(sources.begin(), sources.end(), src);
    return *decoded[static_cast<std::size_t>(it - sources.begin())];
  };

  Progress progress("score", records.size());
  parallel_for(records.size(), c.workers, [&](std::size_t i, std::size_t) {
    auto& r = records[i];
    const auto& seq = video_of(r.source);
    if (r.range.end > seq.size() || r.range.start >= r.range.end) {
      throw InvalidArgument("clip " + r.id + " range [" + std::to_string(r.range.start) + ", " +
                            std::to_string(r.range.end) + ") is outside " + r.source);
    }
    const auto clip = seq.slice(r.range.start, r.range.end);
    r.scores = score_clip(clip, c);
    r.tags["motion_class"] = std::to_string(analysis::motion_class_of(*r.scores.flow));
    progress.tick();
  });

  const auto path = out_path(c, artifact::kScores);
  write_atomic(path, curation::to_jsonl(records));
  return {path, {{"clips", records.size()}}};
}

StageResult run_calibrate(const PipelineConfig& c, std::optional<double> target,
                          const std::optional<fs::path>& scores_path) {
  StageTimer timer("calibrate");
  const auto records = read_records(scores_path.value_or(out_path(c, artifact::kScores)), "score");
  std::vector<curation::ClipScores> scores;
  scores.reserve(records.size());
  for (const auto& r : records) scores.push_back(r.scores);
  const double goal = target.value_or(c.target_retention);
  const auto cal = curation::calibrate(scores, goal);
  json doc = curation::rule_to_json(cal.rule);
  const auto path = out_path(c, artifact::kRule);
  write_atomic(path, doc.dump(2) + "\n");
  spdlog::info("calibrate: target {:.4f}, measured {:.4f}, keep quantile {:.4f}", goal, cal.measured_retention,
               cal.keep_fraction);
  return {path,
          {{"target", goal},
           {"measured_retention", cal.measured_retention},
           {"keep_fraction", cal.keep_fraction},
           {"rule", doc}}};
}

StageResult run_filter(const PipelineConfig& c, const std::optional<fs::path>& rule_path) {
  StageTimer timer("filter");
  auto records = read_records(out_path(c, artifact::kScores), "score");
  curation::FilterRule rule = c.rule;
  std::optional<fs::path> from = rule_path;
  if (!from && fs::exists(out_path(c, artifact::kRule))) from = out_path(c, artifact::kRule);
  if (from) {
    const json j = json::parse(read_text(*from), nullptr, false);
    if (j.is_discarded()) throw ParseError(from->string() + " is not valid JSON");
    rule = curation::rule_from_json(j);
    spdlog::info("filter: rule from {}", from->string());
  }
  rule.validate();

  std::size_t passed = 0;
  for (auto& r : records) {
    r.verdict = curation::apply_filter(r.scores, rule);
    passed += r.verdict->pass;
  }
  const auto path = out_path(c, artifact::kVerdicts);
  write_atomic(path, curation::to_jsonl(records));
  const double retention = records.empty() ? 0.0 : static_cast<double>(passed) / static_cast<double>(records.size());
  return {path, {{"clips", records.size()}, {"passed", passed}, {"retention", retention}}};
}

StageResult run_manifest(const PipelineConfig& c) {
  StageTimer timer("manifest");
  auto records = read_records(out_path(c, artifact::kVerdicts), "filter");
  auto client = make_client(c.providers);
  auto result = curation::build_manifest(std::move(records), *client);
  const auto path = out_path(c, artifact::kManifest);
  write_atomic(path, curation::to_jsonl(result.emitted));
  json skipped = json::array();
  for (const auto& [id, reason] : result.skipped) skipped.push_back({{"id", id}, {"reason", reason}});
  return {path, {{"emitted", result.emitted.size()}, {"skipped", std::move(skipped)}}};
}

StageResult run_histogram(const PipelineConfig& c) {
  StageTimer timer("histogram");
  const auto records = read_records(out_path(c, artifact::kScores), "score");
  std::vector<curation::ClipScores> scores;
  for (const auto& r : records) scores.push_back(r.scores);
  const auto rows = curation::histogram_report(scores, c.histogram_bins);
  const auto path = out_path(c, artifact::kHistogram);
  write_atomic(path, curation::histogram_csv(rows));
  return {path, {{"records", records.size()}, {"bins_per_dim", c.histogram_bins}}};
}

StageResult run_condition(const PipelineConfig& c) {
  StageTimer timer("condition");
  const auto records = read_records(out_path(c, artifact::kManifest), "manifest");
  const auto schedule = conditioning::ScheduleParams::linear(c.conditioning.schedule_steps, c.conditioning.beta_start,
                                                             c.conditioning.beta_end);
  const std::uint64_t base_seed = stage_seed(c.seed, "condition");
  const fs::path dir = c.out / artifact::kConditionDir;
  fs::create_directories(dir);

  std::vector<std::unique_ptr<providers::ModelClient>> clients(std::max<std::size_t>(1, c.workers));
  std::vector<std::optional<json>> index(records.size());
  Progress progress("condition", records.size());
  parallel_for(records.size(), c.workers, [&](std::size_t i, std::size_t worker) {
    const auto& r = records[i];
    auto& client = clients[worker];
    if (!client) client = make_client(c.providers);

    const auto source = media::load_video(r.source, c.frame_dir_fps);
    const auto cropped = crop_for_latent(source.slice(r.range.start, r.range.end));
    if (!cropped) {
      spdlog::warn("condition: skipping {}: too small for the latent grid", r.id);
      progress.tick();
      return;
    }
    const std::uint64_t seed = base_seed ^ fnv1a(r.id);
    auto x0 = conditioning::encode_latent_stub(*cropped);
    const auto shape = x0.shape();
    const auto plan = conditioning::sample_unmask_plan(shape.t, seed, c.conditioning.unmask_interior);

    std::optional<media::BinaryMask> motion_area;
    if (c.conditioning.motion_area) {
      media::BinaryMask initial(cropped->width(), cropped->height());
      for (const auto& m : client->char_masks((*cropped)[0])) initial = conditioning::union_masks({initial, m});
      motion_area = conditioning::union_masks(conditioning::track_foreground(*cropped, initial, c.flow));
      const auto latent_mask = conditioning::reproject_mask(*motion_area, shape.w, shape.h);
      x0 = conditioning::clamp_static_latent(x0, latent_frame(x0, 0), latent_mask);
    }

    conditioning::GuidePlan gp;
    gp.n_latent_frames = shape.t;
    for (int p : plan) gp.entries.push_back({p, latent_frame(x0, p), motion_area});
    const auto guide = conditioning::build_guide(gp);
    const auto mask_latent = conditioning::reproject_mask(guide.M, shape.w, shape.h, shape.t);

    std::mt19937_64 rng(seed);
    const std::size_t t = 1 + static_cast<std::size_t>(rng() % schedule.steps());
    const auto eps = conditioning::gaussian_tensor(shape, seed + 1);
    const auto xt = conditioning::noisy_latent(x0, eps, schedule, t);
    const auto text = client->embed_text(r.caption.value_or(""), c.conditioning.text_dim);

    const auto bundle = conditioning::assemble_condition_input(xt, mask_latent, guide.G, text.values);
    conditioning::write_bundle(bundle, dir / r.id);
    conditioning::write_tensor(conditioning::v_target(x0, eps, schedule, t), dir / (r.id + ".v"), "v_target");
    index[i] = json{{"id", r.id},
                    {"bundle", (fs::path(artifact::kConditionDir) / r.id).string()},
                    {"unmasked", plan},
                    {"t", t},
                    {"alpha_bar", schedule.alpha_bar(t)},
                    {"latent_shape", {{"w", shape.w}, {"h", shape.h}, {"t", shape.t}, {"c", shape.c}}},
                    {"motion_area", c.conditioning.motion_area}};
    progress.tick();
  });

  std::string lines;
  std::size_t written = 0;
  for (const auto& j : index) {
    if (!j) continue;
    lines += j->dump() + "\n";
    ++written;
  }
  const auto path = out_path(c, artifact::kConditionIndex);
  write_atomic(path, lines);
  return {path, {{"records", records.size()}, {"bundles", written}}};
}

StageResult run_evaluate(const PipelineConfig& c) {
  StageTimer timer("evaluate");
  const auto& ev = c.evaluation;
  if (ev.benchmark.empty()) throw ConfigError("evaluation.benchmark is not set");
  if (ev.models.empty()) throw ConfigError("evaluation.models is empty");
  const fs::path bench_path(ev.benchmark);
  const auto bench = evalkit::load_benchmark(bench_path);
  const fs::path base = bench_path.parent_path();
  auto resolve = [&](const std::string& p) { return fs::path(p).is_absolute() ? fs::path(p) : base / p; };

  std::optional<evalkit::CharacterStore> global_store;
  if (!ev.characters.empty()) global_store = evalkit::CharacterStore::load(ev.characters);

  struct Task {
    std::string model;
    fs::path dir;
    const evalkit::BenchmarkEntry* entry;
  };
  std::vector<Task> tasks;
  for (const auto& [model, dir] : ev.models) {
    for (const auto& e : bench.entries) tasks.push_back({model, dir, &e});
  }
  std::sort(tasks.begin(), tasks.end(), [](const Task& a, const Task& b) {
    return a.model != b.model ? a.model < b.model : a.entry->id < b.entry->id;
  });

  evalkit::EvalParams params;
  params.keyframes = ev.keyframes;
  params.character_samples = ev.character_samples;
  params.smoothness.flow = c.flow;
  params.smoothness.residual_scale = ev.residual_scale;
  params.smoothness.use_provider = c.providers.endpoints.count(providers::Role::kSmoothness) > 0;

  std::vector<std::unique_ptr<providers::ModelClient>> clients(std::max<std::size_t>(1, c.workers));
  std::vector<report::SampleResult> results(tasks.size());
  Progress progress("evaluate", tasks.size());
  parallel_for(tasks.size(), c.workers, [&](std::size_t i, std::size_t worker) {
    const auto& task = tasks[i];
    auto& client = clients[worker];
    if (!client) client = make_client(c.providers);
    report::SampleResult& out = results[i];
    out.model = task.model;
    out.entry = task.entry->id;

    fs::path video_path = task.dir / (task.entry->id + ".y4m");
    if (!fs::exists(video_path)) video_path = task.dir / task.entry->id;
    try {
      const auto video = providers::VideoRef::from_path(video_path, c.frame_dir_fps);
      std::optional<media::Frame> guide;
      if (!task.entry->guide_frames.empty()) guide = media::read_ppm(resolve(task.entry->guide_frames.front().image));
      std::optional<evalkit::CharacterStore> own;
      if (!task.entry->character_refs.empty()) {
        auto refs = task.entry->character_refs;
        for (auto& ref : refs) {
          for (auto& img : ref.images) img = resolve(img).string();
        }
        own = evalkit::build_character_store(refs, *client);
      }
      const evalkit::CharacterStore* store = own ? &*own : (global_store ? &*global_store : nullptr);
      auto e = evalkit::evaluate_sample(video, *task.entry, guide, store, *client, params);
      out.metrics = e.metrics;
      out.failures = std::move(e.failures);
      out.notes = std::move(e.notes);
    } catch (const Error& err) {
      // The sample cannot be loaded at all: every dimension fails.
      for (auto d : evalkit::kDimensions) out.failures[evalkit::dimension_key(d)] = err.what();
    }
    progress.tick();
  });

  std::size_t failed_cells = 0;
  for (const auto& r : results) failed_cells += r.failures.size();
  const auto path = out_path(c, artifact::kResults);
  write_atomic(path, report::to_jsonl(results));
  return {path, {{"samples", results.size()}, {"failed_metrics", failed_cells}}};
}

StageResult run_report(const PipelineConfig& c, const std::optional<fs::path>& results_path) {
  StageTimer timer("report");
  const fs::path in = results_path.value_or(out_path(c, artifact::kResults));
  if (!fs::exists(in)) throw Error("missing " + in.string() + "; run `evaluate` first");
  const auto results = report::results_from_jsonl(read_text(in));
  auto table = report::aggregate(results);
  json summary{{"models", table.rows.size()}};
  if (!c.evaluation.ratings.empty()) {
    const auto human = report::human_mean(report::read_ratings_csv(c.evaluation.ratings));
    report::attach_human(table, human);
    const auto align = report::alignment(table, human);
    write_atomic(out_path(c, artifact::kAlignment), report::render_alignment_markdown(align));
    summary["alignment"] = out_path(c, artifact::kAlignment).string();
  }
  write_atomic(out_path(c, artifact::kReportCsv), report::render_csv(table));
  const auto path = out_path(c, artifact::kReportMd);
  write_atomic(path, report::render_markdown(table));
  return {path, summary};
}

}  // namespace anicurate::pipeline
