#include <algorithm>
#include <atomic>
#include <cctype>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "anicurate/error.hpp"
#include "anicurate/pipeline.hpp"

namespace anicurate::pipeline {
namespace {

// Reads typed members of one JSON object and remembers which keys were
// consumed so leftovers can be reported as unknown.
class ObjectReader {
 public:
  ObjectReader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(where() + " must be an object");
  }

  template <class T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_[key].get<T>();
    } catch (const json::exception&) {
      throw ConfigError(dotted(key) + " has the wrong type (" + j_[key].type_name() + ")");
    }
  }

  void number(const char* key, double& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    if (!j_[key].is_number()) throw ConfigError(dotted(key) + " must be a number");
    out = j_[key].get<double>();
  }

  template <class T>
  void count(const char* key, T& out, long long min = 0) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    if (!j_[key].is_number_integer() || j_[key].get<long long>() < min) {
      throw ConfigError(dotted(key) + " must be an integer >= " + std::to_string(min));
    }
    out = static_cast<T>(j_[key].get<long long>());
  }

  const json* child(const char* key) {
    seen_.insert(key);
    return j_.contains(key) ? &j_[key] : nullptr;
  }

  std::string dotted(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  void finish() const {
    for (const auto& [key, value] : j_.items()) {
      if (!seen_.count(key)) throw ConfigError("unknown config key '" + dotted(key) + "'");
    }
  }

 private:
  std::string where() const { return path_.empty() ? "config" : "'" + path_ + "'"; }

  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

media::Rational rational_from(const json& j, const std::string& key) {
  if (j.is_number_integer() && j.get<long long>() > 0) return {j.get<std::int64_t>(), 1};
  if (j.is_array() && j.size() == 2 && j[0].is_number_integer() && j[1].is_number_integer() &&
      j[0].get<long long>() > 0 && j[1].get<long long>() > 0) {
    return {j[0].get<std::int64_t>(), j[1].get<std::int64_t>()};
  }
  throw ConfigError(key + " must be a positive integer or [num, den]");
}

void read_scenes(const json& j, analysis::SceneParams& p) {
  ObjectReader r(j, "scenes");
  r.number("threshold", p.threshold);
  r.count("min_scene_len", p.min_scene_len, 1);
  r.finish();
}

void read_flow(const json& j, analysis::FlowParams& p, const std::string& path) {
  ObjectReader r(j, path);
  r.count("block", p.block, 1);
  r.count("radius", p.radius, 0);
  r.number("max_sample_fps", p.max_sample_fps);
  r.finish();
  if (p.max_sample_fps <= 0) throw ConfigError(path + ".max_sample_fps must be positive");
}

void read_analysis(const json& j, PipelineConfig& c) {
  ObjectReader r(j, "analysis");
  if (const json* f = r.child("flow")) read_flow(*f, c.flow, "analysis.flow");
  if (const json* t = r.child("text_cover")) {
    ObjectReader tr(*t, "analysis.text_cover");
    tr.number("band_fraction", c.text_cover.band_fraction);
    tr.number("min_gradient", c.text_cover.min_gradient);
    tr.count("min_area", c.text_cover.min_area, 1);
    tr.number("max_area_fraction", c.text_cover.max_area_fraction);
    tr.number("min_aspect", c.text_cover.min_aspect);
    tr.number("max_aspect", c.text_cover.max_aspect);
    tr.finish();
    if (c.text_cover.band_fraction <= 0 || c.text_cover.band_fraction > 1) {
      throw ConfigError("analysis.text_cover.band_fraction must be in (0, 1]");
    }
  }
  if (const json* a = r.child("aesthetic")) {
    ObjectReader ar(*a, "analysis.aesthetic");
    ar.number("weight_colorfulness", c.aesthetic.weight_colorfulness);
    ar.number("weight_contrast", c.aesthetic.weight_contrast);
    ar.number("weight_sharpness", c.aesthetic.weight_sharpness);
    ar.number("colorfulness_scale", c.aesthetic.colorfulness_scale);
    ar.number("contrast_scale", c.aesthetic.contrast_scale);
    ar.number("sharpness_scale", c.aesthetic.sharpness_scale);
    ar.finish();
  }
  r.count("score_frames", c.score_frames, 1);
  r.finish();
}

void read_filter(const json& j, PipelineConfig& c) {
  ObjectReader r(j, "filter");
  if (const json* rule = r.child("rule")) {
    ObjectReader rr(*rule, "filter.rule");
    rr.number("text_cover_max", c.rule.text_cover_max);
    rr.number("flow_min", c.rule.flow_min);
    rr.number("flow_max", c.rule.flow_max);
    rr.number("aesthetic_min", c.rule.aesthetic_min);
    rr.number("duration_min", c.rule.duration_min);
    rr.number("duration_max", c.rule.duration_max);
    rr.finish();
    try {
      c.rule.validate();
    } catch (const Error& e) {
      throw ConfigError(std::string("filter.rule: ") + e.what());
    }
  }
  r.number("target_retention", c.target_retention);
  if (c.target_retention <= 0 || c.target_retention >= 1) {
    throw ConfigError("filter.target_retention must be in (0, 1)");
  }
  r.count("histogram_bins", c.histogram_bins, 1);
  r.finish();
}

void read_providers(const json& j, ProviderSettings& p) {
  ObjectReader r(j, "providers");
  r.get("fallback", p.fallback);
  r.count("timeout_ms", p.timeout_ms, 1);
  r.count("retries", p.retries, 0);
  if (const json* roles = r.child("roles")) {
    if (!roles->is_object()) throw ConfigError("providers.roles must be an object of role -> endpoint");
    for (const auto& [name, spec] : roles->items()) {
      const auto role = providers::role_from_name(name);
      if (!role) throw ConfigError("unknown config key 'providers.roles." + name + "' (not a provider role)");
      if (!spec.is_string()) throw ConfigError("providers.roles." + name + " must be an endpoint string");
      p.endpoints[*role] = spec.get<std::string>();
    }
  }
  r.finish();
}

void read_conditioning(const json& j, ConditioningSettings& p) {
  ObjectReader r(j, "conditioning");
  r.count("text_dim", p.text_dim, 1);
  r.count("unmask_interior", p.unmask_interior, 0);
  r.count("schedule_steps", p.schedule_steps, 1);
  r.number("beta_start", p.beta_start);
  r.number("beta_end", p.beta_end);
  r.get("motion_area", p.motion_area);
  r.finish();
  if (!(p.beta_start > 0 && p.beta_start <= p.beta_end && p.beta_end < 1)) {
    throw ConfigError("conditioning betas must satisfy 0 < beta_start <= beta_end < 1");
  }
}

void read_evaluation(const json& j, EvaluationSettings& p) {
  ObjectReader r(j, "evaluation");
  r.get("benchmark", p.benchmark);
  r.get("models", p.models);
  r.get("characters", p.characters);
  r.get("ratings", p.ratings);
  r.count("character_samples", p.character_samples, 1);
  r.count("keyframes", p.keyframes, 1);
  r.number("residual_scale", p.residual_scale);
  r.finish();
  if (p.residual_scale <= 0) throw ConfigError("evaluation.residual_scale must be positive");
}

std::string upper(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char ch) { return static_cast<char>(std::toupper(ch)); });
  return s;
}

}  // namespace

PipelineConfig config_from_json(const json& j) {
  PipelineConfig c;
  ObjectReader r(j, "");
  r.get("inputs", c.inputs);
  if (const json* fps = r.child("frame_dir_fps")) c.frame_dir_fps = rational_from(*fps, "frame_dir_fps");
  if (const json* s = r.child("scenes")) read_scenes(*s, c.scenes);
  if (const json* a = r.child("analysis")) read_analysis(*a, c);
  if (const json* f = r.child("filter")) read_filter(*f, c);
  if (const json* p = r.child("providers")) read_providers(*p, c.providers);
  if (const json* k = r.child("conditioning")) read_conditioning(*k, c.conditioning);
  if (const json* e = r.child("evaluation")) read_evaluation(*e, c.evaluation);
  r.count("workers", c.workers, 1);
  r.count("seed", c.seed, 0);
  std::string out = c.out.string();
  r.get("out", out);
  c.out = out;
  r.finish();
  return c;
}

json config_to_json(const PipelineConfig& c) {
  json roles = json::object();
  for (const auto& [role, spec] : c.providers.endpoints) roles[providers::role_name(role)] = spec;
  return {
      {"inputs", c.inputs},
      {"frame_dir_fps", {c.frame_dir_fps.num, c.frame_dir_fps.den}},
      {"scenes", {{"threshold", c.scenes.threshold}, {"min_scene_len", c.scenes.min_scene_len}}},
      {"analysis",
       {{"flow", {{"block", c.flow.block}, {"radius", c.flow.radius}, {"max_sample_fps", c.flow.max_sample_fps}}},
        {"text_cover",
         {{"band_fraction", c.text_cover.band_fraction},
          {"min_gradient", c.text_cover.min_gradient},
          {"min_area", c.text_cover.min_area},
          {"max_area_fraction", c.text_cover.max_area_fraction},
          {"min_aspect", c.text_cover.min_aspect},
          {"max_aspect", c.text_cover.max_aspect}}},
        {"aesthetic",
         {{"weight_colorfulness", c.aesthetic.weight_colorfulness},
          {"weight_contrast", c.aesthetic.weight_contrast},
          {"weight_sharpness", c.aesthetic.weight_sharpness},
          {"colorfulness_scale", c.aesthetic.colorfulness_scale},
          {"contrast_scale", c.aesthetic.contrast_scale},
          {"sharpness_scale", c.aesthetic.sharpness_scale}}},
        {"score_frames", c.score_frames}}},
      {"filter",
       {{"rule", curation::rule_to_json(c.rule)},
        {"target_retention", c.target_retention},
        {"histogram_bins", c.histogram_bins}}},
      {"providers",
       {{"fallback", c.providers.fallback},
        {"roles", roles},
        {"timeout_ms", c.providers.timeout_ms},
        {"retries", c.providers.retries}}},
      {"conditioning",
       {{"text_dim", c.conditioning.text_dim},
        {"unmask_interior", c.conditioning.unmask_interior},
        {"schedule_steps", c.conditioning.schedule_steps},
        {"beta_start", c.conditioning.beta_start},
        {"beta_end", c.conditioning.beta_end},
        {"motion_area", c.conditioning.motion_area}}},
      {"evaluation",
       {{"benchmark", c.evaluation.benchmark},
        {"models", c.evaluation.models},
        {"characters", c.evaluation.characters},
        {"ratings", c.evaluation.ratings},
        {"character_samples", c.evaluation.character_samples},
        {"keyframes", c.evaluation.keyframes},
        {"residual_scale", c.evaluation.residual_scale}}},
      {"workers", c.workers},
      {"seed", c.seed},
      {"out", c.out.string()},
  };
}

PipelineConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  const json j = json::parse(in, nullptr, false);
  if (j.is_discarded()) throw ConfigError(path.string() + " is not valid JSON");
  return config_from_json(j);
}

void apply_env_overrides(ProviderSettings& p) {
  for (providers::Role role : providers::all_roles()) {
    const std::string var = "ANICURATE_PROVIDER_" + upper(providers::role_name(role));
    if (const char* v = std::getenv(var.c_str()); v != nullptr && *v != '\0') p.endpoints[role] = v;
  }
}

std::unique_ptr<providers::ModelClient> make_client(const ProviderSettings& p) {
  providers::CallOptions opts;
  opts.timeout = std::chrono::milliseconds(p.timeout_ms);
  opts.retries = p.retries;
  auto client = std::make_unique<providers::ModelClient>(providers::make_endpoint(p.fallback, opts), p.retries);
  // Roles sharing a spec share one endpoint (one child process / socket).
  std::map<std::string, std::shared_ptr<providers::Endpoint>> by_spec;
  for (const auto& [role, spec] : p.endpoints) {
    auto& ep = by_spec[spec];
    if (!ep) ep = providers::make_endpoint(spec, opts);
    client->set(role, ep);
  }
  return client;
}

std::uint64_t fnv1a(std::string_view text) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  return h;
}

std::uint64_t stage_seed(std::uint64_t seed, std::string_view stage) {
  std::uint64_t z = seed ^ fnv1a(stage);
  z += 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t, std::size_t)>& fn) {
  workers = std::max<std::size_t>(1, std::min(workers, n));
  std::atomic<std::size_t> next{0};
  std::atomic<bool> stop{false};
  std::mutex err_mutex;
  std::size_t err_index = n;
  std::exception_ptr err;

  auto body = [&](std::size_t worker) {
    for (;;) {
      if (stop.load()) return;
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        fn(i, worker);
      } catch (...) {
        std::lock_guard lock(err_mutex);
        if (i < err_index) {
          err_index = i;
          err = std::current_exception();
        }
        stop = true;
      }
    }
  };

  if (workers == 1) {
    body(0);
  } else {
    std::vector<std::thread> threads;
    threads.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) threads.emplace_back(body, w);
    for (auto& t : threads) t.join();
  }
  if (err) std::rethrow_exception(err);
}

void write_atomic(const std::filesystem::path& path, std::string_view content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw Error("short write to " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace anicurate::pipeline
