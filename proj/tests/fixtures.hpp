#pragma once

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

#include "anicurate/pipeline.hpp"
#include "support.hpp"

namespace anicurate::testing {

struct CommandResult {
  int status = -1;
  std::string out;
  std::string err;
};

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Runs a shell command, capturing stdout and stderr through files in `scratch`.
inline CommandResult run_command(const std::string& cmd, const std::filesystem::path& scratch) {
  const auto out = scratch / "cmd.stdout", err = scratch / "cmd.stderr";
  const std::string full = cmd + " >" + out.string() + " 2>" + err.string();
  const int raw = std::system(full.c_str());
  CommandResult r;
  r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  r.out = slurp(out);
  r.err = slurp(err);
  return r;
}

/// Benchmark manifest, guide images and per-model generated videos.
/// Model `m<k>` moves its sprite k px per frame; entry i uses hue i.
inline pipeline::EvaluationSettings write_eval_fixture(const std::filesystem::path& dir, std::size_t models,
                                                       std::size_t entries) {
  namespace fs = std::filesystem;
  fs::create_directories(dir / "guides");
  const media::Rgb palette[] = {{230, 60, 40}, {40, 200, 60}, {50, 80, 230}, {230, 200, 40}, {200, 60, 220}};
  pipeline::json list = pipeline::json::array();
  for (std::size_t i = 0; i < entries; ++i) {
    const std::string id = "bench-" + std::to_string(i);
    const auto fg = palette[i % 5];
    media::Frame guide(64, 48, media::Rgb{30, 30, 30});
    fill_rect(guide, 10, 12, 12, 16, fg);
    const std::string guide_rel = "guides/" + id + ".ppm";
    media::write_ppm(guide, dir / guide_rel);
    list.push_back({{"id", id},
                    {"action_label", i % 2 ? "jump" : "wave"},
                    {"style", i % 3 ? "2D" : "3D"},
                    {"prompt", "a character " + std::string(i % 2 ? "jumps" : "waves")},
                    {"guide_frames", pipeline::json::array({{{"position", 0}, {"image", guide_rel}}})},
                    {"character_refs", pipeline::json::array({{{"character_id", id}, {"images", {guide_rel}}}})}});
  }
  std::ofstream(dir / "benchmark.json") << pipeline::json{{"full_set", false}, {"entries", list}}.dump(2);

  pipeline::EvaluationSettings ev;
  ev.benchmark = (dir / "benchmark.json").string();
  for (std::size_t k = 0; k < models; ++k) {
    const std::string model = "m" + std::to_string(k);
    const fs::path mdir = dir / "models" / model;
    fs::create_directories(mdir);
    for (std::size_t i = 0; i < entries; ++i) {
      const auto seq = sprite_video(64, 48, 12, 10, 12, 12, 16, static_cast<int>(k), 0, {30, 30, 30}, palette[i % 5]);
      media::write_y4m(seq, mdir / ("bench-" + std::to_string(i) + ".y4m"));
    }
    ev.models[model] = mdir.string();
  }
  return ev;
}

}  // namespace anicurate::testing
