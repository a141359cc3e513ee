#include <fstream>
#include <set>

#include <spdlog/spdlog.h>

#include "anicurate/error.hpp"
#include "anicurate/evalkit.hpp"

namespace anicurate::evalkit {
namespace {

std::string str_field(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key) || !j[key].is_string()) {
    throw ParseError(where + ": field '" + key + "' must be a string");
  }
  return j[key].get<std::string>();
}

BenchmarkEntry parse_entry(const json& j, std::size_t index) {
  std::string where = "benchmark entry #" + std::to_string(index);
  if (!j.is_object()) throw ParseError(where + " is not an object");
  BenchmarkEntry e;
  e.id = str_field(j, "id", where);
  where = "benchmark entry '" + e.id + "'";
  e.action_label = str_field(j, "action_label", where);
  const std::string style = str_field(j, "style", where);
  if (style == "2D") {
    e.style = Style::k2D;
  } else if (style == "3D") {
    e.style = Style::k3D;
  } else {
    throw ParseError(where + ": style must be 2D or 3D, got '" + style + "'");
  }
  e.prompt = str_field(j, "prompt", where);
  if (e.prompt.empty()) throw ParseError(where + ": prompt is empty");
  e.gt_clip = j.contains("gt_clip") ? str_field(j, "gt_clip", where) : "";

  if (!j.contains("guide_frames") || !j["guide_frames"].is_array() || j["guide_frames"].empty()) {
    throw ParseError(where + ": needs at least one guide frame");
  }
  for (const auto& g : j["guide_frames"]) {
    if (!g.is_object() || !g.contains("position") || !g["position"].is_number_integer()) {
      throw ParseError(where + ": guide frame needs an integer position");
    }
    e.guide_frames.push_back({g["position"].get<int>(), str_field(g, "image", where)});
  }
  if (j.contains("character_refs")) {
    if (!j["character_refs"].is_array()) throw ParseError(where + ": character_refs must be an array");
    for (const auto& c : j["character_refs"]) {
      CharacterRef ref;
      ref.character_id = str_field(c, "character_id", where);
      if (!c.contains("images") || !c["images"].is_array()) {
        throw ParseError(where + ": character '" + ref.character_id + "' needs an images array");
      }
      for (const auto& img : c["images"]) {
        if (!img.is_string()) throw ParseError(where + ": character image refs must be strings");
        ref.images.push_back(img.get<std::string>());
      }
      e.character_refs.push_back(std::move(ref));
    }
  }
  return e;
}

}  // namespace

BenchmarkSet parse_benchmark(const json& manifest) {
  if (!manifest.is_object() || !manifest.contains("entries") || !manifest["entries"].is_array()) {
    throw ParseError("benchmark manifest must be {\"full_set\": bool, \"entries\": [...]}");
  }
  BenchmarkSet set;
  if (manifest.contains("full_set")) {
    if (!manifest["full_set"].is_boolean()) throw ParseError("benchmark 'full_set' must be a boolean");
    set.full_set = manifest["full_set"].get<bool>();
  }
  std::set<std::string> ids;
  for (std::size_t i = 0; i < manifest["entries"].size(); ++i) {
    BenchmarkEntry e = parse_entry(manifest["entries"][i], i);
    if (!ids.insert(e.id).second) throw ParseError("benchmark entry id '" + e.id + "' is duplicated");
    ++set.label_counts[e.action_label];
    (e.style == Style::k2D ? set.count_2d : set.count_3d)++;
    set.entries.push_back(std::move(e));
  }

  if (set.full_set) {
    if (set.entries.size() != kFullSetTotal || set.count_2d != kFullSet2D || set.count_3d != kFullSet3D) {
      throw ParseError("full-set benchmark must hold " + std::to_string(kFullSetTotal) + " entries (" +
                       std::to_string(kFullSet2D) + " 2D + " + std::to_string(kFullSet3D) + " 3D), got " +
                       std::to_string(set.entries.size()) + " (" + std::to_string(set.count_2d) + " 2D + " +
                       std::to_string(set.count_3d) + " 3D)");
    }
    for (const auto& [label, count] : set.label_counts) {
      if (count < kLabelMin || count > kLabelMax) {
        set.warnings.push_back("action label '" + label + "' has " + std::to_string(count) +
                               " clips, outside the expected " + std::to_string(kLabelMin) + "-" +
                               std::to_string(kLabelMax) + " band");
        spdlog::warn("benchmark: {}", set.warnings.back());
      }
    }
  }
  return set;
}

BenchmarkSet load_benchmark(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  const json j = json::parse(in, nullptr, false);
  if (j.is_discarded()) throw ParseError(path.string() + " is not valid JSON");
  return parse_benchmark(j);
}

json benchmark_entry_to_json(const BenchmarkEntry& e) {
  json guides = json::array();
  for (const auto& g : e.guide_frames) guides.push_back({{"position", g.position}, {"image", g.image}});
  json chars = json::array();
  for (const auto& c : e.character_refs) chars.push_back({{"character_id", c.character_id}, {"images", c.images}});
  return {{"id", e.id},
          {"action_label", e.action_label},
          {"style", e.style == Style::k2D ? "2D" : "3D"},
          {"prompt", e.prompt},
          {"guide_frames", std::move(guides)},
          {"character_refs", std::move(chars)},
          {"gt_clip", e.gt_clip}};
}

void CharacterStore::add(const std::string& id, Embedding e) {
  e.normalize();
  features_[id].push_back(std::move(e));
}

json CharacterStore::to_json() const {
  json j = json::object();
  for (const auto& [id, list] : features_) {
    json arr = json::array();
    for (const auto& e : list) arr.push_back(providers::to_json(e));
    j[id] = std::move(arr);
  }
  return j;
}

CharacterStore CharacterStore::from_json(const json& j) {
  if (!j.is_object()) throw ParseError("character store must be an object of id -> [[float, ...], ...]");
  CharacterStore store;
  for (const auto& [id, list] : j.items()) {
    if (!list.is_array()) throw ParseError("character '" + id + "' must map to an array of embeddings");
    for (const auto& e : list) {
      try {
        store.add(id, providers::embedding_from_json(e));
      } catch (const Error& err) {
        throw ParseError("character '" + id + "': " + err.what());
      }
    }
  }
  return store;
}

CharacterStore CharacterStore::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  const json j = json::parse(in, nullptr, false);
  if (j.is_discarded()) throw ParseError(path.string() + " is not valid JSON");
  return from_json(j);
}

}  // namespace anicurate::evalkit
