#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include <spdlog/spdlog.h>

#include "anicurate/curation.hpp"
#include "anicurate/error.hpp"

namespace anicurate::curation {

void FilterRule::validate() const {
  if (!(flow_min < flow_max)) throw InvalidArgument("filter rule: flow_min must be < flow_max");
  if (!(duration_min < duration_max)) throw InvalidArgument("filter rule: duration_min must be < duration_max");
}

namespace {

// Durations come from frame_count / fps; allow for the rounding of that division.
constexpr double kDurationSlack = 1e-9;

void require_scores(const ClipScores& s) {
  if (!s.text_cover) throw InvalidArgument("clip scores lack dimension 'text_cover'");
  if (!s.flow) throw InvalidArgument("clip scores lack dimension 'flow'");
  if (!s.aesthetic) throw InvalidArgument("clip scores lack dimension 'aesthetic'");
}

bool passes(const ClipScores& s, const FilterRule& r) {
  return s.duration >= r.duration_min - kDurationSlack && s.duration <= r.duration_max + kDurationSlack &&
         *s.text_cover <= r.text_cover_max && *s.flow >= r.flow_min && *s.flow <= r.flow_max &&
         *s.aesthetic >= r.aesthetic_min;
}

}  // namespace

Verdict apply_filter(const ClipScores& s, const FilterRule& rule) {
  require_scores(s);
  Verdict v;
  if (s.duration < rule.duration_min - kDurationSlack || s.duration > rule.duration_max + kDurationSlack) {
    v.reasons.emplace_back(kDuration);
  }
  if (*s.text_cover > rule.text_cover_max) v.reasons.emplace_back(kTextCover);
  if (*s.flow < rule.flow_min || *s.flow > rule.flow_max) v.reasons.emplace_back(kFlow);
  if (*s.aesthetic < rule.aesthetic_min) v.reasons.emplace_back(kAesthetic);
  v.pass = v.reasons.empty();
  return v;
}

double measure_retention(const std::vector<ClipScores>& scores, const FilterRule& rule) {
  if (scores.empty()) return 0.0;
  std::size_t kept = 0;
  for (const auto& s : scores) {
    require_scores(s);
    if (passes(s, rule)) ++kept;
  }
  return static_cast<double>(kept) / static_cast<double>(scores.size());
}

Calibration calibrate(const std::vector<ClipScores>& scores, double target) {
  constexpr double kTolerance = 0.10;
  if (scores.size() < 100) {
    throw InvalidArgument("calibrate needs at least 100 samples, got " + std::to_string(scores.size()));
  }
  if (!(target > 0.0 && target < 1.0)) {
    throw InvalidArgument("calibration target must lie in (0, 1), got " + std::to_string(target));
  }
  const std::size_t n = scores.size();
  std::vector<double> text, flow, aes;
  text.reserve(n);
  flow.reserve(n);
  aes.reserve(n);
  for (const auto& s : scores) {
    require_scores(s);
    text.push_back(*s.text_cover);
    flow.push_back(*s.flow);
    aes.push_back(*s.aesthetic);
  }
  std::sort(text.begin(), text.end());
  std::sort(flow.begin(), flow.end());
  std::sort(aes.begin(), aes.end());

  // Keep `k` of n per dimension: the k lowest text-cover values, the k highest
  // aesthetic values, and the central k flow values.
  auto rule_for = [&](std::size_t k) {
    FilterRule r;
    if (k == 0) {
      r.text_cover_max = -std::numeric_limits<double>::infinity();
      r.aesthetic_min = std::numeric_limits<double>::infinity();
      r.flow_min = std::numeric_limits<double>::infinity();
      r.flow_max = std::numeric_limits<double>::infinity();
      return r;
    }
    r.text_cover_max = text[k - 1];
    r.aesthetic_min = aes[n - k];
    const std::size_t lo = (n - k) / 2;
    r.flow_min = flow[lo];
    r.flow_max = flow[lo + k - 1];
    if (!(r.flow_min < r.flow_max)) r.flow_max = std::nextafter(r.flow_min, std::numeric_limits<double>::infinity());
    return r;
  };
  auto rate = [&](std::size_t k) { return measure_retention(scores, rule_for(k)); };

  const double max_rate = rate(n);
  std::size_t lo = 0, hi = n;  // smallest k with rate(k) >= target
  if (max_rate < target) {
    lo = hi = n;
  } else {
    while (lo < hi) {
      const std::size_t mid = lo + (hi - lo) / 2;
      if (rate(mid) >= target) {
        hi = mid;
      } else {
        lo = mid + 1;
      }
    }
  }
  std::size_t k = lo;
  double achieved = rate(k);
  if (k > 0) {
    const double below = rate(k - 1);
    if (std::abs(below - target) < std::abs(achieved - target)) {
      --k;
      achieved = below;
    }
  }
  if (std::abs(achieved - target) > kTolerance * target) {
    std::ostringstream os;
    os << "retention target " << target << " unreachable: achievable range is [0, " << max_rate
       << "] (duration bounds alone keep " << max_rate << "), closest reachable " << achieved;
    throw Error(os.str());
  }
  Calibration c;
  c.rule = rule_for(k);
  c.keep_fraction = static_cast<double>(k) / static_cast<double>(n);
  c.measured_retention = achieved;
  return c;
}

std::vector<HistogramRow> histogram_report(const std::vector<ClipScores>& scores, std::size_t bins) {
  if (scores.empty()) throw InvalidArgument("histogram_report needs at least one record");
  if (bins == 0) throw InvalidArgument("histogram_report needs at least one bin");
  struct Dim {
    const char* name;
    double (*get)(const ClipScores&);
  };
  const Dim dims[] = {
      {kDuration, [](const ClipScores& s) { return s.duration; }},
      {kTextCover, [](const ClipScores& s) { return *s.text_cover; }},
      {kAesthetic, [](const ClipScores& s) { return *s.aesthetic; }},
      {kFlow, [](const ClipScores& s) { return *s.flow; }},
  };
  for (const auto& s : scores) require_scores(s);

  std::vector<HistogramRow> rows;
  for (const auto& d : dims) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (const auto& s : scores) {
      lo = std::min(lo, d.get(s));
      hi = std::max(hi, d.get(s));
    }
    const double width = (hi - lo) / static_cast<double>(bins);
    std::vector<std::size_t> counts(bins, 0);
    for (const auto& s : scores) {
      std::size_t b = 0;
      if (width > 0) b = std::min(bins - 1, static_cast<std::size_t>((d.get(s) - lo) / width));
      ++counts[b];
    }
    for (std::size_t b = 0; b < bins; ++b) {
      const double blo = lo + width * static_cast<double>(b);
      const double bhi = b + 1 == bins ? hi : lo + width * static_cast<double>(b + 1);
      rows.push_back({d.name, blo, bhi, counts[b]});
    }
  }
  return rows;
}

std::string histogram_csv(const std::vector<HistogramRow>& rows) {
  std::ostringstream os;
  os.precision(10);
  os << "dimension,bin_lo,bin_hi,count\n";
  for (const auto& r : rows) os << r.dimension << ',' << r.bin_lo << ',' << r.bin_hi << ',' << r.count << '\n';
  return os.str();
}

ManifestResult build_manifest(std::vector<ClipRecord> records, providers::ModelClient& captioner) {
  std::erase_if(records, [](const ClipRecord& r) { return !r.verdict || !r.verdict->pass; });
  std::sort(records.begin(), records.end(), [](const ClipRecord& a, const ClipRecord& b) { return a.id < b.id; });

  ManifestResult out;
  for (auto& r : records) {
    std::string reason;
    try {
      json clip = record_to_json(r);
      std::string caption = captioner.caption(clip);
      if (caption.empty()) {
        reason = "empty caption";
      } else {
        r.caption = std::move(caption);
      }
    } catch (const Error& e) {
      reason = e.what();
    }
    if (!reason.empty()) {
      spdlog::warn("manifest: skipping {}: {}", r.id, reason);
      out.skipped.emplace_back(r.id, reason);
    } else {
      out.emitted.push_back(std::move(r));
    }
  }
  if (!records.empty() && static_cast<double>(out.skipped.size()) > 0.10 * static_cast<double>(records.size())) {
    throw Error("caption provider failed for " + std::to_string(out.skipped.size()) + " of " +
                std::to_string(records.size()) + " records (more than 10%)");
  }
  return out;
}

json rule_to_json(const FilterRule& r) {
  return {{"text_cover_max", r.text_cover_max}, {"flow_min", r.flow_min},
          {"flow_max", r.flow_max},             {"aesthetic_min", r.aesthetic_min},
          {"duration_min", r.duration_min},     {"duration_max", r.duration_max}};
}

FilterRule rule_from_json(const json& j) {
  FilterRule r;
  auto get = [&](const char* key, double& field) {
    if (j.contains(key)) {
      if (!j[key].is_number()) throw ConfigError(std::string("filter rule field '") + key + "' must be a number");
      field = j[key].get<double>();
    }
  };
  for (const auto& [key, _] : j.items()) {
    static const char* known[] = {"text_cover_max", "flow_min", "flow_max", "aesthetic_min", "duration_min", "duration_max"};
    if (std::find_if(std::begin(known), std::end(known), [&](const char* k) { return key == k; }) == std::end(known)) {
      throw ConfigError("unknown filter rule field '" + key + "'");
    }
  }
  get("text_cover_max", r.text_cover_max);
  get("flow_min", r.flow_min);
  get("flow_max", r.flow_max);
  get("aesthetic_min", r.aesthetic_min);
  get("duration_min", r.duration_min);
  get("duration_max", r.duration_max);
  r.validate();
  return r;
}

json record_to_json(const ClipRecord& r) {
  json scores{{"duration", r.scores.duration}, {"frame_count", r.scores.frame_count}};
  if (r.scores.text_cover) scores["text_cover"] = *r.scores.text_cover;
  if (r.scores.flow) scores["flow"] = *r.scores.flow;
  if (r.scores.aesthetic) scores["aesthetic"] = *r.scores.aesthetic;
  json j{{"id", r.id},
         {"source", r.source},
         {"frame_start", r.range.start},
         {"frame_end", r.range.end},
         {"fps", r.fps},
         {"scores", std::move(scores)}};
  if (r.verdict) j["verdict"] = {{"pass", r.verdict->pass}, {"reasons", r.verdict->reasons}};
  if (r.caption) j["caption"] = *r.caption;
  j["tags"] = r.tags;
  return j;
}

ClipRecord record_from_json(const json& j) {
  try {
    ClipRecord r;
    r.id = j.at("id").get<std::string>();
    r.source = j.at("source").get<std::string>();
    r.range = {j.at("frame_start").get<std::size_t>(), j.at("frame_end").get<std::size_t>()};
    r.fps = j.at("fps").get<double>();
    const auto& s = j.at("scores");
    r.scores.duration = s.at("duration").get<double>();
    r.scores.frame_count = s.at("frame_count").get<std::size_t>();
    if (s.contains("text_cover")) r.scores.text_cover = s["text_cover"].get<double>();
    if (s.contains("flow")) r.scores.flow = s["flow"].get<double>();
    if (s.contains("aesthetic")) r.scores.aesthetic = s["aesthetic"].get<double>();
    if (j.contains("verdict")) {
      r.verdict = Verdict{j["verdict"].at("pass").get<bool>(),
                          j["verdict"].at("reasons").get<std::vector<std::string>>()};
    }
    if (j.contains("caption")) r.caption = j["caption"].get<std::string>();
    if (j.contains("tags")) r.tags = j["tags"].get<std::map<std::string, std::string>>();
    return r;
  } catch (const json::exception& e) {
    throw ParseError(std::string("clip record: ") + e.what());
  }
}

std::string to_jsonl(const std::vector<ClipRecord>& records) {
  std::string out;
  for (const auto& r : records) out += record_to_json(r).dump() + "\n";
  return out;
}

std::vector<ClipRecord> from_jsonl(std::string_view text) {
  std::vector<ClipRecord> out;
  std::size_t pos = 0, line_no = 0;
  while (pos < text.size()) {
    auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    const auto line = text.substr(pos, nl - pos);
    ++line_no;
    pos = nl + 1;
    if (line.empty()) continue;
    const json j = json::parse(line.begin(), line.end(), nullptr, false);
    if (j.is_discarded()) throw ParseError("jsonl line " + std::to_string(line_no) + " is not valid JSON");
    out.push_back(record_from_json(j));
  }
  return out;
}

std::vector<ClipScores> synthetic_score_corpus(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  auto uniform = [&] { return static_cast<double>(rng() >> 11) * 0x1.0p-53; };
  std::vector<ClipScores> out(n);
  for (auto& s : out) {
    s.text_cover = uniform();
    s.flow = 60.0 * uniform();
    s.aesthetic = 10.0 * uniform();
    s.frame_count = 8 + static_cast<std::size_t>(rng() % 193);
    s.duration = static_cast<double>(s.frame_count) / 8.0;
  }
  return out;
}

}  // namespace anicurate::curation
