#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include <boost/math/statistics/bivariate_statistics.hpp>
#include <boost/tokenizer.hpp>
#include <spdlog/fmt/fmt.h>

#include "anicurate/error.hpp"
#include "anicurate/report.hpp"

namespace anicurate::report {
namespace {

std::vector<std::string> split_csv(const std::string& line) {
  boost::tokenizer<boost::escaped_list_separator<char>> tok(line);
  std::vector<std::string> out;
  for (const auto& t : tok) {
    std::string s = t;
    while (!s.empty() && (s.back() == '\r' || s.back() == ' ')) s.pop_back();
    while (!s.empty() && s.front() == ' ') s.erase(s.begin());
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<std::string> lines_of(std::string_view text) {
  std::vector<std::string> out;
  std::istringstream in{std::string(text)};
  for (std::string line; std::getline(in, line);) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) out.push_back(std::move(line));
  }
  return out;
}

// Mean of a sample that does not depend on input order; a constant sample
// returns its value exactly.
double stable_mean(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  if (v.front() == v.back()) return v.front();
  long double sum = 0;
  for (double x : v) sum += x;
  return static_cast<double>(sum / static_cast<long double>(v.size()));
}

std::string cell_text(const std::optional<double>& v) { return v ? fmt::format("{:.2f}", *v) : "-"; }

std::vector<std::string> header(bool human) {
  std::vector<std::string> h{"Model"};
  if (human) h.emplace_back("Human Evaluation");
  for (Dimension d : evalkit::kDimensions) h.emplace_back(evalkit::dimension_title(d));
  return h;
}

int parse_rating(const std::string& s, const std::string& where) {
  int v = 0;
  try {
    std::size_t used = 0;
    v = std::stoi(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
  } catch (const std::exception&) {
    throw ParseError(where + ": rating '" + s + "' is not an integer");
  }
  if (v < 1 || v > 5) throw ParseError(where + ": rating " + s + " is outside 1..5");
  return v;
}

}  // namespace

json to_json(const SampleResult& r) {
  json metrics = json::object();
  for (Dimension d : evalkit::kDimensions) {
    const auto& v = r.metrics[d];
    metrics[evalkit::dimension_key(d)] = v ? json(*v) : json(nullptr);
  }
  json j{{"model", r.model}, {"entry", r.entry}, {"metrics", std::move(metrics)}, {"failures", r.failures}};
  if (!r.notes.empty()) j["notes"] = r.notes;
  return j;
}

SampleResult sample_result_from_json(const json& j) {
  try {
    SampleResult r;
    r.model = j.at("model").get<std::string>();
    r.entry = j.at("entry").get<std::string>();
    for (const auto& [key, value] : j.at("metrics").items()) {
      const auto d = evalkit::dimension_from_key(key);
      if (!d) throw ParseError("unknown metric '" + key + "'");
      if (!value.is_null()) r.metrics[*d] = value.get<double>();
    }
    if (j.contains("failures")) r.failures = j["failures"].get<std::map<std::string, std::string>>();
    if (j.contains("notes")) r.notes = j["notes"].get<std::map<std::string, std::string>>();
    return r;
  } catch (const json::exception& e) {
    throw ParseError(std::string("sample result: ") + e.what());
  }
}

std::string to_jsonl(const std::vector<SampleResult>& results) {
  std::string out;
  for (const auto& r : results) out += to_json(r).dump() + "\n";
  return out;
}

std::vector<SampleResult> results_from_jsonl(std::string_view text) {
  std::vector<SampleResult> out;
  std::size_t lineno = 0;
  for (const auto& line : lines_of(text)) {
    ++lineno;
    const json j = json::parse(line, nullptr, false);
    if (j.is_discarded()) throw ParseError("results line " + std::to_string(lineno) + " is not valid JSON");
    out.push_back(sample_result_from_json(j));
  }
  return out;
}

double round2(double x) { return std::round(x * 100.0) / 100.0; }

Report aggregate(const std::vector<SampleResult>& results) {
  std::map<std::string, std::array<std::vector<double>, 6>> values;
  std::map<std::string, std::size_t> totals;
  for (const auto& r : results) {
    auto& row = values[r.model];
    ++totals[r.model];
    for (Dimension d : evalkit::kDimensions) {
      if (const auto& v = r.metrics[d]) row[static_cast<std::size_t>(d)].push_back(*v);
    }
  }
  Report report;
  for (const auto& [model, dims] : values) {
    ModelRow row;
    row.model = model;
    for (std::size_t i = 0; i < dims.size(); ++i) {
      row.cells[i].total = totals[model];
      row.cells[i].used = dims[i].size();
      if (!dims[i].empty()) row.cells[i].value = round2(100.0 * stable_mean(dims[i]));
    }
    report.rows.push_back(std::move(row));
  }
  return report;
}

std::vector<HumanRating> parse_ratings_csv(std::string_view text) {
  const auto lines = lines_of(text);
  if (lines.empty()) throw ParseError("ratings CSV is empty");
  const std::vector<std::string> expected{"rater", "entry", "model", "smooth", "motion",
                                          "appeal", "tvc",   "ivc",   "ipc"};
  auto head = split_csv(lines[0]);
  const bool with_overall = head.size() == expected.size() + 1 && head.back() == "overall";
  if (with_overall) head.pop_back();
  if (head != expected) {
    throw ParseError("ratings CSV header must be 'rater,entry,model,smooth,motion,appeal,tvc,ivc,ipc[,overall]'");
  }
  const std::size_t width = expected.size() + (with_overall ? 1 : 0);
  std::vector<HumanRating> out;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const std::string where = "ratings line " + std::to_string(i + 1);
    const auto f = split_csv(lines[i]);
    if (f.size() != width) {
      throw ParseError(where + ": expected " + std::to_string(width) + " fields, got " + std::to_string(f.size()));
    }
    HumanRating r{f[0], f[1], f[2], {}, std::nullopt};
    for (std::size_t k = 0; k < 6; ++k) r.ratings[k] = parse_rating(f[3 + k], where);
    if (with_overall && !f[9].empty()) r.overall = parse_rating(f[9], where);
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<HumanRating> read_ratings_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_ratings_csv(ss.str());
}

double rating_to_percent(double rating) { return (rating - 1.0) / 4.0 * 100.0; }

std::optional<double> HumanMeans::headline() const {
  if (overall) return overall;
  std::vector<double> present;
  for (const auto& d : dims) {
    if (d) present.push_back(*d);
  }
  if (present.empty()) return std::nullopt;
  return round2(stable_mean(present));
}

std::map<std::string, HumanMeans> human_mean(const std::vector<HumanRating>& ratings) {
  std::map<std::string, std::array<std::vector<double>, 6>> dims;
  std::map<std::string, std::vector<double>> overall;
  for (const auto& r : ratings) {
    auto& row = dims[r.model];
    for (std::size_t k = 0; k < 6; ++k) row[k].push_back(r.ratings[k]);
    if (r.overall) overall[r.model].push_back(*r.overall);
  }
  std::map<std::string, HumanMeans> out;
  for (const auto& [model, row] : dims) {
    HumanMeans m;
    for (std::size_t k = 0; k < 6; ++k) {
      if (!row[k].empty()) m.dims[k] = round2(rating_to_percent(stable_mean(row[k])));
    }
    if (auto it = overall.find(model); it != overall.end()) {
      m.overall = round2(rating_to_percent(stable_mean(it->second)));
    }
    out[model] = m;
  }
  return out;
}

void attach_human(Report& report, const std::map<std::string, HumanMeans>& human) {
  report.has_human = true;
  for (auto& row : report.rows) {
    if (auto it = human.find(row.model); it != human.end()) row.human = it->second.headline();
  }
}

std::optional<double> pearson(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) throw InvalidArgument("correlation series differ in length");
  if (x.size() < 2) return std::nullopt;
  auto constant = [](const std::vector<double>& v) {
    const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
    return *lo == *hi;
  };
  if (constant(x) || constant(y)) return std::nullopt;
  return std::clamp(boost::math::statistics::correlation_coefficient(x, y), -1.0, 1.0);
}

std::vector<double> average_ranks(const std::vector<double>& x) {
  std::vector<std::size_t> order(x.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::vector<double> ranks(x.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && x[order[j + 1]] == x[order[i]]) ++j;
    const double rank = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = rank;
    i = j + 1;
  }
  return ranks;
}

std::optional<double> spearman(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) throw InvalidArgument("correlation series differ in length");
  return pearson(average_ranks(x), average_ranks(y));
}

std::vector<Alignment> alignment(const Report& metrics, const std::map<std::string, HumanMeans>& human) {
  std::vector<Alignment> out;
  for (Dimension d : evalkit::kDimensions) {
    Alignment a;
    a.dimension = d;
    std::vector<double> x, y;
    for (const auto& row : metrics.rows) {
      const auto it = human.find(row.model);
      if (it == human.end()) continue;
      const auto& h = it->second.dims[static_cast<std::size_t>(d)];
      if (!row[d].value || !h) continue;
      x.push_back(*row[d].value);
      y.push_back(*h);
    }
    a.models = x.size();
    if (a.models < kMinAlignmentModels) {
      a.note = "needs at least " + std::to_string(kMinAlignmentModels) + " models with both scores";
    } else {
      a.pearson = pearson(x, y);
      a.spearman = spearman(x, y);
      if (!a.pearson) a.note = "undefined: zero variance";
    }
    out.push_back(std::move(a));
  }
  return out;
}

std::string render_markdown(const Report& report) {
  const auto head = header(report.has_human);
  std::string out = "|";
  for (const auto& h : head) out += " " + h + " |";
  out += "\n|";
  for (std::size_t i = 0; i < head.size(); ++i) out += i == 0 ? " --- |" : " ---: |";
  out += "\n";
  for (const auto& row : report.rows) {
    out += "| " + row.model + " |";
    if (report.has_human) out += " " + cell_text(row.human) + " |";
    for (const auto& c : row.cells) out += " " + cell_text(c.value) + " |";
    out += "\n";
  }
  return out;
}

std::string render_csv(const Report& report) {
  const auto head = header(report.has_human);
  std::string out;
  for (std::size_t i = 0; i < head.size(); ++i) out += (i ? "," : "") + head[i];
  out += "\n";
  for (const auto& row : report.rows) {
    out += row.model;
    if (report.has_human) out += "," + cell_text(row.human);
    for (const auto& c : row.cells) out += "," + cell_text(c.value);
    out += "\n";
  }
  return out;
}

Report parse_report_csv(std::string_view text) {
  const auto lines = lines_of(text);
  if (lines.empty()) throw ParseError("report CSV is empty");
  const auto head = split_csv(lines[0]);
  Report report;
  report.has_human = head.size() > 1 && head[1] == "Human Evaluation";
  if (head != header(report.has_human)) throw ParseError("report CSV header does not match the table layout");
  auto value = [](const std::string& s, std::size_t line) -> std::optional<double> {
    if (s == "-") return std::nullopt;
    try {
      return std::stod(s);
    } catch (const std::exception&) {
      throw ParseError("report line " + std::to_string(line) + ": bad cell '" + s + "'");
    }
  };
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto f = split_csv(lines[i]);
    if (f.size() != head.size()) throw ParseError("report line " + std::to_string(i + 1) + ": wrong field count");
    ModelRow row;
    row.model = f[0];
    std::size_t k = 1;
    if (report.has_human) row.human = value(f[k++], i + 1);
    for (auto& c : row.cells) c.value = value(f[k++], i + 1);
    report.rows.push_back(std::move(row));
  }
  return report;
}

std::string render_alignment_markdown(const std::vector<Alignment>& rows) {
  std::string out = "| Dimension | Models | Pearson | Spearman | Note |\n| --- | ---: | ---: | ---: | --- |\n";
  auto num = [](const std::optional<double>& v) { return v ? fmt::format("{:.3f}", *v) : std::string("undefined"); };
  for (const auto& a : rows) {
    out += fmt::format("| {} | {} | {} | {} | {} |\n", evalkit::dimension_title(a.dimension), a.models,
                       num(a.pearson), num(a.spearman), a.note);
  }
  return out;
}

}  // namespace anicurate::report
