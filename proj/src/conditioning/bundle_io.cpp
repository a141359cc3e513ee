#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "anicurate/conditioning.hpp"
#include "anicurate/error.hpp"
#include "json.hpp"

namespace anicurate::conditioning {
namespace {

using json = nlohmann::json;

std::filesystem::path with_suffix(const std::filesystem::path& stem, const char* suffix) {
  return std::filesystem::path(stem.string() + suffix);
}

void write_f32le(const Tensor4& t, const std::filesystem::path& path) {
  std::string bytes(t.values().size() * 4, '\0');
  for (std::size_t i = 0; i < t.values().size(); ++i) {
    auto u = std::bit_cast<std::uint32_t>(t.values()[i]);
    for (int b = 0; b < 4; ++b) bytes[4 * i + b] = static_cast<char>((u >> (8 * b)) & 0xff);
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

std::vector<float> read_f32le(const std::filesystem::path& path, std::size_t count) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.size() != count * 4) {
    throw ParseError(path.string() + " holds " + std::to_string(bytes.size()) + " bytes, sidecar expects " +
                     std::to_string(count * 4));
  }
  std::vector<float> v(count);
  for (std::size_t i = 0; i < count; ++i) {
    std::uint32_t u = 0;
    for (int b = 0; b < 4; ++b) u |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[4 * i + b])) << (8 * b);
    v[i] = std::bit_cast<float>(u);
  }
  return v;
}

json shape_json(const Shape4& s) { return {{"w", s.w}, {"h", s.h}, {"t", s.t}, {"c", s.c}}; }

json slot_json(ChannelSlot s) { return {{"offset", s.offset}, {"count", s.count}}; }

json read_sidecar(const std::filesystem::path& stem) {
  const auto path = with_suffix(stem, ".json");
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  json j = json::parse(in, nullptr, false);
  if (j.is_discarded()) throw ParseError(path.string() + " is not valid JSON");
  if (j.value("format", "") != "float32-le" || j.value("layout", "") != "THWC") {
    throw ParseError(path.string() + ": expected format float32-le, layout THWC");
  }
  return j;
}

Shape4 shape_from(const json& j) {
  const auto& s = j.at("shape");
  return {s.at("w").get<int>(), s.at("h").get<int>(), s.at("t").get<int>(), s.at("c").get<int>()};
}

void write_json(const json& j, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

}  // namespace

void write_tensor(const Tensor4& t, const std::filesystem::path& stem, const std::string& kind) {
  write_f32le(t, with_suffix(stem, ".f32"));
  write_json({{"format", "float32-le"}, {"layout", "THWC"}, {"kind", kind}, {"shape", shape_json(t.shape())}},
             with_suffix(stem, ".json"));
}

Tensor4 read_tensor(const std::filesystem::path& stem) {
  const json j = read_sidecar(stem);
  const Shape4 s = shape_from(j);
  return Tensor4(s, read_f32le(with_suffix(stem, ".f32"), s.size()));
}

void write_bundle(const ConditionBundle& b, const std::filesystem::path& stem) {
  write_f32le(b.X, with_suffix(stem, ".f32"));
  write_json({{"format", "float32-le"},
              {"layout", "THWC"},
              {"kind", "condition_input"},
              {"shape", shape_json(b.X.shape())},
              {"channels",
               {{"noise", slot_json(b.noise)},
                {"mask", slot_json(b.mask)},
                {"guide", slot_json(b.guide)},
                {"text", slot_json(b.text)}}}},
             with_suffix(stem, ".json"));
}

ConditionBundle read_bundle(const std::filesystem::path& stem) {
  const json j = read_sidecar(stem);
  try {
    ConditionBundle b;
    const Shape4 s = shape_from(j);
    b.X = Tensor4(s, read_f32le(with_suffix(stem, ".f32"), s.size()));
    auto slot = [&](const char* name) {
      const auto& c = j.at("channels").at(name);
      return ChannelSlot{c.at("offset").get<int>(), c.at("count").get<int>()};
    };
    b.noise = slot("noise");
    b.mask = slot("mask");
    b.guide = slot("guide");
    b.text = slot("text");
    return b;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("bundle sidecar: ") + e.what());
  }
}

}  // namespace anicurate::conditioning
