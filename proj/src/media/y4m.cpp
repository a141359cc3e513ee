#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "anicurate/error.hpp"
#include "anicurate/media.hpp"

namespace anicurate::media {
namespace {

constexpr std::string_view kMagic = "YUV4MPEG2";
constexpr std::string_view kFrameMarker = "FRAME";

enum class Chroma { k420, k444 };

struct Header {
  int width = 0;
  int height = 0;
  Rational fps{0, 0};
  Chroma chroma = Chroma::k420;
  bool full_range = false;
};

std::int64_t parse_int(std::string_view s, std::string_view token) {
  std::int64_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) {
    throw ParseError("y4m: malformed header token '" + std::string(token) + "'");
  }
  return v;
}

Rational parse_ratio(std::string_view s, std::string_view token) {
  const auto colon = s.find(':');
  if (colon == std::string_view::npos) {
    throw ParseError("y4m: malformed header token '" + std::string(token) + "'");
  }
  return {parse_int(s.substr(0, colon), token), parse_int(s.substr(colon + 1), token)};
}

Header parse_header(std::string_view line) {
  Header h;
  bool have_w = false, have_h = false, have_f = false;
  std::size_t pos = kMagic.size();
  while (pos < line.size()) {
    if (line[pos] == ' ') {
      ++pos;
      continue;
    }
    const auto end = std::min(line.find(' ', pos), line.size());
    const auto token = line.substr(pos, end - pos);
    const auto value = token.substr(1);
    switch (token[0]) {
      case 'W':
        h.width = static_cast<int>(parse_int(value, token));
        have_w = true;
        break;
      case 'H':
        h.height = static_cast<int>(parse_int(value, token));
        have_h = true;
        break;
      case 'F':
        h.fps = parse_ratio(value, token);
        have_f = true;
        break;
      case 'I':
        if (value != "p" && value != "?") {
          throw ParseError("y4m: unsupported interlacing token '" + std::string(token) + "'");
        }
        break;
      case 'A':
        parse_ratio(value, token);
        break;
      case 'C':
        if (value == "444") {
          h.chroma = Chroma::k444;
        } else if (value == "420" || value == "420jpeg" || value == "420paldv" ||
                   value == "420mpeg2") {
          h.chroma = Chroma::k420;
        } else {
          throw ParseError("y4m: unsupported colorspace token '" + std::string(token) + "'");
        }
        break;
      case 'X':
        if (value == "COLORRANGE=FULL") h.full_range = true;
        break;
      default:
        throw ParseError("y4m: unknown header token '" + std::string(token) + "'");
    }
    pos = end;
  }
  if (!have_w || !have_h || !have_f) {
    throw ParseError(std::string("y4m: header lacks required token '") +
                     (!have_w ? "W" : !have_h ? "H" : "F") + "'");
  }
  if (h.width <= 0 || h.height <= 0) throw ParseError("y4m: non-positive frame size in header");
  if (h.fps.num <= 0 || h.fps.den <= 0) throw ParseError("y4m: non-positive frame rate in header");
  return h;
}

std::uint8_t clamp_u8(double v) {
  return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
}

Rgb ycbcr_to_rgb(int y, int cb, int cr, bool full_range) {
  const double u = cb - 128.0;
  const double v = cr - 128.0;
  if (full_range) {
    return {clamp_u8(y + 1.402 * v), clamp_u8(y - 0.344136 * u - 0.714136 * v),
            clamp_u8(y + 1.772 * u)};
  }
  const double l = 1.164383 * (y - 16.0);
  return {clamp_u8(l + 1.596027 * v), clamp_u8(l - 0.391762 * u - 0.812968 * v),
          clamp_u8(l + 2.017232 * u)};
}

}  // namespace

FrameSequence parse_y4m(std::string_view bytes, std::string source_id) {
  if (bytes.substr(0, kMagic.size()) != kMagic) {
    throw ParseError("y4m: stream does not start with '" + std::string(kMagic) + "'");
  }
  const auto header_end = bytes.find('\n');
  if (header_end == std::string_view::npos) throw ParseError("y4m: unterminated stream header");
  const Header h = parse_header(bytes.substr(0, header_end));

  const std::size_t luma_size = static_cast<std::size_t>(h.width) * h.height;
  const int cw = h.chroma == Chroma::k444 ? h.width : (h.width + 1) / 2;
  const int ch = h.chroma == Chroma::k444 ? h.height : (h.height + 1) / 2;
  const std::size_t chroma_size = static_cast<std::size_t>(cw) * ch;
  const std::size_t payload = luma_size + 2 * chroma_size;

  std::vector<Frame> frames;
  std::size_t pos = header_end + 1;
  while (pos < bytes.size()) {
    const std::size_t index = frames.size();
    if (bytes.substr(pos, kFrameMarker.size()) != kFrameMarker) {
      throw ParseError("y4m: expected FRAME marker for frame " + std::to_string(index));
    }
    const auto line_end = bytes.find('\n', pos);
    if (line_end == std::string_view::npos) {
      throw ParseError("y4m: unterminated FRAME header for frame " + std::to_string(index));
    }
    pos = line_end + 1;
    if (bytes.size() - pos < payload) {
      throw ParseError("y4m: truncated payload for frame " + std::to_string(index) + " (" +
                       std::to_string(bytes.size() - pos) + " of " + std::to_string(payload) +
                       " bytes)");
    }
    const auto* yp = reinterpret_cast<const std::uint8_t*>(bytes.data() + pos);
    const auto* up = yp + luma_size;
    const auto* vp = up + chroma_size;
    Frame frame(h.width, h.height);
    for (int y = 0; y < h.height; ++y) {
      const int cy = h.chroma == Chroma::k444 ? y : y / 2;
      for (int x = 0; x < h.width; ++x) {
        const int cx = h.chroma == Chroma::k444 ? x : x / 2;
        const std::size_t ci = static_cast<std::size_t>(cy) * cw + cx;
        frame.set(x, y,
                  ycbcr_to_rgb(yp[static_cast<std::size_t>(y) * h.width + x], up[ci], vp[ci],
                               h.full_range));
      }
    }
    frames.push_back(std::move(frame));
    pos += payload;
  }
  if (frames.empty()) throw ParseError("y4m: no frames");
  return FrameSequence(std::move(frames), h.fps, std::move(source_id));
}

std::string serialize_y4m(const FrameSequence& seq) {
  std::ostringstream os;
  os << kMagic << " W" << seq.width() << " H" << seq.height() << " F" << seq.fps().num << ':'
     << seq.fps().den << " Ip A1:1 C444\n";
  const std::size_t n = static_cast<std::size_t>(seq.width()) * seq.height();
  std::string planes(3 * n, '\0');
  for (const auto& frame : seq.frames()) {
    auto px = frame.pixels();
    for (std::size_t i = 0; i < n; ++i) {
      const double r = px[3 * i], g = px[3 * i + 1], b = px[3 * i + 2];
      planes[i] = static_cast<char>(clamp_u8(16.0 + (65.481 * r + 128.553 * g + 24.966 * b) / 255.0));
      planes[n + i] =
          static_cast<char>(clamp_u8(128.0 + (-37.797 * r - 74.203 * g + 112.0 * b) / 255.0));
      planes[2 * n + i] =
          static_cast<char>(clamp_u8(128.0 + (112.0 * r - 93.786 * g - 18.214 * b) / 255.0));
    }
    os << kFrameMarker << '\n' << planes;
  }
  return os.str();
}

namespace {

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

FrameSequence read_y4m(const std::filesystem::path& path) {
  return parse_y4m(slurp(path), path.stem().string());
}

void write_y4m(const FrameSequence& seq, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << serialize_y4m(seq);
}

Frame parse_ppm(std::string_view bytes) {
  std::size_t pos = 0;
  auto skip_ws = [&] {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(static_cast<unsigned char>(bytes[pos]))) {
        ++pos;
      } else {
        break;
      }
    }
  };
  auto next_int = [&](const char* what) {
    skip_ws();
    const auto start = pos;
    while (pos < bytes.size() && std::isdigit(static_cast<unsigned char>(bytes[pos]))) ++pos;
    if (start == pos) throw ParseError(std::string("ppm: missing ") + what);
    return static_cast<int>(parse_int(bytes.substr(start, pos - start), what));
  };
  if (bytes.substr(0, 2) != "P6") throw ParseError("ppm: not a binary P6 pixmap");
  pos = 2;
  const int w = next_int("width");
  const int h = next_int("height");
  const int maxval = next_int("maxval");
  if (maxval != 255) throw ParseError("ppm: only maxval 255 is supported");
  if (pos >= bytes.size() || !std::isspace(static_cast<unsigned char>(bytes[pos]))) {
    throw ParseError("ppm: missing separator before raster");
  }
  ++pos;
  const std::size_t need = static_cast<std::size_t>(w) * h * 3;
  if (bytes.size() - pos < need) throw ParseError("ppm: truncated raster");
  const auto* p = reinterpret_cast<const std::uint8_t*>(bytes.data() + pos);
  return Frame(w, h, std::vector<std::uint8_t>(p, p + need));
}

Frame read_ppm(const std::filesystem::path& path) { return parse_ppm(slurp(path)); }

std::string serialize_ppm(const Frame& frame) {
  std::string out = "P6\n" + std::to_string(frame.width()) + " " + std::to_string(frame.height()) +
                    "\n255\n";
  auto px = frame.pixels();
  out.append(reinterpret_cast<const char*>(px.data()), px.size());
  return out;
}

void write_ppm(const Frame& frame, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << serialize_ppm(frame);
}

FrameSequence read_frame_dir(const std::filesystem::path& dir, Rational fps) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw Error("not a directory: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".ppm") files.push_back(entry.path());
  }
  if (files.empty()) throw Error("no .ppm frames in " + dir.string());
  std::sort(files.begin(), files.end(),
            [](const fs::path& a, const fs::path& b) { return a.filename() < b.filename(); });
  std::vector<Frame> frames;
  frames.reserve(files.size());
  for (const auto& f : files) {
    Frame frame = read_ppm(f);
    if (!frames.empty() && (frame.width() != frames.front().width() ||
                            frame.height() != frames.front().height())) {
      throw ShapeError("frame " + f.filename().string() + " is " + std::to_string(frame.width()) +
                       "x" + std::to_string(frame.height()) + ", expected " +
                       std::to_string(frames.front().width()) + "x" +
                       std::to_string(frames.front().height()));
    }
    frames.push_back(std::move(frame));
  }
  const auto name = dir.filename().empty() ? dir.parent_path().filename() : dir.filename();
  return FrameSequence(std::move(frames), fps, name.string());
}

FrameSequence load_video(const std::filesystem::path& path, Rational dir_fps) {
  if (std::filesystem::is_directory(path)) return read_frame_dir(path, dir_fps);
  return read_y4m(path);
}

}  // namespace anicurate::media
