#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "anicurate/conditioning.hpp"
#include "anicurate/error.hpp"

namespace anicurate::conditioning {

std::string Shape4::str() const {
  return "(" + std::to_string(w) + "," + std::to_string(h) + "," + std::to_string(t) + "," +
         std::to_string(c) + ")";
}

Tensor4::Tensor4(Shape4 shape, float fill) : shape_(shape) {
  if (shape.w <= 0 || shape.h <= 0 || shape.t <= 0 || shape.c <= 0) {
    throw ShapeError("tensor shape must be positive, got " + shape.str());
  }
  values_.assign(shape.size(), fill);
}

Tensor4::Tensor4(Shape4 shape, std::vector<float> values) : shape_(shape), values_(std::move(values)) {
  if (shape.w <= 0 || shape.h <= 0 || shape.t <= 0 || shape.c <= 0) {
    throw ShapeError("tensor shape must be positive, got " + shape.str());
  }
  if (values_.size() != shape.size()) {
    throw ShapeError("tensor " + shape.str() + " needs " + std::to_string(shape.size()) + " values, got " +
                     std::to_string(values_.size()));
  }
}

MaskVolume::MaskVolume(int w, int h, int t, bool fill) : w_(w), h_(h), t_(t) {
  if (w <= 0 || h <= 0 || t <= 0) throw ShapeError("mask volume dims must be positive");
  bits_.assign(static_cast<std::size_t>(w) * h * t, fill ? 1 : 0);
}

std::size_t MaskVolume::popcount() const {
  return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
}

media::BinaryMask MaskVolume::frame(int t) const {
  media::BinaryMask m(w_, h_);
  for (int y = 0; y < h_; ++y) {
    for (int x = 0; x < w_; ++x) m.set(x, y, get(x, y, t));
  }
  return m;
}

void MaskVolume::set_frame(int t, const media::BinaryMask& mask) {
  if (mask.width() != w_ || mask.height() != h_) {
    throw ShapeError("mask frame is " + std::to_string(mask.width()) + "x" + std::to_string(mask.height()) +
                     ", volume grid is " + std::to_string(w_) + "x" + std::to_string(h_));
  }
  for (int y = 0; y < h_; ++y) {
    for (int x = 0; x < w_; ++x) set(x, y, t, mask.get(x, y));
  }
}

MaskVolume MaskVolume::from_frames(const std::vector<media::BinaryMask>& frames) {
  if (frames.empty()) throw ShapeError("mask volume needs at least one frame");
  MaskVolume v(frames.front().width(), frames.front().height(), static_cast<int>(frames.size()));
  for (std::size_t t = 0; t < frames.size(); ++t) v.set_frame(static_cast<int>(t), frames[t]);
  return v;
}

// --- latent stub --------------------------------------------------------------

float lift_weight(int channel, int rgb) {
  if (channel % 3 != rgb) return 0.0f;
  return 1.0f / static_cast<float>(1 + channel / 3);
}

Tensor4 video_to_tensor(const media::FrameSequence& seq) {
  Tensor4 out({seq.width(), seq.height(), static_cast<int>(seq.size()), 3});
  for (std::size_t t = 0; t < seq.size(); ++t) {
    auto px = seq[t].pixels();
    for (int y = 0; y < seq.height(); ++y) {
      for (int x = 0; x < seq.width(); ++x) {
        const std::size_t i = (static_cast<std::size_t>(y) * seq.width() + x) * 3;
        for (int c = 0; c < 3; ++c) out.at(x, y, static_cast<int>(t), c) = px[i + c] / 255.0f;
      }
    }
  }
  return out;
}

namespace {

Tensor4 pool_and_lift(const Tensor4& video, int tdown) {
  const auto& s = video.shape();
  const Shape4 out_shape{s.w / kSpatialDown, s.h / kSpatialDown, s.t / tdown, kLatentChannels};
  Tensor4 out(out_shape);
  const double inv = 1.0 / (kSpatialDown * kSpatialDown * tdown);
  for (int lt = 0; lt < out_shape.t; ++lt) {
    for (int ly = 0; ly < out_shape.h; ++ly) {
      for (int lx = 0; lx < out_shape.w; ++lx) {
        double rgb[3] = {0, 0, 0};
        for (int dt = 0; dt < tdown; ++dt) {
          for (int dy = 0; dy < kSpatialDown; ++dy) {
            for (int dx = 0; dx < kSpatialDown; ++dx) {
              for (int c = 0; c < 3; ++c) {
                rgb[c] += video.at(lx * kSpatialDown + dx, ly * kSpatialDown + dy, lt * tdown + dt, c);
              }
            }
          }
        }
        for (int k = 0; k < kLatentChannels; ++k) {
          out.at(lx, ly, lt, k) = static_cast<float>(rgb[k % 3] * inv * lift_weight(k, k % 3));
        }
      }
    }
  }
  return out;
}

}  // namespace

Tensor4 encode_latent_stub(const Tensor4& video) {
  const auto& s = video.shape();
  if (s.c != 3) throw ShapeError("latent encoder expects 3 channels, got " + std::to_string(s.c));
  if (s.w % kSpatialDown || s.h % kSpatialDown || s.t % kTemporalDown) {
    auto pad = [](int v, int m) { return (m - v % m) % m; };
    throw ShapeError("latent encoder needs W, H divisible by 8 and T by 4; input " + std::to_string(s.w) + "x" +
                     std::to_string(s.h) + "x" + std::to_string(s.t) + " needs padding of " +
                     std::to_string(pad(s.w, kSpatialDown)) + "x" + std::to_string(pad(s.h, kSpatialDown)) +
                     "x" + std::to_string(pad(s.t, kTemporalDown)));
  }
  return pool_and_lift(video, kTemporalDown);
}

Tensor4 encode_latent_stub(const media::FrameSequence& seq) { return encode_latent_stub(video_to_tensor(seq)); }

Tensor4 encode_latent_image(const media::Frame& frame) {
  if (frame.width() % kSpatialDown || frame.height() % kSpatialDown) {
    throw ShapeError("guide image needs W, H divisible by 8, got " + std::to_string(frame.width()) + "x" +
                     std::to_string(frame.height()));
  }
  return pool_and_lift(video_to_tensor(media::FrameSequence({frame}, {1, 1})), 1);
}

// --- guide and mask -------------------------------------------------------------

GuideSequence build_guide(const GuidePlan& plan) {
  if (plan.n_latent_frames <= 0) throw InvalidArgument("guide plan needs n_latent_frames > 0");
  if (plan.entries.empty()) throw InvalidArgument("guide plan has no entries");
  const Shape4 gs = plan.entries.front().latent.shape();
  const int mw = plan.mask_width > 0 ? plan.mask_width : gs.w * kSpatialDown;
  const int mh = plan.mask_height > 0 ? plan.mask_height : gs.h * kSpatialDown;

  GuideSequence out{Tensor4({gs.w, gs.h, plan.n_latent_frames, gs.c}), MaskVolume(mw, mh, plan.n_latent_frames)};
  std::set<int> seen;
  for (const auto& e : plan.entries) {
    if (e.position < 0 || e.position >= plan.n_latent_frames) {
      throw InvalidArgument("guide position " + std::to_string(e.position) + " outside [0, " +
                            std::to_string(plan.n_latent_frames) + ")");
    }
    if (!seen.insert(e.position).second) {
      throw InvalidArgument("duplicate guide position " + std::to_string(e.position));
    }
    const Shape4& s = e.latent.shape();
    if (s.w != gs.w || s.h != gs.h || s.c != gs.c || s.t != 1) {
      throw ShapeError("guide latent at position " + std::to_string(e.position) + " has shape " + s.str() +
                       ", expected " + Shape4{gs.w, gs.h, 1, gs.c}.str());
    }
    for (int y = 0; y < gs.h; ++y) {
      for (int x = 0; x < gs.w; ++x) {
        for (int c = 0; c < gs.c; ++c) out.G.at(x, y, e.position, c) = e.latent.at(x, y, 0, c);
      }
    }
    if (e.spatial_mask) {
      out.M.set_frame(e.position, *e.spatial_mask);
    } else {
      out.M.set_frame(e.position, media::BinaryMask(mw, mh, true));
    }
  }
  return out;
}

MaskVolume reproject_mask(const MaskVolume& mask, int w, int h, int t) {
  if (w <= 0 || h <= 0 || t <= 0 || mask.width() % w || mask.height() % h || mask.frames() % t) {
    throw ShapeError("cannot reproject mask " + std::to_string(mask.width()) + "x" + std::to_string(mask.height()) +
                     "x" + std::to_string(mask.frames()) + " onto latent grid " + std::to_string(w) + "x" +
                     std::to_string(h) + "x" + std::to_string(t));
  }
  const int fx = mask.width() / w, fy = mask.height() / h, ft = mask.frames() / t;
  const int block = fx * fy * ft;
  MaskVolume out(w, h, t);
  for (int lt = 0; lt < t; ++lt) {
    for (int ly = 0; ly < h; ++ly) {
      for (int lx = 0; lx < w; ++lx) {
        int ones = 0;
        for (int dt = 0; dt < ft; ++dt) {
          for (int dy = 0; dy < fy; ++dy) {
            for (int dx = 0; dx < fx; ++dx) ones += mask.get(lx * fx + dx, ly * fy + dy, lt * ft + dt);
          }
        }
        out.set(lx, ly, lt, 2 * ones > block);
      }
    }
  }
  return out;
}

media::BinaryMask reproject_mask(const media::BinaryMask& mask, int w, int h) {
  return reproject_mask(MaskVolume::from_frames({mask}), w, h, 1).frame(0);
}

// --- Eq. 1 assembly ----------------------------------------------------------------

ConditionBundle assemble_condition_input(const Tensor4& noise, const MaskVolume& mask_latent, const Tensor4& guide,
                                         std::span<const float> text) {
  const Shape4& n = noise.shape();
  const Shape4& g = guide.shape();
  std::vector<std::string> bad;
  if (mask_latent.width() != n.w || mask_latent.height() != n.h || mask_latent.frames() != n.t) bad.push_back("mask");
  if (g.w != n.w || g.h != n.h || g.t != n.t) bad.push_back("guide");
  if (text.empty()) bad.push_back("text");
  if (!bad.empty()) {
    std::string names;
    for (const auto& b : bad) names += (names.empty() ? "" : ", ") + b;
    throw ShapeError("condition parts disagree with noise " + n.str() + ": " + names);
  }
  ConditionBundle b;
  const int ct = static_cast<int>(text.size());
  b.noise = {0, n.c};
  b.mask = {n.c, 1};
  b.guide = {n.c + 1, g.c};
  b.text = {n.c + 1 + g.c, ct};
  b.X = Tensor4({n.w, n.h, n.t, n.c + 1 + g.c + ct});
  for (int t = 0; t < n.t; ++t) {
    for (int y = 0; y < n.h; ++y) {
      for (int x = 0; x < n.w; ++x) {
        float* dst = &b.X.values()[b.X.index(x, y, t, 0)];
        const float* ns = &noise.values()[noise.index(x, y, t, 0)];
        const float* gs = &guide.values()[guide.index(x, y, t, 0)];
        std::copy(ns, ns + n.c, dst + b.noise.offset);
        dst[b.mask.offset] = mask_latent.get(x, y, t) ? 1.0f : 0.0f;
        std::copy(gs, gs + g.c, dst + b.guide.offset);
        std::copy(text.begin(), text.end(), dst + b.text.offset);
      }
    }
  }
  return b;
}

Tensor4 slice_channels(const Tensor4& x, ChannelSlot slot) {
  const Shape4& s = x.shape();
  if (slot.offset < 0 || slot.count <= 0 || slot.offset + slot.count > s.c) {
    throw ShapeError("channel slice [" + std::to_string(slot.offset) + ", +" + std::to_string(slot.count) +
                     ") outside tensor " + s.str());
  }
  Tensor4 out({s.w, s.h, s.t, slot.count});
  for (int t = 0; t < s.t; ++t) {
    for (int y = 0; y < s.h; ++y) {
      for (int xx = 0; xx < s.w; ++xx) {
        const float* src = &x.values()[x.index(xx, y, t, slot.offset)];
        std::copy(src, src + slot.count, &out.values()[out.index(xx, y, t, 0)]);
      }
    }
  }
  return out;
}

// --- schedule ---------------------------------------------------------------------

ScheduleParams::ScheduleParams(std::vector<double> betas) : betas_(std::move(betas)) {
  if (betas_.empty()) throw InvalidArgument("schedule needs at least one beta");
  double prod = 1.0;
  alpha_bar_.reserve(betas_.size());
  for (std::size_t i = 0; i < betas_.size(); ++i) {
    if (!(betas_[i] > 0.0 && betas_[i] < 1.0)) {
      throw InvalidArgument("beta_" + std::to_string(i + 1) + " = " + std::to_string(betas_[i]) + " outside (0,1)");
    }
    prod *= 1.0 - betas_[i];
    alpha_bar_.push_back(prod);
  }
}

ScheduleParams ScheduleParams::linear(std::size_t steps, double beta_start, double beta_end) {
  if (steps == 0) throw InvalidArgument("schedule needs at least one step");
  std::vector<double> betas(steps);
  for (std::size_t i = 0; i < steps; ++i) {
    const double f = steps == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(steps - 1);
    betas[i] = beta_start + f * (beta_end - beta_start);
  }
  return ScheduleParams(std::move(betas));
}

double ScheduleParams::alpha_bar(std::size_t t) const {
  if (t < 1 || t > betas_.size()) {
    throw InvalidArgument("timestep " + std::to_string(t) + " outside [1, " + std::to_string(betas_.size()) + "]");
  }
  return alpha_bar_[t - 1];
}

namespace {

Tensor4 combine(const Tensor4& a, const Tensor4& b, double wa, double wb, const char* what) {
  if (!(a.shape() == b.shape())) {
    throw ShapeError(std::string(what) + ": x0 " + a.shape().str() + " and eps " + b.shape().str() + " differ");
  }
  Tensor4 out(a.shape());
  auto av = a.values();
  auto bv = b.values();
  auto ov = out.values();
  for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = static_cast<float>(wa * av[i] + wb * bv[i]);
  return out;
}

}  // namespace

Tensor4 noisy_latent(const Tensor4& x0, const Tensor4& eps, const ScheduleParams& params, std::size_t t) {
  const double a = params.alpha_bar(t);
  return combine(x0, eps, std::sqrt(a), std::sqrt(1.0 - a), "noisy_latent");
}

Tensor4 v_target(const Tensor4& x0, const Tensor4& eps, const ScheduleParams& params, std::size_t t) {
  const double a = params.alpha_bar(t);
  return combine(x0, eps, std::sqrt(1.0 - a), -std::sqrt(a), "v_target");
}

// --- unmask plans ----------------------------------------------------------------

std::vector<int> unmask_candidates(int n, int interior) {
  if (n < 2) throw InvalidArgument("unmask plan needs at least 2 frames, got " + std::to_string(n));
  if (interior < 0) throw InvalidArgument("interior candidate count must be >= 0");
  std::vector<int> c{0, n - 1};
  for (int j = 1; j <= interior; ++j) {
    // round(j * (n - 1) / (interior + 1)), half up
    c.push_back(static_cast<int>((2LL * j * (n - 1) + (interior + 1)) / (2LL * (interior + 1))));
  }
  std::sort(c.begin(), c.end());
  c.erase(std::unique(c.begin(), c.end()), c.end());
  return c;
}

std::set<int> sample_unmask_plan(int n, std::uint64_t seed, int interior) {
  const auto candidates = unmask_candidates(n, interior);
  for (std::uint64_t sub = 0;; ++sub) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(sub), static_cast<std::uint32_t>(sub >> 32)};
    std::mt19937_64 rng(seq);
    std::set<int> plan;
    for (int c : candidates) {
      if (rng() >> 63) plan.insert(c);
    }
    if (!plan.empty()) return plan;
  }
}

// --- motion-area data ---------------------------------------------------------------

std::vector<media::BinaryMask> track_foreground(const media::FrameSequence& seq, const media::BinaryMask& initial,
                                                const analysis::FlowParams& flow) {
  const int w = seq.width();
  const int h = seq.height();
  if (initial.width() != w || initial.height() != h) {
    throw ShapeError("initial mask is " + std::to_string(initial.width()) + "x" + std::to_string(initial.height()) +
                     ", frames are " + std::to_string(w) + "x" + std::to_string(h));
  }
  std::vector<media::BinaryMask> masks{initial};
  masks.reserve(seq.size());
  media::LumaPlane prev = media::to_luma(seq[0]);
  std::vector<int> total(static_cast<std::size_t>(w) * h);
  std::vector<int> inside(total.size());
  for (std::size_t i = 1; i < seq.size(); ++i) {
    media::LumaPlane cur = media::to_luma(seq[i]);
    const auto field = analysis::block_flow(prev, cur, flow.block, flow.radius);
    const auto& m = masks.back();
    std::fill(total.begin(), total.end(), 0);
    std::fill(inside.begin(), inside.end(), 0);
    // Forward splat: every pixel moves with its block's vector.
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const auto& v = field.at(x / field.block, y / field.block);
        const int tx = x + v.dx, ty = y + v.dy;
        if (tx < 0 || ty < 0 || tx >= w || ty >= h) continue;
        const std::size_t ti = static_cast<std::size_t>(ty) * w + tx;
        ++total[ti];
        inside[ti] += m.get(x, y);
      }
    }
    media::BinaryMask next(w, h);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const std::size_t ti = static_cast<std::size_t>(y) * w + x;
        next.set(x, y, total[ti] > 0 && 2 * inside[ti] >= total[ti]);
      }
    }
    masks.push_back(std::move(next));
    prev = std::move(cur);
  }
  return masks;
}

media::BinaryMask union_masks(const std::vector<media::BinaryMask>& masks) {
  if (masks.empty()) throw InvalidArgument("union_masks needs at least one mask");
  media::BinaryMask out(masks.front().width(), masks.front().height());
  for (std::size_t i = 0; i < masks.size(); ++i) {
    const auto& m = masks[i];
    if (m.width() != out.width() || m.height() != out.height()) {
      throw ShapeError("mask " + std::to_string(i) + " is " + std::to_string(m.width()) + "x" +
                       std::to_string(m.height()) + ", expected " + std::to_string(out.width()) + "x" +
                       std::to_string(out.height()));
    }
    for (int y = 0; y < m.height(); ++y) {
      for (int x = 0; x < m.width(); ++x) {
        if (m.get(x, y)) out.set(x, y, true);
      }
    }
  }
  return out;
}

Tensor4 clamp_static_latent(const Tensor4& video, const Tensor4& guide, const media::BinaryMask& mask) {
  const Shape4& s = video.shape();
  const Shape4& g = guide.shape();
  if (g.w != s.w || g.h != s.h || g.c != s.c || g.t != 1) {
    throw ShapeError("guide frame " + g.str() + " does not match video latent " + s.str());
  }
  if (mask.width() != s.w || mask.height() != s.h) {
    throw ShapeError("latent mask " + std::to_string(mask.width()) + "x" + std::to_string(mask.height()) +
                     " does not match video latent " + s.str());
  }
  Tensor4 out = video;
  for (int t = 0; t < s.t; ++t) {
    for (int y = 0; y < s.h; ++y) {
      for (int x = 0; x < s.w; ++x) {
        if (mask.get(x, y)) continue;
        for (int c = 0; c < s.c; ++c) out.at(x, y, t, c) = guide.at(x, y, 0, c);
      }
    }
  }
  return out;
}

Tensor4 gaussian_tensor(Shape4 shape, std::uint64_t seed) {
  Tensor4 out(shape);
  std::mt19937_64 rng(seed);
  auto uniform = [&] { return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53; };
  auto v = out.values();
  for (std::size_t i = 0; i < v.size(); i += 2) {
    const double r = std::sqrt(-2.0 * std::log(uniform()));
    const double theta = 2.0 * std::numbers::pi * uniform();
    v[i] = static_cast<float>(r * std::cos(theta));
    if (i + 1 < v.size()) v[i + 1] = static_cast<float>(r * std::sin(theta));
  }
  return out;
}

}  // namespace anicurate::conditioning
