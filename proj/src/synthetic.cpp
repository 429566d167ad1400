#include "bdtrack/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace bdtrack {

std::vector<BBox> motion_path(MotionLaw law, std::size_t width, std::size_t height, std::size_t n, BBox start,
                              double vx, double vy, double scale_rate) {
  const double W = static_cast<double>(width), H = static_cast<double>(height);
  std::vector<BBox> path;
  path.reserve(n);
  double cx = start.cx, cy = start.cy;
  for (std::size_t t = 0; t < n; ++t) {
    const double f = std::pow(1.0 + scale_rate, static_cast<double>(t));
    BBox b{0, 0, start.w * f, start.h * f};
    if (b.w > W || b.h > H) throw std::invalid_argument("object larger than frame at frame " + std::to_string(t));
    if (law == MotionLaw::Constant) {
      b.cx = start.cx + vx * static_cast<double>(t);
      b.cy = start.cy + vy * static_cast<double>(t);
      if (b.x0() < 0 || b.y0() < 0 || b.x1() > W || b.y1() > H) {
        throw std::invalid_argument("constant-velocity path leaves the frame at frame " + std::to_string(t));
      }
    } else {
      if (t > 0) {
        cx += vx;
        cy += vy;
      }
      const double lox = b.w / 2, hix = W - b.w / 2, loy = b.h / 2, hiy = H - b.h / 2;
      if (cx < lox) {
        cx = 2 * lox - cx;
        vx = -vx;
      } else if (cx > hix) {
        cx = 2 * hix - cx;
        vx = -vx;
      }
      if (cy < loy) {
        cy = 2 * loy - cy;
        vy = -vy;
      } else if (cy > hiy) {
        cy = 2 * hiy - cy;
        vy = -vy;
      }
      b.cx = std::clamp(cx, lox, hix);
      b.cy = std::clamp(cy, loy, hiy);
    }
    path.push_back(b);
  }
  return path;
}

namespace {

constexpr std::uint64_t kContentStream = 0x9E3779B97F4A7C15ull;
constexpr std::uint64_t kBlurStream = 0xB10BB10BB10BB10Bull;
constexpr std::uint64_t kNoiseStream = 0x5EED5EED5EED5EEDull;

double uniform(std::mt19937_64& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

}  // namespace

SequenceRenderer::SequenceRenderer(SequenceSpec spec) : spec_(std::move(spec)) {
  if (spec_.frames == 0) throw std::invalid_argument("sequence needs at least one frame");
  if (spec_.object_w > static_cast<double>(spec_.width) || spec_.object_h > static_cast<double>(spec_.height)) {
    throw std::invalid_argument("object larger than frame");
  }
  if (!(spec_.object_w > 0 && spec_.object_h > 0)) throw std::invalid_argument("object size must be positive");
  boxes_ = motion_path(spec_.law, spec_.width, spec_.height, spec_.frames,
                       {spec_.start_cx, spec_.start_cy, spec_.object_w, spec_.object_h}, spec_.vx, spec_.vy,
                       spec_.scale_rate);

  std::mt19937_64 rng(spec_.seed ^ kContentStream);
  auto make_sprite = [&](ObjectKind kind) {
    Sprite s{};
    s.kind = kind;
    for (int c = 0; c < 3; ++c) {
      s.color_a[c] = uniform(rng, 0.05, 0.95);
      s.color_b[c] = uniform(rng, 0.05, 0.95);
    }
    s.stripe_period = uniform(rng, 2.0, 4.0);
    s.stripe_angle = uniform(rng, 0.0, std::numbers::pi);
    s.checker = uniform(rng, 0.0, 1.0) < 0.5;
    return s;
  };
  target_ = make_sprite(spec_.kind);
  for (int c = 0; c < 3; ++c) {
    bg_base_[c] = uniform(rng, 0.25, 0.75);
    bg_amp_[c] = uniform(rng, 0.03, 0.12);
    bg_phase_[c] = uniform(rng, 0.0, 2 * std::numbers::pi);
  }
  bg_freq_[0] = uniform(rng, 0.02, 0.08);
  bg_freq_[1] = uniform(rng, 0.02, 0.08);

  const double W = static_cast<double>(spec_.width), H = static_cast<double>(spec_.height);
  for (std::size_t i = 0; i < spec_.distractors; ++i) {
    Track tr;
    tr.sprite = make_sprite(uniform(rng, 0, 1) < 0.5 ? ObjectKind::TexturedRect : ObjectKind::Disc);
    const double w = std::min(uniform(rng, 0.6, 1.2) * spec_.object_w, W);
    const double h = std::min(uniform(rng, 0.6, 1.2) * spec_.object_h, H);
    const double speed = uniform(rng, 0.5, 2.5), dir = uniform(rng, 0, 2 * std::numbers::pi);
    BBox start{uniform(rng, w / 2, W - w / 2), uniform(rng, h / 2, H - h / 2), w, h};
    tr.boxes = motion_path(MotionLaw::Bounce, spec_.width, spec_.height, spec_.frames, start,
                           speed * std::cos(dir), speed * std::sin(dir), 0.0);
    distractors_.push_back(std::move(tr));
  }

  std::mt19937_64 blur_rng(spec_.seed ^ kBlurStream);
  BlurPolicy policy;
  policy.lengths = spec_.blur_lengths;
  blur_.resize(spec_.frames);
  for (std::size_t t = 0; t < spec_.frames; ++t) {
    // Draws happen unconditionally so the schedule for one blur_prob is a
    // superset of the schedule for any smaller blur_prob.
    const double u = uniform(blur_rng, 0.0, 1.0);
    const double random_angle = uniform(blur_rng, 0.0, std::numbers::pi);
    std::uniform_int_distribution<std::size_t> pick(0, spec_.blur_lengths.empty() ? 0 : spec_.blur_lengths.size() - 1);
    const std::size_t li = pick(blur_rng);
    if (u >= spec_.blur_prob || spec_.blur_lengths.empty()) continue;
    const BBox& a = boxes_[t > 0 ? t - 1 : t];
    const BBox& b = boxes_[t > 0 ? t : std::min<std::size_t>(1, spec_.frames - 1)];
    const double dx = b.cx - a.cx, dy = b.cy - a.cy;
    const double angle = (dx == 0 && dy == 0) ? random_angle : std::atan2(dy, dx);
    blur_[t] = make_kernel(spec_.blur_lengths[li], angle);
  }
}

void SequenceRenderer::draw(Image& img, const Sprite& s, const BBox& b) const {
  const long x_lo = std::max(0L, static_cast<long>(std::floor(b.x0())));
  const long x_hi = std::min(static_cast<long>(img.width) - 1, static_cast<long>(std::ceil(b.x1())));
  const long y_lo = std::max(0L, static_cast<long>(std::floor(b.y0())));
  const long y_hi = std::min(static_cast<long>(img.height) - 1, static_cast<long>(std::ceil(b.y1())));
  const double ca = std::cos(s.stripe_angle), sa = std::sin(s.stripe_angle);
  for (long y = y_lo; y <= y_hi; ++y) {
    for (long x = x_lo; x <= x_hi; ++x) {
      const double u = (static_cast<double>(x) + 0.5 - b.x0()) / b.w;
      const double v = (static_cast<double>(y) + 0.5 - b.y0()) / b.h;
      if (u < 0 || u >= 1 || v < 0 || v >= 1) continue;
      if (s.kind == ObjectKind::Disc && (u - 0.5) * (u - 0.5) + (v - 0.5) * (v - 0.5) > 0.25) continue;
      bool alt;
      if (s.checker) {
        alt = (static_cast<long>(std::floor(u * 4)) + static_cast<long>(std::floor(v * 4))) % 2 != 0;
      } else {
        alt = static_cast<long>(std::floor((u * ca + v * sa) * s.stripe_period * 2)) % 2 != 0;
      }
      const double* col = alt ? s.color_b : s.color_a;
      for (std::size_t c = 0; c < img.channels; ++c) img.at(c, y, x) = col[c % 3];
    }
  }
}

Image SequenceRenderer::render(std::size_t t) const {
  if (t >= spec_.frames) throw std::out_of_range("frame index out of range");
  Image img(3, spec_.height, spec_.width);
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t y = 0; y < spec_.height; ++y)
      for (std::size_t x = 0; x < spec_.width; ++x)
        img.at(c, y, x) = bg_base_[c] + bg_amp_[c] * std::sin(bg_freq_[0] * static_cast<double>(x) +
                                                               bg_freq_[1] * static_cast<double>(y) + bg_phase_[c]);
  for (const auto& d : distractors_) draw(img, d.sprite, d.boxes[t]);
  draw(img, target_, boxes_[t]);

  if (spec_.noise > 0) {
    std::seed_seq seq{static_cast<std::uint32_t>(spec_.seed), static_cast<std::uint32_t>(spec_.seed >> 32),
                      static_cast<std::uint32_t>(t), static_cast<std::uint32_t>(kNoiseStream)};
    std::mt19937_64 rng(seq);
    std::normal_distribution<double> noise(0.0, spec_.noise);
    for (auto& v : img.pixels) v += noise(rng);
  }
  for (auto& v : img.pixels) v = std::clamp(v, 0.0, 1.0);
  if (blur_[t]) img = apply_blur(img, *blur_[t]);
  return img;
}

SyntheticSequence generate_sequence(const SequenceSpec& spec) {
  SequenceRenderer r(spec);
  SyntheticSequence seq;
  seq.spec = spec;
  seq.gt_boxes = r.boxes();
  seq.frames.reserve(spec.frames);
  seq.blur_schedule.reserve(spec.frames);
  for (std::size_t t = 0; t < spec.frames; ++t) {
    seq.frames.push_back(r.render(t));
    seq.blur_schedule.push_back(r.blur(t));
  }
  return seq;
}

SequenceSpec random_spec(std::mt19937_64& rng, const SequenceSpec& base) {
  SequenceSpec s = base;
  s.kind = uniform(rng, 0, 1) < 0.5 ? ObjectKind::TexturedRect : ObjectKind::Disc;
  s.object_w = uniform(rng, 10.0, 30.0);
  s.object_h = std::clamp(s.object_w * uniform(rng, 0.8, 1.25), 10.0, 30.0);
  const double W = static_cast<double>(s.width), H = static_cast<double>(s.height);
  s.start_cx = uniform(rng, 20.0, W - 20.0);
  s.start_cy = uniform(rng, 20.0, H - 20.0);
  const double speed = uniform(rng, 0.5, 3.0), dir = uniform(rng, 0.0, 2 * std::numbers::pi);
  s.vx = speed * std::cos(dir);
  s.vy = speed * std::sin(dir);
  s.scale_rate = uniform(rng, -0.004, 0.004);
  s.law = MotionLaw::Bounce;
  s.seed = rng();
  return s;
}

}  // namespace bdtrack
