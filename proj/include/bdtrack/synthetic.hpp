#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <vector>

#include "bdtrack/blur.hpp"
#include "bdtrack/head.hpp"
#include "bdtrack/image.hpp"

namespace bdtrack {

enum class ObjectKind { TexturedRect, Disc };
enum class MotionLaw {
  Constant,  // center(t) = start + velocity * t; leaving the frame is an error
  Bounce,    // velocity component flips when the box would cross a frame edge
};

struct SequenceSpec {
  std::size_t width = 128;
  std::size_t height = 128;
  std::size_t frames = 60;
  ObjectKind kind = ObjectKind::TexturedRect;
  double object_w = 20.0;  // pixels at frame 0
  double object_h = 20.0;
  double start_cx = 64.0;
  double start_cy = 64.0;
  double vx = 1.5;  // pixels per frame
  double vy = 0.5;
  double scale_rate = 0.0;  // size(t) = size(0) * (1 + scale_rate)^t
  MotionLaw law = MotionLaw::Bounce;
  double blur_prob = 0.0;  // per-frame chance of linear motion blur along the velocity
  std::vector<std::size_t> blur_lengths{3, 5, 7};
  std::size_t distractors = 0;
  double noise = 0.02;  // per-pixel Gaussian noise std
  std::uint64_t seed = 0;
};

/// Rendered frames plus exact ground truth in frame pixels (center form).
struct SyntheticSequence {
  SequenceSpec spec;
  std::vector<Image> frames;
  std::vector<BBox> gt_boxes;
  std::vector<std::optional<BlurKernel>> blur_schedule;
};

/// Deterministic per-frame renderer. Everything except pixel noise is fixed
/// at construction; frame t can be rendered in any order and always comes out
/// bit-identical.
class SequenceRenderer {
 public:
  /// Throws std::invalid_argument for objects larger than the frame or a
  /// constant-velocity path that leaves it.
  explicit SequenceRenderer(SequenceSpec spec);

  const SequenceSpec& spec() const { return spec_; }
  std::size_t size() const { return spec_.frames; }
  const BBox& box(std::size_t t) const { return boxes_.at(t); }
  const std::vector<BBox>& boxes() const { return boxes_; }
  const std::optional<BlurKernel>& blur(std::size_t t) const { return blur_.at(t); }
  Image render(std::size_t t) const;

 private:
  struct Sprite {
    ObjectKind kind;
    double color_a[3];
    double color_b[3];
    double stripe_period;
    double stripe_angle;
    bool checker;
  };
  struct Track {
    Sprite sprite;
    std::vector<BBox> boxes;
  };

  void draw(Image& img, const Sprite& s, const BBox& b) const;

  SequenceSpec spec_;
  std::vector<BBox> boxes_;
  std::vector<std::optional<BlurKernel>> blur_;
  Sprite target_{};
  std::vector<Track> distractors_;
  double bg_base_[3]{};
  double bg_amp_[3]{};
  double bg_freq_[2]{};
  double bg_phase_[3]{};
};

SyntheticSequence generate_sequence(const SequenceSpec& spec);

/// Random spec with objects 10-30 px, speeds up to ~3 px/frame, random kind,
/// bounce motion; `blur_prob`, frame count and distractors come from `base`.
SequenceSpec random_spec(std::mt19937_64& rng, const SequenceSpec& base);

/// Trajectory of a single box under `law`, frames [0, n).
std::vector<BBox> motion_path(MotionLaw law, std::size_t width, std::size_t height, std::size_t n, BBox start,
                              double vx, double vy, double scale_rate);

}  // namespace bdtrack
