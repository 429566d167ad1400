#pragma once

#include <cstddef>
#include <filesystem>
#include <vector>

namespace bdtrack {

/// Channel-planar (C x H x W) image with values nominally in [0, 1].
struct Image {
  std::size_t channels = 0;
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<double> pixels;

  Image() = default;
  Image(std::size_t c, std::size_t h, std::size_t w, double fill = 0.0)
      : channels(c), height(h), width(w), pixels(c * h * w, fill) {}

  double& at(std::size_t c, std::size_t y, std::size_t x) { return pixels[(c * height + y) * width + x]; }
  double at(std::size_t c, std::size_t y, std::size_t x) const { return pixels[(c * height + y) * width + x]; }
  bool empty() const { return pixels.empty(); }

  friend bool operator==(const Image&, const Image&) = default;
};

std::vector<double> channel_means(const Image& img);

/// Square crop of side `side` (source pixels) centered at (cx, cy), resized to
/// `out_side` with bilinear sampling. Out-of-frame samples take the
/// per-channel frame mean.
Image crop_resize(const Image& img, double cx, double cy, double side, std::size_t out_side);

/// Binary PPM (P6, 3 channels) or PGM (P5, 1 channel), 8-bit.
Image read_pnm(const std::filesystem::path& path);
void write_pnm(const Image& img, const std::filesystem::path& path);

/// PNM natively; other extensions go through OpenCV when built with it.
Image read_image(const std::filesystem::path& path);
bool is_image_file(const std::filesystem::path& path);

}  // namespace bdtrack
