#include "bdtrack/image.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <stdexcept>
#include <string>

#ifdef BDTRACK_HAVE_OPENCV
#include <opencv2/imgcodecs.hpp>
#endif

namespace bdtrack {

std::vector<double> channel_means(const Image& img) {
  std::vector<double> means(img.channels, 0.0);
  const std::size_t plane = img.height * img.width;
  if (plane == 0) return means;
  for (std::size_t c = 0; c < img.channels; ++c) {
    double s = 0.0;
    for (std::size_t i = 0; i < plane; ++i) s += img.pixels[c * plane + i];
    means[c] = s / static_cast<double>(plane);
  }
  return means;
}

Image crop_resize(const Image& img, double cx, double cy, double side, std::size_t out_side) {
  if (!(side > 0) || out_side == 0) throw std::invalid_argument("crop_resize: side must be positive");
  const auto means = channel_means(img);
  Image out(img.channels, out_side, out_side);
  const double step = side / static_cast<double>(out_side);
  const double x0 = cx - side / 2.0;
  const double y0 = cy - side / 2.0;
  const long H = static_cast<long>(img.height), W = static_cast<long>(img.width);

  for (std::size_t c = 0; c < img.channels; ++c) {
    auto sample = [&](long y, long x) {
      if (y < 0 || y >= H || x < 0 || x >= W) return means[c];
      return img.at(c, static_cast<std::size_t>(y), static_cast<std::size_t>(x));
    };
    for (std::size_t v = 0; v < out_side; ++v) {
      const double sy = y0 + (static_cast<double>(v) + 0.5) * step - 0.5;
      const long iy = static_cast<long>(std::floor(sy));
      const double fy = sy - static_cast<double>(iy);
      for (std::size_t u = 0; u < out_side; ++u) {
        const double sx = x0 + (static_cast<double>(u) + 0.5) * step - 0.5;
        const long ix = static_cast<long>(std::floor(sx));
        const double fx = sx - static_cast<double>(ix);
        out.at(c, v, u) = (1 - fy) * ((1 - fx) * sample(iy, ix) + fx * sample(iy, ix + 1)) +
                          fy * ((1 - fx) * sample(iy + 1, ix) + fx * sample(iy + 1, ix + 1));
      }
    }
  }
  return out;
}

namespace {

std::string next_token(std::istream& is) {
  std::string tok;
  char ch;
  while (is.get(ch)) {
    if (ch == '#') {
      std::string discard;
      std::getline(is, discard);
    } else if (!std::isspace(static_cast<unsigned char>(ch))) {
      tok.push_back(ch);
      break;
    }
  }
  while (is.get(ch) && !std::isspace(static_cast<unsigned char>(ch))) tok.push_back(ch);
  return tok;
}

std::string lower_ext(const std::filesystem::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char ch) { return std::tolower(ch); });
  return ext;
}

}  // namespace

Image read_pnm(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path.string());
  const std::string magic = next_token(is);
  std::size_t channels;
  if (magic == "P6") {
    channels = 3;
  } else if (magic == "P5") {
    channels = 1;
  } else {
    throw std::runtime_error(path.string() + ": unsupported PNM magic '" + magic + "'");
  }
  const std::size_t w = std::stoul(next_token(is));
  const std::size_t h = std::stoul(next_token(is));
  const unsigned long maxval = std::stoul(next_token(is));
  if (maxval == 0 || maxval > 255) throw std::runtime_error(path.string() + ": only 8-bit PNM is supported");
  std::vector<unsigned char> raw(w * h * channels);
  is.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (!is) throw std::runtime_error(path.string() + ": truncated pixel data");
  Image img(channels, h, w);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x)
      for (std::size_t c = 0; c < channels; ++c)
        img.at(c, y, x) = raw[(y * w + x) * channels + c] / static_cast<double>(maxval);
  return img;
}

void write_pnm(const Image& img, const std::filesystem::path& path) {
  if (img.channels != 1 && img.channels != 3) throw std::invalid_argument("write_pnm: need 1 or 3 channels");
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
  os << (img.channels == 3 ? "P6" : "P5") << '\n' << img.width << ' ' << img.height << "\n255\n";
  std::vector<unsigned char> raw(img.width * img.height * img.channels);
  for (std::size_t y = 0; y < img.height; ++y)
    for (std::size_t x = 0; x < img.width; ++x)
      for (std::size_t c = 0; c < img.channels; ++c) {
        const double v = std::clamp(img.at(c, y, x), 0.0, 1.0);
        raw[(y * img.width + x) * img.channels + c] = static_cast<unsigned char>(std::lround(v * 255.0));
      }
  os.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (!os) throw std::runtime_error("write failed: " + path.string());
}

bool is_image_file(const std::filesystem::path& path) {
  const std::string ext = lower_ext(path);
  if (ext == ".ppm" || ext == ".pgm" || ext == ".pnm") return true;
#ifdef BDTRACK_HAVE_OPENCV
  return ext == ".jpg" || ext == ".jpeg" || ext == ".png" || ext == ".bmp";
#else
  return false;
#endif
}

Image read_image(const std::filesystem::path& path) {
  const std::string ext = lower_ext(path);
  if (ext == ".ppm" || ext == ".pgm" || ext == ".pnm") return read_pnm(path);
#ifdef BDTRACK_HAVE_OPENCV
  cv::Mat m = cv::imread(path.string(), cv::IMREAD_COLOR);
  if (m.empty()) throw std::runtime_error("cannot decode " + path.string());
  Image img(3, static_cast<std::size_t>(m.rows), static_cast<std::size_t>(m.cols));
  for (int y = 0; y < m.rows; ++y)
    for (int x = 0; x < m.cols; ++x) {
      const auto& px = m.at<cv::Vec3b>(y, x);
      // OpenCV stores BGR
      for (std::size_t c = 0; c < 3; ++c) img.at(c, y, x) = px[2 - c] / 255.0;
    }
  return img;
#else
  throw std::runtime_error("unsupported image format (built without OpenCV): " + path.string());
#endif
}

}  // namespace bdtrack
