#include "bdtrack/dataset.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>

#include "bdtrack/config.hpp"
#include "bdtrack/errors.hpp"

namespace fs = std::filesystem;

namespace bdtrack {

namespace {

std::vector<double> split_numbers(const std::string& line) {
  std::string s = line;
  std::replace_if(s.begin(), s.end(), [](char c) { return c == ',' || c == '\t' || c == ';'; }, ' ');
  std::istringstream is(s);
  std::vector<double> out;
  std::string tok;
  while (is >> tok) {
    std::size_t pos = 0;
    out.push_back(std::stod(tok, &pos));
    if (pos != tok.size()) throw std::invalid_argument(tok);
  }
  return out;
}

bool blank(const std::string& s) { return s.find_first_not_of(" \t\r\n") == std::string::npos; }

}  // namespace

BBox parse_gt_line(const std::string& line, std::size_t lineno) {
  std::vector<double> v;
  try {
    v = split_numbers(line);
  } catch (const std::exception&) {
    throw ParseError("malformed ground-truth line '" + line + "'", lineno);
  }
  if (v.size() != 4) throw ParseError("expected 4 values x,y,w,h, got " + std::to_string(v.size()), lineno);
  if (!(v[2] > 0 && v[3] > 0)) throw ParseError("non-positive box size", lineno);
  return {v[0] + v[2] / 2, v[1] + v[3] / 2, v[2], v[3]};
}

Sequence load_sequence_dir(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw std::runtime_error("not a directory: " + dir.string());
  std::vector<fs::path> images;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && is_image_file(e.path())) images.push_back(e.path());
  }
  std::sort(images.begin(), images.end());
  if (images.empty()) throw std::runtime_error("no image files in " + dir.string());

  std::ifstream gt(dir / "groundtruth.txt");
  if (!gt) throw std::runtime_error("missing groundtruth.txt in " + dir.string());
  Sequence seq;
  seq.name = dir.filename().string();
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(gt, line)) {
    ++lineno;
    if (blank(line)) {
      if (seq.boxes.size() < images.size()) throw ParseError("empty ground-truth line", lineno);
      continue;
    }
    if (seq.boxes.size() == images.size()) throw ParseError("more ground-truth lines than frames", lineno);
    seq.boxes.push_back(parse_gt_line(line, lineno));
  }
  if (seq.boxes.size() < images.size()) {
    throw ParseError("missing ground-truth line for frame " + std::to_string(seq.boxes.size() + 1),
                     seq.boxes.size() + 1);
  }
  seq.frames.reserve(images.size());
  for (const auto& p : images) seq.frames.push_back(read_image(p));
  return seq;
}

void write_sequence_dir(const Sequence& seq, const fs::path& dir) {
  if (seq.frames.size() != seq.boxes.size()) throw std::invalid_argument("frame/box count mismatch");
  fs::create_directories(dir);
  std::ofstream gt(dir / "groundtruth.txt");
  if (!gt) throw std::runtime_error("cannot write " + (dir / "groundtruth.txt").string());
  gt.precision(17);
  for (std::size_t t = 0; t < seq.size(); ++t) {
    char name[32];
    std::snprintf(name, sizeof name, "%04zu.ppm", t + 1);
    write_pnm(seq.frames[t], dir / name);
    const BBox& b = seq.boxes[t];
    gt << b.x0() << ',' << b.y0() << ',' << b.w << ',' << b.h << '\n';
  }
}

std::vector<Sequence> load_dataset(const fs::path& root) {
  if (fs::exists(root / "groundtruth.txt")) return {load_sequence_dir(root)};
  std::vector<fs::path> dirs;
  for (const auto& e : fs::directory_iterator(root)) {
    if (e.is_directory() && fs::exists(e.path() / "groundtruth.txt")) dirs.push_back(e.path());
  }
  std::sort(dirs.begin(), dirs.end());
  if (dirs.empty()) throw std::runtime_error("no sequences under " + root.string());
  std::vector<Sequence> out;
  for (const auto& d : dirs) out.push_back(load_sequence_dir(d));
  return out;
}

Sequence to_sequence(const SyntheticSequence& s, std::string name) {
  return {std::move(name), s.frames, s.gt_boxes};
}

void write_box_file(const std::vector<BBox>& boxes, std::ostream& os) {
  const auto old = os.precision(17);
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    os << i << ',' << boxes[i].cx << ',' << boxes[i].cy << ',' << boxes[i].w << ',' << boxes[i].h << '\n';
  }
  os.precision(old);
}

std::vector<BBox> read_box_file(std::istream& is) {
  std::vector<BBox> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (blank(line)) continue;
    std::vector<double> v;
    try {
      v = split_numbers(line);
    } catch (const std::exception&) {
      throw ParseError("malformed box line '" + line + "'", lineno);
    }
    if (v.size() != 5) throw ParseError("expected frame_idx,cx,cy,w,h", lineno);
    if (v[0] != static_cast<double>(out.size())) throw ParseError("frame index out of order", lineno);
    out.push_back({v[1], v[2], v[3], v[4]});
  }
  return out;
}

DataSpec parse_data_spec(std::istream& is) {
  DataSpec d;
  SequenceSpec& s = d.base;
  using Setter = std::function<void(const std::string&)>;
  auto real = [](double& r) -> Setter { return [&r](const std::string& v) { r = std::stod(v); }; };
  auto count = [](std::size_t& r) -> Setter { return [&r](const std::string& v) { r = std::stoull(v); }; };
  const std::map<std::string, Setter> table = {
      {"width", count(s.width)},
      {"height", count(s.height)},
      {"frames", count(s.frames)},
      {"object_w", real(s.object_w)},
      {"object_h", real(s.object_h)},
      {"start_cx", real(s.start_cx)},
      {"start_cy", real(s.start_cy)},
      {"vx", real(s.vx)},
      {"vy", real(s.vy)},
      {"scale_rate", real(s.scale_rate)},
      {"blur_prob", real(s.blur_prob)},
      {"distractors", count(s.distractors)},
      {"noise", real(s.noise)},
      {"count", count(d.count)},
      {"kind",
       [&s](const std::string& v) {
         if (v == "rect") {
           s.kind = ObjectKind::TexturedRect;
         } else if (v == "disc") {
           s.kind = ObjectKind::Disc;
         } else {
           throw std::invalid_argument(v);
         }
       }},
      {"law",
       [&s](const std::string& v) {
         if (v == "constant") {
           s.law = MotionLaw::Constant;
         } else if (v == "bounce") {
           s.law = MotionLaw::Bounce;
         } else {
           throw std::invalid_argument(v);
         }
       }},
      {"blur_lengths",
       [&s](const std::string& v) {
         s.blur_lengths.clear();
         std::stringstream ss(v);
         std::string item;
         while (std::getline(ss, item, ',')) s.blur_lengths.push_back(std::stoull(item));
       }},
      {"randomize",
       [&d](const std::string& v) {
         if (v != "true" && v != "false") throw std::invalid_argument(v);
         d.randomize = v == "true";
       }},
      {"seed",
       [&d](const std::string& v) {
         d.seed = std::stoull(v);
         d.base.seed = d.seed;
       }},
  };
  for (const auto& [key, value] : parse_key_values(is)) {
    auto it = table.find(key);
    if (it == table.end()) throw ConfigError("unknown data spec key '" + key + "'");
    try {
      it->second(value);
    } catch (const std::exception&) {
      throw ConfigError("bad value '" + value + "' for key '" + key + "'");
    }
  }
  return d;
}

DataSpec load_data_spec(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open data spec " + path.string());
  return parse_data_spec(is);
}

std::vector<SequenceSpec> expand_data_spec(const DataSpec& spec) {
  std::mt19937_64 rng(spec.seed);
  std::vector<SequenceSpec> out;
  for (std::size_t i = 0; i < spec.count; ++i) {
    if (spec.randomize) {
      out.push_back(random_spec(rng, spec.base));
    } else {
      out.push_back(spec.base);
      out.back().seed = spec.seed + i;
    }
  }
  return out;
}

}  // namespace bdtrack
