#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "bdtrack/pipeline.hpp"
#include "bdtrack/synthetic.hpp"

namespace bdtrack {

/// Reads numbered image files (sorted by name) and "groundtruth.txt" with one
/// "x,y,w,h" line per frame (top-left pixel format; commas, tabs or spaces).
/// Throws ParseError naming the offending or missing line.
Sequence load_sequence_dir(const std::filesystem::path& dir);

/// Writes frames as 0001.ppm, 0002.ppm, ... plus groundtruth.txt.
void write_sequence_dir(const Sequence& seq, const std::filesystem::path& dir);

/// Every subdirectory holding a groundtruth.txt, sorted by name. A directory
/// that is itself a sequence yields just that sequence.
std::vector<Sequence> load_dataset(const std::filesystem::path& root);

Sequence to_sequence(const SyntheticSequence& s, std::string name = {});

BBox parse_gt_line(const std::string& line, std::size_t lineno);

/// Prediction files: "frame_idx,cx,cy,w,h" per line, frame pixels.
void write_box_file(const std::vector<BBox>& boxes, std::ostream& os);
std::vector<BBox> read_box_file(std::istream& is);

/// Generation recipe for `gen-data`: a base SequenceSpec, how many sequences
/// and whether each is drawn with random_spec.
struct DataSpec {
  SequenceSpec base;
  std::size_t count = 1;
  bool randomize = true;
  std::uint64_t seed = 0;
};

DataSpec load_data_spec(const std::filesystem::path& path);
DataSpec parse_data_spec(std::istream& is);

/// Specs for `spec.count` sequences, deterministic in `spec.seed`.
std::vector<SequenceSpec> expand_data_spec(const DataSpec& spec);

}  // namespace bdtrack
