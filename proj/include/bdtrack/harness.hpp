#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <istream>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "bdtrack/config.hpp"
#include "bdtrack/dataset.hpp"
#include "bdtrack/metrics.hpp"
#include "bdtrack/model.hpp"
#include "bdtrack/pipeline.hpp"
#include "bdtrack/tracker.hpp"

namespace bdtrack {

struct ModelEval {
  MetricReport report;  // over tracked frames (all but each sequence's init frame)
  std::vector<std::vector<BBox>> predictions;
  std::vector<FrameDiag> diags;
  double wall_seconds = 0;
};

ModelEval evaluate_model(const Model& model, const std::vector<Sequence>& seqs, const TrackOptions& opts);

/// Mean squared difference of final-layer template tokens between crops of
/// `clean` and of its blurred twin `blurred` (same boxes), paired with the
/// clean search crop. Every `stride`-th frame is used.
double template_feature_mse(const Model& model, const std::vector<Sequence>& clean,
                            const std::vector<Sequence>& blurred, const TrackOptions& opts, std::size_t stride = 1);

struct GridCell {
  std::string name;
  RunConfig cfg;
};

struct GridRow {
  std::string name;
  bool mbrv = false, deem = false;
  double rho = 0, gamma = 0, tau = 0;
  std::size_t n_enf = 0;
  std::uint64_t seed = 0;
  double precision_at_20 = 0, success_auc = 0, mean_L_e = 0, mean_flops = 0;
  double train_seconds = 0, eval_seconds = 0;
  std::string error;  // empty on success
};

using CellCallback = std::function<void(const GridRow&, const Model*)>;

/// Trains and evaluates every cell on the same data. A failing cell records
/// its error and the grid continues.
std::vector<GridRow> ablation_grid(const std::vector<GridCell>& cells, const std::vector<Sequence>& train,
                                   const std::vector<Sequence>& test, const CellCallback& on_cell = {});

void write_grid_csv(const std::vector<GridRow>& rows, std::ostream& os);

/// `grid --spec` file: plain run-config keys set the base, `grid.<key> = a|b`
/// lists sweep values (cartesian product), `data.train.<key>` and
/// `data.test.<key>` are data-spec keys for the generated sets.
struct GridSpec {
  RunConfig base;
  std::vector<std::pair<std::string, std::vector<std::string>>> sweeps;
  DataSpec train_data;
  DataSpec test_data;
};

GridSpec parse_grid_spec(std::istream& is);
std::vector<GridCell> expand_grid(const GridSpec& spec);

struct BenchMode {
  double median_ms_per_frame = 0;
  double mean_flops = 0;
  double mean_blocks = 0;
  std::vector<FrameDiag> diags;  // from the last repeat
  std::vector<double> frame_ms;  // per-frame median over repeats
};

struct BenchReport {
  std::size_t repeats = 0;
  std::size_t frames = 0;
  BenchMode adaptive;
  BenchMode full_depth;
  double speedup = 0;      // full / adaptive wall-clock
  double flops_ratio = 0;  // adaptive / full
  double block_ratio = 0;  // adaptive / full
};

BenchReport bench(const Model& model, const Sequence& seq, std::size_t repeats, const TrackOptions& opts);
void write_bench_csv(const BenchReport& r, std::ostream& os);
/// One row per tracked frame: frame, L_e, blocks, flops, ms, exit scores.
void write_bench_frames_csv(const BenchReport& r, std::ostream& os);

void write_report_csv(const MetricReport& r, std::ostream& os);
/// Precision and success plots as PPM line charts.
void write_curve_images(const MetricReport& r, const std::filesystem::path& prefix);

}  // namespace bdtrack
