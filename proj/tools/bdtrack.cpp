#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "bdtrack/dataset.hpp"
#include "bdtrack/errors.hpp"
#include "bdtrack/harness.hpp"
#include "bdtrack/synthetic.hpp"

namespace fs = std::filesystem;
using namespace bdtrack;

namespace {

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  return os;
}

// The run config travels next to the checkpoint: model.ckpt -> model.cfg.
fs::path sidecar(const fs::path& ckpt) { return fs::path(ckpt).replace_extension(".cfg"); }

RunConfig load_config_for(const fs::path& ckpt, const std::string& override_path) {
  const fs::path p = override_path.empty() ? sidecar(ckpt) : fs::path(override_path);
  if (!fs::exists(p)) throw std::runtime_error("no config next to checkpoint (expected " + p.string() + ")");
  return load_run_config(p);
}

Model load_model(const fs::path& ckpt, const RunConfig& cfg) {
  Model m{cfg.model, ParamStore::load(ckpt)};
  // Catch a config/checkpoint mismatch here rather than deep in a forward pass.
  const Model fresh = make_model(cfg.model, 0);
  m.params.clone().assign_from(fresh.params);
  return m;
}

std::vector<Sequence> generate_set(const DataSpec& spec, const std::string& prefix) {
  std::vector<Sequence> out;
  std::size_t i = 0;
  for (const auto& s : expand_data_spec(spec)) {
    char name[64];
    std::snprintf(name, sizeof name, "%s%03zu", prefix.c_str(), i++);
    out.push_back(to_sequence(generate_sequence(s), name));
  }
  return out;
}

std::vector<BBox> read_gt_file(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open " + path.string());
  std::vector<BBox> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    out.push_back(parse_gt_line(line, lineno));
  }
  return out;
}

void print_report(const MetricReport& r) {
  std::printf("precision@20 %.4f  success AUC %.4f", r.precision_at_20, r.success_auc);
  if (r.mean_L_e > 0) std::printf("  mean L_e %.3f  mean FLOPs %.4g", r.mean_L_e, r.mean_flops);
  std::printf("\n");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Blur-robust early-exit tracker"};
  app.require_subcommand(1);

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "Generate synthetic sequences from a data spec");
  std::string gen_spec, gen_out;
  gen->add_option("--spec", gen_spec, "Data spec file")->required()->check(CLI::ExistingFile);
  gen->add_option("--out", gen_out, "Output directory")->required();

  // train
  auto* train = app.add_subcommand("train", "Train a model");
  std::string train_cfg, train_data, train_out;
  train->add_option("--config", train_cfg, "Run config file")->required()->check(CLI::ExistingFile);
  train->add_option("--data", train_data, "Dataset directory")->required()->check(CLI::ExistingDirectory);
  train->add_option("--out", train_out, "Output directory")->required();

  // track
  auto* track = app.add_subcommand("track", "Track one sequence from its first ground-truth box");
  std::string track_ckpt, track_seq, track_out, track_cfg, track_diag;
  bool track_full = false;
  track->add_option("--ckpt", track_ckpt, "Checkpoint")->required()->check(CLI::ExistingFile);
  track->add_option("--seq", track_seq, "Sequence directory")->required()->check(CLI::ExistingDirectory);
  track->add_option("--out", track_out, "Prediction file (frame_idx,cx,cy,w,h)")->required();
  track->add_option("--config", track_cfg, "Run config (default: checkpoint sidecar)");
  track->add_option("--diag", track_diag, "Per-frame exit diagnostics CSV");
  track->add_flag("--full-depth", track_full, "Disable early exit");

  // eval
  auto* ev = app.add_subcommand("eval", "Score predictions against ground truth");
  std::string ev_pred, ev_gt, ev_report, ev_curves;
  ev->add_option("--pred", ev_pred, "Prediction file")->required()->check(CLI::ExistingFile);
  ev->add_option("--gt", ev_gt, "Ground truth (x,y,w,h per line)")->required()->check(CLI::ExistingFile);
  ev->add_option("--report", ev_report, "Report CSV")->required();
  ev->add_option("--curves", ev_curves, "Write precision/success plots with this path prefix");

  // bench
  auto* bn = app.add_subcommand("bench", "Adaptive vs full-depth inference cost");
  std::string bn_ckpt, bn_seq, bn_cfg, bn_out, bn_frames;
  std::size_t bn_repeats = 5;
  bn->add_option("--ckpt", bn_ckpt, "Checkpoint")->required()->check(CLI::ExistingFile);
  bn->add_option("--seq", bn_seq, "Sequence directory")->required()->check(CLI::ExistingDirectory);
  bn->add_option("--repeats", bn_repeats, "Timing repeats")->check(CLI::PositiveNumber);
  bn->add_option("--config", bn_cfg, "Run config (default: checkpoint sidecar)");
  bn->add_option("--out", bn_out, "Summary CSV (default: stdout)");
  bn->add_option("--frames", bn_frames, "Per-frame CSV");

  // grid
  auto* grid = app.add_subcommand("grid", "Ablation grid on generated data");
  std::string grid_spec, grid_out;
  bool grid_ckpts = false, grid_curves = false;
  grid->add_option("--spec", grid_spec, "Grid spec file")->required()->check(CLI::ExistingFile);
  grid->add_option("--out", grid_out, "Output directory")->required();
  grid->add_flag("--save-checkpoints", grid_ckpts, "Keep every cell's model");
  grid->add_flag("--curves", grid_curves, "Write precision/success plots per cell");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen) {
      const DataSpec spec = load_data_spec(gen_spec);
      const auto seqs = generate_set(spec, "seq");
      for (const auto& s : seqs) write_sequence_dir(s, fs::path(gen_out) / s.name);
      std::printf("wrote %zu sequences to %s\n", seqs.size(), gen_out.c_str());
    } else if (*train) {
      const RunConfig cfg = load_run_config(train_cfg);
      cfg.validate();
      const auto data = load_dataset(train_data);
      const fs::path out(train_out);
      fs::create_directories(out);
      auto loss_csv = open_out(out / "loss.csv");
      std::size_t step = 0;
      const auto run = train_model(data, cfg, &loss_csv, [&](const StepReport& r) {
        if (++step % 50 == 0 || step == cfg.train.steps) {
          std::fprintf(stderr, "step %zu/%zu  loss %.5f  mean L_e %.2f\n", step, cfg.train.steps, r.total,
                       r.mean_exit_layer);
        }
      });
      run.model.params.save(out / "model.ckpt");
      save_run_config(cfg, sidecar(out / "model.ckpt"));
      std::printf("trained on %zu sequences; checkpoint %s\n", data.size(), (out / "model.ckpt").c_str());
    } else if (*track) {
      RunConfig cfg = load_config_for(track_ckpt, track_cfg);
      const Model model = load_model(track_ckpt, cfg);
      const Sequence seq = load_sequence_dir(track_seq);
      TrackOptions opts = track_options(cfg);
      opts.force_full_depth = track_full;
      std::vector<FrameDiag> diags;
      const auto boxes = run_tracker(model, seq, opts, &diags);
      auto os = open_out(track_out);
      write_box_file(boxes, os);
      if (!track_diag.empty()) {
        auto ds = open_out(track_diag);
        ds << "frame,exit_layer,blocks,macs,flops,peak_score\n";
        for (std::size_t i = 0; i < diags.size(); ++i) {
          const auto& d = diags[i];
          ds << i + 1 << ',' << d.exit_layer << ',' << d.blocks_executed << ',' << d.macs << ',' << d.flops << ','
             << d.peak_score << '\n';
        }
      }
      std::vector<BBox> pred(boxes.begin() + 1, boxes.end()), gt(seq.boxes.begin() + 1, seq.boxes.end());
      if (!pred.empty()) print_report(evaluate(pred, gt));
    } else if (*ev) {
      std::ifstream ps(ev_pred);
      const auto pred = read_box_file(ps);
      const auto gt = read_gt_file(ev_gt);
      if (pred.size() != gt.size()) {
        throw std::runtime_error("prediction has " + std::to_string(pred.size()) + " frames, ground truth " +
                                 std::to_string(gt.size()));
      }
      if (pred.size() < 2) throw std::runtime_error("need at least one tracked frame after the init frame");
      // Frame 0 is the init box; only tracked frames are scored.
      const MetricReport r = evaluate(std::span(pred).subspan(1), std::span(gt).subspan(1));
      auto os = open_out(ev_report);
      write_report_csv(r, os);
      if (!ev_curves.empty()) write_curve_images(r, ev_curves);
      print_report(r);
    } else if (*bn) {
      const RunConfig cfg = load_config_for(bn_ckpt, bn_cfg);
      const Model model = load_model(bn_ckpt, cfg);
      const Sequence seq = load_sequence_dir(bn_seq);
      const BenchReport r = bench(model, seq, bn_repeats, track_options(cfg));
      if (bn_out.empty()) {
        write_bench_csv(r, std::cout);
      } else {
        auto os = open_out(bn_out);
        write_bench_csv(r, os);
      }
      if (!bn_frames.empty()) {
        auto os = open_out(bn_frames);
        write_bench_frames_csv(r, os);
      }
    } else if (*grid) {
      std::ifstream is(grid_spec);
      const GridSpec spec = parse_grid_spec(is);
      const auto cells = expand_grid(spec);
      const auto train_set = generate_set(spec.train_data, "train");
      const auto test_set = generate_set(spec.test_data, "test");
      const fs::path out(grid_out);
      fs::create_directories(out);
      const auto rows = ablation_grid(cells, train_set, test_set, [&](const GridRow& row, const Model* m) {
        if (!row.error.empty()) {
          std::fprintf(stderr, "cell %s failed: %s\n", row.name.c_str(), row.error.c_str());
          return;
        }
        std::fprintf(stderr, "cell %s: prec@20 %.4f AUC %.4f L_e %.2f (%.1f s)\n", row.name.c_str(),
                     row.precision_at_20, row.success_auc, row.mean_L_e, row.train_seconds);
        std::string dirname = row.name;
        std::replace(dirname.begin(), dirname.end(), ' ', '_');
        const fs::path dir = out / dirname;
        if (grid_ckpts && m) {
          fs::create_directories(dir);
          m->params.save(dir / "model.ckpt");
          for (const auto& c : cells) {
            if (c.name == row.name) save_run_config(c.cfg, sidecar(dir / "model.ckpt"));
          }
        }
        if (grid_curves && m) {
          fs::create_directories(dir);
          for (const auto& c : cells) {
            if (c.name == row.name) write_curve_images(evaluate_model(*m, test_set, track_options(c.cfg)).report, dir / "curve");
          }
        }
      });
      auto os = open_out(out / "grid.csv");
      write_grid_csv(rows, os);
      std::printf("%zu cells; results in %s\n", rows.size(), (out / "grid.csv").c_str());
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
