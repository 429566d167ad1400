#include "bdtrack/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "bdtrack/backbone.hpp"
#include "bdtrack/errors.hpp"
#include "bdtrack/ops.hpp"

namespace bdtrack {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

ModelEval evaluate_model(const Model& model, const std::vector<Sequence>& seqs, const TrackOptions& opts) {
  const auto t0 = Clock::now();
  ModelEval ev;
  std::vector<BBox> pred, gt;
  for (const auto& seq : seqs) {
    std::vector<FrameDiag> diags;
    auto boxes = run_tracker(model, seq, opts, &diags);
    pred.insert(pred.end(), boxes.begin() + 1, boxes.end());
    gt.insert(gt.end(), seq.boxes.begin() + 1, seq.boxes.end());
    ev.diags.insert(ev.diags.end(), diags.begin(), diags.end());
    ev.predictions.push_back(std::move(boxes));
  }
  ev.report = evaluate(pred, gt);
  double le = 0, fl = 0;
  for (const auto& d : ev.diags) {
    le += static_cast<double>(d.exit_layer);
    fl += d.flops;
  }
  const double n = static_cast<double>(std::max<std::size_t>(1, ev.diags.size()));
  ev.report.mean_L_e = le / n;
  ev.report.mean_flops = fl / n;
  ev.wall_seconds = seconds_since(t0);
  return ev;
}

double template_feature_mse(const Model& model, const std::vector<Sequence>& clean,
                            const std::vector<Sequence>& blurred, const TrackOptions& opts, std::size_t stride) {
  if (clean.size() != blurred.size()) throw std::invalid_argument("template_feature_mse: unmatched sequence sets");
  if (stride == 0) stride = 1;
  NoGradGuard no_grad;
  const ViTConfig& cfg = model.cfg;
  double total = 0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < clean.size(); ++i) {
    const Sequence& a = clean[i];
    const Sequence& b = blurred[i];
    if (a.size() != b.size()) throw std::invalid_argument("template_feature_mse: unmatched frame counts");
    for (std::size_t t = 0; t < a.size(); t += stride) {
      const BBox& box = a.boxes[t];
      const double tside = opts.template_context * std::sqrt(box.w * box.h);
      const double sside = opts.search_context * std::sqrt(box.w * box.h);
      const Image search = crop_resize(a.frames[t], box.cx, box.cy, sside, cfg.search_side);
      const Image za = crop_resize(a.frames[t], box.cx, box.cy, tside, cfg.template_side);
      const Image zb = crop_resize(b.frames[t], box.cx, box.cy, tside, cfg.template_side);
      const Tensor fa = template_slice(full_forward(za, search, model.params, cfg).back());
      const Tensor fb = template_slice(full_forward(zb, search, model.params, cfg).back());
      total += mean(square(sub(fa, fb))).item();
      ++count;
    }
  }
  return count ? total / static_cast<double>(count) : 0.0;
}

std::vector<GridRow> ablation_grid(const std::vector<GridCell>& cells, const std::vector<Sequence>& train,
                                   const std::vector<Sequence>& test, const CellCallback& on_cell) {
  std::vector<GridRow> rows;
  for (const auto& cell : cells) {
    GridRow row;
    row.name = cell.name;
    row.mbrv = cell.cfg.train.mbrv && cell.cfg.loss.rho != 0.0;
    row.deem = cell.cfg.model.deem_enabled;
    row.rho = cell.cfg.loss.rho;
    row.gamma = cell.cfg.loss.gamma;
    row.tau = cell.cfg.model.tau;
    row.n_enf = cell.cfg.model.n_enf;
    row.seed = cell.cfg.train.seed;
    try {
      const auto t0 = Clock::now();
      TrainRun run = train_model(train, cell.cfg);
      row.train_seconds = seconds_since(t0);
      const ModelEval ev = evaluate_model(run.model, test, track_options(cell.cfg));
      row.precision_at_20 = ev.report.precision_at_20;
      row.success_auc = ev.report.success_auc;
      row.mean_L_e = ev.report.mean_L_e;
      row.mean_flops = ev.report.mean_flops;
      row.eval_seconds = ev.wall_seconds;
      rows.push_back(row);
      if (on_cell) on_cell(row, &run.model);
    } catch (const std::exception& e) {
      row.error = e.what();
      rows.push_back(row);
      if (on_cell) on_cell(row, nullptr);
    }
  }
  return rows;
}

void write_grid_csv(const std::vector<GridRow>& rows, std::ostream& os) {
  const auto old = os.precision(10);
  os << "cell,mbrv,deem,rho,gamma,tau,n_enf,seed,prec20,succ_auc,mean_L_e,mean_flops,train_s,eval_s,error\n";
  for (const auto& r : rows) {
    std::string err = r.error;
    std::replace(err.begin(), err.end(), ',', ';');
    std::replace(err.begin(), err.end(), '\n', ' ');
    os << '"' << r.name << "\"," << r.mbrv << ',' << r.deem << ',' << r.rho << ',' << r.gamma << ',' << r.tau << ','
       << r.n_enf << ',' << r.seed << ',' << r.precision_at_20 << ',' << r.success_auc << ',' << r.mean_L_e << ','
       << r.mean_flops << ',' << r.train_seconds << ',' << r.eval_seconds << ',' << err << '\n';
  }
  os.precision(old);
}

GridSpec parse_grid_spec(std::istream& is) {
  GridSpec g;
  std::map<std::string, std::string> base;
  std::ostringstream train_data, test_data;
  for (const auto& [key, value] : parse_key_values(is)) {
    if (key.rfind("grid.", 0) == 0) {
      std::vector<std::string> values;
      std::stringstream ss(value);
      std::string item;
      while (std::getline(ss, item, '|')) {
        item.erase(0, item.find_first_not_of(" \t"));
        item.erase(item.find_last_not_of(" \t") + 1);
        if (!item.empty()) values.push_back(item);
      }
      if (values.empty()) throw ConfigError("sweep '" + key + "' has no values");
      g.sweeps.emplace_back(key.substr(5), std::move(values));
    } else if (key.rfind("data.train.", 0) == 0) {
      train_data << key.substr(11) << " = " << value << '\n';
    } else if (key.rfind("data.test.", 0) == 0) {
      test_data << key.substr(10) << " = " << value << '\n';
    } else {
      base[key] = value;
    }
  }
  apply_key_values(g.base, base);
  std::istringstream tr(train_data.str()), te(test_data.str());
  g.train_data = parse_data_spec(tr);
  g.test_data = parse_data_spec(te);
  return g;
}

std::vector<GridCell> expand_grid(const GridSpec& spec) {
  std::vector<GridCell> cells{{"", spec.base}};
  for (const auto& [key, values] : spec.sweeps) {
    std::vector<GridCell> next;
    for (const auto& c : cells) {
      for (const auto& v : values) {
        GridCell n = c;
        apply_key_values(n.cfg, {{key, v}});
        n.name += (n.name.empty() ? "" : " ") + key + "=" + v;
        next.push_back(std::move(n));
      }
    }
    cells = std::move(next);
  }
  for (auto& c : cells) {
    c.cfg.validate();
    if (c.name.empty()) c.name = "base";
  }
  return cells;
}

BenchReport bench(const Model& model, const Sequence& seq, std::size_t repeats, const TrackOptions& opts) {
  if (repeats == 0) throw std::invalid_argument("bench: repeats must be positive");
  if (seq.size() < 2) throw std::invalid_argument("bench: sequence needs at least two frames");
  BenchReport r;
  r.repeats = repeats;
  r.frames = seq.size() - 1;

  auto run_mode = [&](bool full) {
    TrackOptions o = opts;
    o.force_full_depth = full;
    BenchMode m;
    std::vector<std::vector<double>> per_frame(r.frames);
    std::vector<double> per_repeat;
    for (std::size_t rep = 0; rep < repeats; ++rep) {
      TrackState state = track_init(seq.frames[0], seq.boxes[0], model.cfg, o);
      std::vector<FrameDiag> diags(r.frames);
      double total = 0;
      for (std::size_t t = 1; t < seq.size(); ++t) {
        const auto t0 = Clock::now();
        track_frame(state, seq.frames[t], model, o, &diags[t - 1]);
        const double ms = 1e3 * seconds_since(t0);
        per_frame[t - 1].push_back(ms);
        total += ms;
      }
      per_repeat.push_back(total / static_cast<double>(r.frames));
      m.diags = std::move(diags);
    }
    m.median_ms_per_frame = median(per_repeat);
    for (auto& f : per_frame) m.frame_ms.push_back(median(f));
    for (const auto& d : m.diags) {
      m.mean_flops += d.flops / static_cast<double>(r.frames);
      m.mean_blocks += static_cast<double>(d.blocks_executed) / static_cast<double>(r.frames);
    }
    return m;
  };
  r.adaptive = run_mode(false);
  r.full_depth = run_mode(true);
  r.speedup = r.adaptive.median_ms_per_frame > 0 ? r.full_depth.median_ms_per_frame / r.adaptive.median_ms_per_frame
                                                 : 0.0;
  r.flops_ratio = r.adaptive.mean_flops / r.full_depth.mean_flops;
  r.block_ratio = r.adaptive.mean_blocks / r.full_depth.mean_blocks;
  return r;
}

void write_bench_csv(const BenchReport& r, std::ostream& os) {
  const auto old = os.precision(10);
  os << "mode,repeats,frames,median_ms_per_frame,mean_flops,mean_blocks\n";
  for (const auto& [name, m] : {std::pair{"adaptive", &r.adaptive}, std::pair{"full_depth", &r.full_depth}}) {
    os << name << ',' << r.repeats << ',' << r.frames << ',' << m->median_ms_per_frame << ',' << m->mean_flops << ','
       << m->mean_blocks << '\n';
  }
  os << "ratio,,," << r.speedup << ',' << r.flops_ratio << ',' << r.block_ratio << '\n';
  os.precision(old);
}

void write_bench_frames_csv(const BenchReport& r, std::ostream& os) {
  const auto old = os.precision(10);
  os << "frame,L_e,blocks,flops,ms,scores\n";
  for (std::size_t i = 0; i < r.adaptive.diags.size(); ++i) {
    const FrameDiag& d = r.adaptive.diags[i];
    os << i + 1 << ',' << d.exit_layer << ',' << d.blocks_executed << ',' << d.flops << ',' << r.adaptive.frame_ms[i]
       << ',';
    for (std::size_t k = 0; k < d.scores.size(); ++k) os << (k ? ";" : "") << d.scores[k];
    os << '\n';
  }
  os.precision(old);
}

void write_report_csv(const MetricReport& r, std::ostream& os) {
  const auto old = os.precision(10);
  os << "metric,value\n";
  os << "precision_at_20," << r.precision_at_20 << '\n';
  os << "success_auc," << r.success_auc << '\n';
  os << "mean_L_e," << r.mean_L_e << '\n';
  os << "mean_flops," << r.mean_flops << '\n';
  for (std::size_t i = 0; i < r.precision_curve.size(); ++i) os << "precision@" << i << ',' << r.precision_curve[i] << '\n';
  for (std::size_t i = 0; i < r.success_curve.size(); ++i) {
    os << "success@" << static_cast<double>(i) / static_cast<double>(r.success_curve.size() - 1) << ','
       << r.success_curve[i] << '\n';
  }
  os.precision(old);
}

namespace {

void plot_curve(const std::vector<double>& ys, const std::filesystem::path& path) {
  constexpr std::size_t W = 320, H = 240, M = 20;
  Image img(3, H, W);
  std::fill(img.pixels.begin(), img.pixels.end(), 1.0);
  auto dot = [&](long x, long y, double r, double g, double b) {
    if (x < 0 || y < 0 || x >= static_cast<long>(W) || y >= static_cast<long>(H)) return;
    img.at(0, y, x) = r;
    img.at(1, y, x) = g;
    img.at(2, y, x) = b;
  };
  for (std::size_t x = M; x < W - M; ++x) dot(static_cast<long>(x), H - M, 0, 0, 0);
  for (std::size_t y = M; y <= H - M; ++y) dot(M, static_cast<long>(y), 0, 0, 0);
  auto px = [&](std::size_t i) {
    return static_cast<long>(M + std::lround(static_cast<double>(i) * (W - 2 * M) / static_cast<double>(ys.size() - 1)));
  };
  auto py = [&](double v) { return static_cast<long>(H - M - std::lround(std::clamp(v, 0.0, 1.0) * (H - 2 * M))); };
  for (std::size_t i = 0; i + 1 < ys.size(); ++i) {
    long x0 = px(i), y0 = py(ys[i]);
    const long x1 = px(i + 1), y1 = py(ys[i + 1]);
    const long dx = std::abs(x1 - x0), dy = -std::abs(y1 - y0);
    const long sx = x0 < x1 ? 1 : -1, sy = y0 < y1 ? 1 : -1;
    long err = dx + dy;
    while (true) {
      dot(x0, y0, 0.8, 0.1, 0.1);
      if (x0 == x1 && y0 == y1) break;
      const long e2 = 2 * err;
      if (e2 >= dy) {
        err += dy;
        x0 += sx;
      }
      if (e2 <= dx) {
        err += dx;
        y0 += sy;
      }
    }
  }
  write_pnm(img, path);
}

}  // namespace

void write_curve_images(const MetricReport& r, const std::filesystem::path& prefix) {
  plot_curve(r.precision_curve, prefix.string() + "_precision.ppm");
  plot_curve(r.success_curve, prefix.string() + "_success.ppm");
}

}  // namespace bdtrack
