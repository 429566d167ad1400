#include "bdtrack/config.hpp"

#include <fstream>
#include <functional>
#include <iomanip>
#include <sstream>

#include "bdtrack/errors.hpp"

namespace bdtrack {

void ViTConfig::validate() const {
  if (patch == 0 || dim == 0 || heads == 0 || depth == 0 || channels == 0) {
    throw ConfigError("patch, dim, heads, depth and channels must be positive");
  }
  if (template_side % patch != 0 || search_side % patch != 0) {
    throw ConfigError("template_side and search_side must be multiples of patch");
  }
  if (dim % heads != 0) throw ConfigError("dim must be a multiple of heads");
  if (!(n_enf > 0 && n_enf < depth)) throw ConfigError("n_enf must satisfy 0 < n_enf < depth");
  if (!(epsilon > 0 && epsilon < 1)) throw ConfigError("epsilon must lie in (0, 1)");
  if (!(lambda > 0)) throw ConfigError("lambda must be positive");
  if (!(tau > 0 && tau <= 1)) throw ConfigError("tau must lie in (0, 1]");
  const std::size_t kz = template_tokens(), kx = search_tokens();
  if (!(kz > 1 && kz < kx)) throw ConfigError("token counts must satisfy 1 < K_z < K_x");
  if (search_grid() < 2) throw ConfigError("search grid must be at least 2x2");
  if (dim % 8 != 0) throw ConfigError("dim must be a multiple of 8 (head channel schedule d/2, d/4, d/8)");
  if (!(ln_eps > 0)) throw ConfigError("ln_eps must be positive");
}

void LossWeights::validate() const {
  if (eta_iou < 0 || eta_l1 < 0 || rho < 0 || gamma < 0) throw ConfigError("loss weights must be nonnegative");
}

void TrainConfig::validate() const {
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
  if (lr < 0 || weight_decay < 0) throw ConfigError("lr and weight_decay must be nonnegative");
  if (!(beta1 >= 0 && beta1 < 1 && beta2 >= 0 && beta2 < 1)) throw ConfigError("betas must lie in [0, 1)");
  if (!(blur_prob >= 0 && blur_prob <= 1)) throw ConfigError("blur_prob must lie in [0, 1]");
  if (blur_lengths.empty()) throw ConfigError("blur_lengths must not be empty");
  for (auto l : blur_lengths) {
    if (l == 0 || l % 2 == 0) throw ConfigError("blur lengths must be odd and positive");
  }
  if (!(template_context > 0 && search_context > 0)) throw ConfigError("context factors must be positive");
  if (!(jitter_center >= 0 && jitter_center < 0.5)) throw ConfigError("jitter_center must lie in [0, 0.5)");
  if (jitter_scale < 0) throw ConfigError("jitter_scale must be nonnegative");
}

void RunConfig::validate() const {
  model.validate();
  loss.validate();
  train.validate();
}

std::map<std::string, std::string> parse_key_values(std::istream& is) {
  std::map<std::string, std::string> out;
  std::string line;
  std::size_t lineno = 0;
  auto trim = [](std::string s) {
    const char* ws = " \t\r\n";
    s.erase(0, s.find_first_not_of(ws));
    s.erase(s.find_last_not_of(ws) + 1);
    return s;
  };
  while (std::getline(is, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError("expected 'key = value'", lineno);
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw ParseError("empty key", lineno);
    if (!out.emplace(key, value).second) throw ParseError("duplicate key '" + key + "'", lineno);
  }
  return out;
}

namespace {

struct Field {
  std::function<void(const std::string&)> set;
  std::function<std::string()> get;
};

std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

template <typename T>
Field unsigned_field(T& ref) {
  return {[&ref](const std::string& s) {
            std::size_t pos = 0;
            auto v = std::stoull(s, &pos);
            if (pos != s.size() || s.front() == '-') throw std::invalid_argument(s);
            ref = static_cast<T>(v);
          },
          [&ref] { return std::to_string(ref); }};
}

Field real_field(double& ref) {
  return {[&ref](const std::string& s) {
            std::size_t pos = 0;
            ref = std::stod(s, &pos);
            if (pos != s.size()) throw std::invalid_argument(s);
          },
          [&ref] { return fmt(ref); }};
}

Field bool_field(bool& ref) {
  return {[&ref](const std::string& s) {
            if (s == "true" || s == "1" || s == "on") {
              ref = true;
            } else if (s == "false" || s == "0" || s == "off") {
              ref = false;
            } else {
              throw std::invalid_argument(s);
            }
          },
          [&ref] { return std::string(ref ? "true" : "false"); }};
}

Field list_field(std::vector<std::size_t>& ref) {
  return {[&ref](const std::string& s) {
            std::vector<std::size_t> v;
            std::stringstream ss(s);
            std::string item;
            while (std::getline(ss, item, ',')) v.push_back(std::stoull(item));
            ref = std::move(v);
          },
          [&ref] {
            std::string out;
            for (std::size_t i = 0; i < ref.size(); ++i) out += (i ? "," : "") + std::to_string(ref[i]);
            return out;
          }};
}

std::map<std::string, Field> fields(RunConfig& c) {
  auto& m = c.model;
  auto& l = c.loss;
  auto& t = c.train;
  return {
      {"depth", unsigned_field(m.depth)},
      {"dim", unsigned_field(m.dim)},
      {"heads", unsigned_field(m.heads)},
      {"patch", unsigned_field(m.patch)},
      {"channels", unsigned_field(m.channels)},
      {"template_side", unsigned_field(m.template_side)},
      {"search_side", unsigned_field(m.search_side)},
      {"mlp_ratio", unsigned_field(m.mlp_ratio)},
      {"ln_eps", real_field(m.ln_eps)},
      {"n_enf", unsigned_field(m.n_enf)},
      {"lambda", real_field(m.lambda)},
      {"epsilon", real_field(m.epsilon)},
      {"tau", real_field(m.tau)},
      {"deem", bool_field(m.deem_enabled)},
      {"share_exit_layers", bool_field(m.share_exit_layers)},
      {"eta_iou", real_field(l.eta_iou)},
      {"eta_l1", real_field(l.eta_l1)},
      {"rho", real_field(l.rho)},
      {"gamma", real_field(l.gamma)},
      {"steps", unsigned_field(t.steps)},
      {"batch_size", unsigned_field(t.batch_size)},
      {"lr", real_field(t.lr)},
      {"weight_decay", real_field(t.weight_decay)},
      {"beta1", real_field(t.beta1)},
      {"beta2", real_field(t.beta2)},
      {"adam_eps", real_field(t.adam_eps)},
      {"grad_clip", real_field(t.grad_clip)},
      {"warmup_full_depth_steps", unsigned_field(t.warmup_full_depth_steps)},
      {"seed", unsigned_field(t.seed)},
      {"mbrv", bool_field(t.mbrv)},
      {"blur_prob", real_field(t.blur_prob)},
      {"blur_lengths", list_field(t.blur_lengths)},
      {"br_mean_reduction", bool_field(t.br_mean_reduction)},
      {"template_context", real_field(t.template_context)},
      {"search_context", real_field(t.search_context)},
      {"jitter_center", real_field(t.jitter_center)},
      {"jitter_scale", real_field(t.jitter_scale)},
      {"max_frame_gap", unsigned_field(t.max_frame_gap)},
      {"window_blend", real_field(c.track.window_blend)},
      {"min_box_side", real_field(c.track.min_box_side)},
  };
}

}  // namespace

void apply_key_values(RunConfig& cfg, const std::map<std::string, std::string>& kv) {
  auto table = fields(cfg);
  for (const auto& [key, value] : kv) {
    auto it = table.find(key);
    if (it == table.end()) throw ConfigError("unknown config key '" + key + "'");
    try {
      it->second.set(value);
    } catch (const std::exception&) {
      throw ConfigError("bad value '" + value + "' for key '" + key + "'");
    }
  }
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open config " + path.string());
  RunConfig cfg;
  apply_key_values(cfg, parse_key_values(is));
  cfg.validate();
  return cfg;
}

std::string to_key_values(const RunConfig& cfg) {
  RunConfig copy = cfg;
  std::ostringstream os;
  for (const auto& [key, field] : fields(copy)) os << key << " = " << field.get() << '\n';
  return os.str();
}

void save_run_config(const RunConfig& cfg, const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
  os << to_key_values(cfg);
}

}  // namespace bdtrack
