#include "bdtrack/optimizer.hpp"

#include <cmath>

namespace bdtrack {

void optimizer_update(ParamStore& params, AdamWState& state, const AdamWOptions& opts) {
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double bc1 = 1.0 - std::pow(opts.beta1, t);
  const double bc2 = 1.0 - std::pow(opts.beta2, t);
  for (auto& [name, p] : params) {
    auto w = p.mutable_data();
    const auto g = p.mutable_grad();
    auto& m = state.m[name];
    auto& v = state.v[name];
    if (m.empty()) {
      m.assign(w.size(), 0.0);
      v.assign(w.size(), 0.0);
    }
    for (std::size_t i = 0; i < w.size(); ++i) {
      m[i] = opts.beta1 * m[i] + (1.0 - opts.beta1) * g[i];
      v[i] = opts.beta2 * v[i] + (1.0 - opts.beta2) * g[i] * g[i];
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      w[i] -= opts.lr * (mhat / (std::sqrt(vhat) + opts.eps) + opts.weight_decay * w[i]);
    }
  }
}

double clip_grad_norm(ParamStore& params, double max_norm) {
  double sq = 0.0;
  for (auto& [_, p] : params) {
    for (double g : p.mutable_grad()) sq += g * g;
  }
  const double norm = std::sqrt(sq);
  if (max_norm > 0 && norm > max_norm) {
    const double f = max_norm / norm;
    for (auto& [_, p] : params) {
      for (double& g : p.mutable_grad()) g *= f;
    }
  }
  return norm;
}

}  // namespace bdtrack
