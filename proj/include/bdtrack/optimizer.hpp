#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "bdtrack/param_store.hpp"

namespace bdtrack {

struct AdamWOptions {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 1e-4;
};

/// First and second moment estimates, keyed by parameter name.
struct AdamWState {
  std::map<std::string, std::vector<double>> m;
  std::map<std::string, std::vector<double>> v;
  std::size_t step = 0;
};

/// One decoupled-weight-decay Adam step using the grads stored on `params`:
///   w <- w - lr * (m_hat / (sqrt(v_hat) + eps) + weight_decay * w)
void optimizer_update(ParamStore& params, AdamWState& state, const AdamWOptions& opts);

/// Scales all grads so their global L2 norm is at most `max_norm`. Returns
/// the norm before clipping.
double clip_grad_norm(ParamStore& params, double max_norm);

}  // namespace bdtrack
