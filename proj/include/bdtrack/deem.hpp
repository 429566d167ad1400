#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "bdtrack/backbone.hpp"
#include "bdtrack/config.hpp"
#include "bdtrack/param_store.hpp"
#include "bdtrack/tensor.hpp"

namespace bdtrack {

/// Exit-rule constants pulled out of ViTConfig so the rule can be exercised
/// on bare score sequences.
struct ExitRule {
  std::size_t n_enf = 3;
  std::size_t depth = 8;
  double lambda = 1.0;
  double epsilon = 0.01;

  static ExitRule from(const ViTConfig& cfg) { return {cfg.n_enf, cfg.depth, cfg.lambda, cfg.epsilon}; }
  double threshold() const { return 1.0 - epsilon; }
};

/// Outcome of walking the exit rule.
///
/// `scores[i]` and `cumulative[i]` describe layer `n_enf + 1 + i`; the trace
/// stops at `exit_layer`, so layers beyond it never appear.
struct ExitTrace {
  std::size_t n_enf = 0;
  std::size_t depth = 0;
  std::vector<double> scores;
  std::vector<double> cumulative;
  std::vector<Tensor> score_tensors;  // differentiable handles, same order as `scores`
  std::size_t exit_layer = 0;
  bool exited_early = false;

  std::size_t examined() const { return scores.size(); }
};

/// Parameter name for the exit layer that gates block `l` (shared layers
/// ignore `l`).
std::string exit_param_name(std::size_t l, const std::string& leaf, const ViTConfig& cfg);
void init_exit_params(ParamStore& params, const ViTConfig& cfg);

/// One scalar per token: the first embedding channel. Shape [K].
Tensor slice_vector(const TokenSequence& t);

/// sigmoid(b . w + bias) for b [K], w [K x 1], bias [1]. Returns shape [1].
Tensor exit_score(const Tensor& b, const Tensor& weight, const Tensor& bias);
/// Score of layer `l` computed from the tokens produced by block `l - 1`.
Tensor exit_score(const TokenSequence& prev, std::size_t l, const ParamStore& params, const ViTConfig& cfg);

/// Evaluates `score_at(l)` for l = n_enf+1, n_enf+2, ... and stops at the
/// first l whose cumulative weighted score reaches 1 - epsilon, or at depth.
/// Layers past the exit are never requested.
ExitTrace resolve_exit(const std::function<Tensor(std::size_t)>& score_at, const ExitRule& rule);
ExitTrace resolve_exit(std::span<const double> scores_by_layer, const ExitRule& rule);

/// (mean of examined scores - tau)^2, differentiable through every score.
Tensor sparsity_loss(const ExitTrace& trace, double tau);

}  // namespace bdtrack
