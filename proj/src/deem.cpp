#include "bdtrack/deem.hpp"

#include <cstdio>

#include "bdtrack/ops.hpp"

namespace bdtrack {

std::string exit_param_name(std::size_t l, const std::string& leaf, const ViTConfig& cfg) {
  if (cfg.share_exit_layers) return "exit.shared." + leaf;
  char buf[16];
  std::snprintf(buf, sizeof buf, "exit.%02zu.", l);
  return buf + leaf;
}

void init_exit_params(ParamStore& params, const ViTConfig& cfg) {
  if (!cfg.deem_enabled) return;
  const std::size_t k = cfg.total_tokens();
  for (std::size_t l = cfg.n_enf + 1; l <= cfg.depth; ++l) {
    const std::string w = exit_param_name(l, "weight", cfg);
    if (params.contains(w)) continue;  // shared layer already registered
    params.add(w, {k, 1}, Init::TruncNormal);
    params.add(exit_param_name(l, "bias", cfg), {1}, Init::Zeros);
  }
}

Tensor slice_vector(const TokenSequence& t) {
  return reshape(slice(t.tokens, 1, 0, 1), {t.tokens.dim(0)});
}

Tensor exit_score(const Tensor& b, const Tensor& weight, const Tensor& bias) {
  if (b.rank() != 1 || weight.rank() != 2 || weight.dim(0) != b.dim(0) || weight.dim(1) != 1) {
    throw DimensionError("exit_score: slice " + shape_str(b.shape()) + " does not fit weight " +
                         shape_str(weight.shape()));
  }
  Tensor z = linear(reshape(b, {1, b.dim(0)}), weight, bias);
  return reshape(sigmoid(z), {1});
}

Tensor exit_score(const TokenSequence& prev, std::size_t l, const ParamStore& params, const ViTConfig& cfg) {
  if (prev.layer + 1 != l) throw std::invalid_argument("exit score for layer l needs layer l-1 tokens");
  return exit_score(slice_vector(prev), params.get(exit_param_name(l, "weight", cfg)),
                    params.get(exit_param_name(l, "bias", cfg)));
}

ExitTrace resolve_exit(const std::function<Tensor(std::size_t)>& score_at, const ExitRule& rule) {
  if (!(rule.n_enf > 0 && rule.n_enf < rule.depth)) throw std::invalid_argument("exit rule needs 0 < n_enf < depth");
  ExitTrace trace;
  trace.n_enf = rule.n_enf;
  trace.depth = rule.depth;
  const double threshold = rule.threshold();
  double q = 0.0;
  for (std::size_t l = rule.n_enf + 1; l <= rule.depth; ++l) {
    Tensor e = score_at(l);
    const double v = e.item();
    q += rule.lambda * v;
    trace.scores.push_back(v);
    trace.cumulative.push_back(q);
    trace.score_tensors.push_back(std::move(e));
    if (q >= threshold) {
      trace.exit_layer = l;
      trace.exited_early = l < rule.depth;
      return trace;
    }
  }
  trace.exit_layer = rule.depth;
  trace.exited_early = false;
  return trace;
}

ExitTrace resolve_exit(std::span<const double> scores_by_layer, const ExitRule& rule) {
  return resolve_exit(
      [&](std::size_t l) {
        const std::size_t i = l - rule.n_enf - 1;
        if (i >= scores_by_layer.size()) throw std::out_of_range("score sequence shorter than depth - n_enf");
        return Tensor::scalar(scores_by_layer[i]);
      },
      rule);
}

Tensor sparsity_loss(const ExitTrace& trace, double tau) {
  if (trace.score_tensors.empty()) throw std::invalid_argument("sparsity_loss: trace has no examined layers");
  Tensor m = mean(concat(trace.score_tensors, 0));
  return square(add_scalar(m, -tau));
}

}  // namespace bdtrack
