#include "bdtrack/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <string>

namespace bdtrack {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapC = Eigen::Map<const RowMat>;
using Map = Eigen::Map<RowMat>;

detail::Node& parent(detail::Node& n, std::size_t i) { return *n.parents[i]; }

// Grad slot of a parent, or nullptr when it does not take gradients.
double* grad_of(detail::Node& p) {
  if (!p.requires_grad) return nullptr;
  p.ensure_grad();
  return p.grad.data();
}

// ---------------------------------------------------------------------------
// Broadcasting

struct Broadcast {
  Shape out;
  std::vector<std::size_t> stride_a;  // per output axis, 0 where broadcast
  std::vector<std::size_t> stride_b;
  enum class Kind { Same, ScalarA, ScalarB, SuffixB, General } kind = Kind::General;
};

std::vector<std::size_t> aligned_strides(const Shape& s, const Shape& out) {
  std::vector<std::size_t> strides(out.size(), 0);
  std::size_t offset = out.size() - s.size();
  std::size_t stride = 1;
  for (std::size_t i = s.size(); i-- > 0;) {
    strides[offset + i] = s[i] == 1 ? 0 : stride;
    stride *= s[i];
  }
  return strides;
}

Broadcast make_broadcast(const Shape& a, const Shape& b) {
  Broadcast bc;
  std::size_t rank = std::max(a.size(), b.size());
  bc.out.assign(rank, 1);
  for (std::size_t i = 0; i < rank; ++i) {
    std::size_t ea = i < rank - a.size() ? 1 : a[i - (rank - a.size())];
    std::size_t eb = i < rank - b.size() ? 1 : b[i - (rank - b.size())];
    if (ea != eb && ea != 1 && eb != 1) {
      throw DimensionError("shapes " + shape_str(a) + " and " + shape_str(b) + " are not broadcastable");
    }
    bc.out[i] = std::max(ea, eb);
  }
  bc.stride_a = aligned_strides(a, bc.out);
  bc.stride_b = aligned_strides(b, bc.out);
  std::size_t na = shape_numel(a), nb = shape_numel(b), no = shape_numel(bc.out);
  if (a == b) {
    bc.kind = Broadcast::Kind::Same;
  } else if (na == 1 && nb == no) {
    bc.kind = Broadcast::Kind::ScalarA;
  } else if (nb == 1 && na == no) {
    bc.kind = Broadcast::Kind::ScalarB;
  } else if (na == no && b.size() <= a.size() && std::equal(b.begin(), b.end(), a.end() - b.size())) {
    bc.kind = Broadcast::Kind::SuffixB;
  }
  return bc;
}

// Calls fn(out_index, a_index, b_index) for every output element.
template <typename Fn>
void for_each_broadcast(const Broadcast& bc, std::size_t na, std::size_t nb, Fn&& fn) {
  std::size_t no = shape_numel(bc.out);
  switch (bc.kind) {
    case Broadcast::Kind::Same:
      for (std::size_t i = 0; i < no; ++i) fn(i, i, i);
      return;
    case Broadcast::Kind::ScalarA:
      for (std::size_t i = 0; i < no; ++i) fn(i, 0, i);
      return;
    case Broadcast::Kind::ScalarB:
      for (std::size_t i = 0; i < no; ++i) fn(i, i, 0);
      return;
    case Broadcast::Kind::SuffixB:
      for (std::size_t i = 0; i < no; ++i) fn(i, i, i % nb);
      return;
    case Broadcast::Kind::General:
      break;
  }
  (void)na;
  std::size_t rank = bc.out.size();
  std::vector<std::size_t> idx(rank, 0);
  std::size_t ia = 0, ib = 0;
  for (std::size_t i = 0; i < no; ++i) {
    fn(i, ia, ib);
    for (std::size_t ax = rank; ax-- > 0;) {
      if (++idx[ax] < bc.out[ax]) {
        ia += bc.stride_a[ax];
        ib += bc.stride_b[ax];
        break;
      }
      ia -= bc.stride_a[ax] * (bc.out[ax] - 1);
      ib -= bc.stride_b[ax] * (bc.out[ax] - 1);
      idx[ax] = 0;
    }
  }
}

template <typename Fwd, typename Bwd>
Tensor binary_op(const Tensor& a, const Tensor& b, Fwd fwd, Bwd bwd) {
  Broadcast bc = make_broadcast(a.shape(), b.shape());
  const auto da = a.data();
  const auto db = b.data();
  Buffer out(shape_numel(bc.out));
  for_each_broadcast(bc, da.size(), db.size(),
                     [&](std::size_t i, std::size_t ia, std::size_t ib) { out[i] = fwd(da[ia], db[ib]); });
  Shape out_shape = bc.out;
  return Tensor::make_result(std::move(out_shape), std::move(out), {a, b}, [bc, bwd](detail::Node& self) {
    auto& pa = parent(self, 0);
    auto& pb = parent(self, 1);
    double* ga = grad_of(pa);
    double* gb = grad_of(pb);
    const auto& xa = pa.data;
    const auto& xb = pb.data;
    const auto& g = self.grad;
    for_each_broadcast(bc, xa.size(), xb.size(), [&](std::size_t i, std::size_t ia, std::size_t ib) {
      auto [dfa, dfb] = bwd(xa[ia], xb[ib], self.data[i]);
      if (ga) ga[ia] += g[i] * dfa;
      if (gb) gb[ib] += g[i] * dfb;
    });
  });
}

// Unary op whose derivative is expressed through (input, output).
template <typename Fwd, typename Deriv>
Tensor unary_op(const Tensor& t, Fwd fwd, Deriv deriv) {
  const auto x = t.data();
  Buffer out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = fwd(x[i]);
  return Tensor::make_result(t.shape(), std::move(out), {t}, [deriv](detail::Node& self) {
    auto& p = parent(self, 0);
    double* gp = grad_of(p);
    if (!gp) return;
    for (std::size_t i = 0; i < self.data.size(); ++i) gp[i] += self.grad[i] * deriv(p.data[i], self.data[i]);
  });
}

std::size_t prod(const Shape& s, std::size_t from, std::size_t to) {
  std::size_t n = 1;
  for (std::size_t i = from; i < to; ++i) n *= s[i];
  return n;
}

}  // namespace

// ---------------------------------------------------------------------------

Tensor elementwise(BinaryOp op, const Tensor& a, const Tensor& b) {
  using P = std::pair<double, double>;
  switch (op) {
    case BinaryOp::Add:
      return binary_op(a, b, [](double x, double y) { return x + y; },
                       [](double, double, double) { return P{1.0, 1.0}; });
    case BinaryOp::Sub:
      return binary_op(a, b, [](double x, double y) { return x - y; },
                       [](double, double, double) { return P{1.0, -1.0}; });
    case BinaryOp::Mul:
      return binary_op(a, b, [](double x, double y) { return x * y; },
                       [](double x, double y, double) { return P{y, x}; });
    case BinaryOp::Div:
      return binary_op(a, b, [](double x, double y) { return x / y; },
                       [](double x, double y, double) { return P{1.0 / y, -x / (y * y)}; });
    case BinaryOp::Min:
      return binary_op(a, b, [](double x, double y) { return x <= y ? x : y; },
                       [](double x, double y, double) { return x <= y ? P{1.0, 0.0} : P{0.0, 1.0}; });
    case BinaryOp::Max:
      return binary_op(a, b, [](double x, double y) { return x >= y ? x : y; },
                       [](double x, double y, double) { return x >= y ? P{1.0, 0.0} : P{0.0, 1.0}; });
  }
  throw std::invalid_argument("unknown binary op");
}

Tensor elementwise(UnaryOp op, const Tensor& t) {
  switch (op) {
    case UnaryOp::Neg:
      return unary_op(t, [](double x) { return -x; }, [](double, double) { return -1.0; });
    case UnaryOp::Gelu:
      return unary_op(
          t, [](double x) { return 0.5 * x * (1.0 + std::erf(x * std::numbers::sqrt2 / 2.0)); },
          [](double x, double) {
            double cdf = 0.5 * (1.0 + std::erf(x * std::numbers::sqrt2 / 2.0));
            double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
            return cdf + x * pdf;
          });
    case UnaryOp::Sigmoid:
      return unary_op(
          t,
          [](double x) {
            if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
            double e = std::exp(x);
            return e / (1.0 + e);
          },
          [](double, double y) { return y * (1.0 - y); });
    case UnaryOp::Relu:
      return unary_op(t, [](double x) { return x > 0 ? x : 0.0; }, [](double x, double) { return x > 0 ? 1.0 : 0.0; });
    case UnaryOp::Sqrt:
      return unary_op(t, [](double x) { return std::sqrt(x); }, [](double, double y) { return 0.5 / y; });
    case UnaryOp::Square:
      return unary_op(t, [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
    case UnaryOp::Log:
      return unary_op(t, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
    case UnaryOp::Exp:
      return unary_op(t, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
    case UnaryOp::Abs:
      return unary_op(t, [](double x) { return std::abs(x); },
                      [](double x, double) { return x > 0 ? 1.0 : (x < 0 ? -1.0 : 0.0); });
  }
  throw std::invalid_argument("unknown unary op");
}

Tensor add(const Tensor& a, const Tensor& b) { return elementwise(BinaryOp::Add, a, b); }
Tensor sub(const Tensor& a, const Tensor& b) { return elementwise(BinaryOp::Sub, a, b); }
Tensor mul(const Tensor& a, const Tensor& b) { return elementwise(BinaryOp::Mul, a, b); }
namespace {

void require_domain(const Tensor& t, bool (*ok)(double), const char* what) {
  for (double v : t.data()) {
    if (!ok(v)) throw NumericError(std::string(what) + ": argument outside the domain");
  }
}

}  // namespace

Tensor div(const Tensor& a, const Tensor& b) {
  require_domain(b, [](double v) { return v != 0.0; }, "div");
  return elementwise(BinaryOp::Div, a, b);
}
Tensor minimum(const Tensor& a, const Tensor& b) { return elementwise(BinaryOp::Min, a, b); }
Tensor maximum(const Tensor& a, const Tensor& b) { return elementwise(BinaryOp::Max, a, b); }

Tensor neg(const Tensor& t) { return elementwise(UnaryOp::Neg, t); }
Tensor gelu(const Tensor& t) { return elementwise(UnaryOp::Gelu, t); }
Tensor sigmoid(const Tensor& t) { return elementwise(UnaryOp::Sigmoid, t); }
Tensor relu(const Tensor& t) { return elementwise(UnaryOp::Relu, t); }
Tensor sqrt(const Tensor& t) {
  require_domain(t, [](double v) { return v >= 0.0; }, "sqrt");
  return elementwise(UnaryOp::Sqrt, t);
}
Tensor square(const Tensor& t) { return elementwise(UnaryOp::Square, t); }
Tensor log(const Tensor& t) {
  require_domain(t, [](double v) { return v > 0.0; }, "log");
  return elementwise(UnaryOp::Log, t);
}
Tensor exp(const Tensor& t) { return elementwise(UnaryOp::Exp, t); }
Tensor abs(const Tensor& t) { return elementwise(UnaryOp::Abs, t); }

Tensor scale(const Tensor& t, double factor) {
  return unary_op(t, [factor](double x) { return x * factor; }, [factor](double, double) { return factor; });
}

Tensor add_scalar(const Tensor& t, double value) {
  return unary_op(t, [value](double x) { return x + value; }, [](double, double) { return 1.0; });
}

Tensor pow(const Tensor& t, double exponent) {
  return unary_op(t, [exponent](double x) { return std::pow(x, exponent); },
                  [exponent](double x, double) { return exponent * std::pow(x, exponent - 1.0); });
}

Tensor clamp(const Tensor& t, double lo, double hi) {
  if (lo > hi) throw std::invalid_argument("clamp: lo > hi");
  return unary_op(t, [lo, hi](double x) { return std::clamp(x, lo, hi); },
                  [lo, hi](double x, double) { return (x >= lo && x <= hi) ? 1.0 : 0.0; });
}

// ---------------------------------------------------------------------------

Tensor sum(const Tensor& t) {
  const auto x = t.data();
  double s = std::accumulate(x.begin(), x.end(), 0.0);
  return Tensor::make_result({1}, {s}, {t}, [](detail::Node& self) {
    auto& p = parent(self, 0);
    double* gp = grad_of(p);
    if (!gp) return;
    for (std::size_t i = 0; i < p.data.size(); ++i) gp[i] += self.grad[0];
  });
}

Tensor mean(const Tensor& t) { return scale(sum(t), 1.0 / static_cast<double>(t.numel())); }

// ---------------------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2) {
    throw DimensionError("matmul expects rank-2 operands, got " + shape_str(a.shape()) + " and " +
                         shape_str(b.shape()));
  }
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  if (b.dim(0) != k) {
    throw DimensionError("matmul inner extents differ: " + shape_str(a.shape()) + " * " + shape_str(b.shape()));
  }
  Buffer out(m * n);
  Map(out.data(), m, n).noalias() = MapC(a.data().data(), m, k) * MapC(b.data().data(), k, n);
  MacCounter::add(m * k * n);
  return Tensor::make_result({m, n}, std::move(out), {a, b}, [m, k, n](detail::Node& self) {
    auto& pa = parent(self, 0);
    auto& pb = parent(self, 1);
    MapC g(self.grad.data(), m, n);
    if (double* ga = grad_of(pa)) Map(ga, m, k).noalias() += g * MapC(pb.data.data(), k, n).transpose();
    if (double* gb = grad_of(pb)) Map(gb, k, n).noalias() += MapC(pa.data.data(), m, k).transpose() * g;
  });
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& bias) {
  Tensor y = matmul(x, w);
  return bias.defined() ? add(y, bias) : y;
}

Tensor transpose(const Tensor& t) {
  if (t.rank() != 2) throw DimensionError("transpose expects rank 2, got " + shape_str(t.shape()));
  const std::size_t m = t.dim(0), n = t.dim(1);
  Buffer out(m * n);
  Map(out.data(), n, m) = MapC(t.data().data(), m, n).transpose();
  return Tensor::make_result({n, m}, std::move(out), {t}, [m, n](detail::Node& self) {
    auto& p = parent(self, 0);
    if (double* gp = grad_of(p)) Map(gp, m, n) += MapC(self.grad.data(), n, m).transpose();
  });
}

Tensor reshape(const Tensor& t, Shape shape) {
  if (shape_numel(shape) != t.numel()) {
    throw DimensionError("cannot reshape " + shape_str(t.shape()) + " into " + shape_str(shape));
  }
  const auto x = t.data();
  return Tensor::make_result(std::move(shape), Buffer(x.begin(), x.end()), {t}, [](detail::Node& self) {
    auto& p = parent(self, 0);
    if (double* gp = grad_of(p)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) gp[i] += self.grad[i];
    }
  });
}

Tensor slice(const Tensor& t, std::size_t axis, std::size_t begin, std::size_t end) {
  const Shape& s = t.shape();
  if (axis >= s.size()) throw DimensionError("slice axis out of range for " + shape_str(s));
  if (begin >= end || end > s[axis]) {
    throw DimensionError("slice [" + std::to_string(begin) + "," + std::to_string(end) + ") invalid for extent " +
                         std::to_string(s[axis]));
  }
  const std::size_t outer = prod(s, 0, axis), inner = prod(s, axis + 1, s.size());
  const std::size_t extent = s[axis], len = end - begin;
  Shape out_shape = s;
  out_shape[axis] = len;
  const auto x = t.data();
  Buffer out(outer * len * inner);
  for (std::size_t o = 0; o < outer; ++o) {
    const double* src = x.data() + (o * extent + begin) * inner;
    std::copy(src, src + len * inner, out.data() + o * len * inner);
  }
  return Tensor::make_result(std::move(out_shape), std::move(out), {t},
                             [outer, inner, extent, begin, len](detail::Node& self) {
                               auto& p = parent(self, 0);
                               double* gp = grad_of(p);
                               if (!gp) return;
                               for (std::size_t o = 0; o < outer; ++o) {
                                 double* dst = gp + (o * extent + begin) * inner;
                                 const double* g = self.grad.data() + o * len * inner;
                                 for (std::size_t i = 0; i < len * inner; ++i) dst[i] += g[i];
                               }
                             });
}

Tensor concat(const std::vector<Tensor>& parts, std::size_t axis) {
  if (parts.empty()) throw DimensionError("concat of zero tensors");
  const Shape& s0 = parts[0].shape();
  if (axis >= s0.size()) throw DimensionError("concat axis out of range for " + shape_str(s0));
  std::vector<std::size_t> extents;
  std::size_t total = 0;
  for (const auto& p : parts) {
    const Shape& s = p.shape();
    bool ok = s.size() == s0.size();
    for (std::size_t i = 0; ok && i < s.size(); ++i) ok = (i == axis) || s[i] == s0[i];
    if (!ok) throw DimensionError("concat shape mismatch: " + shape_str(s0) + " vs " + shape_str(s));
    extents.push_back(s[axis]);
    total += s[axis];
  }
  const std::size_t outer = prod(s0, 0, axis), inner = prod(s0, axis + 1, s0.size());
  Shape out_shape = s0;
  out_shape[axis] = total;
  Buffer out(outer * total * inner);
  std::size_t offset = 0;
  for (std::size_t pi = 0; pi < parts.size(); ++pi) {
    const auto x = parts[pi].data();
    const std::size_t block = extents[pi] * inner;
    for (std::size_t o = 0; o < outer; ++o) {
      std::copy(x.data() + o * block, x.data() + (o + 1) * block, out.data() + (o * total + offset) * inner);
    }
    offset += extents[pi];
  }
  return Tensor::make_result(std::move(out_shape), std::move(out), parts,
                             [outer, inner, total, extents](detail::Node& self) {
                               std::size_t off = 0;
                               for (std::size_t pi = 0; pi < extents.size(); ++pi) {
                                 auto& p = parent(self, pi);
                                 const std::size_t block = extents[pi] * inner;
                                 if (double* gp = grad_of(p)) {
                                   for (std::size_t o = 0; o < outer; ++o) {
                                     const double* g = self.grad.data() + (o * total + off) * inner;
                                     for (std::size_t i = 0; i < block; ++i) gp[o * block + i] += g[i];
                                   }
                                 }
                                 off += extents[pi];
                               }
                             });
}

Tensor gather(const Tensor& t, std::span<const std::size_t> flat_indices) {
  if (flat_indices.empty()) throw DimensionError("gather with no indices");
  const auto x = t.data();
  Buffer out;
  out.reserve(flat_indices.size());
  for (auto i : flat_indices) {
    if (i >= x.size()) throw DimensionError("gather index out of range for " + shape_str(t.shape()));
    out.push_back(x[i]);
  }
  std::vector<std::size_t> idx(flat_indices.begin(), flat_indices.end());
  return Tensor::make_result({idx.size()}, std::move(out), {t}, [idx](detail::Node& self) {
    auto& p = parent(self, 0);
    if (double* gp = grad_of(p)) {
      for (std::size_t j = 0; j < idx.size(); ++j) gp[idx[j]] += self.grad[j];
    }
  });
}

// ---------------------------------------------------------------------------

Tensor softmax(const Tensor& t, std::size_t axis) {
  const Shape& s = t.shape();
  if (axis >= s.size()) throw DimensionError("softmax axis " + std::to_string(axis) + " out of range for " + shape_str(s));
  const std::size_t outer = prod(s, 0, axis), n = s[axis], inner = prod(s, axis + 1, s.size());
  const auto x = t.data();
  Buffer out(x.size());
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t in = 0; in < inner; ++in) {
      const std::size_t base = o * n * inner + in;
      double mx = x[base];
      for (std::size_t j = 1; j < n; ++j) mx = std::max(mx, x[base + j * inner]);
      double z = 0.0;
      for (std::size_t j = 0; j < n; ++j) z += (out[base + j * inner] = std::exp(x[base + j * inner] - mx));
      for (std::size_t j = 0; j < n; ++j) out[base + j * inner] /= z;
    }
  }
  return Tensor::make_result(s, std::move(out), {t}, [outer, n, inner](detail::Node& self) {
    auto& p = parent(self, 0);
    double* gp = grad_of(p);
    if (!gp) return;
    const auto& y = self.data;
    const auto& g = self.grad;
    for (std::size_t o = 0; o < outer; ++o) {
      for (std::size_t in = 0; in < inner; ++in) {
        const std::size_t base = o * n * inner + in;
        double dot = 0.0;
        for (std::size_t j = 0; j < n; ++j) dot += g[base + j * inner] * y[base + j * inner];
        for (std::size_t j = 0; j < n; ++j) {
          const std::size_t i = base + j * inner;
          gp[i] += y[i] * (g[i] - dot);
        }
      }
    }
  });
}

Tensor layernorm(const Tensor& t, const Tensor& gain, const Tensor& bias, double eps) {
  if (!(eps > 0)) throw std::invalid_argument("layernorm eps must be positive");
  const Shape& s = t.shape();
  const std::size_t n = s.back(), rows = t.numel() / n;
  const bool affine = gain.defined();
  if (affine && (gain.numel() != n || !bias.defined() || bias.numel() != n)) {
    throw DimensionError("layernorm gain/bias must have " + std::to_string(n) + " entries");
  }
  const auto x = t.data();
  Buffer xhat(x.size()), out(x.size());
  Buffer inv_std(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xr = x.data() + r * n;
    double mu = 0.0;
    for (std::size_t j = 0; j < n; ++j) mu += xr[j];
    mu /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t j = 0; j < n; ++j) var += (xr[j] - mu) * (xr[j] - mu);
    var /= static_cast<double>(n);
    inv_std[r] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < n; ++j) xhat[r * n + j] = (xr[j] - mu) * inv_std[r];
  }
  if (affine) {
    const auto gv = gain.data();
    const auto bv = bias.data();
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = xhat[i] * gv[i % n] + bv[i % n];
  } else {
    out = xhat;
  }
  std::vector<Tensor> parents{t};
  if (affine) {
    parents.push_back(gain);
    parents.push_back(bias);
  }
  return Tensor::make_result(s, std::move(out), std::move(parents),
                             [rows, n, affine, xhat = std::move(xhat), inv_std = std::move(inv_std)](detail::Node& self) {
                               auto& px = parent(self, 0);
                               const auto& g = self.grad;
                               const double* gv = affine ? parent(self, 1).data.data() : nullptr;
                               if (affine) {
                                 double* gg = grad_of(parent(self, 1));
                                 double* gb = grad_of(parent(self, 2));
                                 for (std::size_t i = 0; i < g.size(); ++i) {
                                   if (gg) gg[i % n] += g[i] * xhat[i];
                                   if (gb) gb[i % n] += g[i];
                                 }
                               }
                               double* gx = grad_of(px);
                               if (!gx) return;
                               Buffer dxhat(n);
                               for (std::size_t r = 0; r < rows; ++r) {
                                 double m1 = 0.0, m2 = 0.0;
                                 for (std::size_t j = 0; j < n; ++j) {
                                   const std::size_t i = r * n + j;
                                   dxhat[j] = g[i] * (gv ? gv[j] : 1.0);
                                   m1 += dxhat[j];
                                   m2 += dxhat[j] * xhat[i];
                                 }
                                 m1 /= static_cast<double>(n);
                                 m2 /= static_cast<double>(n);
                                 for (std::size_t j = 0; j < n; ++j) {
                                   const std::size_t i = r * n + j;
                                   gx[i] += inv_std[r] * (dxhat[j] - m1 - xhat[i] * m2);
                                 }
                               }
                             });
}

// ---------------------------------------------------------------------------

Tensor conv2d(const Tensor& input, const Tensor& kernel, const Tensor& bias, Conv2dOptions opts) {
  if (input.rank() != 3) throw DimensionError("conv2d input must be [C x H x W], got " + shape_str(input.shape()));
  if (kernel.rank() != 4) throw DimensionError("conv2d kernel must be [O x C x kh x kw], got " + shape_str(kernel.shape()));
  if (opts.stride == 0) throw std::invalid_argument("conv2d stride must be positive");
  const std::size_t C = input.dim(0), H = input.dim(1), W = input.dim(2);
  const std::size_t O = kernel.dim(0), kh = kernel.dim(2), kw = kernel.dim(3);
  if (kernel.dim(1) != C) {
    throw DimensionError("conv2d channel mismatch: input " + shape_str(input.shape()) + ", kernel " +
                         shape_str(kernel.shape()));
  }
  if (bias.defined() && bias.numel() != O) throw DimensionError("conv2d bias must have O entries");
  const std::size_t pad = opts.padding, stride = opts.stride;
  if (H + 2 * pad < kh || W + 2 * pad < kw) throw DimensionError("conv2d kernel larger than padded input");
  const std::size_t Ho = (H + 2 * pad - kh) / stride + 1, Wo = (W + 2 * pad - kw) / stride + 1;
  const std::size_t patch = C * kh * kw, npos = Ho * Wo;

  // cols[(c, ky, kx), (oy, ox)]
  auto im2col = [=](const double* x) {
    Buffer cols(patch * npos, 0.0);
    for (std::size_t c = 0; c < C; ++c)
      for (std::size_t ky = 0; ky < kh; ++ky)
        for (std::size_t kx = 0; kx < kw; ++kx) {
          double* row = cols.data() + ((c * kh + ky) * kw + kx) * npos;
          for (std::size_t oy = 0; oy < Ho; ++oy) {
            const long iy = static_cast<long>(oy * stride + ky) - static_cast<long>(pad);
            if (iy < 0 || iy >= static_cast<long>(H)) continue;
            for (std::size_t ox = 0; ox < Wo; ++ox) {
              const long ix = static_cast<long>(ox * stride + kx) - static_cast<long>(pad);
              if (ix < 0 || ix >= static_cast<long>(W)) continue;
              row[oy * Wo + ox] = x[(c * H + iy) * W + ix];
            }
          }
        }
    return cols;
  };

  Buffer cols = im2col(input.data().data());
  Buffer out(O * npos);
  Map(out.data(), O, npos).noalias() = MapC(kernel.data().data(), O, patch) * MapC(cols.data(), patch, npos);
  if (bias.defined()) {
    const auto bv = bias.data();
    for (std::size_t o = 0; o < O; ++o)
      for (std::size_t i = 0; i < npos; ++i) out[o * npos + i] += bv[o];
  }
  MacCounter::add(O * patch * npos);

  std::vector<Tensor> parents{input, kernel};
  if (bias.defined()) parents.push_back(bias);
  const bool has_bias = bias.defined();
  return Tensor::make_result(
      {O, Ho, Wo}, std::move(out), std::move(parents),
      [=, cols = std::move(cols)](detail::Node& self) {
        auto& px = parent(self, 0);
        auto& pk = parent(self, 1);
        MapC g(self.grad.data(), O, npos);
        if (double* gk = grad_of(pk)) Map(gk, O, patch).noalias() += g * MapC(cols.data(), patch, npos).transpose();
        if (has_bias) {
          if (double* gb = grad_of(parent(self, 2))) {
            for (std::size_t o = 0; o < O; ++o) gb[o] += g.row(static_cast<Eigen::Index>(o)).sum();
          }
        }
        double* gx = grad_of(px);
        if (!gx) return;
        Buffer dcols(patch * npos);
        Map(dcols.data(), patch, npos).noalias() = MapC(pk.data.data(), O, patch).transpose() * g;
        for (std::size_t c = 0; c < C; ++c)
          for (std::size_t ky = 0; ky < kh; ++ky)
            for (std::size_t kx = 0; kx < kw; ++kx) {
              const double* row = dcols.data() + ((c * kh + ky) * kw + kx) * npos;
              for (std::size_t oy = 0; oy < Ho; ++oy) {
                const long iy = static_cast<long>(oy * stride + ky) - static_cast<long>(pad);
                if (iy < 0 || iy >= static_cast<long>(H)) continue;
                for (std::size_t ox = 0; ox < Wo; ++ox) {
                  const long ix = static_cast<long>(ox * stride + kx) - static_cast<long>(pad);
                  if (ix < 0 || ix >= static_cast<long>(W)) continue;
                  gx[(c * H + iy) * W + ix] += row[oy * Wo + ox];
                }
              }
            }
      });
}

bool all_finite(const Tensor& t) {
  const auto x = t.data();
  return std::all_of(x.begin(), x.end(), [](double v) { return std::isfinite(v); });
}

}  // namespace bdtrack
