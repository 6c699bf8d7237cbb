#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "latte/errors.hpp"
#include "latte/tensor.hpp"

namespace latte {

enum class Ew { add, sub, mul, exp, log, tanh, sigmoid, softplus, neg, square };

inline bool ew_is_binary(Ew k) { return k == Ew::add || k == Ew::sub || k == Ew::mul; }

inline const char* ew_name(Ew k) {
  switch (k) {
    case Ew::add: return "add";
    case Ew::sub: return "sub";
    case Ew::mul: return "mul";
    case Ew::exp: return "exp";
    case Ew::log: return "log";
    case Ew::tanh: return "tanh";
    case Ew::sigmoid: return "sigmoid";
    case Ew::softplus: return "softplus";
    case Ew::neg: return "neg";
    case Ew::square: return "square";
  }
  return "?";
}

/// Gradient of the loss with respect to each registered parameter, keyed by
/// parameter name. Every registered parameter appears exactly once, with a
/// gradient of the parameter's shape (zeros when unreachable from the loss).
using GradientMap = std::map<std::string, Tensor>;

namespace detail {

inline double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline double stable_softplus(double x) {
  if (x > 0.0) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

}  // namespace detail

/// Reverse-mode tape over dense tensors. Ops append nodes in topological
/// order (inputs always precede consumers); backward() walks the record once,
/// in reverse, accumulating adjoints. A tape rebuilds per training step and is
/// single-threaded; independent tapes on separate threads share no state.
class Tape {
 public:
  Tape() : tag_(next_tag()) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Record a constant leaf: participates in the forward pass, gets no gradient.
  Tensor input(const Tensor& v) { return handle(record_leaf(v, false)); }

  /// Register a trainable leaf. Registering the same name twice returns the
  /// original node, so gradient contributions from every use accumulate.
  Tensor param(Parameter& p) {
    auto it = params_.find(p.name);
    if (it != params_.end()) {
      if (vals_[static_cast<std::size_t>(it->second)].shape != p.value.shape)
        throw ContractError("parameter '" + p.name + "' re-registered with a different shape");
      return handle(it->second);
    }
    int id = record_leaf(p.value, true);
    params_.emplace(p.name, id);
    return handle(id);
  }

  // --- primitive ops -------------------------------------------------------

  Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2 || a.shape[1] != b.shape[0])
      throw DimensionError("matmul: incompatible shapes " + shape_to_string(a.shape) + " and " +
                           shape_to_string(b.shape));
    int ia = ensure(a), ib = ensure(b);
    const Tensor& A = vals_[static_cast<std::size_t>(ia)];
    const Tensor& B = vals_[static_cast<std::size_t>(ib)];
    const int m = A.shape[0], k = A.shape[1], n = B.shape[1];
    Tensor out = Tensor::zeros({m, n});
    for (int i = 0; i < m; ++i) {
      double* orow = &out.data[static_cast<std::size_t>(i) * n];
      for (int l = 0; l < k; ++l) {
        const double av = A.data[static_cast<std::size_t>(i) * k + l];
        if (av == 0.0) continue;
        const double* brow = &B.data[static_cast<std::size_t>(l) * n];
        for (int j = 0; j < n; ++j) orow[j] += av * brow[j];
      }
    }
    Node nd;
    nd.op = Op::matmul;
    nd.a = ia;
    nd.b = ib;
    return push(nd, std::move(out), "matmul");
  }

  Tensor elementwise(Ew kind, const Tensor& x) {
    if (ew_is_binary(kind))
      throw ContractError(std::string("elementwise ") + ew_name(kind) + " needs two operands");
    int ix = ensure(x);
    const Tensor& X = vals_[static_cast<std::size_t>(ix)];
    Tensor out = Tensor::zeros(X.shape);
    const std::size_t n = X.data.size();
    switch (kind) {
      case Ew::exp:
        for (std::size_t i = 0; i < n; ++i) out.data[i] = std::exp(X.data[i]);
        break;
      case Ew::log:
        for (std::size_t i = 0; i < n; ++i) {
          if (!(X.data[i] > 0.0))
            throw DomainError("log of non-positive value " + std::to_string(X.data[i]) +
                              " at index " + std::to_string(i));
          out.data[i] = std::log(X.data[i]);
        }
        break;
      case Ew::tanh:
        for (std::size_t i = 0; i < n; ++i) out.data[i] = std::tanh(X.data[i]);
        break;
      case Ew::sigmoid:
        for (std::size_t i = 0; i < n; ++i) out.data[i] = detail::stable_sigmoid(X.data[i]);
        break;
      case Ew::softplus:
        for (std::size_t i = 0; i < n; ++i) out.data[i] = detail::stable_softplus(X.data[i]);
        break;
      case Ew::neg:
        for (std::size_t i = 0; i < n; ++i) out.data[i] = -X.data[i];
        break;
      case Ew::square:
        for (std::size_t i = 0; i < n; ++i) out.data[i] = X.data[i] * X.data[i];
        break;
      default:
        throw ContractError("unary elementwise got a binary kind");
    }
    Node nd;
    nd.op = Op::ew1;
    nd.ew = kind;
    nd.a = ix;
    return push(nd, std::move(out), ew_name(kind));
  }

  Tensor elementwise(Ew kind, const Tensor& x, const Tensor& y) {
    if (!ew_is_binary(kind))
      throw ContractError(std::string("elementwise ") + ew_name(kind) + " takes one operand");
    int bcast;  // 0: equal shapes, 1: y broadcast over x's last axis, 2: mirrored
    if (x.shape == y.shape) {
      bcast = 0;
    } else if (y.rank() == 1 && x.rank() >= 1 && y.shape[0] == x.last_dim()) {
      bcast = 1;
    } else if (x.rank() == 1 && y.rank() >= 1 && x.shape[0] == y.last_dim()) {
      bcast = 2;
    } else {
      throw DimensionError(std::string("elementwise ") + ew_name(kind) + ": incompatible shapes " +
                           shape_to_string(x.shape) + " and " + shape_to_string(y.shape));
    }
    int ix = ensure(x), iy = ensure(y);
    const Tensor& X = vals_[static_cast<std::size_t>(ix)];
    const Tensor& Y = vals_[static_cast<std::size_t>(iy)];
    const Tensor& big = bcast == 2 ? Y : X;
    Tensor out = Tensor::zeros(big.shape);
    const std::size_t n = out.data.size();
    const std::size_t L = bcast == 0 ? n : static_cast<std::size_t>((bcast == 1 ? Y : X).data.size());
    for (std::size_t i = 0; i < n; ++i) {
      const double xv = bcast == 2 ? X.data[i % L] : X.data[i];
      const double yv = bcast == 1 ? Y.data[i % L] : Y.data[i];
      out.data[i] = kind == Ew::add ? xv + yv : kind == Ew::sub ? xv - yv : xv * yv;
    }
    Node nd;
    nd.op = Op::ew2;
    nd.ew = kind;
    nd.a = ix;
    nd.b = iy;
    nd.bcast = bcast;
    return push(nd, std::move(out), ew_name(kind));
  }

  /// Concatenate along the final axis; leading dimensions must agree.
  Tensor concat_last(const Tensor& a, const Tensor& b) {
    if (a.rank() != b.rank() || a.rank() < 1)
      throw DimensionError("concat_last: ranks differ, " + shape_to_string(a.shape) + " vs " +
                           shape_to_string(b.shape));
    for (int i = 0; i + 1 < a.rank(); ++i)
      if (a.shape[static_cast<std::size_t>(i)] != b.shape[static_cast<std::size_t>(i)])
        throw DimensionError("concat_last: leading dimensions differ, " + shape_to_string(a.shape) +
                             " vs " + shape_to_string(b.shape));
    int ia = ensure(a), ib = ensure(b);
    const Tensor& A = vals_[static_cast<std::size_t>(ia)];
    const Tensor& B = vals_[static_cast<std::size_t>(ib)];
    const int p = A.shape.back(), q = B.shape.back();
    long long lead = 1;
    for (int i = 0; i + 1 < A.rank(); ++i) lead *= A.shape[static_cast<std::size_t>(i)];
    Shape os = A.shape;
    os.back() = p + q;
    Tensor out = Tensor::zeros(os);
    for (long long r = 0; r < lead; ++r) {
      for (int j = 0; j < p; ++j) out.data[static_cast<std::size_t>(r * (p + q) + j)] = A.data[static_cast<std::size_t>(r * p + j)];
      for (int j = 0; j < q; ++j) out.data[static_cast<std::size_t>(r * (p + q) + p + j)] = B.data[static_cast<std::size_t>(r * q + j)];
    }
    Node nd;
    nd.op = Op::concat;
    nd.a = ia;
    nd.b = ib;
    nd.p0 = p;
    nd.p1 = q;
    return push(nd, std::move(out), "concat_last");
  }

  /// Columns [start, stop) of the final axis.
  Tensor slice_last(const Tensor& x, int start, int stop) {
    if (x.rank() < 1 || start < 0 || stop < start || stop > x.last_dim())
      throw DimensionError("slice_last: [" + std::to_string(start) + ", " + std::to_string(stop) +
                           ") out of range for shape " + shape_to_string(x.shape));
    int ix = ensure(x);
    const Tensor& X = vals_[static_cast<std::size_t>(ix)];
    const int w = X.shape.back(), sw = stop - start;
    long long lead = 1;
    for (int i = 0; i + 1 < X.rank(); ++i) lead *= X.shape[static_cast<std::size_t>(i)];
    Shape os = X.shape;
    os.back() = sw;
    Tensor out = Tensor::zeros(os);
    for (long long r = 0; r < lead; ++r)
      for (int j = 0; j < sw; ++j)
        out.data[static_cast<std::size_t>(r * sw + j)] = X.data[static_cast<std::size_t>(r * w + start + j)];
    Node nd;
    nd.op = Op::slice;
    nd.a = ix;
    nd.p0 = start;
    nd.p1 = stop;
    return push(nd, std::move(out), "slice_last");
  }

  Tensor reduce_sum(const Tensor& x, std::optional<int> axis = std::nullopt) {
    return reduce(x, axis, false);
  }
  Tensor reduce_mean(const Tensor& x, std::optional<int> axis = std::nullopt) {
    return reduce(x, axis, true);
  }

  /// c * x with constant c.
  Tensor scale(const Tensor& x, double c) {
    int ix = ensure(x);
    const Tensor& X = vals_[static_cast<std::size_t>(ix)];
    Tensor out = Tensor::zeros(X.shape);
    for (std::size_t i = 0; i < X.data.size(); ++i) out.data[i] = c * X.data[i];
    Node nd;
    nd.op = Op::scale;
    nd.a = ix;
    nd.c = c;
    return push(nd, std::move(out), "scale");
  }

  /// x + c with constant c.
  Tensor add_scalar(const Tensor& x, double c) {
    int ix = ensure(x);
    const Tensor& X = vals_[static_cast<std::size_t>(ix)];
    Tensor out = Tensor::zeros(X.shape);
    for (std::size_t i = 0; i < X.data.size(); ++i) out.data[i] = X.data[i] + c;
    Node nd;
    nd.op = Op::shift;
    nd.a = ix;
    nd.c = c;
    return push(nd, std::move(out), "add_scalar");
  }

  // Spelled-out helpers.
  Tensor add(const Tensor& a, const Tensor& b) { return elementwise(Ew::add, a, b); }
  Tensor sub(const Tensor& a, const Tensor& b) { return elementwise(Ew::sub, a, b); }
  Tensor mul(const Tensor& a, const Tensor& b) { return elementwise(Ew::mul, a, b); }
  Tensor exp(const Tensor& x) { return elementwise(Ew::exp, x); }
  Tensor log(const Tensor& x) { return elementwise(Ew::log, x); }
  Tensor tanh(const Tensor& x) { return elementwise(Ew::tanh, x); }
  Tensor sigmoid(const Tensor& x) { return elementwise(Ew::sigmoid, x); }
  Tensor softplus(const Tensor& x) { return elementwise(Ew::softplus, x); }
  Tensor neg(const Tensor& x) { return elementwise(Ew::neg, x); }
  Tensor square(const Tensor& x) { return elementwise(Ew::square, x); }

  /// Reverse pass. `loss` must be a scalar and the tape's final node. Returns
  /// one gradient per registered parameter; parameters the loss does not
  /// reach get zeros. Visits each node exactly once, in reverse order.
  GradientMap backward(const Tensor& loss) {
    if (loss.node < 0 || loss.tape_tag != tag_)
      throw ContractError("backward: loss does not belong to this tape");
    if (vals_[static_cast<std::size_t>(loss.node)].size() != 1)
      throw ContractError("backward: loss must be scalar, got shape " +
                          shape_to_string(vals_[static_cast<std::size_t>(loss.node)].shape));
    if (loss.node != static_cast<int>(nodes_.size()) - 1)
      throw ContractError("backward: loss must be the tape's final node");

    std::vector<std::vector<double>> adj(nodes_.size());
    adj[static_cast<std::size_t>(loss.node)] = {1.0};

    auto bump = [&](int id, std::size_t idx, double v) {
      if (!needs_grad_[static_cast<std::size_t>(id)]) return;
      auto& buf = adj[static_cast<std::size_t>(id)];
      if (buf.empty()) buf.assign(vals_[static_cast<std::size_t>(id)].data.size(), 0.0);
      buf[idx] += v;
    };
    auto want = [&](int id) { return id >= 0 && needs_grad_[static_cast<std::size_t>(id)]; };

    for (int i = static_cast<int>(nodes_.size()) - 1; i >= 0; --i) {
      const auto& g = adj[static_cast<std::size_t>(i)];
      if (g.empty()) continue;
      const Node& nd = nodes_[static_cast<std::size_t>(i)];
      for (double gv : g)
        if (!std::isfinite(gv))
          throw NumericError(std::string("non-finite gradient at op '") + op_name(nd) +
                             "' (node " + std::to_string(i) + ")");
      switch (nd.op) {
        case Op::leaf:
          break;
        case Op::matmul: {
          const Tensor& A = vals_[static_cast<std::size_t>(nd.a)];
          const Tensor& B = vals_[static_cast<std::size_t>(nd.b)];
          const int m = A.shape[0], k = A.shape[1], n = B.shape[1];
          if (want(nd.a)) {
            for (int r = 0; r < m; ++r)
              for (int l = 0; l < k; ++l) {
                double s = 0.0;
                for (int j = 0; j < n; ++j)
                  s += g[static_cast<std::size_t>(r) * n + j] * B.data[static_cast<std::size_t>(l) * n + j];
                bump(nd.a, static_cast<std::size_t>(r) * k + l, s);
              }
          }
          if (want(nd.b)) {
            for (int l = 0; l < k; ++l)
              for (int j = 0; j < n; ++j) {
                double s = 0.0;
                for (int r = 0; r < m; ++r)
                  s += A.data[static_cast<std::size_t>(r) * k + l] * g[static_cast<std::size_t>(r) * n + j];
                bump(nd.b, static_cast<std::size_t>(l) * n + j, s);
              }
          }
          break;
        }
        case Op::ew1: {
          if (!want(nd.a)) break;
          const Tensor& X = vals_[static_cast<std::size_t>(nd.a)];
          const Tensor& Y = vals_[static_cast<std::size_t>(i)];
          for (std::size_t j = 0; j < g.size(); ++j) {
            double d;
            switch (nd.ew) {
              case Ew::exp: d = Y.data[j]; break;
              case Ew::log: d = 1.0 / X.data[j]; break;
              case Ew::tanh: d = 1.0 - Y.data[j] * Y.data[j]; break;
              case Ew::sigmoid: d = Y.data[j] * (1.0 - Y.data[j]); break;
              case Ew::softplus: d = detail::stable_sigmoid(X.data[j]); break;
              case Ew::neg: d = -1.0; break;
              case Ew::square: d = 2.0 * X.data[j]; break;
              default: d = 0.0; break;
            }
            bump(nd.a, j, g[j] * d);
          }
          break;
        }
        case Op::ew2: {
          const Tensor& X = vals_[static_cast<std::size_t>(nd.a)];
          const Tensor& Y = vals_[static_cast<std::size_t>(nd.b)];
          const std::size_t L = nd.bcast == 1 ? Y.data.size()
                              : nd.bcast == 2 ? X.data.size()
                                              : g.size();
          for (std::size_t j = 0; j < g.size(); ++j) {
            const std::size_t xi = nd.bcast == 2 ? j % L : j;
            const std::size_t yi = nd.bcast == 1 ? j % L : j;
            double dx, dy;
            switch (nd.ew) {
              case Ew::add: dx = 1.0; dy = 1.0; break;
              case Ew::sub: dx = 1.0; dy = -1.0; break;
              default: dx = Y.data[yi]; dy = X.data[xi]; break;  // mul
            }
            bump(nd.a, xi, g[j] * dx);
            bump(nd.b, yi, g[j] * dy);
          }
          break;
        }
        case Op::concat: {
          const int p = nd.p0, q = nd.p1;
          const std::size_t lead = g.size() / static_cast<std::size_t>(p + q);
          for (std::size_t r = 0; r < lead; ++r) {
            for (int j = 0; j < p; ++j)
              bump(nd.a, r * static_cast<std::size_t>(p) + static_cast<std::size_t>(j),
                   g[r * static_cast<std::size_t>(p + q) + static_cast<std::size_t>(j)]);
            for (int j = 0; j < q; ++j)
              bump(nd.b, r * static_cast<std::size_t>(q) + static_cast<std::size_t>(j),
                   g[r * static_cast<std::size_t>(p + q) + static_cast<std::size_t>(p + j)]);
          }
          break;
        }
        case Op::slice: {
          if (!want(nd.a)) break;
          const Tensor& X = vals_[static_cast<std::size_t>(nd.a)];
          const int w = X.shape.back(), sw = nd.p1 - nd.p0;
          const std::size_t lead = sw == 0 ? 0 : g.size() / static_cast<std::size_t>(sw);
          for (std::size_t r = 0; r < lead; ++r)
            for (int j = 0; j < sw; ++j)
              bump(nd.a, r * static_cast<std::size_t>(w) + static_cast<std::size_t>(nd.p0 + j),
                   g[r * static_cast<std::size_t>(sw) + static_cast<std::size_t>(j)]);
          break;
        }
        case Op::sum:
        case Op::mean: {
          if (!want(nd.a)) break;
          const Tensor& X = vals_[static_cast<std::size_t>(nd.a)];
          if (nd.axis < 0) {
            const double d = nd.op == Op::mean ? g[0] / static_cast<double>(X.data.size()) : g[0];
            for (std::size_t j = 0; j < X.data.size(); ++j) bump(nd.a, j, d);
          } else {
            long long outer = 1, inner = 1;
            const int len = X.shape[static_cast<std::size_t>(nd.axis)];
            for (int d = 0; d < nd.axis; ++d) outer *= X.shape[static_cast<std::size_t>(d)];
            for (int d = nd.axis + 1; d < X.rank(); ++d) inner *= X.shape[static_cast<std::size_t>(d)];
            const double div = nd.op == Op::mean ? static_cast<double>(len) : 1.0;
            for (long long o = 0; o < outer; ++o)
              for (int l = 0; l < len; ++l)
                for (long long in = 0; in < inner; ++in)
                  bump(nd.a, static_cast<std::size_t>((o * len + l) * inner + in),
                       g[static_cast<std::size_t>(o * inner + in)] / div);
          }
          break;
        }
        case Op::scale:
          if (want(nd.a))
            for (std::size_t j = 0; j < g.size(); ++j) bump(nd.a, j, nd.c * g[j]);
          break;
        case Op::shift:
          if (want(nd.a))
            for (std::size_t j = 0; j < g.size(); ++j) bump(nd.a, j, g[j]);
          break;
      }
    }

    GradientMap grads;
    for (const auto& [name, id] : params_) {
      auto& buf = adj[static_cast<std::size_t>(id)];
      const Tensor& v = vals_[static_cast<std::size_t>(id)];
      if (buf.empty())
        grads.emplace(name, Tensor::zeros(v.shape));
      else
        grads.emplace(name, Tensor(v.shape, std::move(buf)));
    }
    return grads;
  }

  std::size_t size() const { return nodes_.size(); }

 private:
  enum class Op { leaf, matmul, ew1, ew2, concat, slice, sum, mean, scale, shift };

  struct Node {
    Op op = Op::leaf;
    Ew ew = Ew::add;
    int a = -1, b = -1;
    int p0 = 0, p1 = 0;  // slice bounds / concat widths
    int axis = -1;       // reduce axis, -1 = all
    int bcast = 0;
    double c = 0.0;
  };

  static const char* op_name(const Node& nd) {
    switch (nd.op) {
      case Op::leaf: return "leaf";
      case Op::matmul: return "matmul";
      case Op::ew1:
      case Op::ew2: return ew_name(nd.ew);
      case Op::concat: return "concat_last";
      case Op::slice: return "slice_last";
      case Op::sum: return "reduce_sum";
      case Op::mean: return "reduce_mean";
      case Op::scale: return "scale";
      case Op::shift: return "add_scalar";
    }
    return "?";
  }

  Tensor reduce(const Tensor& x, std::optional<int> axis, bool mean) {
    int ix = ensure(x);
    const Tensor& X = vals_[static_cast<std::size_t>(ix)];
    Node nd;
    nd.op = mean ? Op::mean : Op::sum;
    nd.a = ix;
    Tensor out;
    if (!axis) {
      double s = 0.0;
      for (double v : X.data) s += v;
      if (mean) s /= static_cast<double>(X.data.size());
      nd.axis = -1;
      out = Tensor::scalar(s);
    } else {
      const int a = *axis;
      if (a < 0 || a >= X.rank())
        throw DimensionError("reduce: axis " + std::to_string(a) + " out of range for shape " +
                             shape_to_string(X.shape));
      long long outer = 1, inner = 1;
      const int len = X.shape[static_cast<std::size_t>(a)];
      for (int d = 0; d < a; ++d) outer *= X.shape[static_cast<std::size_t>(d)];
      for (int d = a + 1; d < X.rank(); ++d) inner *= X.shape[static_cast<std::size_t>(d)];
      Shape os;
      for (int d = 0; d < X.rank(); ++d)
        if (d != a) os.push_back(X.shape[static_cast<std::size_t>(d)]);
      if (os.empty()) os = {1};
      out = Tensor::zeros(os);
      for (long long o = 0; o < outer; ++o)
        for (int l = 0; l < len; ++l)
          for (long long in = 0; in < inner; ++in)
            out.data[static_cast<std::size_t>(o * inner + in)] +=
                X.data[static_cast<std::size_t>((o * len + l) * inner + in)];
      if (mean)
        for (auto& v : out.data) v /= static_cast<double>(len);
      nd.axis = a;
    }
    return push(nd, std::move(out), mean ? "reduce_mean" : "reduce_sum");
  }

  int record_leaf(const Tensor& v, bool requires_grad) {
    if (!v.all_finite()) throw NumericError("non-finite values in tensor entering the tape");
    Node nd;
    nd.op = Op::leaf;
    nodes_.push_back(nd);
    Tensor stored = v.detached();
    vals_.push_back(std::move(stored));
    needs_grad_.push_back(requires_grad ? 1 : 0);
    return static_cast<int>(nodes_.size()) - 1;
  }

  int ensure(const Tensor& t) {
    if (t.node >= 0) {
      if (t.tape_tag != tag_) throw ContractError("tensor belongs to a different tape");
      if (t.node >= static_cast<int>(nodes_.size()))
        throw ContractError("tensor refers to an unknown tape node");
      return t.node;
    }
    return record_leaf(t, false);
  }

  Tensor push(Node nd, Tensor value, const char* opname) {
    if (!value.all_finite())
      throw NumericError(std::string("non-finite values produced by '") + opname + "' (node " +
                         std::to_string(nodes_.size()) + ")");
    const bool needs = (nd.a >= 0 && needs_grad_[static_cast<std::size_t>(nd.a)]) ||
                       (nd.b >= 0 && needs_grad_[static_cast<std::size_t>(nd.b)]);
    nodes_.push_back(nd);
    vals_.push_back(std::move(value));
    needs_grad_.push_back(needs ? 1 : 0);
    return handle(static_cast<int>(nodes_.size()) - 1);
  }

  Tensor handle(int id) {
    Tensor t = vals_[static_cast<std::size_t>(id)];
    t.node = id;
    t.tape_tag = tag_;
    return t;
  }

  static std::uint64_t next_tag() {
    static std::atomic<std::uint64_t> counter{1};
    return counter.fetch_add(1);
  }

  std::vector<Node> nodes_;
  std::vector<Tensor> vals_;
  std::vector<char> needs_grad_;
  std::map<std::string, int> params_;
  std::uint64_t tag_;
};

}  // namespace latte
