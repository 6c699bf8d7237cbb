#pragma once

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "latte/nn.hpp"
#include "latte/rng.hpp"
#include "latte/tape.hpp"

namespace latte {

enum class FlowKind { realnvp, maf };

inline const char* flow_name(FlowKind k) { return k == FlowKind::realnvp ? "realnvp" : "maf"; }
inline FlowKind flow_from_name(const std::string& s) {
  if (s == "realnvp") return FlowKind::realnvp;
  if (s == "maf") return FlowKind::maf;
  throw ConfigError("unknown flow kind '" + s + "'");
}

/// Affine coupling layer conditioned on an external vector h. One half of the
/// input passes through unchanged; the other is scaled/translated by nets fed
/// concat(kept_half, h). `keep_low` alternates across the stack so every
/// dimension is transformed by some layer. A positive `scale_clamp` squashes
/// the raw scale through s_max*tanh(raw/s_max) to keep exp() bounded.
struct CouplingLayer {
  int dim = 0;
  int cond = 0;
  int split = 0;
  bool keep_low = true;
  double scale_clamp = 5.0;
  MlpParams s_net;
  MlpParams t_net;
};

/// Autoregressive layer: per-dimension nets map (preceding dims, h) to the
/// pair (mu_i, alpha_i); z_i = (x_i - mu_i) * exp(-alpha_i). The Jacobian is
/// triangular under the layer's ordering, so log|det| = -sum(alpha).
/// `reversed` flips the dimension ordering between consecutive layers.
struct MafLayer {
  int dim = 0;
  int cond = 0;
  bool reversed = false;
  double scale_clamp = 5.0;
  std::vector<MlpParams> nets;
};

/// K conditional layers over R^dim with an isotropic standard-normal base.
/// Density evaluation composes layers x -> z; sampling runs the inverses in
/// reverse order from a base draw.
struct FlowStack {
  FlowKind kind = FlowKind::realnvp;
  int dim = 0;
  int cond = 0;
  std::vector<CouplingLayer> coupling;
  std::vector<MafLayer> maf;

  int depth() const {
    return static_cast<int>(kind == FlowKind::realnvp ? coupling.size() : maf.size());
  }
};

inline CouplingLayer coupling_init(const std::string& prefix, int dim, int cond, bool keep_low,
                                   int hidden, double scale_clamp, SeededRng& rng) {
  if (dim < 2) throw ContractError("coupling layers need dim >= 2 (no split possible for dim 1)");
  if (cond < 1) throw ContractError("coupling layers need a conditioner of dim >= 1");
  CouplingLayer ly;
  ly.dim = dim;
  ly.cond = cond;
  ly.split = dim / 2;
  ly.keep_low = keep_low;
  ly.scale_clamp = scale_clamp;
  const int keep_w = keep_low ? ly.split : dim - ly.split;
  const int tr_w = dim - keep_w;
  ly.s_net = mlp_init(prefix + ".s", {keep_w + cond, hidden, tr_w}, Act::tanh, Act::identity, rng);
  ly.t_net = mlp_init(prefix + ".t", {keep_w + cond, hidden, tr_w}, Act::tanh, Act::identity, rng);
  // Zero final layers: every layer starts as the identity map.
  mlp_zero_last_layer(ly.s_net);
  mlp_zero_last_layer(ly.t_net);
  return ly;
}

inline MafLayer maf_init(const std::string& prefix, int dim, int cond, bool reversed, int hidden,
                         double scale_clamp, SeededRng& rng) {
  if (dim < 1) throw ContractError("maf layers need dim >= 1");
  if (cond < 1) throw ContractError("maf layers need a conditioner of dim >= 1");
  MafLayer ly;
  ly.dim = dim;
  ly.cond = cond;
  ly.reversed = reversed;
  ly.scale_clamp = scale_clamp;
  for (int j = 0; j < dim; ++j) {
    ly.nets.push_back(
        mlp_init(prefix + ".d" + std::to_string(j), {j + cond, hidden, 2}, Act::tanh, Act::identity, rng));
    mlp_zero_last_layer(ly.nets.back());
  }
  return ly;
}

inline FlowStack flow_init(const std::string& prefix, FlowKind kind, int dim, int cond, int layers,
                           int hidden, double scale_clamp, SeededRng& rng) {
  if (layers < 1) throw ContractError("flow_init: need at least one layer");
  if (kind == FlowKind::realnvp && dim < 2)
    throw ContractError("realnvp needs latent dim >= 2; use maf for dim 1");
  FlowStack st;
  st.kind = kind;
  st.dim = dim;
  st.cond = cond;
  for (int k = 0; k < layers; ++k) {
    if (kind == FlowKind::realnvp)
      st.coupling.push_back(coupling_init(prefix + ".c" + std::to_string(k), dim, cond, k % 2 == 0,
                                          hidden, scale_clamp, rng));
    else
      st.maf.push_back(
          maf_init(prefix + ".m" + std::to_string(k), dim, cond, k % 2 == 1, hidden, scale_clamp, rng));
  }
  return st;
}

namespace detail {

inline Tensor clamp_scale(Tape& tp, const Tensor& raw, double s_max) {
  if (s_max <= 0.0) return raw;
  return tp.scale(tp.tanh(tp.scale(raw, 1.0 / s_max)), s_max);
}

inline void check_flow_shapes(const Tensor& x, const Tensor& h, int dim, int cond,
                              const char* what) {
  if (x.rank() != 2 || x.shape[1] != dim)
    throw DimensionError(std::string(what) + ": input shape " + shape_to_string(x.shape) +
                         " does not match flow dim " + std::to_string(dim));
  if (h.rank() != 2 || h.shape[1] != cond)
    throw DimensionError(std::string(what) + ": conditioner shape " + shape_to_string(h.shape) +
                         " does not match cond dim " + std::to_string(cond));
  if (x.shape[0] != h.shape[0])
    throw DimensionError(std::string(what) + ": batch sizes differ, " + shape_to_string(x.shape) +
                         " vs " + shape_to_string(h.shape));
}

}  // namespace detail

/// log N(z; 0, I) = -(D/2) ln(2*pi) - ||z||^2 / 2, per batch row.
inline Tensor base_log_prob(Tape& tp, const Tensor& z) {
  if (z.rank() != 2) throw DimensionError("base_log_prob: need a batch x dim tensor");
  const double d = static_cast<double>(z.shape[1]);
  Tensor sq = tp.reduce_sum(tp.square(z), 1);
  return tp.add_scalar(tp.scale(sq, -0.5), -0.5 * d * std::log(2.0 * 3.14159265358979323846));
}

/// x -> c with log|det dc/dx| = sum(s). The transformed half is
/// x_tr * exp(s(u)) + t(u) with u = concat(kept_half, h).
inline std::pair<Tensor, Tensor> coupling_forward(Tape& tp, CouplingLayer& ly, const Tensor& x,
                                                  const Tensor& h) {
  detail::check_flow_shapes(x, h, ly.dim, ly.cond, "coupling_forward");
  const int lo = ly.keep_low ? 0 : ly.split;
  const int hi = ly.keep_low ? ly.split : ly.dim;
  Tensor keep = tp.slice_last(x, lo, hi);
  Tensor tr = ly.keep_low ? tp.slice_last(x, ly.split, ly.dim) : tp.slice_last(x, 0, ly.split);
  Tensor u = tp.concat_last(keep, h);
  Tensor s = detail::clamp_scale(tp, mlp_forward(tp, ly.s_net, u), ly.scale_clamp);
  Tensor t = mlp_forward(tp, ly.t_net, u);
  Tensor tr_out = tp.add(tp.mul(tr, tp.exp(s)), t);
  Tensor c = ly.keep_low ? tp.concat_last(keep, tr_out) : tp.concat_last(tr_out, keep);
  return {c, tp.reduce_sum(s, 1)};
}

/// Exact inverse of coupling_forward: x_tr = (c_tr - t(u)) * exp(-s(u)).
inline Tensor coupling_inverse(Tape& tp, CouplingLayer& ly, const Tensor& c, const Tensor& h) {
  detail::check_flow_shapes(c, h, ly.dim, ly.cond, "coupling_inverse");
  const int lo = ly.keep_low ? 0 : ly.split;
  const int hi = ly.keep_low ? ly.split : ly.dim;
  Tensor keep = tp.slice_last(c, lo, hi);
  Tensor tr = ly.keep_low ? tp.slice_last(c, ly.split, ly.dim) : tp.slice_last(c, 0, ly.split);
  Tensor u = tp.concat_last(keep, h);
  Tensor s = detail::clamp_scale(tp, mlp_forward(tp, ly.s_net, u), ly.scale_clamp);
  Tensor t = mlp_forward(tp, ly.t_net, u);
  Tensor tr_in = tp.mul(tp.sub(tr, t), tp.exp(tp.neg(s)));
  return ly.keep_low ? tp.concat_last(keep, tr_in) : tp.concat_last(tr_in, keep);
}

inline std::pair<Tensor, Tensor> maf_forward(Tape& tp, MafLayer& ly, const Tensor& x,
                                             const Tensor& h) {
  detail::check_flow_shapes(x, h, ly.dim, ly.cond, "maf_forward");
  const int d = ly.dim;
  std::vector<Tensor> zcols(static_cast<std::size_t>(d));
  Tensor logdet;
  for (int j = 0; j < d; ++j) {
    const int od = ly.reversed ? d - 1 - j : j;
    Tensor prefix = ly.reversed ? tp.slice_last(x, d - j, d) : tp.slice_last(x, 0, j);
    Tensor u = tp.concat_last(prefix, h);
    Tensor out = mlp_forward(tp, ly.nets[static_cast<std::size_t>(j)], u);
    Tensor mu = tp.slice_last(out, 0, 1);
    Tensor alpha = detail::clamp_scale(tp, tp.slice_last(out, 1, 2), ly.scale_clamp);
    Tensor xo = tp.slice_last(x, od, od + 1);
    zcols[static_cast<std::size_t>(od)] = tp.mul(tp.sub(xo, mu), tp.exp(tp.neg(alpha)));
    Tensor a = tp.reduce_sum(alpha, 1);
    logdet = j == 0 ? tp.neg(a) : tp.sub(logdet, a);
  }
  Tensor z = zcols[0];
  for (int od = 1; od < d; ++od) z = tp.concat_last(z, zcols[static_cast<std::size_t>(od)]);
  return {z, logdet};
}

/// Sequential inverse: dimensions are reconstructed in the layer's ordering,
/// each conditioned on the already-recovered prefix.
inline Tensor maf_inverse(Tape& tp, MafLayer& ly, const Tensor& z, const Tensor& h) {
  detail::check_flow_shapes(z, h, ly.dim, ly.cond, "maf_inverse");
  const int d = ly.dim;
  const int batch = z.shape[0];
  std::vector<Tensor> xcols(static_cast<std::size_t>(d));
  for (int j = 0; j < d; ++j) {
    const int od = ly.reversed ? d - 1 - j : j;
    // Prefix layout must match the forward slice: ascending dim order.
    Tensor prefix = tp.input(Tensor::zeros({batch, 0}));
    const int pfirst = ly.reversed ? d - j : 0;
    for (int k = 0; k < j; ++k)
      prefix = tp.concat_last(prefix, xcols[static_cast<std::size_t>(pfirst + k)]);
    Tensor u = tp.concat_last(prefix, h);
    Tensor out = mlp_forward(tp, ly.nets[static_cast<std::size_t>(j)], u);
    Tensor mu = tp.slice_last(out, 0, 1);
    Tensor alpha = detail::clamp_scale(tp, tp.slice_last(out, 1, 2), ly.scale_clamp);
    Tensor zo = tp.slice_last(z, od, od + 1);
    xcols[static_cast<std::size_t>(od)] = tp.add(tp.mul(zo, tp.exp(alpha)), mu);
  }
  Tensor x = xcols[0];
  for (int od = 1; od < d; ++od) x = tp.concat_last(x, xcols[static_cast<std::size_t>(od)]);
  return x;
}

/// Compose all layers x -> z; returns (z, total log|det dz/dx|) per row.
inline std::pair<Tensor, Tensor> flow_forward(Tape& tp, FlowStack& st, const Tensor& x,
                                              const Tensor& h) {
  Tensor cur = x;
  Tensor logdet;
  for (int k = 0; k < st.depth(); ++k) {
    auto [next, ld] = st.kind == FlowKind::realnvp
                          ? coupling_forward(tp, st.coupling[static_cast<std::size_t>(k)], cur, h)
                          : maf_forward(tp, st.maf[static_cast<std::size_t>(k)], cur, h);
    cur = next;
    logdet = k == 0 ? ld : tp.add(logdet, ld);
  }
  return {cur, logdet};
}

/// z -> x by running the layer inverses in reverse order.
inline Tensor flow_inverse(Tape& tp, FlowStack& st, const Tensor& z, const Tensor& h) {
  Tensor cur = z;
  for (int k = st.depth() - 1; k >= 0; --k)
    cur = st.kind == FlowKind::realnvp
              ? coupling_inverse(tp, st.coupling[static_cast<std::size_t>(k)], cur, h)
              : maf_inverse(tp, st.maf[static_cast<std::size_t>(k)], cur, h);
  return cur;
}

/// Change-of-variables density: base_log_prob(f(x;h)) + sum of layer log-dets.
inline Tensor flow_log_prob(Tape& tp, FlowStack& st, const Tensor& x, const Tensor& h) {
  auto [z, logdet] = flow_forward(tp, st, x, h);
  return tp.add(base_log_prob(tp, z), logdet);
}

/// Draw z ~ N(0, I) and map it back through the stack. One row per row of h;
/// deterministic given the RNG state.
inline Tensor flow_sample(Tape& tp, FlowStack& st, const Tensor& h, SeededRng& rng) {
  if (h.rank() != 2 || h.shape[1] != st.cond)
    throw DimensionError("flow_sample: conditioner shape " + shape_to_string(h.shape) +
                         " does not match cond dim " + std::to_string(st.cond));
  Tensor z = Tensor::zeros({h.shape[0], st.dim});
  for (auto& v : z.data) v = rng.normal();
  return flow_inverse(tp, st, tp.input(z), h);
}

inline void flow_collect(FlowStack& st, std::vector<Parameter*>& out) {
  for (auto& ly : st.coupling) {
    mlp_collect(ly.s_net, out);
    mlp_collect(ly.t_net, out);
  }
  for (auto& ly : st.maf)
    for (auto& net : ly.nets) mlp_collect(net, out);
}

}  // namespace latte
