#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "latte/rng.hpp"
#include "latte/tape.hpp"
#include "latte/tensor.hpp"

namespace latte {

enum class Act { identity, tanh, sigmoid, softplus };

inline const char* act_name(Act a) {
  switch (a) {
    case Act::identity: return "identity";
    case Act::tanh: return "tanh";
    case Act::sigmoid: return "sigmoid";
    case Act::softplus: return "softplus";
  }
  return "?";
}

inline Act act_from_name(const std::string& s) {
  if (s == "identity") return Act::identity;
  if (s == "tanh") return Act::tanh;
  if (s == "sigmoid") return Act::sigmoid;
  if (s == "softplus") return Act::softplus;
  throw ConfigError("unknown activation '" + s + "'");
}

inline Tensor apply_act(Tape& tp, Act a, const Tensor& x) {
  switch (a) {
    case Act::identity: return x;
    case Act::tanh: return tp.tanh(x);
    case Act::sigmoid: return tp.sigmoid(x);
    case Act::softplus: return tp.softplus(x);
  }
  return x;
}

struct DenseLayer {
  Parameter weight;  // in x out
  Parameter bias;    // out
};

struct MlpParams {
  std::vector<DenseLayer> layers;
  Act hidden = Act::tanh;
  Act output = Act::identity;

  int in_dim() const { return layers.front().weight.value.shape[0]; }
  int out_dim() const { return layers.back().weight.value.shape[1]; }
};

/// Glorot-uniform weights (limit sqrt(6/(fan_in+fan_out))), zero biases.
inline MlpParams mlp_init(const std::string& prefix, const std::vector<int>& dims, Act hidden,
                          Act output, SeededRng& rng) {
  if (dims.size() < 2) throw ContractError("mlp_init: need at least input and output dims");
  for (int d : dims)
    if (d <= 0) throw ContractError("mlp_init: dims must be positive");
  MlpParams p;
  p.hidden = hidden;
  p.output = output;
  for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
    const int fan_in = dims[i], fan_out = dims[i + 1];
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    Tensor w = Tensor::zeros({fan_in, fan_out});
    for (auto& v : w.data) v = rng.uniform(-limit, limit);
    DenseLayer layer;
    layer.weight = {prefix + ".l" + std::to_string(i) + ".W", std::move(w)};
    layer.bias = {prefix + ".l" + std::to_string(i) + ".b", Tensor::zeros({fan_out})};
    p.layers.push_back(std::move(layer));
  }
  return p;
}

/// Zero the final layer so the net starts as the constant-zero map.
inline void mlp_zero_last_layer(MlpParams& p) {
  for (auto& v : p.layers.back().weight.value.data) v = 0.0;
  for (auto& v : p.layers.back().bias.value.data) v = 0.0;
}

inline Tensor mlp_forward(Tape& tp, MlpParams& p, const Tensor& x) {
  if (x.rank() != 2 || x.shape[1] != p.in_dim())
    throw DimensionError("mlp_forward: input shape " + shape_to_string(x.shape) +
                         " does not match first layer input dim " + std::to_string(p.in_dim()));
  Tensor h = x;
  for (std::size_t i = 0; i < p.layers.size(); ++i) {
    auto& layer = p.layers[i];
    h = tp.add(tp.matmul(h, tp.param(layer.weight)), tp.param(layer.bias));
    h = apply_act(tp, i + 1 < p.layers.size() ? p.hidden : p.output, h);
  }
  return h;
}

inline void mlp_collect(MlpParams& p, std::vector<Parameter*>& out) {
  for (auto& layer : p.layers) {
    out.push_back(&layer.weight);
    out.push_back(&layer.bias);
  }
}

// --- recurrent cells --------------------------------------------------------

enum class Cell { gru, lstm };

inline const char* cell_name(Cell c) { return c == Cell::gru ? "gru" : "lstm"; }
inline Cell cell_from_name(const std::string& s) {
  if (s == "gru") return Cell::gru;
  if (s == "lstm") return Cell::lstm;
  throw ConfigError("unknown cell '" + s + "'");
}

struct GruLayer {
  Parameter wz, uz, bz;
  Parameter wr, ur, br;
  Parameter wh, uh, bh;
};

struct LstmLayer {
  Parameter wi, ui, bi;
  Parameter wf, uf, bf;
  Parameter wg, ug, bg;
  Parameter wo, uo, bo;
};

struct RnnParams {
  Cell cell = Cell::gru;
  int input = 0;
  int hidden = 0;
  std::vector<GruLayer> gru;
  std::vector<LstmLayer> lstm;

  int layer_count() const {
    return static_cast<int>(cell == Cell::gru ? gru.size() : lstm.size());
  }
};

/// Per-layer hidden vectors (batch x H); `c` is used by LSTM cells only.
struct HiddenState {
  std::vector<Tensor> h;
  std::vector<Tensor> c;
};

inline RnnParams rnn_init(const std::string& prefix, Cell cell, int input, int hidden, int layers,
                          SeededRng& rng) {
  if (input <= 0 || hidden <= 0 || layers <= 0)
    throw ContractError("rnn_init: input, hidden and layer count must be positive");
  RnnParams p;
  p.cell = cell;
  p.input = input;
  p.hidden = hidden;
  auto glorot = [&](int rows, int cols) {
    const double limit = std::sqrt(6.0 / (rows + cols));
    Tensor w = Tensor::zeros({rows, cols});
    for (auto& v : w.data) v = rng.uniform(-limit, limit);
    return w;
  };
  for (int l = 0; l < layers; ++l) {
    const int in = l == 0 ? input : hidden;
    const std::string base = prefix + ".l" + std::to_string(l) + ".";
    auto gate = [&](const char* g, Parameter& w, Parameter& u, Parameter& b) {
      w = {base + "W" + g, glorot(in, hidden)};
      u = {base + "U" + g, glorot(hidden, hidden)};
      b = {base + "b" + g, Tensor::zeros({hidden})};
    };
    if (cell == Cell::gru) {
      GruLayer layer;
      gate("z", layer.wz, layer.uz, layer.bz);
      gate("r", layer.wr, layer.ur, layer.br);
      gate("h", layer.wh, layer.uh, layer.bh);
      p.gru.push_back(std::move(layer));
    } else {
      LstmLayer layer;
      gate("i", layer.wi, layer.ui, layer.bi);
      gate("f", layer.wf, layer.uf, layer.bf);
      gate("g", layer.wg, layer.ug, layer.bg);
      gate("o", layer.wo, layer.uo, layer.bo);
      p.lstm.push_back(std::move(layer));
    }
  }
  return p;
}

inline HiddenState rnn_zero_state(Tape& tp, const RnnParams& p, int batch) {
  HiddenState st;
  for (int l = 0; l < p.layer_count(); ++l) {
    st.h.push_back(tp.input(Tensor::zeros({batch, p.hidden})));
    if (p.cell == Cell::lstm) st.c.push_back(tp.input(Tensor::zeros({batch, p.hidden})));
  }
  return st;
}

/// One recurrent update. Layer l consumes layer l-1's output. GRU gates:
///   z = sigmoid(x Wz + h Uz + bz), r = sigmoid(x Wr + h Ur + br),
///   hcand = tanh(x Wh + (r*h) Uh + bh), h' = (1-z)*h + z*hcand.
inline HiddenState rnn_step(Tape& tp, RnnParams& p, const Tensor& x, const HiddenState& prev) {
  if (x.rank() != 2 || x.shape[1] != p.input)
    throw DimensionError("rnn_step: input shape " + shape_to_string(x.shape) +
                         " does not match input dim " + std::to_string(p.input));
  if (static_cast<int>(prev.h.size()) != p.layer_count())
    throw DimensionError("rnn_step: state has " + std::to_string(prev.h.size()) + " layers, cell has " +
                         std::to_string(p.layer_count()));
  HiddenState next;
  Tensor cur = x;
  for (int l = 0; l < p.layer_count(); ++l) {
    const Tensor& h = prev.h[static_cast<std::size_t>(l)];
    if (h.rank() != 2 || h.shape[1] != p.hidden || h.shape[0] != cur.shape[0])
      throw DimensionError("rnn_step: hidden state shape " + shape_to_string(h.shape) +
                           " inconsistent with input " + shape_to_string(cur.shape));
    auto affine = [&](Parameter& w, Parameter& u, Parameter& b, const Tensor& hin) {
      return tp.add(tp.add(tp.matmul(cur, tp.param(w)), tp.matmul(hin, tp.param(u))), tp.param(b));
    };
    if (p.cell == Cell::gru) {
      auto& ly = p.gru[static_cast<std::size_t>(l)];
      Tensor z = tp.sigmoid(affine(ly.wz, ly.uz, ly.bz, h));
      Tensor r = tp.sigmoid(affine(ly.wr, ly.ur, ly.br, h));
      Tensor rh = tp.mul(r, h);
      Tensor cand = tp.tanh(tp.add(
          tp.add(tp.matmul(cur, tp.param(ly.wh)), tp.matmul(rh, tp.param(ly.uh))), tp.param(ly.bh)));
      // h + z*(cand - h) == (1-z)*h + z*cand
      Tensor hn = tp.add(h, tp.mul(z, tp.sub(cand, h)));
      next.h.push_back(hn);
      cur = hn;
    } else {
      auto& ly = p.lstm[static_cast<std::size_t>(l)];
      const Tensor& c = prev.c[static_cast<std::size_t>(l)];
      Tensor i = tp.sigmoid(affine(ly.wi, ly.ui, ly.bi, h));
      Tensor f = tp.sigmoid(affine(ly.wf, ly.uf, ly.bf, h));
      Tensor gval = tp.tanh(affine(ly.wg, ly.ug, ly.bg, h));
      Tensor o = tp.sigmoid(affine(ly.wo, ly.uo, ly.bo, h));
      Tensor cn = tp.add(tp.mul(f, c), tp.mul(i, gval));
      Tensor hn = tp.mul(o, tp.tanh(cn));
      next.c.push_back(cn);
      next.h.push_back(hn);
      cur = hn;
    }
  }
  return next;
}

inline void rnn_collect(RnnParams& p, std::vector<Parameter*>& out) {
  for (auto& ly : p.gru)
    for (Parameter* q : {&ly.wz, &ly.uz, &ly.bz, &ly.wr, &ly.ur, &ly.br, &ly.wh, &ly.uh, &ly.bh})
      out.push_back(q);
  for (auto& ly : p.lstm)
    for (Parameter* q : {&ly.wi, &ly.ui, &ly.bi, &ly.wf, &ly.uf, &ly.bf, &ly.wg, &ly.ug, &ly.bg,
                         &ly.wo, &ly.uo, &ly.bo})
      out.push_back(q);
}

// --- optimizer ----------------------------------------------------------------

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  AdamConfig cfg;
  long long step = 0;
  std::map<std::string, Tensor> m;
  std::map<std::string, Tensor> v;
};

inline double gradient_global_norm(const GradientMap& grads) {
  double sq = 0.0;
  for (const auto& [name, g] : grads)
    for (double gv : g.data) sq += gv * gv;
  return std::sqrt(sq);
}

inline void clip_gradients(GradientMap& grads, double max_norm) {
  if (max_norm <= 0.0) return;
  const double norm = gradient_global_norm(grads);
  if (norm <= max_norm) return;
  const double s = max_norm / norm;
  for (auto& [name, g] : grads)
    for (double& gv : g.data) gv *= s;
}

/// Standard Adam with bias correction. Every parameter must have a gradient.
inline void adam_step(const std::vector<Parameter*>& params, const GradientMap& grads,
                      AdamState& st) {
  if (!(st.cfg.lr > 0.0) || !(st.cfg.beta1 > 0.0 && st.cfg.beta1 < 1.0) ||
      !(st.cfg.beta2 > 0.0 && st.cfg.beta2 < 1.0) || !(st.cfg.eps > 0.0))
    throw ContractError("adam_step: hyperparameters out of range");
  ++st.step;
  const double bc1 = 1.0 - std::pow(st.cfg.beta1, static_cast<double>(st.step));
  const double bc2 = 1.0 - std::pow(st.cfg.beta2, static_cast<double>(st.step));
  for (Parameter* p : params) {
    auto it = grads.find(p->name);
    if (it == grads.end()) throw ContractError("adam_step: missing gradient for '" + p->name + "'");
    const Tensor& g = it->second;
    if (g.shape != p->value.shape)
      throw DimensionError("adam_step: gradient shape " + shape_to_string(g.shape) +
                           " does not match parameter '" + p->name + "' shape " +
                           shape_to_string(p->value.shape));
    Tensor& m = st.m.try_emplace(p->name, Tensor::zeros(p->value.shape)).first->second;
    Tensor& v = st.v.try_emplace(p->name, Tensor::zeros(p->value.shape)).first->second;
    for (std::size_t i = 0; i < g.data.size(); ++i) {
      m.data[i] = st.cfg.beta1 * m.data[i] + (1.0 - st.cfg.beta1) * g.data[i];
      v.data[i] = st.cfg.beta2 * v.data[i] + (1.0 - st.cfg.beta2) * g.data[i] * g.data[i];
      const double mhat = m.data[i] / bc1;
      const double vhat = v.data[i] / bc2;
      p->value.data[i] -= st.cfg.lr * mhat / (std::sqrt(vhat) + st.cfg.eps);
    }
  }
}

}  // namespace latte
