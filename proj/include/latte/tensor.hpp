#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "latte/errors.hpp"

namespace latte {

using Shape = std::vector<int>;

inline long long shape_numel(const Shape& s) {
  long long n = 1;
  for (int d : s) n *= d;
  return n;
}

inline std::string shape_to_string(const Shape& s) {
  std::string out = "[";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += ", ";
    out += std::to_string(s[i]);
  }
  return out + "]";
}

/// Dense row-major tensor of 64-bit floats. A tensor is a plain value;
/// `node`/`tape_tag` are set when the tensor was produced by (or registered
/// with) a Tape and identify its position in that tape's record.
struct Tensor {
  Shape shape;
  std::vector<double> data;
  int node = -1;
  std::uint64_t tape_tag = 0;

  Tensor() = default;
  Tensor(Shape s, std::vector<double> d) : shape(std::move(s)), data(std::move(d)) {
    for (int dim : shape)
      if (dim < 0) throw DimensionError("negative dimension in shape " + shape_to_string(shape));
    if (shape_numel(shape) != static_cast<long long>(data.size()))
      throw DimensionError("shape " + shape_to_string(shape) + " does not match " +
                           std::to_string(data.size()) + " values");
  }

  static Tensor zeros(Shape s) {
    auto n = shape_numel(s);
    return Tensor(std::move(s), std::vector<double>(static_cast<std::size_t>(n), 0.0));
  }
  static Tensor full(Shape s, double v) {
    auto n = shape_numel(s);
    return Tensor(std::move(s), std::vector<double>(static_cast<std::size_t>(n), v));
  }
  static Tensor scalar(double v) { return Tensor({1}, {v}); }
  static Tensor row(std::vector<double> v) {
    int n = static_cast<int>(v.size());
    return Tensor({n}, std::move(v));
  }
  static Tensor matrix(int rows, int cols, std::vector<double> v) {
    return Tensor({rows, cols}, std::move(v));
  }

  int rank() const { return static_cast<int>(shape.size()); }
  long long size() const { return static_cast<long long>(data.size()); }
  int dim(int i) const { return shape[static_cast<std::size_t>(i)]; }
  int last_dim() const { return shape.empty() ? 1 : shape.back(); }

  double value() const {
    if (data.size() != 1)
      throw ContractError("value() on non-scalar tensor of shape " + shape_to_string(shape));
    return data[0];
  }

  double& at(int i, int j) {
    if (rank() != 2) throw DimensionError("at(i,j) needs a rank-2 tensor");
    return data[static_cast<std::size_t>(i) * shape[1] + j];
  }
  double at(int i, int j) const { return const_cast<Tensor*>(this)->at(i, j); }

  bool all_finite() const {
    for (double v : data)
      if (!std::isfinite(v)) return false;
    return true;
  }

  /// Same values, detached from any tape.
  Tensor detached() const {
    Tensor t;
    t.shape = shape;
    t.data = data;
    return t;
  }
};

/// A named trainable tensor. Names are unique within a model and are the
/// keys used by gradient maps, the optimizer, and checkpoints.
struct Parameter {
  std::string name;
  Tensor value;
};

}  // namespace latte
