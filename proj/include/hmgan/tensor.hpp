#pragma once

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <string>
#include <utility>
#include <vector>

#include "hmgan/errors.hpp"

namespace hmgan {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t extent : shape) n *= extent;
  return n;
}

inline std::string shape_str(const Shape& shape) {
  std::string out = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out += "x";
    out += std::to_string(shape[i]);
  }
  return out + "]";
}

/// Dense row-major tensor of 64-bit reals. Rank 0 is a scalar. Extents may
/// be zero (empty vectors arise as empty latent codes).
class Tensor {
 public:
  Tensor() : shape_{}, data_{0.0} {}

  Tensor(Shape shape, std::vector<double> data)
      : shape_(std::move(shape)), data_(std::move(data)) {
    if (shape_numel(shape_) != data_.size())
      throw DomainError("tensor data length " + std::to_string(data_.size()) +
                        " does not match shape " + shape_str(shape_));
  }

  static Tensor scalar(double v) { return Tensor(Shape{}, {v}); }

  static Tensor zeros(Shape shape) {
    std::vector<double> data(shape_numel(shape), 0.0);
    return Tensor(std::move(shape), std::move(data));
  }

  static Tensor full(Shape shape, double v) {
    std::vector<double> data(shape_numel(shape), v);
    return Tensor(std::move(shape), std::move(data));
  }

  static Tensor ones(Shape shape) { return full(std::move(shape), 1.0); }

  static Tensor vector(std::vector<double> data) {
    Shape shape{data.size()};
    return Tensor(std::move(shape), std::move(data));
  }

  static Tensor vector(std::initializer_list<double> data) {
    return vector(std::vector<double>(data));
  }

  static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> data) {
    return Tensor(Shape{rows, cols}, std::move(data));
  }

  /// Identity matrix scaled by c.
  static Tensor scaled_identity(std::size_t n, double c) {
    Tensor t = zeros({n, n});
    for (std::size_t i = 0; i < n; ++i) t.data_[i * n + i] = c;
    return t;
  }

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }
  bool is_scalar() const { return data_.size() == 1; }

  const std::vector<double>& data() const { return data_; }
  std::vector<double>& data() { return data_; }

  double operator[](std::size_t i) const { return data_[i]; }
  double& operator[](std::size_t i) { return data_[i]; }

  double at(std::size_t r, std::size_t c) const { return data_[r * shape_[1] + c]; }
  double& at(std::size_t r, std::size_t c) { return data_[r * shape_[1] + c]; }

  double scalar_value() const {
    if (!is_scalar()) throw DomainError("tensor " + shape_str(shape_) + " is not a scalar");
    return data_[0];
  }

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

  bool all_finite() const {
    for (double v : data_)
      if (!std::isfinite(v)) return false;
    return true;
  }

  bool operator==(const Tensor& other) const {
    return shape_ == other.shape_ && data_ == other.data_;
  }

 private:
  Shape shape_;
  std::vector<double> data_;
};

// ---- raw (graph-free) math used by evaluation paths -----------------------

namespace raw {

inline void check_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b)) throw ShapeError(op, shape_str(a.shape()), shape_str(b.shape()));
}

inline Tensor add(const Tensor& a, const Tensor& b) {
  check_same_shape("add", a, b);
  Tensor out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += b[i];
  return out;
}

inline Tensor sub(const Tensor& a, const Tensor& b) {
  check_same_shape("sub", a, b);
  Tensor out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b[i];
  return out;
}

inline Tensor scale(const Tensor& a, double c) {
  Tensor out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= c;
  return out;
}

/// [m x k]*[k x n] -> [m x n], or [m x k]*[k] -> [m].
inline Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || (b.rank() != 1 && b.rank() != 2) || a.shape()[1] != b.shape()[0])
    throw ShapeError("matmul", shape_str(a.shape()), shape_str(b.shape()));
  const std::size_t m = a.shape()[0], k = a.shape()[1];
  if (b.rank() == 1) {
    Tensor out = Tensor::zeros({m});
    for (std::size_t i = 0; i < m; ++i) {
      double acc = 0.0;
      for (std::size_t j = 0; j < k; ++j) acc += a.at(i, j) * b[j];
      out[i] = acc;
    }
    return out;
  }
  const std::size_t n = b.shape()[1];
  Tensor out = Tensor::zeros({m, n});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < k; ++j) {
      const double aij = a.at(i, j);
      for (std::size_t c = 0; c < n; ++c) out.at(i, c) += aij * b.at(j, c);
    }
  return out;
}

inline Tensor relu(const Tensor& a) {
  Tensor out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = out[i] > 0.0 ? out[i] : 0.0;
  return out;
}

inline Tensor tanh(const Tensor& a) {
  Tensor out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::tanh(out[i]);
  return out;
}

inline double l1_distance(const Tensor& a, const Tensor& b) {
  check_same_shape("l1_distance", a, b);
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += std::abs(a[i] - b[i]);
  return acc;
}

inline double squared_l2(const Tensor& a, const Tensor& b) {
  check_same_shape("squared_l2", a, b);
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    acc += d * d;
  }
  return acc;
}

}  // namespace raw
}  // namespace hmgan
