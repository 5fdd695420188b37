#pragma once

#include <Eigen/Core>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "altsg/errors.hpp"
#include "altsg/rng.hpp"

namespace altsg {

/// Dense row-major n-d array of real values. The single numeric currency of
/// the library: no views, no strides, no autodiff. Scalar is float or double.
template <class Scalar>
class Tensor {
 public:
  using Shape = std::vector<std::size_t>;

  Tensor() = default;

  explicit Tensor(Shape shape, Scalar fill = Scalar(0))
      : shape_(std::move(shape)), data_(count(shape_), fill) {
    for (std::size_t d : shape_)
      if (d == 0) throw DimensionError("zero-sized dimension in shape " + shape_str(shape_));
  }

  Tensor(Shape shape, std::vector<Scalar> data) : shape_(std::move(shape)), data_(std::move(data)) {
    if (count(shape_) != data_.size())
      throw DimensionError("shape " + shape_str(shape_) + " does not match data length " +
                           std::to_string(data_.size()));
  }

  static Tensor zeros(Shape shape) { return Tensor(std::move(shape)); }

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t i) const { return shape_.at(i); }
  std::size_t size() const { return data_.size(); }

  Scalar* data() { return data_.data(); }
  const Scalar* data() const { return data_.data(); }

  Scalar& operator[](std::size_t i) { return data_[i]; }
  Scalar operator[](std::size_t i) const { return data_[i]; }

  Scalar& operator()(std::size_t i, std::size_t j) { return data_[i * shape_[1] + j]; }
  Scalar operator()(std::size_t i, std::size_t j) const { return data_[i * shape_[1] + j]; }

  Scalar& operator()(std::size_t i, std::size_t j, std::size_t k) {
    return data_[(i * shape_[1] + j) * shape_[2] + k];
  }
  Scalar operator()(std::size_t i, std::size_t j, std::size_t k) const {
    return data_[(i * shape_[1] + j) * shape_[2] + k];
  }

  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

  /// Reinterpret as a different shape with the same element count.
  Tensor reshaped(Shape shape) const {
    if (count(shape) != data_.size())
      throw DimensionError("reshape to " + shape_str(shape) + " from " + shape_str(shape_));
    Tensor t;
    t.shape_ = std::move(shape);
    t.data_ = data_;
    return t;
  }

  static std::size_t count(const Shape& s) {
    return std::accumulate(s.begin(), s.end(), std::size_t{1}, std::multiplies<>());
  }

  static std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "x" : "") << s[i];
    os << ']';
    return os.str();
  }

 private:
  Shape shape_;
  std::vector<Scalar> data_;
};

template <class Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// View a rank-2 tensor as an Eigen row-major matrix (no copy).
template <class Scalar>
Eigen::Map<const MatrixX<Scalar>> as_matrix(const Tensor<Scalar>& t) {
  if (t.rank() != 2) throw DimensionError("expected rank-2 tensor, got " + Tensor<Scalar>::shape_str(t.shape()));
  return {t.data(), static_cast<Eigen::Index>(t.dim(0)), static_cast<Eigen::Index>(t.dim(1))};
}

template <class Scalar>
Eigen::Map<MatrixX<Scalar>> as_matrix(Tensor<Scalar>& t) {
  if (t.rank() != 2) throw DimensionError("expected rank-2 tensor, got " + Tensor<Scalar>::shape_str(t.shape()));
  return {t.data(), static_cast<Eigen::Index>(t.dim(0)), static_cast<Eigen::Index>(t.dim(1))};
}

/// View an arbitrary tensor as a rows x cols matrix over its contiguous data.
template <class Scalar>
Eigen::Map<const MatrixX<Scalar>> as_matrix(const Tensor<Scalar>& t, std::size_t rows, std::size_t cols) {
  if (rows * cols != t.size())
    throw DimensionError("cannot view " + Tensor<Scalar>::shape_str(t.shape()) + " as " +
                         std::to_string(rows) + "x" + std::to_string(cols));
  return {t.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols)};
}

template <class Scalar>
Eigen::Map<MatrixX<Scalar>> as_matrix(Tensor<Scalar>& t, std::size_t rows, std::size_t cols) {
  if (rows * cols != t.size())
    throw DimensionError("cannot view " + Tensor<Scalar>::shape_str(t.shape()) + " as " +
                         std::to_string(rows) + "x" + std::to_string(cols));
  return {t.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols)};
}

template <class Scalar>
void check_finite(const Tensor<Scalar>& t, const char* context) {
  for (std::size_t i = 0; i < t.size(); ++i)
    if (!std::isfinite(static_cast<double>(t[i])))
      throw NumericError(std::string(context) + ": non-finite value at flat index " + std::to_string(i));
}

template <class Scalar>
Tensor<Scalar> matmul(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0))
    throw DimensionError("matmul " + Tensor<Scalar>::shape_str(a.shape()) + " by " +
                         Tensor<Scalar>::shape_str(b.shape()));
  Tensor<Scalar> out({a.dim(0), b.dim(1)});
  as_matrix(out).noalias() = as_matrix(a) * as_matrix(b);
  check_finite(out, "matmul");
  return out;
}

namespace detail {
template <class Scalar, class F>
Tensor<Scalar> zip(const Tensor<Scalar>& a, const Tensor<Scalar>& b, F f, const char* name) {
  if (!a.same_shape(b))
    throw DimensionError(std::string(name) + " " + Tensor<Scalar>::shape_str(a.shape()) + " vs " +
                         Tensor<Scalar>::shape_str(b.shape()));
  Tensor<Scalar> out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = f(a[i], b[i]);
  return out;
}

template <class Scalar, class F>
Tensor<Scalar> map(const Tensor<Scalar>& a, F f) {
  Tensor<Scalar> out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = f(a[i]);
  return out;
}
}  // namespace detail

template <class Scalar>
Tensor<Scalar> add(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  return detail::zip(a, b, [](Scalar x, Scalar y) { return x + y; }, "add");
}

template <class Scalar>
Tensor<Scalar> sub(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  return detail::zip(a, b, [](Scalar x, Scalar y) { return x - y; }, "sub");
}

template <class Scalar>
Tensor<Scalar> mul(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  return detail::zip(a, b, [](Scalar x, Scalar y) { return x * y; }, "mul");
}

// Scalar broadcast variants (the only broadcasting the library supports).
template <class Scalar>
Tensor<Scalar> add(const Tensor<Scalar>& a, Scalar s) {
  return detail::map(a, [s](Scalar x) { return x + s; });
}

template <class Scalar>
Tensor<Scalar> mul(const Tensor<Scalar>& a, Scalar s) {
  return detail::map(a, [s](Scalar x) { return x * s; });
}

template <class Scalar>
Tensor<Scalar> sigmoid(const Tensor<Scalar>& a) {
  Tensor<Scalar> out = detail::map(a, [](Scalar x) { return Scalar(1) / (Scalar(1) + std::exp(-x)); });
  check_finite(out, "sigmoid");
  return out;
}

template <class Scalar>
Tensor<Scalar> tanh(const Tensor<Scalar>& a) {
  return detail::map(a, [](Scalar x) { return std::tanh(x); });
}

template <class Scalar>
Tensor<Scalar> oneminus(const Tensor<Scalar>& a) {
  return detail::map(a, [](Scalar x) { return Scalar(1) - x; });
}

template <class Scalar>
void add_inplace(Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  if (!a.same_shape(b))
    throw DimensionError("add_inplace " + Tensor<Scalar>::shape_str(a.shape()) + " vs " +
                         Tensor<Scalar>::shape_str(b.shape()));
  for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
}

template <class Scalar>
void scale_inplace(Tensor<Scalar>& a, Scalar s) {
  for (std::size_t i = 0; i < a.size(); ++i) a[i] *= s;
}

template <class Scalar>
Scalar sum(const Tensor<Scalar>& t) {
  Scalar s = 0;
  for (std::size_t i = 0; i < t.size(); ++i) s += t[i];
  return s;
}

template <class Scalar>
Scalar mean(const Tensor<Scalar>& t) {
  return sum(t) / static_cast<Scalar>(t.size());
}

namespace detail {
template <class Scalar, class Acc>
Tensor<Scalar> reduce_axis(const Tensor<Scalar>& t, std::size_t axis, Acc acc, const char* name) {
  if (axis >= t.rank())
    throw DimensionError(std::string(name) + ": axis " + std::to_string(axis) + " out of range for rank " +
                         std::to_string(t.rank()));
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= t.dim(i);
  for (std::size_t i = axis + 1; i < t.rank(); ++i) inner *= t.dim(i);
  const std::size_t n = t.dim(axis);

  typename Tensor<Scalar>::Shape out_shape;
  for (std::size_t i = 0; i < t.rank(); ++i)
    if (i != axis) out_shape.push_back(t.dim(i));
  if (out_shape.empty()) out_shape.push_back(1);

  Tensor<Scalar> out(out_shape);
  for (std::size_t o = 0; o < outer; ++o)
    for (std::size_t in = 0; in < inner; ++in) {
      const Scalar* base = t.data() + o * n * inner + in;
      out[o * inner + in] = acc(base, n, inner);
    }
  return out;
}
}  // namespace detail

template <class Scalar>
Tensor<Scalar> sum(const Tensor<Scalar>& t, std::size_t axis) {
  return detail::reduce_axis(t, axis,
                             [](const Scalar* p, std::size_t n, std::size_t stride) {
                               Scalar s = 0;
                               for (std::size_t i = 0; i < n; ++i) s += p[i * stride];
                               return s;
                             },
                             "sum");
}

template <class Scalar>
Tensor<Scalar> mean(const Tensor<Scalar>& t, std::size_t axis) {
  Tensor<Scalar> s = sum(t, axis);
  scale_inplace(s, Scalar(1) / static_cast<Scalar>(t.dim(axis)));
  return s;
}

/// Index of the maximum along an axis (first occurrence wins). Indices are
/// returned as Scalar values.
template <class Scalar>
Tensor<Scalar> max_index(const Tensor<Scalar>& t, std::size_t axis) {
  return detail::reduce_axis(t, axis,
                             [](const Scalar* p, std::size_t n, std::size_t stride) {
                               std::size_t best = 0;
                               for (std::size_t i = 1; i < n; ++i)
                                 if (p[i * stride] > p[best * stride]) best = i;
                               return static_cast<Scalar>(best);
                             },
                             "max-index");
}

template <class Scalar>
Tensor<Scalar> init_uniform(typename Tensor<Scalar>::Shape shape, double bound, RngState& rng) {
  if (!(bound > 0)) throw ParameterError("init_uniform bound must be positive, got " + std::to_string(bound));
  Tensor<Scalar> t(std::move(shape));
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = static_cast<Scalar>(rng.next_symmetric(bound));
  return t;
}

template <class Scalar>
double squared_norm(const Tensor<Scalar>& t) {
  double s = 0;
  for (std::size_t i = 0; i < t.size(); ++i) s += static_cast<double>(t[i]) * static_cast<double>(t[i]);
  return s;
}

}  // namespace altsg
