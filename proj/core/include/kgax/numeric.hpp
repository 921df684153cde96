#pragma once

// Dense primitives, initialization, Adam and the finite-difference gradient
// check. Every analytic gradient in the library is validated through
// finite_diff_gradcheck.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "kgax/error.hpp"
#include "kgax/rng.hpp"

namespace kgax {

/// Row-major dense matrix. A vector is a matrix with one row.
template <typename T>
class Matrix {
 public:
  using value_type = T;

  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, T fill = T{0})
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  T& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  const T& operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<T> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const T> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::span<T> values() noexcept { return data_; }
  std::span<const T> values() const noexcept { return data_; }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<T> data_;
};

/// Raises NumericError if any element is NaN or infinite.
template <typename T>
void require_finite(std::span<const T> values, const std::string& what);

/// Uniform in [-b, b] with b = sqrt(6 / (rows + cols)).
template <typename T>
Matrix<T> xavier_init(std::size_t rows, std::size_t cols, Rng& rng);

template <typename T>
T leaky_relu(T x, T slope) {
  return x >= T{0} ? x : slope * x;
}
template <typename T>
T leaky_relu_grad(T x, T slope) {
  return x >= T{0} ? T{1} : slope;
}
template <typename T>
std::vector<T> leaky_relu(std::span<const T> x, T slope);

/// Max-subtracted softmax. Throws on empty or non-finite input.
template <typename T>
std::vector<T> stable_softmax(std::span<const T> logits);

template <typename T>
std::vector<T> hadamard(std::span<const T> a, std::span<const T> b);

template <typename T>
T dot(std::span<const T> a, std::span<const T> b);

/// y = W x written into `out` (length W.rows()).
template <typename T>
void affine_into(const Matrix<T>& w, std::span<const T> x, std::span<T> out);

template <typename T>
std::vector<T> affine(const Matrix<T>& w, std::span<const T> x);

/// Backward of y = W x: grad_w += g xᵀ and grad_x += Wᵀ g. Either sink may be empty.
template <typename T>
void affine_backward(const Matrix<T>& w, std::span<const T> x, std::span<const T> upstream,
                     Matrix<T>* grad_w, std::span<T> grad_x);

/// −ln σ(x) computed without overflow.
double softplus_neg(double x);
/// σ(x).
double sigmoid(double x);

struct AdamHyper {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

template <typename T>
struct AdamState {
  std::vector<T> first_moment;
  std::vector<T> second_moment;
  std::uint64_t step = 0;
  AdamHyper hyper;

  AdamState() = default;
  AdamState(std::size_t n, AdamHyper h) : first_moment(n, T{0}), second_moment(n, T{0}), hyper(h) {}
};

/// One bias-corrected Adam update. Throws NumericError naming `name` when a
/// gradient is not finite (parameters are left untouched in that case).
template <typename T>
void adam_step(std::span<T> params, std::span<const T> grads, AdamState<T>& state, double lr,
               const std::string& name);

/// A parameter block exposed to the gradient checker: mutable values plus the
/// analytic gradient computed at the current point.
struct GradCheckParam {
  std::string name;
  std::span<double> values;
  std::span<const double> analytic;
};

struct GradCheckEntry {
  std::string name;
  double max_relative_error = 0.0;
  std::size_t argmax = 0;
  double analytic_at_argmax = 0.0;
  double numeric_at_argmax = 0.0;
  std::size_t coordinates = 0;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  double tolerance = 0.0;
  double max_relative_error = 0.0;
  std::string worst_parameter;
  std::size_t worst_coordinate = 0;
  bool pass = false;
};

double relative_error(double analytic, double numeric);

/// Central differences (f(θ+h) − f(θ−h)) / 2h per coordinate, compared with
/// the analytic gradients. `loss` is evaluated with the perturbed values in place.
GradCheckReport finite_diff_gradcheck(const std::function<double()>& loss,
                                      std::span<const GradCheckParam> params, double h, double tol);

}  // namespace kgax
