#include "kgax/numeric.hpp"

#include <cmath>

namespace kgax {

namespace {

void require_same(std::size_t a, std::size_t b, const char* op) {
  if (a != b) {
    throw Error(std::string(op) + ": shape mismatch (" + std::to_string(a) + " vs " +
                std::to_string(b) + ")");
  }
}

}  // namespace

template <typename T>
void require_finite(std::span<const T> values, const std::string& what) {
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) {
      throw NumericError(what + ": non-finite value at index " + std::to_string(i));
    }
  }
}

template <typename T>
Matrix<T> xavier_init(std::size_t rows, std::size_t cols, Rng& rng) {
  if (rows == 0 || cols == 0) throw Error("xavier_init: zero-sized shape");
  const double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
  Matrix<T> m(rows, cols);
  for (auto& v : m.values()) v = static_cast<T>((2.0 * uniform_unit(rng) - 1.0) * bound);
  return m;
}

template <typename T>
std::vector<T> leaky_relu(std::span<const T> x, T slope) {
  if (!(slope > T{0} && slope < T{1})) throw Error("leaky_relu: slope must lie in (0,1)");
  std::vector<T> y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = leaky_relu(x[i], slope);
  require_finite<T>(y, "leaky_relu");
  return y;
}

template <typename T>
std::vector<T> stable_softmax(std::span<const T> logits) {
  if (logits.empty()) throw Error("stable_softmax: empty input");
  require_finite(logits, "stable_softmax input");
  T max = logits[0];
  for (auto v : logits) max = std::max(max, v);
  std::vector<T> out(logits.size());
  T total{0};
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - max);
    total += out[i];
  }
  for (auto& v : out) v /= total;
  return out;
}

template <typename T>
std::vector<T> hadamard(std::span<const T> a, std::span<const T> b) {
  require_same(a.size(), b.size(), "hadamard");
  std::vector<T> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] * b[i];
  require_finite<T>(out, "hadamard");
  return out;
}

template <typename T>
T dot(std::span<const T> a, std::span<const T> b) {
  require_same(a.size(), b.size(), "dot");
  T s{0};
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  if (!std::isfinite(s)) throw NumericError("dot: non-finite result");
  return s;
}

template <typename T>
void affine_into(const Matrix<T>& w, std::span<const T> x, std::span<T> out) {
  require_same(w.cols(), x.size(), "affine");
  require_same(w.rows(), out.size(), "affine output");
  for (std::size_t r = 0; r < w.rows(); ++r) {
    const auto wr = w.row(r);
    T s{0};
    for (std::size_t c = 0; c < wr.size(); ++c) s += wr[c] * x[c];
    out[r] = s;
  }
  require_finite<T>(out, "affine");
}

template <typename T>
std::vector<T> affine(const Matrix<T>& w, std::span<const T> x) {
  std::vector<T> out(w.rows());
  affine_into<T>(w, x, out);
  return out;
}

template <typename T>
void affine_backward(const Matrix<T>& w, std::span<const T> x, std::span<const T> upstream,
                     Matrix<T>* grad_w, std::span<T> grad_x) {
  require_same(w.cols(), x.size(), "affine_backward");
  require_same(w.rows(), upstream.size(), "affine_backward upstream");
  if (grad_w != nullptr) {
    require_same(grad_w->size(), w.size(), "affine_backward grad_w");
    for (std::size_t r = 0; r < w.rows(); ++r) {
      const T g = upstream[r];
      if (g == T{0}) continue;
      auto gr = grad_w->row(r);
      for (std::size_t c = 0; c < x.size(); ++c) gr[c] += g * x[c];
    }
  }
  if (!grad_x.empty()) {
    require_same(grad_x.size(), x.size(), "affine_backward grad_x");
    for (std::size_t r = 0; r < w.rows(); ++r) {
      const T g = upstream[r];
      if (g == T{0}) continue;
      const auto wr = w.row(r);
      for (std::size_t c = 0; c < wr.size(); ++c) grad_x[c] += wr[c] * g;
    }
  }
}

double softplus_neg(double x) {
  // −ln σ(x) = ln(1 + e^{−x})
  return x >= 0.0 ? std::log1p(std::exp(-x)) : -x + std::log1p(std::exp(x));
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

template <typename T>
void adam_step(std::span<T> params, std::span<const T> grads, AdamState<T>& state, double lr,
               const std::string& name) {
  require_same(params.size(), grads.size(), "adam_step");
  require_same(params.size(), state.first_moment.size(), "adam_step state");
  for (std::size_t i = 0; i < grads.size(); ++i) {
    if (!std::isfinite(grads[i])) {
      throw NumericError("adam_step: non-finite gradient for parameter '" + name + "' at index " +
                         std::to_string(i));
    }
  }
  ++state.step;
  const auto& h = state.hyper;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(h.beta1, t);
  const double correction2 = 1.0 - std::pow(h.beta2, t);
  const T b1 = static_cast<T>(h.beta1);
  const T b2 = static_cast<T>(h.beta2);
  const T step_size = static_cast<T>(lr / correction1);
  const T inv_sqrt_c2 = static_cast<T>(1.0 / std::sqrt(correction2));
  const T eps = static_cast<T>(h.epsilon);
  auto& m = state.first_moment;
  auto& v = state.second_moment;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const T g = grads[i];
    m[i] = b1 * m[i] + (T{1} - b1) * g;
    v[i] = b2 * v[i] + (T{1} - b2) * g * g;
    if (m[i] == T{0}) continue;
    params[i] -= step_size * m[i] / (std::sqrt(v[i]) * inv_sqrt_c2 + eps);
  }
}

double relative_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max(1e-12, std::abs(analytic) + std::abs(numeric));
}

GradCheckReport finite_diff_gradcheck(const std::function<double()>& loss,
                                      std::span<const GradCheckParam> params, double h, double tol) {
  GradCheckReport report;
  report.tolerance = tol;
  const double base = loss();
  if (!std::isfinite(base)) throw NumericError("gradcheck: non-finite loss at the base point");
  for (const auto& p : params) {
    require_same(p.values.size(), p.analytic.size(), "gradcheck");
    GradCheckEntry entry;
    entry.name = p.name;
    entry.coordinates = p.values.size();
    for (std::size_t i = 0; i < p.values.size(); ++i) {
      const double saved = p.values[i];
      p.values[i] = saved + h;
      const double plus = loss();
      p.values[i] = saved - h;
      const double minus = loss();
      p.values[i] = saved;
      if (!std::isfinite(plus) || !std::isfinite(minus)) {
        throw NumericError("gradcheck: non-finite loss probing " + p.name + "[" +
                           std::to_string(i) + "]");
      }
      const double numeric = (plus - minus) / (2.0 * h);
      const double err = relative_error(p.analytic[i], numeric);
      if (i == 0 || err > entry.max_relative_error) {
        entry.max_relative_error = err;
        entry.argmax = i;
        entry.analytic_at_argmax = p.analytic[i];
        entry.numeric_at_argmax = numeric;
      }
    }
    if (report.entries.empty() || entry.max_relative_error > report.max_relative_error) {
      report.max_relative_error = entry.max_relative_error;
      report.worst_parameter = entry.name;
      report.worst_coordinate = entry.argmax;
    }
    report.entries.push_back(std::move(entry));
  }
  report.pass = report.max_relative_error < tol;
  return report;
}

#define KGAX_INSTANTIATE_NUMERIC(T)                                                              \
  template void require_finite<T>(std::span<const T>, const std::string&);                      \
  template Matrix<T> xavier_init<T>(std::size_t, std::size_t, Rng&);                           \
  template std::vector<T> leaky_relu<T>(std::span<const T>, T);                                 \
  template std::vector<T> stable_softmax<T>(std::span<const T>);                                \
  template std::vector<T> hadamard<T>(std::span<const T>, std::span<const T>);                  \
  template T dot<T>(std::span<const T>, std::span<const T>);                                    \
  template void affine_into<T>(const Matrix<T>&, std::span<const T>, std::span<T>);             \
  template std::vector<T> affine<T>(const Matrix<T>&, std::span<const T>);                      \
  template void affine_backward<T>(const Matrix<T>&, std::span<const T>, std::span<const T>,    \
                                   Matrix<T>*, std::span<T>);                                   \
  template void adam_step<T>(std::span<T>, std::span<const T>, AdamState<T>&, double,           \
                             const std::string&);

KGAX_INSTANTIATE_NUMERIC(float)
KGAX_INSTANTIATE_NUMERIC(double)

}  // namespace kgax
