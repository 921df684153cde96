#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <numeric>

#include "kgax/numeric.hpp"
#include "support.hpp"

namespace kgax {
namespace {

TEST(Xavier, WithinBoundAndDeterministic) {
  Rng a = make_rng(5, {1});
  Rng b = make_rng(5, {1});
  const auto m = xavier_init<double>(100, 100, a);
  const double bound = std::sqrt(6.0 / 200.0);
  for (double v : m.values()) {
    EXPECT_LE(std::abs(v), bound);
  }
  EXPECT_EQ(m, xavier_init<double>(100, 100, b));
}

TEST(Xavier, MeanNearZero) {
  Rng rng = make_rng(9, {});
  const auto m = xavier_init<double>(1000, 1000, rng);
  const double mean = std::accumulate(m.values().begin(), m.values().end(), 0.0) / static_cast<double>(m.size());
  EXPECT_LT(std::abs(mean), 0.005);
}

TEST(Xavier, ZeroShapeThrows) {
  Rng rng = make_rng(1, {});
  EXPECT_THROW(xavier_init<double>(0, 3, rng), Error);
}

TEST(LeakyRelu, Branches) {
  EXPECT_EQ(leaky_relu(3.0, 0.2), 3.0);
  EXPECT_DOUBLE_EQ(leaky_relu(-2.0, 0.2), -0.4);
  EXPECT_EQ(leaky_relu(0.0, 0.2), 0.0);
  EXPECT_EQ(leaky_relu_grad(1.5, 0.2), 1.0);
  EXPECT_EQ(leaky_relu_grad(-1.5, 0.2), 0.2);
  const std::vector<double> x{3.0, -2.0};
  EXPECT_THROW(leaky_relu<double>(x, 1.5), Error);
}

TEST(Softmax, HandValues) {
  const std::vector<double> zero{0.0, 0.0};
  const auto p = stable_softmax<double>(zero);
  EXPECT_DOUBLE_EQ(p[0], 0.5);
  EXPECT_DOUBLE_EQ(p[1], 0.5);
  const std::vector<double> logs{std::log(1.0), std::log(3.0)};
  const auto q = stable_softmax<double>(logs);
  EXPECT_NEAR(q[0], 0.25, 1e-12);
  EXPECT_NEAR(q[1], 0.75, 1e-12);
  const std::vector<double> big{1000.0, 1000.0};
  const auto r = stable_softmax<double>(big);
  EXPECT_DOUBLE_EQ(r[0], 0.5);
}

TEST(Softmax, RejectsEmptyAndNonFinite) {
  EXPECT_THROW(stable_softmax<double>(std::vector<double>{}), Error);
  const std::vector<double> nan{1.0, std::numeric_limits<double>::quiet_NaN()};
  EXPECT_THROW(stable_softmax<double>(nan), NumericError);
}

TEST(SoftmaxProperty, SumsToOneAndShiftInvariant) {
  Rng rng = make_rng(21, {});
  for (int trial = 0; trial < 200; ++trial) {
    const auto n = 1 + uniform_index(rng, 12);
    const auto logits = test::random_vector(n, rng, 1e4);
    const auto p = stable_softmax<double>(logits);
    EXPECT_NEAR(std::accumulate(p.begin(), p.end(), 0.0), 1.0, 1e-9);
    auto shifted = logits;
    const double c = 100.0 * (2.0 * uniform_unit(rng) - 1.0);
    for (auto& v : shifted) v += c;
    const auto ps = stable_softmax<double>(shifted);
    for (std::size_t i = 0; i < n; ++i) {
      EXPECT_GT(p[i], -1e-300);
      EXPECT_NEAR(p[i], ps[i], 1e-9);
    }
  }
}

TEST(Hadamard, Values) {
  const std::vector<double> a{1, 2}, b{3, 4}, ones{1, 1};
  EXPECT_EQ(hadamard<double>(a, b), (std::vector<double>{3, 8}));
  EXPECT_EQ(hadamard<double>(a, ones), a);
  EXPECT_EQ(hadamard<double>(a, b), hadamard<double>(b, a));
  EXPECT_THROW(hadamard<double>(a, std::vector<double>{1}), Error);
}

TEST(Dot, Values) {
  const std::vector<double> a{1, 2}, b{3, 4}, z{0, 0};
  EXPECT_EQ(dot<double>(a, b), 11.0);
  EXPECT_EQ(dot<double>(a, z), 0.0);
  Rng rng = make_rng(3, {});
  const auto r = test::random_vector(7, rng);
  EXPECT_GE(dot<double>(r, r), 0.0);
  EXPECT_THROW(dot<double>(a, std::vector<double>{1}), Error);
}

TEST(Affine, Values) {
  Matrix<double> eye(2, 2);
  eye(0, 0) = eye(1, 1) = 1.0;
  EXPECT_EQ(affine<double>(eye, std::vector<double>{5, 7}), (std::vector<double>{5, 7}));
  Matrix<double> ones(1, 3, 1.0);
  EXPECT_EQ(affine<double>(ones, std::vector<double>{2, 3, 4}), (std::vector<double>{9}));
  EXPECT_THROW(affine<double>(ones, std::vector<double>{2, 3}), Error);
}

// L = gᵀ(Wx) for a fixed random g, so dL/dW = g xᵀ and dL/dx = Wᵀ g.
TEST(AffineProperty, BackwardMatchesFiniteDifferences) {
  Rng rng = make_rng(77, {});
  for (int trial = 0; trial < 20; ++trial) {
    const auto rows = 1 + uniform_index(rng, 6);
    const auto cols = 1 + uniform_index(rng, 6);
    auto w = test::random_matrix(rows, cols, rng);
    auto x = test::random_vector(cols, rng);
    const auto g = test::random_vector(rows, rng);
    Matrix<double> gw(rows, cols);
    std::vector<double> gx(cols, 0.0);
    affine_backward<double>(w, x, g, &gw, gx);
    const auto loss = [&] { return dot<double>(g, affine<double>(w, x)); };
    const GradCheckParam params[] = {{"w", w.values(), gw.values()}, {"x", x, gx}};
    const auto report = finite_diff_gradcheck(loss, params, 1e-5, 1e-8);
    EXPECT_TRUE(report.pass) << report.max_relative_error;
  }
}

TEST(Softplus, StableValues) {
  EXPECT_NEAR(softplus_neg(0.0), std::log(2.0), 1e-15);
  EXPECT_NEAR(softplus_neg(10.0), 4.5398899216870535e-05, 1e-15);
  EXPECT_NEAR(softplus_neg(-800.0), 800.0, 1e-9);
  EXPECT_NEAR(softplus_neg(700.0), std::exp(-700.0), 1e-310);
  EXPECT_EQ(softplus_neg(800.0), 0.0);
  EXPECT_NEAR(sigmoid(0.0), 0.5, 1e-15);
}

TEST(Adam, ZeroGradientIsFixedPoint) {
  std::vector<double> p{1.0, -2.0};
  const std::vector<double> g{0.0, 0.0};
  AdamState<double> s(2, AdamHyper{});
  adam_step<double>(p, g, s, 1e-3, "p");
  EXPECT_EQ(p, (std::vector<double>{1.0, -2.0}));
  EXPECT_EQ(s.step, 1u);
}

// First step: m̂ = g, v̂ = g², so Δ = −lr·g/(|g| + ε).
TEST(Adam, FirstStepClosedForm) {
  std::vector<double> p{0.5};
  const std::vector<double> g{1.0};
  AdamState<double> s(1, AdamHyper{});
  adam_step<double>(p, g, s, 1e-3, "p");
  EXPECT_NEAR(p[0], 0.5 - 1e-3 / (1.0 + 1e-8), 1e-15);
}

TEST(Adam, IdenticalInputsIdenticalUpdates) {
  std::vector<double> a{0.3, 0.3};
  const std::vector<double> g{0.7, 0.7};
  AdamState<double> s(2, AdamHyper{});
  for (int i = 0; i < 5; ++i) adam_step<double>(a, g, s, 1e-2, "a");
  EXPECT_EQ(a[0], a[1]);
}

TEST(Adam, NonFiniteGradientNamesParameter) {
  std::vector<double> p{1.0};
  const std::vector<double> g{std::numeric_limits<double>::infinity()};
  AdamState<double> s(1, AdamHyper{});
  try {
    adam_step<double>(p, g, s, 1e-3, "layer1.w_triple");
    FAIL();
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("layer1.w_triple"), std::string::npos);
  }
  EXPECT_EQ(p[0], 1.0);
}

TEST(Gradcheck, QuadraticIsExact) {
  std::vector<double> theta{3.0};
  const std::vector<double> analytic{6.0};
  const GradCheckParam params[] = {{"theta", theta, analytic}};
  const auto r = finite_diff_gradcheck([&] { return theta[0] * theta[0]; }, params, 1e-5, 1e-9);
  EXPECT_TRUE(r.pass);
  EXPECT_LT(r.max_relative_error, 1e-9);
  EXPECT_EQ(theta[0], 3.0);
}

TEST(Gradcheck, WrongGradientFailsWithArgmax) {
  std::vector<double> theta{1.0, 2.0, -1.5};
  const std::vector<double> analytic{2.0 * 2.0, 2.0 * 4.0, 2.0 * -3.0};  // twice the true 2θ
  const GradCheckParam params[] = {{"theta", theta, analytic}};
  const auto loss = [&] { return theta[0] * theta[0] + theta[1] * theta[1] + theta[2] * theta[2]; };
  const auto r = finite_diff_gradcheck(loss, params, 1e-5, 1e-5);
  EXPECT_FALSE(r.pass);
  EXPECT_EQ(r.worst_parameter, "theta");
  EXPECT_LT(r.worst_coordinate, 3u);
  EXPECT_NEAR(r.max_relative_error, 1.0 / 3.0, 1e-6);
}

TEST(Gradcheck, RelativeErrorFloor) {
  EXPECT_EQ(relative_error(0.0, 0.0), 0.0);
  EXPECT_DOUBLE_EQ(relative_error(1.0, 3.0), 0.5);
}

TEST(RequireFinite, Throws) {
  const std::vector<double> ok{1.0, 2.0};
  EXPECT_NO_THROW(require_finite<double>(ok, "ok"));
  const std::vector<double> bad{1.0, std::numeric_limits<double>::infinity()};
  EXPECT_THROW(require_finite<double>(bad, "bad"), NumericError);
}

TEST(Rng, UniformIndexCoversRange) {
  Rng rng = make_rng(1, {2, 3});
  std::vector<int> seen(7, 0);
  for (int i = 0; i < 7000; ++i) ++seen[uniform_index(rng, 7)];
  for (int c : seen) EXPECT_GT(c, 800);
  EXPECT_NE(derive_seed(1, {2}), derive_seed(1, {3}));
  EXPECT_EQ(derive_seed(1, {2}), derive_seed(1, {2}));
}

}  // namespace
}  // namespace kgax
