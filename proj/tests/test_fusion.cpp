#include <gtest/gtest.h>

#include "kgax/fusion.hpp"
#include "support.hpp"

namespace kgax {
namespace {

using Spans = std::vector<std::span<const double>>;

TEST(Fuse, HandValues) {
  const std::vector<double> e{1, 2};
  EXPECT_EQ(fuse_entity_embedding<double>(e, Spans{}), e);
  const std::vector<double> a{2, 0.5};
  EXPECT_EQ(fuse_entity_embedding<double>(e, Spans{a}), (std::vector<double>{2, 1}));
  const std::vector<double> ones{1, 1}, a1{1, 1}, a3{3, 3};
  EXPECT_EQ(fuse_entity_embedding<double>(ones, Spans{a1, a3}), (std::vector<double>{2, 2}));
  EXPECT_EQ(fuse_entity_embedding<double>(e, Spans{ones}), e);
  const std::vector<double> bad{1};
  EXPECT_THROW(fuse_entity_embedding<double>(e, Spans{bad}), Error);
}

TEST(Fuse, BackwardPassesFiniteDifferences) {
  Rng rng = make_rng(12, {});
  auto e = test::random_vector(5, rng);
  auto a = test::random_vector(5, rng);
  auto b = test::random_vector(5, rng);
  auto c = test::random_vector(5, rng);
  const auto up = test::random_vector(5, rng);
  std::vector<double> ge(5, 0.0), ga(5, 0.0), gb(5, 0.0), gc(5, 0.0);
  fuse_entity_embedding_backward<double>(e, Spans{a, b, c}, up, ge, std::vector<std::span<double>>{ga, gb, gc});
  const auto loss = [&] {
    const auto y = fuse_entity_embedding<double>(e, Spans{a, b, c});
    double s = 0.0;
    for (std::size_t j = 0; j < y.size(); ++j) s += y[j] * up[j];
    return s;
  };
  const GradCheckParam params[] = {{"e", e, ge}, {"a", a, ga}, {"b", b, gb}, {"c", c, gc}};
  EXPECT_TRUE(finite_diff_gradcheck(loss, params, 1e-5, 1e-5).pass);
}

TEST(FuseBase, RowsWithoutTokensUnchanged) {
  Rng rng = make_rng(2, {});
  const auto table = test::random_matrix(5, 3, rng);
  const AuxiliaryMap aux{{1, {3, 4}}};
  const FusionIndex index(aux, 5);
  const auto fused = fuse_base(table, index);
  for (std::size_t r : {0u, 2u, 3u, 4u}) {
    for (std::size_t j = 0; j < 3; ++j) EXPECT_EQ(fused(r, j), table(r, j));
  }
  for (std::size_t j = 0; j < 3; ++j) {
    EXPECT_DOUBLE_EQ(fused(1, j), table(1, j) * (table(3, j) + table(4, j)) / 2.0);
  }
  EXPECT_EQ(fuse_base(table, FusionIndex(AuxiliaryMap{}, 5)), table);
}

TEST(FuseBase, BackwardPassesFiniteDifferences) {
  Rng rng = make_rng(3, {});
  auto table = test::random_matrix(6, 4, rng);
  const auto up = test::random_matrix(6, 4, rng);
  const FusionIndex index(AuxiliaryMap{{0, {4, 5}}, {2, {5}}, {4, {5}}}, 6);
  Matrix<double> g(6, 4);
  fuse_base_backward(table, index, up, g);
  const auto loss = [&] {
    const auto y = fuse_base(table, index);
    double s = 0.0;
    for (std::size_t k = 0; k < y.size(); ++k) s += y.values()[k] * up.values()[k];
    return s;
  };
  const GradCheckParam params[] = {{"entity", table.values(), g.values()}};
  const auto r = finite_diff_gradcheck(loss, params, 1e-5, 1e-5);
  EXPECT_TRUE(r.pass) << r.max_relative_error;
}

TEST(AugmentedTriples, Counting) {
  EXPECT_EQ(build_augmented_triples(AuxiliaryMap{{0, {5, 6}}}).size(), 2u);
  EXPECT_TRUE(build_augmented_triples(AuxiliaryMap{}).empty());
  const auto shared = build_augmented_triples(AuxiliaryMap{{0, {7}}, {1, {7}}});
  ASSERT_EQ(shared.size(), 2u);
  EXPECT_EQ(shared[0], (Triple{0, kHasAux, 7}));
  EXPECT_EQ(shared[1], (Triple{1, kHasAux, 7}));
}

}  // namespace
}  // namespace kgax
