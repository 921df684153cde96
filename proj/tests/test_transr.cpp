#include <gtest/gtest.h>

#include <cmath>

#include "kgax/transr.hpp"
#include "support.hpp"

namespace kgax {
namespace {

// Two-dimensional model with entities e0=(1,0), e1=(1,1), e2=(0,0), e3=(0,1)
// and one relation.
ModelParameters<double> tiny(double w_scale, std::vector<double> relation) {
  ModelShape s{4, 1, 2, {}};
  auto p = ModelParameters<double>::zeros(s);
  const double rows[4][2] = {{1, 0}, {1, 1}, {0, 0}, {0, 1}};
  for (int e = 0; e < 4; ++e) {
    p.entity(e, 0) = rows[e][0];
    p.entity(e, 1) = rows[e][1];
  }
  p.relation(0, 0) = relation[0];
  p.relation(0, 1) = relation[1];
  p.projection(0, 0) = w_scale;
  p.projection(0, 3) = w_scale;
  return p;
}

TEST(TransRScore, HandValues) {
  EXPECT_DOUBLE_EQ(transr_score(tiny(1.0, {0, 1}), 0, 0, 1), 0.0);
  EXPECT_DOUBLE_EQ(transr_score(tiny(1.0, {0, 1}), 0, 0, 2), 2.0);
  EXPECT_DOUBLE_EQ(transr_score(tiny(2.0, {0, 0}), 0, 0, 3), 8.0);
}

TEST(TransRScore, NonNegativeOnRandomModels) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto p = init_parameters<double>(ModelShape{6, 3, 4, {}}, seed);
    for (EntityId h = 0; h < 6; ++h) EXPECT_GE(transr_score(p, h, seed % 3, (h + 1) % 6), 0.0);
  }
}

TEST(KgPairLoss, ClosedForms) {
  EXPECT_NEAR(kg_pair_term(3.0, 3.0), std::log(2.0), 1e-15);
  EXPECT_NEAR(kg_pair_term(0.0, 10.0), 4.5398899216870535e-05, 1e-15);
  EXPECT_EQ(kg_pair_term(0.0, 1e6), 0.0);
  EXPECT_NEAR(kg_pair_term(1e6, 0.0), 1e6, 1e-6);
  EXPECT_GT(kg_pair_term(5.0, 1.0, 0.0), kg_pair_term(1.0, 5.0, 0.0));
  // Equal scores: corrupting tail 1 into a copy of itself.
  const auto p = tiny(1.0, {0, 1});
  const KgQuad q{0, 0, 1, 1};
  EXPECT_NEAR(kg_pair_loss<double>(p, std::span(&q, 1), 0.0, nullptr), std::log(2.0), 1e-15);
  EXPECT_THROW(kg_pair_loss<double>(p, {}, 0.0, nullptr), Error);
}

TEST(KgPairLoss, GradientPassesFiniteDifferences) {
  auto p = init_parameters<double>(ModelShape{5, 2, 3, {}}, 4);
  const std::vector<KgQuad> batch{{0, 0, 1, 2}, {1, 1, 3, 4}, {2, 0, 4, 0}, {4, 1, 0, 3}};
  auto g = ModelParameters<double>::zeros(p.shape());
  kg_pair_loss<double>(p, batch, 0.5, &g);
  const GradCheckParam params[] = {{"entity", p.entity.values(), g.entity.values()},
                                   {"relation", p.relation.values(), g.relation.values()},
                                   {"projection", p.projection.values(), g.projection.values()}};
  const auto r = finite_diff_gradcheck([&] { return kg_pair_loss<double>(p, batch, 0.5, nullptr); }, params, 1e-4, 1e-5);
  EXPECT_TRUE(r.pass) << r.worst_parameter << "[" << r.worst_coordinate << "] " << r.max_relative_error;
}

TEST(KgPairLoss, UntouchedParametersGetZeroGradient) {
  const auto p = init_parameters<double>(ModelShape{6, 3, 3, {}}, 4);
  const std::vector<KgQuad> batch{{0, 0, 1, 2}};
  auto g = ModelParameters<double>::zeros(p.shape());
  kg_pair_loss<double>(p, batch, 0.0, &g);
  for (EntityId e : {3u, 4u, 5u}) {
    for (double v : g.entity.row(e)) EXPECT_EQ(v, 0.0);
  }
  for (RelationId r : {1u, 2u}) {
    for (double v : g.relation.row(r)) EXPECT_EQ(v, 0.0);
    for (double v : g.projection.row(r)) EXPECT_EQ(v, 0.0);
  }
}

CollaborativeKG toy_kg(std::size_t triples) {
  std::vector<Triple> t;
  for (std::size_t k = 0; k < triples; ++k) {
    t.push_back({static_cast<EntityId>(k % 10), static_cast<RelationId>(k % 2), static_cast<EntityId>((k * 3 + 1) % 10)});
  }
  return CollaborativeKG(10, 2, false, t);
}

TEST(KgEpoch, CoverageAndDeterminism) {
  const auto g = toy_kg(2);
  auto a = init_parameters<double>(ModelShape{10, 2, 4, {}}, 1);
  auto b = a;
  Optimizer<double> oa(a.shape()), ob(b.shape());
  Rng ra = make_rng(9, {}), rb = make_rng(9, {});
  KgEpochOptions o;
  o.batch_size = 1;
  const auto stats = kg_epoch(a, g, o, ra, oa);
  EXPECT_EQ(stats.quadruples, 2u);
  EXPECT_EQ(stats.batches, 2u);
  kg_epoch(b, g, o, rb, ob);
  EXPECT_EQ(a, b);
}

TEST(KgEpoch, LossHalvesOnToyKg) {
  const auto g = toy_kg(20);
  auto p = init_parameters<double>(ModelShape{10, 2, 8, {}}, 2);
  Optimizer<double> opt(p.shape());
  Rng rng = make_rng(3, {});
  KgEpochOptions o;
  o.batch_size = 5;
  o.lr = 0.01;
  const double first = kg_epoch(p, g, o, rng, opt).mean_loss;
  double last = first;
  for (int e = 1; e < 50; ++e) last = kg_epoch(p, g, o, rng, opt).mean_loss;
  EXPECT_LT(last, 0.5 * first);
}

}  // namespace
}  // namespace kgax
