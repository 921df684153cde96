#include <gtest/gtest.h>

#include <algorithm>
#include <fstream>
#include <set>

#include "kgax/graph.hpp"
#include "support.hpp"

namespace kgax {
namespace {

TEST(LoadInteractions, CountsAndDedup) {
  const auto r = parse_interactions("u1\ti1\nu1\ti2\n");
  EXPECT_EQ(r.pairs.size(), 2u);
  EXPECT_EQ(r.users.size(), 1u);
  EXPECT_EQ(r.items.size(), 2u);
  EXPECT_EQ(parse_interactions("u1\ti1\nu1\ti1\n").pairs.size(), 1u);
  const auto c = parse_interactions("# header\n\nu2\ti9\n");
  EXPECT_EQ(c.pairs.size(), 1u);
}

TEST(LoadInteractions, MalformedLineReportsLine) {
  try {
    parse_interactions("u1\n");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 1u);
  }
  EXPECT_THROW(parse_interactions(""), ParseError);
}

TEST(LoadInteractions, FromFile) {
  const auto dir = test::scratch_dir("interactions");
  std::ofstream(dir / "interactions.tsv") << "a\tx\nb\ty\n";
  EXPECT_EQ(load_interactions(dir / "interactions.tsv").pairs.size(), 2u);
  EXPECT_THROW(load_interactions(dir / "missing.tsv"), Error);
}

TEST(LoadKg, CountsDedupAndErrors) {
  EXPECT_EQ(parse_kg_triples("a\tr\tb\nb\tr\tc\nc\tr\td\nd\tr\te\ne\tr\ta\n").triples.size(), 5u);
  EXPECT_EQ(parse_kg_triples("a\tr\tb\na\tr\tb\n").triples.size(), 1u);
  EXPECT_THROW(parse_kg_triples("a\tb\n"), ParseError);
}

TEST(LoadAuxiliary, BuildsMap) {
  auto d = make_dataset("u\te1\n", "", "", "", DatasetOptions{});
  const auto aux = parse_auxiliary("e1\tgenre:war\ne1\tyear:1970\n", d.index);
  ASSERT_EQ(aux.size(), 1u);
  const auto e1 = *d.index.resolve_entity("e1");
  ASSERT_EQ(aux.at(e1).size(), 2u);
  EXPECT_EQ(d.index.entity_name(aux.at(e1)[0]), "genre:war");
  EXPECT_EQ(d.index.entity_name(aux.at(e1)[1]), "year:1970");
  EXPECT_EQ(d.index.kind(aux.at(e1)[0]), EntityIndex::Kind::Token);
  EXPECT_TRUE(parse_auxiliary("", d.index).empty());
}

TEST(LoadAuxiliary, UnknownEntityNamed) {
  auto d = make_dataset("u\te1\n", "", "", "", DatasetOptions{});
  try {
    parse_auxiliary("eX\tt\n", d.index);
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("eX"), std::string::npos);
  }
}

TEST(EntityIndex, GlobalLayoutIsBijective) {
  const auto d = make_dataset("u0\ti0\nu1\ti1\n", "i0\tr\tk0\nk0\tr\tk1\n", "i0\ti0\n", "i1\tt0\n", DatasetOptions{});
  const auto& ix = d.index;
  EXPECT_EQ(ix.user_count(), 2u);
  EXPECT_EQ(ix.item_count(), 2u);
  EXPECT_EQ(ix.entity_count(), 2u + 2u + 2u + 1u);
  std::set<std::string> names;
  for (EntityId e = 0; e < ix.entity_count(); ++e) names.insert(ix.entity_name(e));
  EXPECT_EQ(names.size(), ix.entity_count());
  EXPECT_EQ(*ix.resolve_entity("i0"), ix.item_entity(0));
  EXPECT_EQ(ix.kind(*ix.resolve_entity("k1")), EntityIndex::Kind::KgEntity);
}

TEST(Split, TenInteractions) {
  std::vector<std::pair<UserId, ItemId>> pairs;
  for (ItemId i = 0; i < 10; ++i) pairs.push_back({0, i});
  const auto d = split_interactions(pairs, 1, 10, 42);
  EXPECT_EQ(d.user(0).train.size(), 7u);
  EXPECT_EQ(d.user(0).validation.size(), 1u);
  EXPECT_EQ(d.user(0).test.size(), 2u);
}

TEST(Split, SingleInteraction) {
  const std::vector<std::pair<UserId, ItemId>> pairs{{0, 3}};
  const auto d = split_interactions(pairs, 1, 5, 1);
  EXPECT_EQ(d.user(0).train, (std::vector<ItemId>{3}));
  EXPECT_TRUE(d.user(0).validation.empty());
  EXPECT_TRUE(d.user(0).test.empty());
}

TEST(Split, UserWithoutInteractionsThrows) {
  const std::vector<std::pair<UserId, ItemId>> pairs{{0, 0}};
  EXPECT_THROW(split_interactions(pairs, 2, 2, 1), DataError);
}

TEST(SplitProperty, PartitionAndSizes) {
  Rng rng = make_rng(5, {});
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t users = 1 + uniform_index(rng, 5), items = 40;
    std::vector<std::pair<UserId, ItemId>> pairs;
    std::vector<std::size_t> n(users);
    for (UserId u = 0; u < users; ++u) {
      n[u] = 1 + uniform_index(rng, 30);
      std::vector<ItemId> all(items);
      for (ItemId i = 0; i < items; ++i) all[i] = i;
      shuffle(all.begin(), all.end(), rng);
      for (std::size_t k = 0; k < n[u]; ++k) pairs.push_back({u, all[k]});
    }
    const auto seed = rng();
    const auto d = split_interactions(pairs, users, items, seed);
    const auto again = split_interactions(pairs, users, items, seed);
    for (UserId u = 0; u < users; ++u) {
      const auto& s = d.user(u);
      EXPECT_EQ(s.train, again.user(u).train);
      EXPECT_EQ(s.test, again.user(u).test);
      const auto pool = (8 * n[u] + 9) / 10;
      EXPECT_EQ(s.test.size(), n[u] - pool);
      EXPECT_GE(s.train.size(), 1u);
      std::set<ItemId> all;
      for (const auto* part : {&s.train, &s.validation, &s.test}) all.insert(part->begin(), part->end());
      EXPECT_EQ(all.size(), n[u]);
      EXPECT_EQ(s.train.size() + s.validation.size() + s.test.size(), n[u]);
    }
  }
}

InteractionDataset train_only(std::size_t items, std::vector<std::vector<ItemId>> train) {
  std::vector<UserSplit> users;
  for (auto& t : train) users.push_back(UserSplit{std::move(t), {}, {}});
  return InteractionDataset(items, std::move(users));
}

TEST(BuildCkg, CountingRule) {
  // 3 users, 3 items, 2 KG entities; 5 KG triples and 3 interactions.
  const auto data = train_only(3, {{0}, {1}, {2}});
  const std::size_t entities = 8;
  const std::vector<Triple> kg{{3, 2, 6}, {4, 2, 6}, {5, 2, 7}, {6, 3, 7}, {3, 3, 7}};
  const auto g = build_ckg(kg, data, {}, entities, 4, GraphOptions{true, false});
  EXPECT_EQ(g.triple_count(), 16u);
  EXPECT_EQ(g.relation_count(), 8u);
  for (const auto& t : kg) EXPECT_TRUE(g.contains({t.tail, g.inverse_of(t.relation), t.head}));
}

TEST(BuildCkg, MinimalGraph) {
  const auto data = train_only(1, {{0}});
  const auto g = build_ckg({}, data, {}, 2, 2, GraphOptions{false, false});
  ASSERT_EQ(g.triple_count(), 1u);
  ASSERT_EQ(g.neighbors_of(0).size(), 1u);
  EXPECT_EQ(g.neighbors_of(0)[0], (Triple{0, kInteract, 1}));
}

TEST(BuildCkg, AuxAddsFourWithInverses) {
  const auto data = train_only(1, {{0}});
  const AuxiliaryMap aux{{1, {2, 3}}};
  const auto off = build_ckg({}, data, aux, 4, 2, GraphOptions{true, false});
  const auto on = build_ckg({}, data, aux, 4, 2, GraphOptions{true, true});
  EXPECT_EQ(on.triple_count(), off.triple_count() + 4);
}

// Brute-force oracle: the set union of the inclusion rule, and a linear scan for N_h.
TEST(BuildCkgProperty, MatchesSetUnionAndLinearScan) {
  Rng rng = make_rng(11, {});
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t users = 1 + uniform_index(rng, 4), items = 1 + uniform_index(rng, 4);
    const std::size_t extra = uniform_index(rng, 4), base_rel = 3 + uniform_index(rng, 2);
    const std::size_t entities = users + items + extra;
    std::vector<std::vector<ItemId>> train(users);
    for (auto& t : train) {
      for (ItemId i = 0; i < items; ++i) {
        if (uniform_unit(rng) < 0.5) t.push_back(i);
      }
    }
    const auto data = train_only(items, train);
    std::vector<Triple> kg;
    const auto kg_count = uniform_index(rng, 10);
    for (std::size_t k = 0; k < kg_count; ++k) {
      kg.push_back({static_cast<EntityId>(uniform_index(rng, entities)),
                    static_cast<RelationId>(2 + uniform_index(rng, base_rel - 2)),
                    static_cast<EntityId>(uniform_index(rng, entities))});
    }
    AuxiliaryMap aux;
    if (uniform_unit(rng) < 0.5) aux[static_cast<EntityId>(uniform_index(rng, entities))] = {static_cast<EntityId>(entities - 1)};
    const bool inverse = uniform_unit(rng) < 0.5, with_aux = uniform_unit(rng) < 0.5;

    std::set<Triple> expected(kg.begin(), kg.end());
    for (UserId u = 0; u < users; ++u) {
      for (auto i : train[u]) expected.insert({u, kInteract, static_cast<EntityId>(users + i)});
    }
    if (with_aux) {
      for (const auto& [e, ts] : aux) {
        for (auto t : ts) expected.insert({e, kHasAux, t});
      }
    }
    if (inverse) {
      const std::set<Triple> forward = expected;
      for (const auto& t : forward) expected.insert({t.tail, static_cast<RelationId>(t.relation + base_rel), t.head});
    }
    const auto g = build_ckg(kg, data, aux, entities, base_rel, GraphOptions{inverse, with_aux});
    EXPECT_EQ(std::set<Triple>(g.triples().begin(), g.triples().end()), expected);
    EXPECT_EQ(g.triple_count(), expected.size());
    for (EntityId h = 0; h < entities; ++h) {
      std::vector<Triple> scan;
      for (const auto& t : expected) {
        if (t.head == h) scan.push_back(t);
      }
      const auto nb = g.neighbors_of(h);
      EXPECT_EQ(std::vector<Triple>(nb.begin(), nb.end()), scan);
    }
  }
}

CollaborativeKG star(std::size_t degree) {
  std::vector<Triple> t;
  for (EntityId k = 1; k <= degree; ++k) t.push_back({0, 2, k});
  return CollaborativeKG(degree + 1, 3, false, t);
}

TEST(Neighbors, UnderCapIsolatedAndSampled) {
  Rng rng = make_rng(1, {});
  EXPECT_EQ(neighbors(star(3), 0, 10, rng).size(), 3u);
  EXPECT_TRUE(neighbors(star(3), 2, 10, rng).empty());
  const auto g = star(100);
  const auto s = neighbors(g, 0, 20, rng);
  EXPECT_EQ(s.size(), 20u);
  EXPECT_EQ(std::set<Triple>(s.begin(), s.end()).size(), 20u);
  for (const auto& t : s) {
    EXPECT_EQ(t.head, 0u);
    EXPECT_TRUE(g.contains(t));
  }
}

TEST(Neighbors, SampleIsUniform) {
  const auto g = star(10);
  std::vector<int> hits(11, 0);
  Rng rng = make_rng(3, {});
  const int draws = 10000;
  for (int i = 0; i < draws; ++i) {
    for (const auto& t : neighbors(g, 0, 3, rng)) ++hits[t.tail];
  }
  // Each tail is included with probability 3/10.
  for (EntityId k = 1; k <= 10; ++k) EXPECT_NEAR(hits[k] / double(draws), 0.3, 0.03);
}

TEST(KgNegative, ExcludesGraphTriples) {
  const CollaborativeKG g(3, 2, false, {{0, 0, 1}});
  Rng rng = make_rng(8, {});
  int zero = 0, two = 0;
  const int draws = 10000;
  for (int i = 0; i < draws; ++i) {
    const auto c = sample_kg_negative(g, {0, 0, 1}, rng);
    ASSERT_NE(c.tail, 1u);
    EXPECT_EQ(c.head, 0u);
    (c.tail == 0 ? zero : two)++;
  }
  EXPECT_GE(zero / double(draws), 0.45);
  EXPECT_LE(zero / double(draws), 0.55);
  EXPECT_GE(two / double(draws), 0.45);
}

TEST(KgNegative, ExhaustedThrows) {
  const CollaborativeKG g(2, 1, false, {{0, 0, 0}, {0, 0, 1}});
  Rng rng = make_rng(8, {});
  EXPECT_THROW(sample_kg_negative(g, {0, 0, 1}, rng), DataError);
}

TEST(RecNegative, ForcedChoiceAndExhaustion) {
  const auto d = train_only(2, {{0}, {0, 1}});
  Rng rng = make_rng(2, {});
  for (int i = 0; i < 50; ++i) EXPECT_EQ(sample_rec_negative(d, 0, rng), 1u);
  EXPECT_THROW(sample_rec_negative(d, 1, rng), DataError);
}

TEST(RecNegative, UniformOverNonPositives) {
  const auto d = train_only(10, {{2, 7}});
  Rng rng = make_rng(4, {});
  std::vector<int> hits(10, 0);
  const int draws = 8000;
  for (int i = 0; i < draws; ++i) ++hits[sample_rec_negative(d, 0, rng)];
  EXPECT_EQ(hits[2], 0);
  EXPECT_EQ(hits[7], 0);
  for (ItemId i = 0; i < 10; ++i) {
    if (i == 2 || i == 7) continue;
    EXPECT_GE(hits[i] / double(draws), 0.10);
    EXPECT_LE(hits[i] / double(draws), 0.15);
  }
}

TEST(Dataset, LoadFromDirectory) {
  const auto dir = test::scratch_dir("dataset");
  std::ofstream(dir / "interactions.tsv") << "u0\ti0\nu0\ti1\nu1\ti1\n";
  std::ofstream(dir / "kg.tsv") << "i0\tdirected_by\td0\n";
  std::ofstream(dir / "item_map.tsv") << "i0\ti0\n";
  std::ofstream(dir / "aux.tsv") << "i1\tgenre:war\n";
  const auto d = load_dataset(dir, DatasetOptions{});
  EXPECT_EQ(d.index.entity_count(), 2u + 2u + 1u + 1u);
  EXPECT_EQ(d.kg.size(), 1u);
  EXPECT_EQ(d.aux.size(), 1u);
  DatasetOptions no_aux;
  no_aux.load_auxiliary = false;
  EXPECT_EQ(load_dataset(dir, no_aux).index.token_count(), 0u);
  EXPECT_THROW(load_dataset(dir / "nope", DatasetOptions{}), Error);
}

}  // namespace
}  // namespace kgax
