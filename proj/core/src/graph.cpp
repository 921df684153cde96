#include "kgax/graph.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "kgax/fusion.hpp"

namespace kgax {

namespace {

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Calls fn(line_number, fields) for each data line.
template <typename Fn>
void for_each_record(std::string_view text, Fn&& fn) {
  std::size_t line_no = 0;
  std::size_t pos = 0;
  std::vector<std::string_view> fields;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty() || line.front() == '#') continue;
    fields.clear();
    std::size_t start = 0;
    while (true) {
      const std::size_t tab = line.find('\t', start);
      if (tab == std::string_view::npos) {
        fields.push_back(line.substr(start));
        break;
      }
      fields.push_back(line.substr(start, tab - start));
      start = tab + 1;
    }
    fn(line_no, fields);
  }
}

void require_fields(const std::string& source, std::size_t line, std::span<const std::string_view> fields,
                    std::size_t expected) {
  if (fields.size() != expected) {
    throw ParseError(source, line,
                     "expected " + std::to_string(expected) + " tab-separated fields, found " +
                         std::to_string(fields.size()));
  }
  for (auto f : fields) {
    if (f.empty()) throw ParseError(source, line, "empty field");
  }
}

}  // namespace

std::uint32_t IdMap::intern(std::string_view name) {
  std::string key(name);
  auto it = ids_.find(key);
  if (it != ids_.end()) return it->second;
  const auto id = static_cast<std::uint32_t>(names_.size());
  names_.push_back(key);
  ids_.emplace(std::move(key), id);
  return id;
}

std::optional<std::uint32_t> IdMap::find(std::string_view name) const {
  auto it = ids_.find(std::string(name));
  if (it == ids_.end()) return std::nullopt;
  return it->second;
}

RawInteractions parse_interactions(std::string_view text, const std::string& source) {
  RawInteractions out;
  for_each_record(text, [&](std::size_t line, std::span<const std::string_view> f) {
    require_fields(source, line, f, 2);
    out.pairs.emplace_back(out.users.intern(f[0]), out.items.intern(f[1]));
  });
  if (out.pairs.empty()) throw ParseError(source + ": no interactions (empty file)");
  // Drop duplicates, keep first occurrence order.
  std::set<std::pair<UserId, ItemId>> seen;
  std::vector<std::pair<UserId, ItemId>> unique;
  for (const auto& p : out.pairs) {
    if (seen.insert(p).second) unique.push_back(p);
  }
  out.pairs = std::move(unique);
  return out;
}

RawInteractions load_interactions(const std::filesystem::path& path) {
  return parse_interactions(read_file(path), path.string());
}

RawTriples parse_kg_triples(std::string_view text, const std::string& source) {
  RawTriples out;
  for_each_record(text, [&](std::size_t line, std::span<const std::string_view> f) {
    require_fields(source, line, f, 3);
    const auto h = out.entities.intern(f[0]);
    const auto r = out.relations.intern(f[1]);
    const auto t = out.entities.intern(f[2]);
    out.triples.push_back({h, r, t});
  });
  std::sort(out.triples.begin(), out.triples.end());
  out.triples.erase(std::unique(out.triples.begin(), out.triples.end()), out.triples.end());
  return out;
}

RawTriples load_kg_triples(const std::filesystem::path& path) {
  return parse_kg_triples(read_file(path), path.string());
}

std::vector<std::pair<std::string, std::string>> parse_item_map(std::string_view text,
                                                               const std::string& source) {
  std::vector<std::pair<std::string, std::string>> out;
  for_each_record(text, [&](std::size_t line, std::span<const std::string_view> f) {
    require_fields(source, line, f, 2);
    out.emplace_back(std::string(f[0]), std::string(f[1]));
  });
  return out;
}

std::vector<std::pair<std::string, std::string>> load_item_map(const std::filesystem::path& path) {
  return parse_item_map(read_file(path), path.string());
}

EntityIndex::EntityIndex(const RawInteractions& interactions, const RawTriples& kg,
                         std::span<const std::pair<std::string, std::string>> item_map)
    : users_(interactions.users), items_(interactions.items), kg_entities_(kg.entities),
      relations_(kg.relations) {
  for (std::size_t u = 0; u < users_.size(); ++u) {
    kinds_.push_back(Kind::User);
    local_.push_back(static_cast<std::uint32_t>(u));
  }
  for (std::size_t i = 0; i < items_.size(); ++i) {
    kinds_.push_back(Kind::Item);
    local_.push_back(static_cast<std::uint32_t>(i));
  }
  constexpr EntityId kUnassigned = ~EntityId{0};
  kg_to_global_.assign(kg_entities_.size(), kUnassigned);
  for (const auto& [item_name, entity_name] : item_map) {
    const auto item = items_.find(item_name);
    if (!item) throw DataError("item_map: unknown item '" + item_name + "'");
    const auto entity = kg_entities_.find(entity_name);
    if (!entity) continue;  // alignment to an entity absent from kg.tsv has no effect
    if (kg_to_global_[*entity] != kUnassigned && kg_to_global_[*entity] != item_entity(*item)) {
      throw DataError("item_map: entity '" + entity_name + "' aligned to more than one item");
    }
    kg_to_global_[*entity] = item_entity(*item);
  }
  for (std::size_t e = 0; e < kg_entities_.size(); ++e) {
    if (kg_to_global_[e] != kUnassigned) continue;
    kg_to_global_[e] = static_cast<EntityId>(kinds_.size());
    kinds_.push_back(Kind::KgEntity);
    local_.push_back(static_cast<std::uint32_t>(e));
  }
}

std::optional<EntityId> EntityIndex::resolve_entity(std::string_view name) const {
  if (auto i = items_.find(name)) return item_entity(*i);
  if (auto e = kg_entities_.find(name)) return kg_to_global_[*e];
  return std::nullopt;
}

EntityId EntityIndex::add_token(std::string_view name) {
  const auto local = tokens_.intern(name);
  if (local < token_to_global_.size()) return token_to_global_[local];
  const auto global = static_cast<EntityId>(kinds_.size());
  kinds_.push_back(Kind::Token);
  local_.push_back(local);
  token_to_global_.push_back(global);
  return global;
}

std::string EntityIndex::entity_name(EntityId e) const {
  switch (kinds_.at(e)) {
    case Kind::User: return users_.name(local_[e]);
    case Kind::Item: return items_.name(local_[e]);
    case Kind::KgEntity: return kg_entities_.name(local_[e]);
    case Kind::Token: return tokens_.name(local_[e]);
  }
  return {};
}

std::string EntityIndex::relation_name(RelationId r) const {
  const auto base = base_relation_count();
  std::string suffix;
  if (r >= base) {
    r -= static_cast<RelationId>(base);
    suffix = "^-1";
  }
  if (r == kInteract) return "interact" + suffix;
  if (r == kHasAux) return "has_aux" + suffix;
  return relations_.name(r - kFirstKgRelation) + suffix;
}

std::vector<Triple> EntityIndex::global_triples(const RawTriples& kg) const {
  std::vector<Triple> out;
  out.reserve(kg.triples.size());
  for (const auto& row : kg.triples) {
    out.push_back({kg_entity(row.head), kg_relation(row.relation), kg_entity(row.tail)});
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

AuxiliaryMap parse_auxiliary(std::string_view text, EntityIndex& index, const std::string& source) {
  AuxiliaryMap out;
  for_each_record(text, [&](std::size_t line, std::span<const std::string_view> f) {
    require_fields(source, line, f, 2);
    const auto entity = index.resolve_entity(f[0]);
    if (!entity) {
      throw DataError(source + ":" + std::to_string(line) + ": unknown entity '" + std::string(f[0]) +
                      "'");
    }
    const auto token = index.add_token(f[1]);
    auto& tokens = out[*entity];
    if (std::find(tokens.begin(), tokens.end(), token) == tokens.end()) tokens.push_back(token);
  });
  return out;
}

AuxiliaryMap load_auxiliary(const std::filesystem::path& path, EntityIndex& index) {
  return parse_auxiliary(read_file(path), index, path.string());
}

InteractionDataset::InteractionDataset(std::size_t item_count, std::vector<UserSplit> users)
    : item_count_(item_count), users_(std::move(users)) {
  for (auto& u : users_) {
    std::sort(u.train.begin(), u.train.end());
    std::sort(u.validation.begin(), u.validation.end());
    std::sort(u.test.begin(), u.test.end());
  }
}

bool InteractionDataset::is_train_positive(UserId u, ItemId i) const {
  const auto& train = users_.at(u).train;
  return std::binary_search(train.begin(), train.end(), i);
}

std::size_t InteractionDataset::train_interaction_count() const {
  std::size_t n = 0;
  for (const auto& u : users_) n += u.train.size();
  return n;
}

InteractionDataset split_interactions(std::span<const std::pair<UserId, ItemId>> pairs,
                                      std::size_t user_count, std::size_t item_count,
                                      std::uint64_t seed) {
  std::vector<std::vector<ItemId>> per_user(user_count);
  for (const auto& [u, i] : pairs) {
    if (u >= user_count || i >= item_count) throw DataError("split_interactions: id out of range");
    per_user[u].push_back(i);
  }
  Rng rng = make_rng(seed, {0x5b117});
  std::vector<UserSplit> users(user_count);
  for (std::size_t u = 0; u < user_count; ++u) {
    auto& items = per_user[u];
    const std::size_t n = items.size();
    if (n == 0) throw DataError("split_interactions: user " + std::to_string(u) + " has no interactions");
    shuffle(items.begin(), items.end(), rng);
    const auto pool = static_cast<std::size_t>(std::ceil(0.8 * static_cast<double>(n)));
    std::size_t val = 0;
    if (pool >= 2) {
      val = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(0.1 * static_cast<double>(pool))));
    }
    auto& s = users[u];
    s.validation.assign(items.begin(), items.begin() + static_cast<std::ptrdiff_t>(val));
    s.train.assign(items.begin() + static_cast<std::ptrdiff_t>(val),
                   items.begin() + static_cast<std::ptrdiff_t>(pool));
    s.test.assign(items.begin() + static_cast<std::ptrdiff_t>(pool), items.end());
  }
  return InteractionDataset(item_count, std::move(users));
}

CollaborativeKG::CollaborativeKG(std::size_t entity_count, std::size_t base_relation_count,
                                 bool inverse_relations, std::vector<Triple> triples)
    : entity_count_(entity_count), base_relation_count_(base_relation_count),
      inverse_(inverse_relations), triples_(std::move(triples)) {
  for (const auto& t : triples_) {
    if (t.head >= entity_count_ || t.tail >= entity_count_) {
      throw DataError("collaborative KG: entity index out of range (" + std::to_string(entity_count_) +
                      " entities)");
    }
    if (t.relation >= relation_count()) {
      throw DataError("collaborative KG: relation index out of range (" +
                      std::to_string(relation_count()) + " relations)");
    }
  }
  std::sort(triples_.begin(), triples_.end());
  triples_.erase(std::unique(triples_.begin(), triples_.end()), triples_.end());
  offsets_.assign(entity_count_ + 1, 0);
  for (const auto& t : triples_) ++offsets_[t.head + 1];
  for (std::size_t e = 0; e < entity_count_; ++e) offsets_[e + 1] += offsets_[e];
}

RelationId CollaborativeKG::inverse_of(RelationId r) const {
  if (!inverse_) throw DataError("inverse relations are disabled");
  const auto base = static_cast<RelationId>(base_relation_count_);
  return r < base ? r + base : r - base;
}

std::span<const Triple> CollaborativeKG::neighbors_of(EntityId h) const {
  if (h >= entity_count_) throw DataError("entity " + std::to_string(h) + " out of range");
  return std::span<const Triple>(triples_).subspan(offsets_[h], offsets_[h + 1] - offsets_[h]);
}

bool CollaborativeKG::contains(const Triple& t) const {
  if (t.head >= entity_count_) return false;
  const auto n = neighbors_of(t.head);
  return std::binary_search(n.begin(), n.end(), t);
}

CollaborativeKG build_ckg(std::span<const Triple> kg, const InteractionDataset& train,
                          const AuxiliaryMap& aux, std::size_t entity_count,
                          std::size_t base_relation_count, const GraphOptions& options) {
  std::vector<Triple> triples(kg.begin(), kg.end());
  for (UserId u = 0; u < train.user_count(); ++u) {
    for (ItemId i : train.user(u).train) {
      triples.push_back({train.user_entity(u), kInteract, train.item_entity(i)});
    }
  }
  if (options.include_auxiliary) {
    const auto augmented = build_augmented_triples(aux);
    triples.insert(triples.end(), augmented.begin(), augmented.end());
  }
  std::sort(triples.begin(), triples.end());
  triples.erase(std::unique(triples.begin(), triples.end()), triples.end());
  if (options.inverse_relations) {
    const auto base = static_cast<RelationId>(base_relation_count);
    const std::size_t n = triples.size();
    triples.reserve(2 * n);
    for (std::size_t k = 0; k < n; ++k) {
      const auto t = triples[k];
      if (t.relation >= base) {
        throw DataError("collaborative KG: relation index out of range (" +
                        std::to_string(base_relation_count) + " base relations)");
      }
      triples.push_back({t.tail, t.relation + base, t.head});
    }
  }
  return CollaborativeKG(entity_count, base_relation_count, options.inverse_relations,
                         std::move(triples));
}

std::vector<Triple> neighbors(const CollaborativeKG& g, EntityId h, std::size_t cap, Rng& rng) {
  const auto all = g.neighbors_of(h);
  if (all.size() <= cap) return {all.begin(), all.end()};
  std::vector<std::size_t> idx(all.size());
  for (std::size_t k = 0; k < idx.size(); ++k) idx[k] = k;
  for (std::size_t k = 0; k < cap; ++k) {
    const auto j = k + uniform_index(rng, idx.size() - k);
    std::swap(idx[k], idx[j]);
  }
  idx.resize(cap);
  std::sort(idx.begin(), idx.end());
  std::vector<Triple> out;
  out.reserve(cap);
  for (auto k : idx) out.push_back(all[k]);
  return out;
}

Triple sample_kg_negative(const CollaborativeKG& g, const Triple& triple, Rng& rng) {
  if (g.entity_count() < 2) throw DataError("sample_kg_negative: need at least 2 entities");
  for (int attempt = 0; attempt < kMaxCorruptionAttempts; ++attempt) {
    Triple c{triple.head, triple.relation, static_cast<EntityId>(uniform_index(rng, g.entity_count()))};
    if (!g.contains(c)) return c;
  }
  throw DataError("sample_kg_negative: no corrupted tail found for (" + std::to_string(triple.head) +
                  ", " + std::to_string(triple.relation) + ", " + std::to_string(triple.tail) +
                  ") after " + std::to_string(kMaxCorruptionAttempts) + " attempts");
}

ItemId sample_rec_negative(const InteractionDataset& data, UserId u, Rng& rng) {
  const auto& train = data.user(u).train;
  if (train.size() >= data.item_count()) {
    throw DataError("sample_rec_negative: user " + std::to_string(u) + " has interacted with every item");
  }
  // k-th item outside the sorted positive list.
  auto k = static_cast<ItemId>(uniform_index(rng, data.item_count() - train.size()));
  for (ItemId p : train) {
    if (p <= k) {
      ++k;
    } else {
      break;
    }
  }
  return k;
}

namespace {

Dataset assemble(const RawInteractions& raw, const RawTriples& triples,
                 std::span<const std::pair<std::string, std::string>> alignment,
                 std::string_view aux_text, const std::string& aux_source,
                 const DatasetOptions& options) {
  Dataset d;
  d.index = EntityIndex(raw, triples, alignment);
  d.kg = d.index.global_triples(triples);
  if (options.load_auxiliary) d.aux = parse_auxiliary(aux_text, d.index, aux_source);
  d.interactions =
      split_interactions(raw.pairs, d.index.user_count(), d.index.item_count(), options.seed);
  return d;
}

}  // namespace

Dataset make_dataset(std::string_view interactions, std::string_view kg, std::string_view item_map,
                     std::string_view aux, const DatasetOptions& options) {
  return assemble(parse_interactions(interactions, "interactions.tsv"), parse_kg_triples(kg, "kg.tsv"),
                  parse_item_map(item_map, "item_map.tsv"), aux, "aux.tsv", options);
}

Dataset load_dataset(const std::filesystem::path& dir, const DatasetOptions& options) {
  const auto optional_file = [&](const char* name) -> std::string {
    const auto p = dir / name;
    return std::filesystem::exists(p) ? read_file(p) : std::string();
  };
  const auto interactions_path = dir / "interactions.tsv";
  if (!std::filesystem::exists(interactions_path)) {
    throw DataError("missing " + interactions_path.string());
  }
  return assemble(parse_interactions(read_file(interactions_path), interactions_path.string()),
                  parse_kg_triples(optional_file("kg.tsv"), (dir / "kg.tsv").string()),
                  parse_item_map(optional_file("item_map.tsv"), (dir / "item_map.tsv").string()),
                  optional_file("aux.tsv"), (dir / "aux.tsv").string(), options);
}

CollaborativeKG build_ckg(const Dataset& data, const GraphOptions& options) {
  return build_ckg(data.kg, data.interactions, data.aux, data.index.entity_count(),
                   data.index.base_relation_count(), options);
}

}  // namespace kgax
