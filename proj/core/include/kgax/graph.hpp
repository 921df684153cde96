#pragma once

// Data loading, the global entity space, the interaction split, the
// collaborative knowledge graph and its samplers.

#include <compare>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "kgax/error.hpp"
#include "kgax/rng.hpp"

namespace kgax {

using EntityId = std::uint32_t;
using RelationId = std::uint32_t;
using UserId = std::uint32_t;
using ItemId = std::uint32_t;

struct Triple {
  EntityId head = 0;
  RelationId relation = 0;
  EntityId tail = 0;

  auto operator<=>(const Triple&) const = default;
};

/// Reserved relations. Knowledge-graph relations follow from kFirstKgRelation;
/// inverse relations, when enabled, are offset by the base relation count.
inline constexpr RelationId kInteract = 0;
inline constexpr RelationId kHasAux = 1;
inline constexpr RelationId kFirstKgRelation = 2;

/// Bidirectional map between raw string identifiers and dense indices.
class IdMap {
 public:
  std::uint32_t intern(std::string_view name);
  std::optional<std::uint32_t> find(std::string_view name) const;
  const std::string& name(std::uint32_t id) const { return names_.at(id); }
  std::size_t size() const noexcept { return names_.size(); }
  const std::vector<std::string>& names() const noexcept { return names_; }

 private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, std::uint32_t> ids_;
};

struct RawInteractions {
  std::vector<std::pair<UserId, ItemId>> pairs;
  IdMap users;
  IdMap items;
};

struct RawTriples {
  struct Row {
    std::uint32_t head;
    std::uint32_t relation;
    std::uint32_t tail;
    auto operator<=>(const Row&) const = default;
  };
  std::vector<Row> triples;
  IdMap entities;
  IdMap relations;
};

/// "user<TAB>item" per line; '#' lines and blank lines are skipped.
RawInteractions load_interactions(const std::filesystem::path& path);
RawInteractions parse_interactions(std::string_view text, const std::string& source = "<memory>");

/// "head<TAB>relation<TAB>tail" per line.
RawTriples load_kg_triples(const std::filesystem::path& path);
RawTriples parse_kg_triples(std::string_view text, const std::string& source = "<memory>");

/// "item<TAB>entity" alignment pairs, raw names.
std::vector<std::pair<std::string, std::string>> load_item_map(const std::filesystem::path& path);
std::vector<std::pair<std::string, std::string>> parse_item_map(std::string_view text,
                                                               const std::string& source = "<memory>");

/// The single global entity space: users first, then items, then knowledge
/// graph entities that are not aligned to an item, then auxiliary tokens.
class EntityIndex {
 public:
  enum class Kind { User, Item, KgEntity, Token };

  EntityIndex() = default;
  EntityIndex(const RawInteractions& interactions, const RawTriples& kg,
              std::span<const std::pair<std::string, std::string>> item_map);

  std::size_t user_count() const noexcept { return users_.size(); }
  std::size_t item_count() const noexcept { return items_.size(); }
  std::size_t entity_count() const noexcept { return kinds_.size(); }
  std::size_t token_count() const noexcept { return tokens_.size(); }

  EntityId user_entity(UserId u) const { return u; }
  EntityId item_entity(ItemId i) const { return static_cast<EntityId>(users_.size() + i); }
  EntityId kg_entity(std::uint32_t local) const { return kg_to_global_.at(local); }

  /// Base relations: interact, has_aux, then the knowledge graph relations.
  std::size_t base_relation_count() const noexcept { return kFirstKgRelation + relations_.size(); }
  RelationId kg_relation(std::uint32_t local) const { return kFirstKgRelation + local; }

  /// Resolves an item name first, then a knowledge graph entity name.
  std::optional<EntityId> resolve_entity(std::string_view name) const;
  std::optional<UserId> find_user(std::string_view name) const { return users_.find(name); }
  std::optional<ItemId> find_item(std::string_view name) const { return items_.find(name); }

  /// Registers an auxiliary token (idempotent) and returns its global id.
  EntityId add_token(std::string_view name);

  Kind kind(EntityId e) const { return kinds_.at(e); }
  std::string entity_name(EntityId e) const;
  std::string relation_name(RelationId r) const;
  const IdMap& users() const noexcept { return users_; }
  const IdMap& items() const noexcept { return items_; }

  /// Remaps loaded triples into global ids.
  std::vector<Triple> global_triples(const RawTriples& kg) const;

 private:
  IdMap users_;
  IdMap items_;
  IdMap kg_entities_;
  IdMap relations_;
  IdMap tokens_;
  std::vector<EntityId> kg_to_global_;
  std::vector<EntityId> token_to_global_;
  std::vector<Kind> kinds_;
  std::vector<std::uint32_t> local_;  // index within its namespace
};

/// Entity → auxiliary token entities, token lists deduplicated in file order.
using AuxiliaryMap = std::map<EntityId, std::vector<EntityId>>;

/// "entity<TAB>token" per line; entity names must resolve in `index`, tokens are registered.
AuxiliaryMap load_auxiliary(const std::filesystem::path& path, EntityIndex& index);
AuxiliaryMap parse_auxiliary(std::string_view text, EntityIndex& index,
                             const std::string& source = "<memory>");

struct UserSplit {
  std::vector<ItemId> train;
  std::vector<ItemId> validation;
  std::vector<ItemId> test;
};

/// Per-user positive item sets, each sorted ascending. Users occupy global
/// entities [0, user_count) and items [user_count, user_count + item_count).
class InteractionDataset {
 public:
  InteractionDataset() = default;
  InteractionDataset(std::size_t item_count, std::vector<UserSplit> users);

  std::size_t user_count() const noexcept { return users_.size(); }
  std::size_t item_count() const noexcept { return item_count_; }
  const UserSplit& user(UserId u) const { return users_.at(u); }
  const std::vector<UserSplit>& users() const noexcept { return users_; }

  bool is_train_positive(UserId u, ItemId i) const;
  std::size_t train_interaction_count() const;

  EntityId user_entity(UserId u) const { return u; }
  EntityId item_entity(ItemId i) const { return static_cast<EntityId>(users_.size() + i); }

 private:
  std::size_t item_count_ = 0;
  std::vector<UserSplit> users_;
};

/// Per user: shuffle, ⌈0.8n⌉ to a train pool and the rest to test, then
/// max(1, round(0.1·pool)) of the pool to validation when the pool has ≥ 2 items.
InteractionDataset split_interactions(std::span<const std::pair<UserId, ItemId>> pairs,
                                      std::size_t user_count, std::size_t item_count,
                                      std::uint64_t seed);

struct GraphOptions {
  bool inverse_relations = true;
  bool include_auxiliary = true;
};

/// Deduplicated triple store indexed by head. Triples are kept sorted by
/// (head, relation, tail), so the neighbor index is a CSR over that order.
class CollaborativeKG {
 public:
  CollaborativeKG() = default;
  CollaborativeKG(std::size_t entity_count, std::size_t base_relation_count, bool inverse_relations,
                  std::vector<Triple> triples);

  std::size_t entity_count() const noexcept { return entity_count_; }
  std::size_t relation_count() const noexcept {
    return inverse_ ? 2 * base_relation_count_ : base_relation_count_;
  }
  std::size_t base_relation_count() const noexcept { return base_relation_count_; }
  bool inverse_relations() const noexcept { return inverse_; }
  RelationId inverse_of(RelationId r) const;

  std::span<const Triple> triples() const noexcept { return triples_; }
  std::size_t triple_count() const noexcept { return triples_.size(); }
  std::span<const Triple> neighbors_of(EntityId h) const;
  std::size_t degree(EntityId h) const { return neighbors_of(h).size(); }
  bool contains(const Triple& t) const;

 private:
  std::size_t entity_count_ = 0;
  std::size_t base_relation_count_ = 0;
  bool inverse_ = false;
  std::vector<Triple> triples_;
  std::vector<std::size_t> offsets_;
};

/// KG triples ∪ (u, interact, i) for train positives ∪ (e, has_aux, token)
/// when auxiliary triples are included; inverses added under the paired relation.
CollaborativeKG build_ckg(std::span<const Triple> kg, const InteractionDataset& train,
                          const AuxiliaryMap& aux, std::size_t entity_count,
                          std::size_t base_relation_count, const GraphOptions& options);

/// All of N_h when |N_h| ≤ cap, else a uniform sample of `cap` triples without
/// replacement, returned in (relation, tail) order.
std::vector<Triple> neighbors(const CollaborativeKG& g, EntityId h, std::size_t cap, Rng& rng);

/// Corrupts the tail: uniform over entities, rejected while the result is in
/// the graph, at most 100 attempts.
Triple sample_kg_negative(const CollaborativeKG& g, const Triple& triple, Rng& rng);

inline constexpr int kMaxCorruptionAttempts = 100;

/// Uniform over items not in train_pos(u).
ItemId sample_rec_negative(const InteractionDataset& data, UserId u, Rng& rng);

/// Everything loaded from a data directory, remapped into one entity space.
struct Dataset {
  EntityIndex index;
  std::vector<Triple> kg;
  AuxiliaryMap aux;
  InteractionDataset interactions;
};

struct DatasetOptions {
  std::uint64_t seed = 2024;
  /// When false aux.tsv is ignored entirely: no tokens are registered.
  bool load_auxiliary = true;
};

/// Reads interactions.tsv (required) plus optional kg.tsv, item_map.tsv and aux.tsv.
Dataset load_dataset(const std::filesystem::path& dir, const DatasetOptions& options);

/// Builds a dataset from in-memory file contents (empty strings for absent files).
Dataset make_dataset(std::string_view interactions, std::string_view kg, std::string_view item_map,
                     std::string_view aux, const DatasetOptions& options);

CollaborativeKG build_ckg(const Dataset& data, const GraphOptions& options);

}  // namespace kgax
