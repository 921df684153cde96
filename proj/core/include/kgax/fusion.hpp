#pragma once

// Auxiliary-information fusion: Hadamard product of an entity embedding with
// the mean of its auxiliary token embeddings, plus the augmented
// (entity, has_aux, token) triples.

#include <cstddef>
#include <span>
#include <vector>

#include "kgax/graph.hpp"
#include "kgax/numeric.hpp"

namespace kgax {

/// CSR view of an AuxiliaryMap over the entity table.
class FusionIndex {
 public:
  FusionIndex() = default;
  FusionIndex(const AuxiliaryMap& aux, std::size_t entity_count);

  std::span<const EntityId> tokens_of(EntityId e) const;
  std::size_t entity_count() const noexcept { return offsets_.empty() ? 0 : offsets_.size() - 1; }
  bool empty() const noexcept { return tokens_.empty(); }

 private:
  std::vector<std::size_t> offsets_;
  std::vector<EntityId> tokens_;
};

/// e unchanged when there are no tokens, else e ⊙ mean(aux).
template <typename T>
std::vector<T> fuse_entity_embedding(std::span<const T> e, std::span<const std::span<const T>> aux);

/// Backward of fuse_entity_embedding: grad_e += g ⊙ mean(aux), and each
/// grad_aux[k] += g ⊙ e / |aux|.
template <typename T>
void fuse_entity_embedding_backward(std::span<const T> e, std::span<const std::span<const T>> aux,
                                    std::span<const T> upstream, std::span<T> grad_e,
                                    std::span<const std::span<T>> grad_aux);

/// Layer-0 representation for every entity. Rows without tokens are copies of
/// the raw table.
template <typename T>
Matrix<T> fuse_base(const Matrix<T>& entity, const FusionIndex& index);

/// Accumulates the gradient of fuse_base into grad_entity.
template <typename T>
void fuse_base_backward(const Matrix<T>& entity, const FusionIndex& index, const Matrix<T>& upstream,
                        Matrix<T>& grad_entity);

/// One (entity, has_aux, token) triple per pair; inverses are the graph's job.
std::vector<Triple> build_augmented_triples(const AuxiliaryMap& aux);

}  // namespace kgax
