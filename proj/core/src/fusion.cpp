#include "kgax/fusion.hpp"

namespace kgax {

FusionIndex::FusionIndex(const AuxiliaryMap& aux, std::size_t entity_count) {
  offsets_.assign(entity_count + 1, 0);
  for (const auto& [e, tokens] : aux) {
    if (e >= entity_count) throw DataError("fusion: entity " + std::to_string(e) + " out of range");
    offsets_[e + 1] = tokens.size();
  }
  for (std::size_t e = 0; e < entity_count; ++e) offsets_[e + 1] += offsets_[e];
  tokens_.resize(offsets_.back());
  for (const auto& [e, tokens] : aux) {
    for (std::size_t k = 0; k < tokens.size(); ++k) {
      if (tokens[k] >= entity_count) throw DataError("fusion: token entity out of range");
      tokens_[offsets_[e] + k] = tokens[k];
    }
  }
}

std::span<const EntityId> FusionIndex::tokens_of(EntityId e) const {
  if (e + 1 >= offsets_.size()) return {};
  return std::span<const EntityId>(tokens_).subspan(offsets_[e], offsets_[e + 1] - offsets_[e]);
}

template <typename T>
std::vector<T> fuse_entity_embedding(std::span<const T> e, std::span<const std::span<const T>> aux) {
  std::vector<T> out(e.begin(), e.end());
  if (aux.empty()) return out;
  std::vector<T> mean(e.size(), T{0});
  for (const auto& a : aux) {
    if (a.size() != e.size()) throw Error("fuse_entity_embedding: shape mismatch");
    for (std::size_t j = 0; j < e.size(); ++j) mean[j] += a[j];
  }
  const T inv = T{1} / static_cast<T>(aux.size());
  for (auto& m : mean) m *= inv;
  return hadamard<T>(e, mean);
}

template <typename T>
void fuse_entity_embedding_backward(std::span<const T> e, std::span<const std::span<const T>> aux,
                                    std::span<const T> upstream, std::span<T> grad_e,
                                    std::span<const std::span<T>> grad_aux) {
  if (aux.empty()) {
    for (std::size_t j = 0; j < e.size(); ++j) grad_e[j] += upstream[j];
    return;
  }
  const T inv = T{1} / static_cast<T>(aux.size());
  for (std::size_t j = 0; j < e.size(); ++j) {
    T mean{0};
    for (const auto& a : aux) mean += a[j];
    mean *= inv;
    grad_e[j] += upstream[j] * mean;
    const T share = upstream[j] * e[j] * inv;
    for (const auto& g : grad_aux) g[j] += share;
  }
}

template <typename T>
Matrix<T> fuse_base(const Matrix<T>& entity, const FusionIndex& index) {
  Matrix<T> out = entity;
  if (index.empty()) return out;
  std::vector<std::span<const T>> aux;
  for (std::size_t e = 0; e < entity.rows(); ++e) {
    const auto tokens = index.tokens_of(static_cast<EntityId>(e));
    if (tokens.empty()) continue;
    aux.clear();
    for (auto t : tokens) aux.push_back(entity.row(t));
    const auto fused = fuse_entity_embedding<T>(entity.row(e), aux);
    std::copy(fused.begin(), fused.end(), out.row(e).begin());
  }
  return out;
}

template <typename T>
void fuse_base_backward(const Matrix<T>& entity, const FusionIndex& index, const Matrix<T>& upstream,
                        Matrix<T>& grad_entity) {
  std::vector<std::span<const T>> aux;
  std::vector<std::span<T>> grad_aux;
  for (std::size_t e = 0; e < entity.rows(); ++e) {
    const auto tokens = index.tokens_of(static_cast<EntityId>(e));
    aux.clear();
    grad_aux.clear();
    for (auto t : tokens) {
      aux.push_back(entity.row(t));
      grad_aux.push_back(grad_entity.row(t));
    }
    fuse_entity_embedding_backward<T>(entity.row(e), aux, upstream.row(e), grad_entity.row(e), grad_aux);
  }
}

std::vector<Triple> build_augmented_triples(const AuxiliaryMap& aux) {
  std::vector<Triple> out;
  for (const auto& [e, tokens] : aux) {
    for (auto t : tokens) out.push_back({e, kHasAux, t});
  }
  return out;
}

#define KGAX_INSTANTIATE_FUSION(T)                                                                  \
  template std::vector<T> fuse_entity_embedding<T>(std::span<const T>,                             \
                                                   std::span<const std::span<const T>>);           \
  template void fuse_entity_embedding_backward<T>(std::span<const T>,                              \
                                                  std::span<const std::span<const T>>,             \
                                                  std::span<const T>, std::span<T>,                \
                                                  std::span<const std::span<T>>);                  \
  template Matrix<T> fuse_base<T>(const Matrix<T>&, const FusionIndex&);                           \
  template void fuse_base_backward<T>(const Matrix<T>&, const FusionIndex&, const Matrix<T>&,      \
                                      Matrix<T>&);

KGAX_INSTANTIATE_FUSION(float)
KGAX_INSTANTIATE_FUSION(double)

}  // namespace kgax
