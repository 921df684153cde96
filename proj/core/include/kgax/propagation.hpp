#pragma once

// Attentive embedding propagation over the collaborative knowledge graph.
//
// Per layer l and entity h with sampled neighborhood N_h:
//   z_k   = W1 (x_h ∥ e_r ∥ x_t)                 triple embedding
//   a_k   = LeakyReLU(W2 · z_k)                   attention logit
//   π     = softmax(a)   (or 1/|N_h| in uniform mode)
//   m_h   = Σ_k π_k z_k                           neighborhood aggregate
//   y_h   = LeakyReLU(W_agg (x_h ∥ dropout(m_h)))
// and e* = x⁽⁰⁾ ∥ … ∥ x⁽ᴸ⁾, with x⁽⁰⁾ the fused base table.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "kgax/config.hpp"
#include "kgax/fusion.hpp"
#include "kgax/graph.hpp"
#include "kgax/model.hpp"

namespace kgax {

/// Sampled N_h for every entity, stored as CSR.
class Neighborhoods {
 public:
  Neighborhoods() = default;
  Neighborhoods(std::vector<std::size_t> offsets, std::vector<Triple> triples);

  std::span<const Triple> of(EntityId h) const {
    return std::span<const Triple>(triples_).subspan(offsets_[h], offsets_[h + 1] - offsets_[h]);
  }
  std::size_t offset(EntityId h) const { return offsets_[h]; }
  std::size_t entity_count() const noexcept { return offsets_.empty() ? 0 : offsets_.size() - 1; }
  std::size_t triple_count() const noexcept { return triples_.size(); }

 private:
  std::vector<std::size_t> offsets_;
  std::vector<Triple> triples_;
};

/// Calls neighbors() for every entity with a generator keyed by (stream_seed, entity).
Neighborhoods sample_neighborhoods(const CollaborativeKG& g, std::size_t cap, std::uint64_t stream_seed);

/// Every neighbor of every entity, no sampling.
Neighborhoods full_neighborhoods(const CollaborativeKG& g);

struct PropagationOptions {
  AttentionMode attention = AttentionMode::Learned;
  double leaky_slope = 0.2;
  double dropout = 0.0;
  bool training = false;
  std::uint64_t dropout_seed = 0;
};

template <typename T>
struct AttentionRecord {
  std::vector<T> logits;   // LeakyReLU(W2 · z)
  std::vector<T> weights;  // normalized π
};

template <typename T>
std::vector<T> triple_embedding(const LayerParams<T>& layer, std::span<const T> e_h, std::span<const T> e_r,
                                std::span<const T> e_t);

/// Rows of `embeddings` are the triple embeddings of one neighborhood.
template <typename T>
AttentionRecord<T> attention_weights(const LayerParams<T>& layer, const Matrix<T>& embeddings,
                                     AttentionMode mode, T leaky_slope);

/// Σ π_k z_k; a zero vector of width embeddings.cols() for an empty neighborhood.
template <typename T>
std::vector<T> aggregate_neighborhood(std::span<const T> weights, const Matrix<T>& embeddings);

/// Everything a layer's backward pass needs.
template <typename T>
struct LayerTrace {
  Matrix<T> triple_embeddings;  // one row per sampled triple, CSR-aligned
  std::vector<T> scores;        // W2 · z before LeakyReLU
  std::vector<T> weights;       // π
  Matrix<T> aggregate;          // per entity, after dropout
  std::vector<T> keep_scale;    // per entity: 0 (dropped) or 1/(1−p)
  Matrix<T> pre_activation;     // W_agg (x ∥ m)
};

/// Computes layer `layer_index` (1-based) for every entity.
template <typename T>
Matrix<T> propagate_layer(const LayerParams<T>& layer, const Matrix<T>& prev, const Matrix<T>& relation,
                          const Neighborhoods& nb, const PropagationOptions& options,
                          std::size_t layer_index, LayerTrace<T>* trace = nullptr);

/// Row-wise concatenation of layer representations.
template <typename T>
Matrix<T> concat_layers(std::span<const Matrix<T>> reps);

template <typename T>
struct ForwardPass {
  std::vector<Matrix<T>> reps;  // reps[0] fused base, reps[l] output of layer l
  std::vector<LayerTrace<T>> traces;
  Matrix<T> final;  // e* per entity
};

template <typename T>
ForwardPass<T> forward(const ModelParameters<T>& params, const FusionIndex& fusion, const Neighborhoods& nb,
                       const PropagationOptions& options);

/// Accumulates into `grads` the gradient of a loss whose gradient with
/// respect to e* is `grad_final`.
template <typename T>
void backward(const ModelParameters<T>& params, const FusionIndex& fusion, const Neighborhoods& nb,
              const PropagationOptions& options, const ForwardPass<T>& pass, const Matrix<T>& grad_final,
              ModelParameters<T>& grads);

}  // namespace kgax
