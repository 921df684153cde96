#pragma once

// TransR structural embedding: triple plausibility and the pairwise ranking
// loss over (valid, corrupted-tail) quadruples.

#include <cstddef>
#include <span>
#include <vector>

#include "kgax/graph.hpp"
#include "kgax/model.hpp"

namespace kgax {

/// (h, r, t) ∈ G together with a corrupted tail t' such that (h, r, t') ∉ G.
struct KgQuad {
  EntityId head = 0;
  RelationId relation = 0;
  EntityId tail = 0;
  EntityId corrupt_tail = 0;
};

using KGBatch = std::vector<KgQuad>;

/// ‖W_r e_h + e_r − W_r e_t‖²; lower is more plausible.
template <typename T>
double transr_score(const ModelParameters<T>& params, EntityId h, RelationId r, EntityId t);

/// −ln σ(g_corrupt − g_valid − margin).
double kg_pair_term(double g_valid, double g_corrupt, double margin = 0.0);

/// Mean pair term over the batch. When `grads` is non-null the gradient of
/// that mean is accumulated into entity, relation and projection.
template <typename T>
double kg_pair_loss(const ModelParameters<T>& params, std::span<const KgQuad> batch, double margin,
                    ModelParameters<T>* grads);

struct KgEpochOptions {
  std::size_t batch_size = 1024;
  double lr = 1e-3;
  double margin = 0.0;
};

struct KgEpochStats {
  double mean_loss = 0.0;
  std::size_t quadruples = 0;
  std::size_t batches = 0;
};

/// One pass over every graph triple in shuffled order, one corrupted tail per
/// triple, one Adam step per batch.
template <typename T>
KgEpochStats kg_epoch(ModelParameters<T>& params, const CollaborativeKG& g, const KgEpochOptions& options,
                      Rng& rng, Optimizer<T>& optimizer);

}  // namespace kgax
