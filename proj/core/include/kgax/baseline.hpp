#pragma once

// Matrix-factorization BPR baseline: user and item embeddings only, trained
// with the same loss, optimizer, sampling schedule and early stopping as the
// full model.

#include <cstddef>
#include <vector>

#include "kgax/config.hpp"
#include "kgax/graph.hpp"
#include "kgax/numeric.hpp"
#include "kgax/recommender.hpp"

namespace kgax {

template <typename T>
struct MfModel {
  ModelConfig config;
  Matrix<T> embeddings;  // users at rows [0, U), items at [U, U + I)
  std::vector<EpochLog> log;
  std::size_t best_epoch = 0;
};

/// Uses config.dim, lr, l2, batch_size, epochs, patience, seed and eval_threads;
/// every graph-related key is ignored.
template <typename T>
MfModel<T> mf_baseline_train(const InteractionDataset& data, const ModelConfig& config);

}  // namespace kgax
