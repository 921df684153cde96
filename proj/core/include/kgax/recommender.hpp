#pragma once

// Prediction, BPR optimization, the alternating training loop, top-K
// inference and model persistence.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "kgax/config.hpp"
#include "kgax/fusion.hpp"
#include "kgax/graph.hpp"
#include "kgax/model.hpp"
#include "kgax/propagation.hpp"

namespace kgax {

/// ŷ(u, i) = e_u*ᵀ e_i*.
template <typename T>
double predict_score(std::span<const T> e_user, std::span<const T> e_item);

/// −ln σ(ŷ_pos − ŷ_neg) + λ·‖Θ‖².
double bpr_pair_loss(double pos, double neg, double l2, double sq_norm);

/// (user, observed item, unobserved item).
struct RecTriple {
  UserId user = 0;
  ItemId pos = 0;
  ItemId neg = 0;
};

/// One sampled negative per train positive, shuffled. A pure function of
/// (seed, epoch); users who interacted with every item contribute nothing.
std::vector<RecTriple> build_rec_epoch(const InteractionDataset& data, std::uint64_t seed, std::size_t epoch);

/// Graph, fusion index and user/item layout a model is trained against.
struct ModelContext {
  CollaborativeKG graph;
  FusionIndex fusion;
  std::size_t user_count = 0;
  std::size_t item_count = 0;

  std::size_t entity_count() const noexcept { return graph.entity_count(); }
};

/// Builds the CKG (auxiliary triples only when fusion is on) for `config`.
ModelContext make_context(const Dataset& data, const ModelConfig& config);

ModelShape model_shape(const ModelContext& context, const ModelConfig& config);

/// Mean BPR term over the batch plus λ·(‖touched entity rows‖² + ‖layer matrices‖²).
/// When `grads` is non-null the gradient is accumulated into it.
template <typename T>
double rec_batch_loss(const ModelParameters<T>& params, const ModelContext& context, const Neighborhoods& nb,
                      const PropagationOptions& options, std::span<const RecTriple> batch, double l2,
                      ModelParameters<T>* grads);

/// Stops after `patience` consecutive epochs without strict improvement.
class EarlyStopping {
 public:
  explicit EarlyStopping(std::size_t patience) : patience_(patience) {}

  /// Records the metric for the next epoch (1-based); true when it is a new best.
  bool observe(double value);
  bool should_stop() const noexcept { return stale_ >= patience_; }
  std::size_t best_epoch() const noexcept { return best_epoch_; }
  double best_value() const noexcept { return best_; }

 private:
  std::size_t patience_;
  std::size_t epoch_ = 0;
  std::size_t best_epoch_ = 0;
  std::size_t stale_ = 0;
  double best_ = 0.0;
};

struct EpochLog {
  std::size_t epoch = 0;
  double rec_loss = 0.0;
  double kg_loss = 0.0;
  double val_recall20 = 0.0;
  double elapsed_ms = 0.0;
};

template <typename T>
struct TrainedModel {
  ModelConfig config;
  ModelParameters<T> params;
  Matrix<T> final_embeddings;  // e* per entity; empty until refreshed
};

template <typename T>
struct TrainResult {
  TrainedModel<T> model;
  std::vector<EpochLog> log;
  std::size_t best_epoch = 0;
};

using EpochObserver = std::function<void(const EpochLog&)>;

/// Neighborhoods used outside training: a fixed stream derived from the seed.
Neighborhoods eval_neighborhoods(const ModelContext& context, const ModelConfig& config);

/// e* for every entity with dropout off.
template <typename T>
Matrix<T> compute_embeddings(const ModelParameters<T>& params, const ModelContext& context,
                             const ModelConfig& config);

template <typename T>
void refresh_embeddings(TrainedModel<T>& model, const ModelContext& context);

/// Validation Recall@20 from cached embeddings.
template <typename T>
double validation_recall20(const Matrix<T>& embeddings, const InteractionDataset& data, std::size_t threads);

/// Optional KG warmup, then per epoch: every recommendation batch, one KG pass,
/// validation Recall@20 and early stopping. Returns the best-validation model.
template <typename T>
TrainResult<T> train(const Dataset& data, const ModelConfig& config, const EpochObserver& observer = {});

struct Recommendation {
  ItemId item = 0;
  double score = 0.0;
};

/// Top-K non-train items for `u` from cached embeddings, score descending, ties by id.
template <typename T>
std::vector<Recommendation> recommend_topk(const TrainedModel<T>& model, const InteractionDataset& data, UserId u,
                                           std::size_t k);

/// epoch,rec_loss,kg_loss,val_recall@20,elapsed_ms rows preceded by "# key=value" config lines.
std::string epoch_log_csv(const ModelConfig& config, std::span<const EpochLog> log);

inline constexpr std::uint32_t kModelFormatVersion = 1;

template <typename T>
std::string serialize_model(const ModelConfig& config, const ModelParameters<T>& params);

/// Parses either scalar width and converts to T.
template <typename T>
TrainedModel<T> deserialize_model(std::string_view bytes);

template <typename T>
void save_model(const TrainedModel<T>& model, const std::filesystem::path& path);

template <typename T>
TrainedModel<T> load_model(const std::filesystem::path& path);

/// Scalar width recorded in a model file header: 32 or 64.
int model_precision(const std::filesystem::path& path);

}  // namespace kgax
