#pragma once

// Ranking metrics and the full-ranking evaluation protocol.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "kgax/graph.hpp"
#include "kgax/numeric.hpp"

namespace kgax {

/// Anything that scores every item for a user.
class Scorer {
 public:
  virtual ~Scorer() = default;
  /// Writes one score per item into `out` (size item_count). Must be safe to
  /// call concurrently for different users.
  virtual void score_items(UserId u, std::span<double> out) const = 0;
};

/// Inner product of concatenated user and item representations read from a
/// per-entity matrix (users at rows [0, U), items at [U, U + I)).
template <typename T>
class EmbeddingScorer final : public Scorer {
 public:
  EmbeddingScorer(const Matrix<T>& embeddings, std::size_t user_count, std::size_t item_count)
      : embeddings_(embeddings), user_count_(user_count), item_count_(item_count) {}

  void score_items(UserId u, std::span<double> out) const override {
    const auto eu = embeddings_.row(u);
    for (std::size_t i = 0; i < item_count_; ++i) {
      const auto ei = embeddings_.row(user_count_ + i);
      double s = 0.0;
      for (std::size_t j = 0; j < eu.size(); ++j) s += static_cast<double>(eu[j]) * static_cast<double>(ei[j]);
      out[i] = s;
    }
  }

 private:
  const Matrix<T>& embeddings_;
  std::size_t user_count_;
  std::size_t item_count_;
};

/// Scores each item by its number of training interactions.
class PopularityScorer final : public Scorer {
 public:
  explicit PopularityScorer(const InteractionDataset& data);
  void score_items(UserId u, std::span<double> out) const override;

 private:
  std::vector<double> counts_;
};

/// Uniform random scores, a pure function of (seed, user, item).
class RandomScorer final : public Scorer {
 public:
  RandomScorer(std::size_t item_count, std::uint64_t seed) : item_count_(item_count), seed_(seed) {}
  void score_items(UserId u, std::span<double> out) const override;

 private:
  std::size_t item_count_;
  std::uint64_t seed_;
};

/// |top-K ∩ relevant| / |relevant|. `relevant` must be non-empty.
double recall_at_k(std::span<const ItemId> ranked, std::span<const ItemId> relevant, std::size_t k);

/// Binary-gain DCG@K with log₂(rank + 1) discount over the ideal DCG@K.
double ndcg_at_k(std::span<const ItemId> ranked, std::span<const ItemId> relevant, std::size_t k);

/// Fraction of (pos, neg) pairs with pos > neg, ties counted one half.
double auc(std::span<const double> pos_scores, std::span<const double> neg_scores);

/// Items not in `excluded` (sorted), ordered by score descending then id ascending.
std::vector<ItemId> rank_candidates(std::span<const double> scores, std::span<const ItemId> excluded);

enum class Split { Validation, Test };

struct UserEval {
  UserId user = 0;
  std::size_t relevant = 0;
  std::vector<double> recall;  // one per K
  std::vector<double> ndcg;
  double auc = 0.0;
};

struct EvalReport {
  std::vector<std::size_t> ks;
  std::vector<double> recall;  // means, one per K
  std::vector<double> ndcg;
  double auc = 0.0;
  std::size_t users = 0;
  double wall_ms = 0.0;
  std::vector<UserEval> per_user;  // ascending user id

  double recall_at(std::size_t k) const;
  double ndcg_at(std::size_t k) const;
};

/// Ranks every non-train item for each user with at least one split positive
/// and one negative among the candidates. Means are reduced in user-id order;
/// the report is identical for any `threads`.
EvalReport evaluate(const Scorer& scorer, const InteractionDataset& data, Split split,
                    std::span<const std::size_t> ks, std::size_t threads = 1);

/// Per-user rows: user, relevant, recall@K…, ndcg@K…, auc.
std::string eval_report_csv(const EvalReport& report, const std::function<std::string(UserId)>& user_name);

}  // namespace kgax
