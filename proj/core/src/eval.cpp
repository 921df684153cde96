#include "kgax/eval.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <mutex>
#include <optional>
#include <sstream>
#include <thread>

#include "kgax/config.hpp"

namespace kgax {

PopularityScorer::PopularityScorer(const InteractionDataset& data) : counts_(data.item_count(), 0.0) {
  for (const auto& u : data.users()) {
    for (ItemId i : u.train) counts_[i] += 1.0;
  }
}

void PopularityScorer::score_items(UserId, std::span<double> out) const {
  std::copy(counts_.begin(), counts_.end(), out.begin());
}

void RandomScorer::score_items(UserId u, std::span<double> out) const {
  Rng rng = make_rng(seed_, {u});
  for (std::size_t i = 0; i < item_count_; ++i) out[i] = uniform_unit(rng);
}

namespace {

void require_relevant(std::span<const ItemId> relevant, std::size_t k) {
  if (relevant.empty()) throw Error("metric: empty relevant set");
  if (k == 0) throw Error("metric: K must be >= 1");
}

bool contains_item(std::span<const ItemId> set, ItemId x) {
  return std::find(set.begin(), set.end(), x) != set.end();
}

}  // namespace

double recall_at_k(std::span<const ItemId> ranked, std::span<const ItemId> relevant, std::size_t k) {
  require_relevant(relevant, k);
  const std::size_t top = std::min(k, ranked.size());
  std::size_t hits = 0;
  for (std::size_t r = 0; r < top; ++r) {
    if (contains_item(relevant, ranked[r])) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(relevant.size());
}

double ndcg_at_k(std::span<const ItemId> ranked, std::span<const ItemId> relevant, std::size_t k) {
  require_relevant(relevant, k);
  const std::size_t top = std::min(k, ranked.size());
  double dcg = 0.0;
  for (std::size_t r = 0; r < top; ++r) {
    if (contains_item(relevant, ranked[r])) dcg += 1.0 / std::log2(static_cast<double>(r) + 2.0);
  }
  double ideal = 0.0;
  const std::size_t packed = std::min(k, relevant.size());
  for (std::size_t r = 0; r < packed; ++r) ideal += 1.0 / std::log2(static_cast<double>(r) + 2.0);
  return dcg / ideal;
}

double auc(std::span<const double> pos_scores, std::span<const double> neg_scores) {
  if (pos_scores.empty() || neg_scores.empty()) throw Error("auc: empty score list");
  double wins = 0.0;
  for (double p : pos_scores) {
    for (double n : neg_scores) {
      if (p > n) {
        wins += 1.0;
      } else if (p == n) {
        wins += 0.5;
      }
    }
  }
  return wins / (static_cast<double>(pos_scores.size()) * static_cast<double>(neg_scores.size()));
}

std::vector<ItemId> rank_candidates(std::span<const double> scores, std::span<const ItemId> excluded) {
  std::vector<ItemId> out;
  out.reserve(scores.size());
  for (ItemId i = 0; i < scores.size(); ++i) {
    if (!std::binary_search(excluded.begin(), excluded.end(), i)) out.push_back(i);
  }
  std::sort(out.begin(), out.end(), [&](ItemId a, ItemId b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return a < b;
  });
  return out;
}

double EvalReport::recall_at(std::size_t k) const {
  for (std::size_t j = 0; j < ks.size(); ++j) {
    if (ks[j] == k) return recall[j];
  }
  throw Error("EvalReport: K=" + std::to_string(k) + " was not evaluated");
}

double EvalReport::ndcg_at(std::size_t k) const {
  for (std::size_t j = 0; j < ks.size(); ++j) {
    if (ks[j] == k) return ndcg[j];
  }
  throw Error("EvalReport: K=" + std::to_string(k) + " was not evaluated");
}

namespace {

std::optional<UserEval> evaluate_user(const Scorer& scorer, const InteractionDataset& data, Split split,
                                      std::span<const std::size_t> ks, UserId u, std::vector<double>& scores) {
  const auto& s = data.user(u);
  const auto& relevant = split == Split::Test ? s.test : s.validation;
  if (relevant.empty()) return std::nullopt;
  scorer.score_items(u, scores);
  const auto ranked = rank_candidates(scores, s.train);
  for (ItemId i : ranked) {
    if (data.is_train_positive(u, i)) throw Error("evaluate: train positive leaked into candidates");
  }
  std::vector<double> pos, neg;
  for (ItemId i : ranked) {
    (std::binary_search(relevant.begin(), relevant.end(), i) ? pos : neg).push_back(scores[i]);
  }
  if (pos.empty() || neg.empty()) return std::nullopt;
  UserEval ue;
  ue.user = u;
  ue.relevant = relevant.size();
  for (auto k : ks) {
    ue.recall.push_back(recall_at_k(ranked, relevant, k));
    ue.ndcg.push_back(ndcg_at_k(ranked, relevant, k));
  }
  ue.auc = auc(pos, neg);
  return ue;
}

}  // namespace

EvalReport evaluate(const Scorer& scorer, const InteractionDataset& data, Split split,
                    std::span<const std::size_t> ks, std::size_t threads) {
  const auto start = std::chrono::steady_clock::now();
  if (ks.empty()) throw Error("evaluate: no K values");
  const std::size_t n = data.user_count();
  std::vector<std::optional<UserEval>> slots(n);
  std::exception_ptr failure;
  std::mutex failure_mutex;
  const auto worker = [&](std::size_t first, std::size_t stride) {
    std::vector<double> scores(data.item_count());
    try {
      for (std::size_t u = first; u < n; u += stride) {
        slots[u] = evaluate_user(scorer, data, split, ks, static_cast<UserId>(u), scores);
      }
    } catch (...) {
      std::lock_guard lock(failure_mutex);
      if (!failure) failure = std::current_exception();
    }
  };
  threads = std::max<std::size_t>(1, std::min(threads, n));
  if (threads == 1) {
    worker(0, 1);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker, t, threads);
    for (auto& th : pool) th.join();
  }
  if (failure) std::rethrow_exception(failure);

  EvalReport report;
  report.ks.assign(ks.begin(), ks.end());
  report.recall.assign(ks.size(), 0.0);
  report.ndcg.assign(ks.size(), 0.0);
  for (auto& slot : slots) {
    if (!slot) continue;
    for (std::size_t j = 0; j < ks.size(); ++j) {
      report.recall[j] += slot->recall[j];
      report.ndcg[j] += slot->ndcg[j];
    }
    report.auc += slot->auc;
    report.per_user.push_back(std::move(*slot));
  }
  report.users = report.per_user.size();
  if (report.users == 0) throw DataError("evaluate: no evaluable users");
  const double inv = 1.0 / static_cast<double>(report.users);
  for (std::size_t j = 0; j < ks.size(); ++j) {
    report.recall[j] *= inv;
    report.ndcg[j] *= inv;
  }
  report.auc *= inv;
  report.wall_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  return report;
}

std::string eval_report_csv(const EvalReport& report, const std::function<std::string(UserId)>& user_name) {
  std::ostringstream out;
  out << "user,relevant";
  for (auto k : report.ks) out << ",recall@" << k;
  for (auto k : report.ks) out << ",ndcg@" << k;
  out << ",auc\n";
  for (const auto& u : report.per_user) {
    out << user_name(u.user) << ',' << u.relevant;
    for (double v : u.recall) out << ',' << format_real(v);
    for (double v : u.ndcg) out << ',' << format_real(v);
    out << ',' << format_real(u.auc) << '\n';
  }
  return out.str();
}

}  // namespace kgax
