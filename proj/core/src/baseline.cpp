#include "kgax/baseline.hpp"

#include <chrono>
#include <cmath>
#include <set>

#include "kgax/model.hpp"

namespace kgax {

template <typename T>
MfModel<T> mf_baseline_train(const InteractionDataset& data, const ModelConfig& config) {
  validate(config);
  if (data.train_interaction_count() == 0) throw DataError("mf_baseline_train: empty train split");
  const std::size_t users = data.user_count();
  const std::size_t d = config.dim;

  MfModel<T> model;
  model.config = config;
  {
    auto rng = parameter_rng(config.seed, ParamStream::Entity);
    model.embeddings = xavier_init<T>(users + data.item_count(), d, rng);
  }
  auto& theta = model.embeddings;
  Matrix<T> grad(theta.rows(), d);
  AdamState<T> adam(theta.size(), AdamHyper{});
  Matrix<T> best = theta;
  EarlyStopping stopper(config.patience);

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    const auto triples = build_rec_epoch(data, config.seed, epoch);
    EpochLog log;
    log.epoch = epoch;
    std::size_t batches = 0;
    for (std::size_t first = 0; first < triples.size(); first += config.batch_size) {
      const std::size_t last = std::min(triples.size(), first + config.batch_size);
      const double scale = 1.0 / static_cast<double>(last - first);
      grad.fill(T{0});
      std::set<std::size_t> touched;
      double data_term = 0.0;
      for (std::size_t b = first; b < last; ++b) {
        const std::size_t u = triples[b].user;
        const std::size_t i = users + triples[b].pos;
        const std::size_t j = users + triples[b].neg;
        touched.insert({u, i, j});
        double yi = 0.0, yj = 0.0;
        for (std::size_t k = 0; k < d; ++k) {
          yi += static_cast<double>(theta(u, k)) * static_cast<double>(theta(i, k));
          yj += static_cast<double>(theta(u, k)) * static_cast<double>(theta(j, k));
        }
        const double x = yi - yj;
        data_term += softplus_neg(x);
        const auto dx = static_cast<T>(-sigmoid(-x) * scale);
        for (std::size_t k = 0; k < d; ++k) {
          grad(u, k) += dx * (theta(i, k) - theta(j, k));
          grad(i, k) += dx * theta(u, k);
          grad(j, k) -= dx * theta(u, k);
        }
      }
      double sq = 0.0;
      for (auto r : touched) {
        for (std::size_t k = 0; k < d; ++k) sq += static_cast<double>(theta(r, k)) * static_cast<double>(theta(r, k));
      }
      const auto two_l2 = static_cast<T>(2.0 * config.l2);
      for (auto r : touched) {
        for (std::size_t k = 0; k < d; ++k) grad(r, k) += two_l2 * theta(r, k);
      }
      const double loss = data_term * scale + config.l2 * sq;
      if (!std::isfinite(loss)) {
        throw NumericError("MF divergence at epoch " + std::to_string(epoch) + " batch " +
                           std::to_string(batches + 1));
      }
      adam_step<T>(theta.values(), grad.values(), adam, config.lr, "mf.embeddings");
      log.rec_loss += loss;
      ++batches;
    }
    if (batches > 0) log.rec_loss /= static_cast<double>(batches);
    log.val_recall20 = validation_recall20(theta, data, config.eval_threads);
    if (config.log_elapsed) {
      log.elapsed_ms =
          std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    }
    model.log.push_back(log);
    if (stopper.observe(log.val_recall20)) best = theta;
    if (stopper.should_stop()) break;
  }
  theta = std::move(best);
  model.best_epoch = stopper.best_epoch();
  return model;
}

template MfModel<float> mf_baseline_train<float>(const InteractionDataset&, const ModelConfig&);
template MfModel<double> mf_baseline_train<double>(const InteractionDataset&, const ModelConfig&);

}  // namespace kgax
