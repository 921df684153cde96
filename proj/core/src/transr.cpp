#include "kgax/transr.hpp"

#include <cmath>

namespace kgax {

namespace {

/// δ = W_r (e_h − e_t) + e_r, written into `delta`; `diff` receives e_h − e_t.
template <typename T>
void translation_residual(const ModelParameters<T>& p, EntityId h, RelationId r, EntityId t,
                          std::vector<double>& diff, std::vector<double>& delta) {
  const std::size_t d = p.entity.cols();
  const auto eh = p.entity.row(h);
  const auto et = p.entity.row(t);
  const auto er = p.relation.row(r);
  const auto w = p.projection.row(r);
  diff.resize(d);
  delta.resize(d);
  for (std::size_t j = 0; j < d; ++j) diff[j] = static_cast<double>(eh[j]) - static_cast<double>(et[j]);
  for (std::size_t i = 0; i < d; ++i) {
    double s = er[i];
    for (std::size_t j = 0; j < d; ++j) s += static_cast<double>(w[i * d + j]) * diff[j];
    delta[i] = s;
  }
}

/// Accumulates coef · ∂g/∂θ for g = ‖δ‖².
template <typename T>
void accumulate_score_grad(const ModelParameters<T>& p, EntityId h, RelationId r, EntityId t,
                           const std::vector<double>& diff, const std::vector<double>& delta,
                           double coef, ModelParameters<T>& grads) {
  const std::size_t d = p.entity.cols();
  const auto w = p.projection.row(r);
  auto gh = grads.entity.row(h);
  auto gt = grads.entity.row(t);
  auto gr = grads.relation.row(r);
  auto gw = grads.projection.row(r);
  for (std::size_t i = 0; i < d; ++i) {
    const double up = 2.0 * coef * delta[i];
    gr[i] += static_cast<T>(up);
    for (std::size_t j = 0; j < d; ++j) {
      gw[i * d + j] += static_cast<T>(up * diff[j]);
      const double back = up * static_cast<double>(w[i * d + j]);
      gh[j] += static_cast<T>(back);
      gt[j] -= static_cast<T>(back);
    }
  }
}

}  // namespace

template <typename T>
double transr_score(const ModelParameters<T>& params, EntityId h, RelationId r, EntityId t) {
  std::vector<double> diff, delta;
  translation_residual(params, h, r, t, diff, delta);
  double g = 0.0;
  for (double v : delta) g += v * v;
  return g;
}

double kg_pair_term(double g_valid, double g_corrupt, double margin) {
  return softplus_neg(g_corrupt - g_valid - margin);
}

template <typename T>
double kg_pair_loss(const ModelParameters<T>& params, std::span<const KgQuad> batch, double margin,
                    ModelParameters<T>* grads) {
  if (batch.empty()) throw Error("kg_pair_loss: empty batch");
  const double scale = 1.0 / static_cast<double>(batch.size());
  std::vector<double> diff_v, delta_v, diff_c, delta_c;
  double total = 0.0;
  for (const auto& q : batch) {
    translation_residual(params, q.head, q.relation, q.tail, diff_v, delta_v);
    translation_residual(params, q.head, q.relation, q.corrupt_tail, diff_c, delta_c);
    double g_valid = 0.0, g_corrupt = 0.0;
    for (double v : delta_v) g_valid += v * v;
    for (double v : delta_c) g_corrupt += v * v;
    const double x = g_corrupt - g_valid - margin;
    total += softplus_neg(x);
    if (grads != nullptr) {
      // d/dx −ln σ(x) = −σ(−x)
      const double dx = -sigmoid(-x) * scale;
      accumulate_score_grad(params, q.head, q.relation, q.corrupt_tail, diff_c, delta_c, dx, *grads);
      accumulate_score_grad(params, q.head, q.relation, q.tail, diff_v, delta_v, -dx, *grads);
    }
  }
  const double loss = total * scale;
  if (!std::isfinite(loss)) throw NumericError("kg_pair_loss: non-finite loss");
  return loss;
}

template <typename T>
KgEpochStats kg_epoch(ModelParameters<T>& params, const CollaborativeKG& g, const KgEpochOptions& options,
                      Rng& rng, Optimizer<T>& optimizer) {
  if (options.batch_size == 0) throw Error("kg_epoch: batch_size must be >= 1");
  const auto triples = g.triples();
  std::vector<std::size_t> order(triples.size());
  for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
  shuffle(order.begin(), order.end(), rng);

  KgEpochStats stats;
  auto grads = ModelParameters<T>::zeros(params.shape());
  KGBatch batch;
  double loss_sum = 0.0;
  for (std::size_t start = 0; start < order.size(); start += options.batch_size) {
    const std::size_t end = std::min(order.size(), start + options.batch_size);
    batch.clear();
    for (std::size_t k = start; k < end; ++k) {
      const auto& t = triples[order[k]];
      const auto c = sample_kg_negative(g, t, rng);
      batch.push_back({t.head, t.relation, t.tail, c.tail});
    }
    grads.set_zero();
    loss_sum += kg_pair_loss(params, batch, options.margin, &grads);
    optimizer.step(params, grads, options.lr);
    stats.quadruples += batch.size();
    ++stats.batches;
  }
  stats.mean_loss = stats.batches ? loss_sum / static_cast<double>(stats.batches) : 0.0;
  return stats;
}

template double transr_score<float>(const ModelParameters<float>&, EntityId, RelationId, EntityId);
template double transr_score<double>(const ModelParameters<double>&, EntityId, RelationId, EntityId);
template double kg_pair_loss<float>(const ModelParameters<float>&, std::span<const KgQuad>, double,
                                    ModelParameters<float>*);
template double kg_pair_loss<double>(const ModelParameters<double>&, std::span<const KgQuad>, double,
                                     ModelParameters<double>*);
template KgEpochStats kg_epoch<float>(ModelParameters<float>&, const CollaborativeKG&,
                                      const KgEpochOptions&, Rng&, Optimizer<float>&);
template KgEpochStats kg_epoch<double>(ModelParameters<double>&, const CollaborativeKG&,
                                       const KgEpochOptions&, Rng&, Optimizer<double>&);

}  // namespace kgax
