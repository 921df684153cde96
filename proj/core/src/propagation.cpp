#include "kgax/propagation.hpp"

#include <algorithm>
#include <cmath>

namespace kgax {

Neighborhoods::Neighborhoods(std::vector<std::size_t> offsets, std::vector<Triple> triples)
    : offsets_(std::move(offsets)), triples_(std::move(triples)) {
  if (offsets_.empty() || offsets_.back() != triples_.size()) {
    throw Error("Neighborhoods: offsets do not match triple count");
  }
}

Neighborhoods sample_neighborhoods(const CollaborativeKG& g, std::size_t cap, std::uint64_t stream_seed) {
  std::vector<std::size_t> offsets{0};
  std::vector<Triple> triples;
  offsets.reserve(g.entity_count() + 1);
  for (EntityId h = 0; h < g.entity_count(); ++h) {
    if (g.degree(h) <= cap) {
      const auto all = g.neighbors_of(h);
      triples.insert(triples.end(), all.begin(), all.end());
    } else {
      Rng rng = make_rng(stream_seed, {h});
      const auto sampled = neighbors(g, h, cap, rng);
      triples.insert(triples.end(), sampled.begin(), sampled.end());
    }
    offsets.push_back(triples.size());
  }
  return Neighborhoods(std::move(offsets), std::move(triples));
}

Neighborhoods full_neighborhoods(const CollaborativeKG& g) {
  std::vector<std::size_t> offsets{0};
  std::vector<Triple> triples(g.triples().begin(), g.triples().end());
  for (EntityId h = 0; h < g.entity_count(); ++h) offsets.push_back(offsets.back() + g.degree(h));
  return Neighborhoods(std::move(offsets), std::move(triples));
}

namespace {

/// (x_h ∥ e_r ∥ x_t) into `buf`.
template <typename T>
void concat_triple(std::span<const T> e_h, std::span<const T> e_r, std::span<const T> e_t, std::vector<T>& buf) {
  buf.resize(e_h.size() + e_r.size() + e_t.size());
  auto it = std::copy(e_h.begin(), e_h.end(), buf.begin());
  it = std::copy(e_r.begin(), e_r.end(), it);
  std::copy(e_t.begin(), e_t.end(), it);
}

template <typename T>
T keep_scale_for(const PropagationOptions& options, std::size_t layer_index, EntityId h) {
  if (!options.training || options.dropout <= 0.0) return T{1};
  Rng rng = make_rng(options.dropout_seed, {layer_index, h});
  if (uniform_unit(rng) < options.dropout) return T{0};
  return static_cast<T>(1.0 / (1.0 - options.dropout));
}

}  // namespace

template <typename T>
std::vector<T> triple_embedding(const LayerParams<T>& layer, std::span<const T> e_h, std::span<const T> e_r,
                                std::span<const T> e_t) {
  std::vector<T> buf;
  concat_triple(e_h, e_r, e_t, buf);
  return affine<T>(layer.w_triple, buf);
}

template <typename T>
AttentionRecord<T> attention_weights(const LayerParams<T>& layer, const Matrix<T>& embeddings,
                                     AttentionMode mode, T leaky_slope) {
  const std::size_t k = embeddings.rows();
  if (k == 0) throw Error("attention_weights: empty neighborhood");
  AttentionRecord<T> rec;
  rec.logits.resize(k);
  for (std::size_t i = 0; i < k; ++i) {
    rec.logits[i] = leaky_relu(dot<T>(layer.w_attention.row(0), embeddings.row(i)), leaky_slope);
  }
  if (mode == AttentionMode::Uniform) {
    rec.weights.assign(k, T{1} / static_cast<T>(k));
  } else {
    rec.weights = stable_softmax<T>(rec.logits);
  }
  return rec;
}

template <typename T>
std::vector<T> aggregate_neighborhood(std::span<const T> weights, const Matrix<T>& embeddings) {
  if (weights.size() != embeddings.rows()) throw Error("aggregate_neighborhood: shape mismatch");
  std::vector<T> out(embeddings.cols(), T{0});
  for (std::size_t k = 0; k < weights.size(); ++k) {
    const auto z = embeddings.row(k);
    for (std::size_t j = 0; j < out.size(); ++j) out[j] += weights[k] * z[j];
  }
  return out;
}

template <typename T>
Matrix<T> propagate_layer(const LayerParams<T>& layer, const Matrix<T>& prev, const Matrix<T>& relation,
                          const Neighborhoods& nb, const PropagationOptions& options,
                          std::size_t layer_index, LayerTrace<T>* trace) {
  const std::size_t n = prev.rows();
  const std::size_t d_in = prev.cols();
  const std::size_t d_out = layer.w_update.rows();
  if (nb.entity_count() != n) throw Error("propagate_layer: neighborhood/entity count mismatch");
  if (layer.w_triple.rows() != d_in || layer.w_triple.cols() != 2 * d_in + relation.cols() ||
      layer.w_update.cols() != 2 * d_in) {
    throw Error("propagate_layer: layer shape mismatch");
  }
  const T slope = static_cast<T>(options.leaky_slope);

  LayerTrace<T> local;
  LayerTrace<T>& tr = trace ? *trace : local;
  tr.triple_embeddings = Matrix<T>(nb.triple_count(), d_in);
  tr.scores.assign(nb.triple_count(), T{0});
  tr.weights.assign(nb.triple_count(), T{0});
  tr.aggregate = Matrix<T>(n, d_in);
  tr.keep_scale.assign(n, T{1});
  tr.pre_activation = Matrix<T>(n, d_out);

  Matrix<T> out(n, d_out);
  std::vector<T> buf;
  std::vector<T> update_in(2 * d_in);
  for (EntityId h = 0; h < n; ++h) {
    const auto triples = nb.of(h);
    const std::size_t base = nb.offset(h);
    auto agg = tr.aggregate.row(h);
    if (!triples.empty()) {
      for (std::size_t k = 0; k < triples.size(); ++k) {
        const auto& t = triples[k];
        concat_triple(prev.row(h), relation.row(t.relation), prev.row(t.tail), buf);
        affine_into<T>(layer.w_triple, buf, tr.triple_embeddings.row(base + k));
        tr.scores[base + k] = dot<T>(layer.w_attention.row(0), tr.triple_embeddings.row(base + k));
      }
      const std::size_t kcount = triples.size();
      if (options.attention == AttentionMode::Uniform) {
        for (std::size_t k = 0; k < kcount; ++k) tr.weights[base + k] = T{1} / static_cast<T>(kcount);
      } else {
        std::vector<T> logits(kcount);
        for (std::size_t k = 0; k < kcount; ++k) logits[k] = leaky_relu(tr.scores[base + k], slope);
        const auto pi = stable_softmax<T>(logits);
        std::copy(pi.begin(), pi.end(), tr.weights.begin() + static_cast<std::ptrdiff_t>(base));
      }
      const T keep = keep_scale_for<T>(options, layer_index, h);
      tr.keep_scale[h] = keep;
      if (keep != T{0}) {
        for (std::size_t k = 0; k < kcount; ++k) {
          const T w = tr.weights[base + k] * keep;
          const auto z = tr.triple_embeddings.row(base + k);
          for (std::size_t j = 0; j < d_in; ++j) agg[j] += w * z[j];
        }
      }
    }
    const auto self = prev.row(h);
    std::copy(self.begin(), self.end(), update_in.begin());
    std::copy(agg.begin(), agg.end(), update_in.begin() + static_cast<std::ptrdiff_t>(d_in));
    auto pre = tr.pre_activation.row(h);
    affine_into<T>(layer.w_update, update_in, pre);
    auto y = out.row(h);
    for (std::size_t j = 0; j < d_out; ++j) y[j] = leaky_relu(pre[j], slope);
  }
  return out;
}

template <typename T>
Matrix<T> concat_layers(std::span<const Matrix<T>> reps) {
  if (reps.empty()) throw Error("concat_layers: missing layer");
  const std::size_t n = reps[0].rows();
  std::size_t width = 0;
  for (const auto& r : reps) {
    if (r.rows() != n) throw Error("concat_layers: row count mismatch");
    width += r.cols();
  }
  Matrix<T> out(n, width);
  for (std::size_t e = 0; e < n; ++e) {
    auto dst = out.row(e).begin();
    for (const auto& r : reps) dst = std::copy(r.row(e).begin(), r.row(e).end(), dst);
  }
  return out;
}

template <typename T>
ForwardPass<T> forward(const ModelParameters<T>& params, const FusionIndex& fusion, const Neighborhoods& nb,
                       const PropagationOptions& options) {
  ForwardPass<T> pass;
  pass.reps.push_back(fuse_base(params.entity, fusion));
  pass.traces.resize(params.layers.size());
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    pass.reps.push_back(
        propagate_layer(params.layers[l], pass.reps[l], params.relation, nb, options, l + 1, &pass.traces[l]));
  }
  pass.final = concat_layers<T>(pass.reps);
  return pass;
}

namespace {

template <typename T>
bool all_zero(std::span<const T> v) {
  return std::all_of(v.begin(), v.end(), [](T x) { return x == T{0}; });
}

/// Backward of one layer: reads grad_out (n × d_out), accumulates into
/// grad_prev (n × d_in), the relation table and the layer's matrices.
template <typename T>
void backward_layer(const LayerParams<T>& layer, const Matrix<T>& prev, const Matrix<T>& relation,
                    const Neighborhoods& nb, const PropagationOptions& options, const LayerTrace<T>& tr,
                    const Matrix<T>& grad_out, Matrix<T>& grad_prev, Matrix<T>& grad_relation,
                    LayerParams<T>& grad_layer) {
  const std::size_t n = prev.rows();
  const std::size_t d_in = prev.cols();
  const std::size_t d_rel = relation.cols();
  const std::size_t d_out = layer.w_update.rows();
  const T slope = static_cast<T>(options.leaky_slope);

  std::vector<T> dv(d_out), update_in(2 * d_in), d_update(2 * d_in), buf, d_concat;
  std::vector<T> d_pi, dz_scale;
  std::vector<T> dz(d_in);
  for (EntityId h = 0; h < n; ++h) {
    const auto gy = grad_out.row(h);
    if (all_zero<T>(gy)) continue;
    const auto pre = tr.pre_activation.row(h);
    for (std::size_t j = 0; j < d_out; ++j) dv[j] = gy[j] * leaky_relu_grad(pre[j], slope);

    const auto self = prev.row(h);
    const auto agg = tr.aggregate.row(h);
    std::copy(self.begin(), self.end(), update_in.begin());
    std::copy(agg.begin(), agg.end(), update_in.begin() + static_cast<std::ptrdiff_t>(d_in));
    std::fill(d_update.begin(), d_update.end(), T{0});
    affine_backward<T>(layer.w_update, update_in, dv, &grad_layer.w_update, d_update);
    auto gself = grad_prev.row(h);
    for (std::size_t j = 0; j < d_in; ++j) gself[j] += d_update[j];

    const auto triples = nb.of(h);
    const T keep = tr.keep_scale[h];
    if (triples.empty() || keep == T{0}) continue;
    const std::span<const T> dm(d_update.data() + d_in, d_in);  // gradient wrt post-dropout aggregate
    const std::size_t base = nb.offset(h);
    const std::size_t kcount = triples.size();

    // ∂/∂π_k = keep · dm · z_k
    d_pi.assign(kcount, T{0});
    for (std::size_t k = 0; k < kcount; ++k) {
      d_pi[k] = keep * dot<T>(dm, tr.triple_embeddings.row(base + k));
    }
    // Softmax-through-LeakyReLU gradient on the raw score W2 · z.
    dz_scale.assign(kcount, T{0});
    if (options.attention == AttentionMode::Learned) {
      T inner{0};
      for (std::size_t k = 0; k < kcount; ++k) inner += tr.weights[base + k] * d_pi[k];
      for (std::size_t k = 0; k < kcount; ++k) {
        const T da = tr.weights[base + k] * (d_pi[k] - inner);
        dz_scale[k] = da * leaky_relu_grad(tr.scores[base + k], slope);
      }
    }
    for (std::size_t k = 0; k < kcount; ++k) {
      const auto& t = triples[k];
      const auto z = tr.triple_embeddings.row(base + k);
      const T pi = tr.weights[base + k] * keep;
      const T ds = dz_scale[k];
      const auto w2 = layer.w_attention.row(0);
      auto gw2 = grad_layer.w_attention.row(0);
      for (std::size_t j = 0; j < d_in; ++j) {
        dz[j] = pi * dm[j] + ds * w2[j];
        gw2[j] += ds * z[j];
      }
      concat_triple(prev.row(h), relation.row(t.relation), prev.row(t.tail), buf);
      d_concat.assign(buf.size(), T{0});
      affine_backward<T>(layer.w_triple, buf, dz, &grad_layer.w_triple, d_concat);
      for (std::size_t j = 0; j < d_in; ++j) gself[j] += d_concat[j];
      auto grel = grad_relation.row(t.relation);
      for (std::size_t j = 0; j < d_rel; ++j) grel[j] += d_concat[d_in + j];
      auto gtail = grad_prev.row(t.tail);
      for (std::size_t j = 0; j < d_in; ++j) gtail[j] += d_concat[d_in + d_rel + j];
    }
  }
}

}  // namespace

template <typename T>
void backward(const ModelParameters<T>& params, const FusionIndex& fusion, const Neighborhoods& nb,
              const PropagationOptions& options, const ForwardPass<T>& pass, const Matrix<T>& grad_final,
              ModelParameters<T>& grads) {
  const std::size_t n = params.entity.rows();
  const std::size_t depth = params.layers.size();
  if (grad_final.rows() != n || grad_final.cols() != pass.final.cols()) {
    throw Error("backward: gradient shape does not match e*");
  }
  // Split ∂L/∂e* into per-layer blocks.
  std::vector<Matrix<T>> grad_reps;
  std::size_t offset = 0;
  for (std::size_t l = 0; l <= depth; ++l) {
    const std::size_t w = pass.reps[l].cols();
    Matrix<T> g(n, w);
    for (std::size_t e = 0; e < n; ++e) {
      const auto src = grad_final.row(e).subspan(offset, w);
      std::copy(src.begin(), src.end(), g.row(e).begin());
    }
    grad_reps.push_back(std::move(g));
    offset += w;
  }
  for (std::size_t l = depth; l >= 1; --l) {
    backward_layer(params.layers[l - 1], pass.reps[l - 1], params.relation, nb, options, pass.traces[l - 1],
                   grad_reps[l], grad_reps[l - 1], grads.relation, grads.layers[l - 1]);
  }
  fuse_base_backward(params.entity, fusion, grad_reps[0], grads.entity);
}

#define KGAX_INSTANTIATE_PROPAGATION(T)                                                               \
  template std::vector<T> triple_embedding<T>(const LayerParams<T>&, std::span<const T>,             \
                                              std::span<const T>, std::span<const T>);               \
  template AttentionRecord<T> attention_weights<T>(const LayerParams<T>&, const Matrix<T>&,          \
                                                   AttentionMode, T);                                \
  template std::vector<T> aggregate_neighborhood<T>(std::span<const T>, const Matrix<T>&);           \
  template Matrix<T> propagate_layer<T>(const LayerParams<T>&, const Matrix<T>&, const Matrix<T>&,   \
                                        const Neighborhoods&, const PropagationOptions&, std::size_t, \
                                        LayerTrace<T>*);                                             \
  template Matrix<T> concat_layers<T>(std::span<const Matrix<T>>);                                   \
  template ForwardPass<T> forward<T>(const ModelParameters<T>&, const FusionIndex&,                  \
                                     const Neighborhoods&, const PropagationOptions&);               \
  template void backward<T>(const ModelParameters<T>&, const FusionIndex&, const Neighborhoods&,     \
                            const PropagationOptions&, const ForwardPass<T>&, const Matrix<T>&,      \
                            ModelParameters<T>&);

KGAX_INSTANTIATE_PROPAGATION(float)
KGAX_INSTANTIATE_PROPAGATION(double)

}  // namespace kgax
