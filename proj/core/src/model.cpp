#include "kgax/model.hpp"

namespace kgax {

std::size_t ModelShape::final_dim() const {
  std::size_t n = dim;
  for (auto d : layer_dims) n += d;
  return n;
}

template <typename T>
ModelShape ModelParameters<T>::shape() const {
  ModelShape s;
  s.entity_count = entity.rows();
  s.relation_count = relation.rows();
  s.dim = entity.cols();
  for (const auto& l : layers) s.layer_dims.push_back(l.w_update.rows());
  return s;
}

template <typename T>
ModelParameters<T> ModelParameters<T>::zeros(const ModelShape& s) {
  ModelParameters<T> p;
  p.entity = Matrix<T>(s.entity_count, s.dim);
  p.relation = Matrix<T>(s.relation_count, s.dim);
  p.projection = Matrix<T>(s.relation_count, s.dim * s.dim);
  for (std::size_t l = 1; l <= s.depth(); ++l) {
    const auto in = s.layer_input_dim(l);
    LayerParams<T> layer;
    layer.w_triple = Matrix<T>(in, 2 * in + s.dim);
    layer.w_attention = Matrix<T>(1, in);
    layer.w_update = Matrix<T>(s.layer_dims[l - 1], 2 * in);
    p.layers.push_back(std::move(layer));
  }
  return p;
}

template <typename T>
void ModelParameters<T>::set_zero() {
  visit([](const std::string&, Matrix<T>& m) { m.fill(T{0}); });
}

Rng parameter_rng(std::uint64_t seed, ParamStream stream, std::uint64_t index) {
  return make_rng(seed, {0x9a7a3ULL, static_cast<std::uint64_t>(stream), index});
}

template <typename T>
ModelParameters<T> init_parameters(const ModelShape& s, std::uint64_t seed) {
  if (s.entity_count == 0 || s.relation_count == 0 || s.dim == 0) {
    throw Error("init_parameters: empty model shape");
  }
  ModelParameters<T> p;
  {
    auto rng = parameter_rng(seed, ParamStream::Entity);
    p.entity = xavier_init<T>(s.entity_count, s.dim, rng);
  }
  {
    auto rng = parameter_rng(seed, ParamStream::Relation);
    p.relation = xavier_init<T>(s.relation_count, s.dim, rng);
  }
  p.projection = Matrix<T>(s.relation_count, s.dim * s.dim);
  for (std::size_t r = 0; r < s.relation_count; ++r) {
    auto rng = parameter_rng(seed, ParamStream::Projection, r);
    const auto noise = xavier_init<T>(s.dim, s.dim, rng);
    auto row = p.projection.row(r);
    for (std::size_t i = 0; i < s.dim; ++i) {
      for (std::size_t j = 0; j < s.dim; ++j) {
        row[i * s.dim + j] = (i == j ? T{1} : T{0}) + static_cast<T>(0.1) * noise(i, j);
      }
    }
  }
  for (std::size_t l = 1; l <= s.depth(); ++l) {
    const auto in = s.layer_input_dim(l);
    LayerParams<T> layer;
    auto r1 = parameter_rng(seed, ParamStream::Layer, 3 * l);
    layer.w_triple = xavier_init<T>(in, 2 * in + s.dim, r1);
    auto r2 = parameter_rng(seed, ParamStream::Layer, 3 * l + 1);
    layer.w_attention = xavier_init<T>(1, in, r2);
    auto r3 = parameter_rng(seed, ParamStream::Layer, 3 * l + 2);
    layer.w_update = xavier_init<T>(s.layer_dims[l - 1], 2 * in, r3);
    p.layers.push_back(std::move(layer));
  }
  return p;
}

template <typename T>
Optimizer<T>::Optimizer(const ModelShape& shape, AdamHyper hyper) {
  auto zeros = ModelParameters<T>::zeros(shape);
  zeros.visit([&](const std::string&, Matrix<T>& m) { states_.emplace_back(m.size(), hyper); });
}

template <typename T>
void Optimizer<T>::step(ModelParameters<T>& params, const ModelParameters<T>& grads, double lr) {
  std::vector<const Matrix<T>*> g;
  grads.visit([&](const std::string&, const Matrix<T>& m) { g.push_back(&m); });
  std::size_t k = 0;
  params.visit([&](const std::string& name, Matrix<T>& m) {
    adam_step<T>(m.values(), g[k]->values(), states_[k], lr, name);
    ++k;
  });
  ++steps_;
}

template struct ModelParameters<float>;
template struct ModelParameters<double>;
template ModelParameters<float> init_parameters<float>(const ModelShape&, std::uint64_t);
template ModelParameters<double> init_parameters<double>(const ModelShape&, std::uint64_t);
template class Optimizer<float>;
template class Optimizer<double>;

}  // namespace kgax
