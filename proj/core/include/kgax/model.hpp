#pragma once

// Learnable parameters shared by every module and the optimizer that owns
// their Adam state.

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "kgax/numeric.hpp"

namespace kgax {

struct ModelShape {
  std::size_t entity_count = 0;
  std::size_t relation_count = 0;
  std::size_t dim = 0;
  std::vector<std::size_t> layer_dims;

  std::size_t depth() const noexcept { return layer_dims.size(); }
  /// Input width of layer l (1-based); layer 1 consumes the base embeddings.
  std::size_t layer_input_dim(std::size_t l) const { return l == 1 ? dim : layer_dims.at(l - 2); }
  /// Length of the concatenated representation e*.
  std::size_t final_dim() const;

  bool operator==(const ModelShape&) const = default;
};

/// One propagation layer with input width d_in, relation width d, output d_out.
template <typename T>
struct LayerParams {
  Matrix<T> w_triple;     // d_in × (2·d_in + d): triple embedding transform
  Matrix<T> w_attention;  // 1 × d_in: attention projection
  Matrix<T> w_update;     // d_out × 2·d_in: self ∥ aggregate update

  bool operator==(const LayerParams&) const = default;
};

template <typename T>
struct ModelParameters {
  Matrix<T> entity;      // entity_count × d, users/items/KG entities/aux tokens
  Matrix<T> relation;    // relation_count × d
  Matrix<T> projection;  // relation_count × d², row r holds W_r row-major
  std::vector<LayerParams<T>> layers;

  ModelShape shape() const;

  /// Same shapes, all zero.
  static ModelParameters zeros(const ModelShape& shape);

  void set_zero();

  /// Calls fn(name, matrix) for every tensor in the documented order: entity,
  /// relation, projection, then w_triple/w_attention/w_update per layer.
  template <typename Fn>
  void visit(Fn&& fn) {
    fn(std::string("entity"), entity);
    fn(std::string("relation"), relation);
    fn(std::string("projection"), projection);
    for (std::size_t l = 0; l < layers.size(); ++l) {
      const auto p = "layer" + std::to_string(l + 1) + ".";
      fn(p + "w_triple", layers[l].w_triple);
      fn(p + "w_attention", layers[l].w_attention);
      fn(p + "w_update", layers[l].w_update);
    }
  }
  template <typename Fn>
  void visit(Fn&& fn) const {
    const_cast<ModelParameters*>(this)->visit(
        [&](const std::string& name, const Matrix<T>& m) { fn(name, m); });
  }

  bool operator==(const ModelParameters&) const = default;
};

/// One independent generator stream per parameter group.
enum class ParamStream : std::uint64_t {
  Entity = 1,
  Relation = 2,
  Projection = 3,
  Layer = 4,
};

Rng parameter_rng(std::uint64_t seed, ParamStream stream, std::uint64_t index = 0);

/// Xavier tables and layer matrices; each W_r is identity plus 0.1·Xavier noise.
template <typename T>
ModelParameters<T> init_parameters(const ModelShape& shape, std::uint64_t seed);

template <typename To, typename From>
ModelParameters<To> convert_parameters(const ModelParameters<From>& p) {
  ModelParameters<To> out = ModelParameters<To>::zeros(p.shape());
  std::vector<const Matrix<From>*> src;
  p.visit([&](const std::string&, const Matrix<From>& m) { src.push_back(&m); });
  std::size_t k = 0;
  out.visit([&](const std::string&, Matrix<To>& m) {
    const auto s = src[k++]->values();
    auto d = m.values();
    for (std::size_t i = 0; i < s.size(); ++i) d[i] = static_cast<To>(s[i]);
  });
  return out;
}

/// Adam state for every tensor of a ModelParameters.
template <typename T>
class Optimizer {
 public:
  Optimizer() = default;
  Optimizer(const ModelShape& shape, AdamHyper hyper = {});

  /// Applies one Adam update to every tensor. Tensors whose gradient and
  /// moments are all zero are left unchanged.
  void step(ModelParameters<T>& params, const ModelParameters<T>& grads, double lr);

  std::uint64_t steps() const noexcept { return steps_; }

 private:
  std::vector<AdamState<T>> states_;
  std::uint64_t steps_ = 0;
};

}  // namespace kgax
