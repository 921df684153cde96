#include <benchmark/benchmark.h>

#include "kgax/eval.hpp"
#include "kgax/recommender.hpp"
#include "kgax/synthetic.hpp"

namespace {

using namespace kgax;

struct Fixture {
  Dataset data = make_synthetic_dataset(SyntheticOptions{}, DatasetOptions{});
  ModelConfig config;
  ModelContext context;
  ModelParameters<float> params;

  explicit Fixture(std::size_t dim) {
    config.dim = dim;
    config.layer_dims = {dim, dim / 2};
    context = make_context(data, config);
    params = init_parameters<float>(model_shape(context, config), config.seed);
  }
};

void BM_Forward(benchmark::State& state) {
  Fixture f(static_cast<std::size_t>(state.range(0)));
  const auto nb = eval_neighborhoods(f.context, f.config);
  for (auto _ : state) {
    auto pass = forward(f.params, f.context.fusion, nb, PropagationOptions{});
    benchmark::DoNotOptimize(pass.final.values().data());
  }
}
BENCHMARK(BM_Forward)->Arg(16)->Arg(64)->Unit(benchmark::kMillisecond);

void BM_RecBatch(benchmark::State& state) {
  Fixture f(16);
  const auto nb = eval_neighborhoods(f.context, f.config);
  auto epoch = build_rec_epoch(f.data.interactions, 1, 1);
  epoch.resize(std::min<std::size_t>(epoch.size(), static_cast<std::size_t>(state.range(0))));
  auto grads = ModelParameters<float>::zeros(f.params.shape());
  PropagationOptions o;
  o.training = true;
  o.dropout = 0.1;
  for (auto _ : state) {
    grads.set_zero();
    benchmark::DoNotOptimize(rec_batch_loss(f.params, f.context, nb, o, epoch, 1e-5, &grads));
  }
}
BENCHMARK(BM_RecBatch)->Arg(128)->Arg(1024)->Unit(benchmark::kMillisecond);

void BM_Evaluate(benchmark::State& state) {
  Fixture f(16);
  const auto emb = compute_embeddings(f.params, f.context, f.config);
  const auto& ia = f.data.interactions;
  const std::size_t ks[] = {10, 20};
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        evaluate(EmbeddingScorer<float>(emb, ia.user_count(), ia.item_count()), ia, Split::Test, ks).auc);
  }
}
BENCHMARK(BM_Evaluate)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
