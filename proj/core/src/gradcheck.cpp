#include "kgax/gradcheck.hpp"

namespace kgax {

GradcheckFixture make_gradcheck_fixture(std::uint64_t seed) {
  GradcheckFixture f;
  f.data = make_dataset("u0\ti0\nu0\ti1\nu1\ti1\nu1\ti2\n", "", "", "i0\tt0\ni2\tt0\n", DatasetOptions{});
  // Keep all four interactions in train.
  f.data.interactions = InteractionDataset(3, {UserSplit{{0, 1}, {}, {}}, UserSplit{{1, 2}, {}, {}}});
  f.config.dim = 4;
  f.config.layer_dims = {3, 2};
  f.config.l2 = 0.01;
  f.config.dropout = 0.0;
  f.config.fusion = true;
  f.config.attention = AttentionMode::Learned;
  f.config.seed = seed;
  f.config.precision = 64;
  f.context = make_context(f.data, f.config);
  f.neighborhoods = full_neighborhoods(f.context.graph);
  f.rec_batch = {{0, 0, 2}, {0, 1, 2}, {1, 1, 0}, {1, 2, 0}};
  Rng rng = make_rng(seed, {0x6b67});
  for (const auto& t : f.context.graph.triples()) {
    f.kg_batch.push_back({t.head, t.relation, t.tail, sample_kg_negative(f.context.graph, t, rng).tail});
  }
  f.params = init_parameters<double>(model_shape(f.context, f.config), seed);
  return f;
}

double fixture_loss(const GradcheckFixture& f, const ModelParameters<double>& params, LossTerms terms,
                    ModelParameters<double>* grads) {
  double loss = 0.0;
  if (terms != LossTerms::Rec) loss += kg_pair_loss(params, f.kg_batch, f.config.kg_margin, grads);
  if (terms != LossTerms::Kg) {
    PropagationOptions options;
    options.attention = f.config.attention;
    options.leaky_slope = f.config.leaky_slope;
    options.training = false;
    loss += rec_batch_loss(params, f.context, f.neighborhoods, options, f.rec_batch, f.config.l2, grads);
  }
  return loss;
}

std::vector<GradcheckCase> run_gradcheck_suite(double h, double tol, double analytic_scale) {
  const std::pair<const char*, LossTerms> cases[] = {
      {"transr", LossTerms::Kg}, {"bpr-propagation", LossTerms::Rec}, {"full", LossTerms::Full}};
  std::vector<GradcheckCase> out;
  for (const auto& [name, terms] : cases) {
    auto f = make_gradcheck_fixture();
    auto params = f.params;
    auto grads = ModelParameters<double>::zeros(params.shape());
    fixture_loss(f, params, terms, &grads);
    std::vector<GradCheckParam> blocks;
    std::vector<const Matrix<double>*> g;
    grads.visit([&](const std::string&, Matrix<double>& m) {
      for (auto& v : m.values()) v *= analytic_scale;
      g.push_back(&m);
    });
    std::size_t k = 0;
    params.visit([&](const std::string& pname, Matrix<double>& m) {
      blocks.push_back({pname, m.values(), g[k++]->values()});
    });
    const auto loss = [&] { return fixture_loss(f, params, terms, nullptr); };
    out.push_back({name, finite_diff_gradcheck(loss, blocks, h, tol)});
  }
  return out;
}

}  // namespace kgax
