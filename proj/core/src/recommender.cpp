#include "kgax/recommender.hpp"

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>

#include "kgax/eval.hpp"
#include "kgax/transr.hpp"

namespace kgax {

namespace {

// Stream tags for derive_seed; one per independent source of randomness.
constexpr std::uint64_t kRecStream = 0x7265630001ULL;
constexpr std::uint64_t kNeighborStream = 0x6e62720002ULL;
constexpr std::uint64_t kDropoutStream = 0x64726f0003ULL;
constexpr std::uint64_t kKgStream = 0x6b67650004ULL;
constexpr std::uint64_t kKgWarmupStream = 0x6b67770005ULL;
constexpr std::uint64_t kEvalStream = 0x6576610006ULL;

}  // namespace

template <typename T>
double predict_score(std::span<const T> e_user, std::span<const T> e_item) {
  if (e_user.size() != e_item.size()) {
    throw Error("predict_score: length mismatch " + std::to_string(e_user.size()) + " vs " +
                std::to_string(e_item.size()));
  }
  double s = 0.0;
  for (std::size_t j = 0; j < e_user.size(); ++j) s += static_cast<double>(e_user[j]) * static_cast<double>(e_item[j]);
  return s;
}

double bpr_pair_loss(double pos, double neg, double l2, double sq_norm) {
  return softplus_neg(pos - neg) + l2 * sq_norm;
}

std::vector<RecTriple> build_rec_epoch(const InteractionDataset& data, std::uint64_t seed, std::size_t epoch) {
  Rng rng = make_rng(seed, {kRecStream, epoch});
  std::vector<RecTriple> out;
  for (UserId u = 0; u < data.user_count(); ++u) {
    const auto& train = data.user(u).train;
    if (train.size() >= data.item_count()) continue;
    for (ItemId i : train) out.push_back({u, i, sample_rec_negative(data, u, rng)});
  }
  shuffle(out.begin(), out.end(), rng);
  return out;
}

ModelContext make_context(const Dataset& data, const ModelConfig& config) {
  ModelContext c;
  GraphOptions options;
  options.inverse_relations = config.inverse_relations;
  options.include_auxiliary = config.fusion;
  c.graph = build_ckg(data, options);
  c.fusion = config.fusion ? FusionIndex(data.aux, data.index.entity_count())
                           : FusionIndex(AuxiliaryMap{}, data.index.entity_count());
  c.user_count = data.interactions.user_count();
  c.item_count = data.interactions.item_count();
  return c;
}

ModelShape model_shape(const ModelContext& context, const ModelConfig& config) {
  ModelShape s;
  s.entity_count = context.entity_count();
  s.relation_count = context.graph.relation_count();
  s.dim = config.dim;
  s.layer_dims = config.layer_dims;
  return s;
}

template <typename T>
double rec_batch_loss(const ModelParameters<T>& params, const ModelContext& context, const Neighborhoods& nb,
                      const PropagationOptions& options, std::span<const RecTriple> batch, double l2,
                      ModelParameters<T>* grads) {
  if (batch.empty()) throw Error("rec_batch_loss: empty batch");
  const auto pass = forward(params, context.fusion, nb, options);
  const auto& e = pass.final;
  const auto user_row = [&](UserId u) { return static_cast<EntityId>(u); };
  const auto item_row = [&](ItemId i) { return static_cast<EntityId>(context.user_count + i); };
  const double scale = 1.0 / static_cast<double>(batch.size());

  Matrix<T> grad_final;
  if (grads != nullptr) grad_final = Matrix<T>(e.rows(), e.cols());
  double data_term = 0.0;
  std::set<EntityId> touched;
  for (const auto& b : batch) {
    const auto u = user_row(b.user), i = item_row(b.pos), j = item_row(b.neg);
    touched.insert({u, i, j});
    const double x = predict_score<T>(e.row(u), e.row(i)) - predict_score<T>(e.row(u), e.row(j));
    data_term += softplus_neg(x);
    if (grads == nullptr) continue;
    // d/dx −ln σ(x) = −σ(−x)
    const auto dx = static_cast<T>(-sigmoid(-x) * scale);
    auto gu = grad_final.row(u);
    auto gi = grad_final.row(i);
    auto gj = grad_final.row(j);
    const auto eu = e.row(u), ei = e.row(i), ej = e.row(j);
    for (std::size_t k = 0; k < e.cols(); ++k) {
      gu[k] += dx * (ei[k] - ej[k]);
      gi[k] += dx * eu[k];
      gj[k] -= dx * eu[k];
    }
  }

  double sq_norm = 0.0;
  for (auto r : touched) {
    for (T v : params.entity.row(r)) sq_norm += static_cast<double>(v) * static_cast<double>(v);
  }
  for (const auto& layer : params.layers) {
    for (const auto* m : {&layer.w_triple, &layer.w_attention, &layer.w_update}) {
      for (T v : m->values()) sq_norm += static_cast<double>(v) * static_cast<double>(v);
    }
  }
  const double loss = data_term * scale + l2 * sq_norm;
  if (!std::isfinite(loss)) throw NumericError("rec_batch_loss: non-finite loss");

  if (grads != nullptr) {
    backward(params, context.fusion, nb, options, pass, grad_final, *grads);
    const auto two_l2 = static_cast<T>(2.0 * l2);
    for (auto r : touched) {
      auto g = grads->entity.row(r);
      const auto p = params.entity.row(r);
      for (std::size_t k = 0; k < g.size(); ++k) g[k] += two_l2 * p[k];
    }
    for (std::size_t l = 0; l < params.layers.size(); ++l) {
      const auto& p = params.layers[l];
      auto& g = grads->layers[l];
      const std::pair<const Matrix<T>*, Matrix<T>*> pairs[] = {
          {&p.w_triple, &g.w_triple}, {&p.w_attention, &g.w_attention}, {&p.w_update, &g.w_update}};
      for (const auto& [pm, gm] : pairs) {
        const auto pv = pm->values();
        auto gv = gm->values();
        for (std::size_t k = 0; k < pv.size(); ++k) gv[k] += two_l2 * pv[k];
      }
    }
  }
  return loss;
}

bool EarlyStopping::observe(double value) {
  ++epoch_;
  if (epoch_ == 1 || value > best_) {
    best_ = value;
    best_epoch_ = epoch_;
    stale_ = 0;
    return true;
  }
  ++stale_;
  return false;
}

Neighborhoods eval_neighborhoods(const ModelContext& context, const ModelConfig& config) {
  return sample_neighborhoods(context.graph, config.neighbor_cap, derive_seed(config.seed, {kEvalStream}));
}

namespace {

PropagationOptions propagation_options(const ModelConfig& config) {
  PropagationOptions o;
  o.attention = config.attention;
  o.leaky_slope = config.leaky_slope;
  o.dropout = config.dropout;
  return o;
}

}  // namespace

template <typename T>
Matrix<T> compute_embeddings(const ModelParameters<T>& params, const ModelContext& context,
                             const ModelConfig& config) {
  const auto nb = eval_neighborhoods(context, config);
  auto options = propagation_options(config);
  options.training = false;
  return forward(params, context.fusion, nb, options).final;
}

template <typename T>
void refresh_embeddings(TrainedModel<T>& model, const ModelContext& context) {
  model.final_embeddings = compute_embeddings(model.params, context, model.config);
}

template <typename T>
double validation_recall20(const Matrix<T>& embeddings, const InteractionDataset& data, std::size_t threads) {
  const EmbeddingScorer<T> scorer(embeddings, data.user_count(), data.item_count());
  const std::size_t ks[] = {20};
  return evaluate(scorer, data, Split::Validation, ks, threads).recall_at(20);
}

template <typename T>
TrainResult<T> train(const Dataset& data, const ModelConfig& config, const EpochObserver& observer) {
  validate(config);
  if (data.interactions.train_interaction_count() == 0) throw DataError("train: empty train split");
  const auto context = make_context(data, config);
  const auto shape = model_shape(context, config);

  TrainResult<T> result;
  result.model.config = config;
  auto& params = result.model.params;
  params = init_parameters<T>(shape, config.seed);
  Optimizer<T> rec_opt(shape);
  Optimizer<T> kg_opt(shape);
  KgEpochOptions kg_options;
  kg_options.batch_size = config.batch_size;
  kg_options.lr = config.lr;
  kg_options.margin = config.kg_margin;

  if (config.pretrain_kg) {
    for (std::size_t w = 0; w < config.kg_warmup_epochs; ++w) {
      Rng rng = make_rng(config.seed, {kKgWarmupStream, w});
      try {
        kg_epoch(params, context.graph, kg_options, rng, kg_opt);
      } catch (const NumericError& e) {
        throw NumericError("divergence in KG warmup epoch " + std::to_string(w + 1) + ": " + e.what());
      }
    }
  }

  EarlyStopping stopper(config.patience);
  ModelParameters<T> best = params;
  auto grads = ModelParameters<T>::zeros(shape);
  auto options = propagation_options(config);
  options.training = true;
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    const auto nb = sample_neighborhoods(context.graph, config.neighbor_cap,
                                         derive_seed(config.seed, {kNeighborStream, epoch}));
    const auto triples = build_rec_epoch(data.interactions, config.seed, epoch);
    EpochLog log;
    log.epoch = epoch;
    std::size_t batches = 0;
    for (std::size_t first = 0; first < triples.size(); first += config.batch_size) {
      const auto count = std::min(config.batch_size, triples.size() - first);
      const auto batch = std::span<const RecTriple>(triples).subspan(first, count);
      options.dropout_seed = derive_seed(config.seed, {kDropoutStream, epoch, batches});
      try {
        grads.set_zero();
        log.rec_loss += rec_batch_loss(params, context, nb, options, batch, config.l2, &grads);
        rec_opt.step(params, grads, config.lr);
      } catch (const NumericError& e) {
        throw NumericError("divergence at epoch " + std::to_string(epoch) + " batch " +
                           std::to_string(batches + 1) + ": " + e.what());
      }
      ++batches;
    }
    if (batches > 0) log.rec_loss /= static_cast<double>(batches);

    if (config.alternate_kg) {
      Rng rng = make_rng(config.seed, {kKgStream, epoch});
      try {
        log.kg_loss = kg_epoch(params, context.graph, kg_options, rng, kg_opt).mean_loss;
      } catch (const NumericError& e) {
        throw NumericError("divergence at epoch " + std::to_string(epoch) + " KG pass: " + e.what());
      }
    }

    const auto embeddings = compute_embeddings(params, context, config);
    log.val_recall20 = validation_recall20(embeddings, data.interactions, config.eval_threads);
    if (config.log_elapsed) {
      log.elapsed_ms =
          std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    }
    result.log.push_back(log);
    if (observer) observer(log);
    if (stopper.observe(log.val_recall20)) best = params;
    if (stopper.should_stop()) break;
  }
  params = std::move(best);
  result.best_epoch = stopper.best_epoch();
  refresh_embeddings(result.model, context);
  return result;
}

template <typename T>
std::vector<Recommendation> recommend_topk(const TrainedModel<T>& model, const InteractionDataset& data, UserId u,
                                           std::size_t k) {
  if (u >= data.user_count()) throw DataError("recommend_topk: unknown user " + std::to_string(u));
  if (k == 0) throw Error("recommend_topk: K must be >= 1");
  if (model.final_embeddings.rows() == 0) throw Error("recommend_topk: embeddings not computed");
  const EmbeddingScorer<T> scorer(model.final_embeddings, data.user_count(), data.item_count());
  std::vector<double> scores(data.item_count());
  scorer.score_items(u, scores);
  const auto ranked = rank_candidates(scores, data.user(u).train);
  std::vector<Recommendation> out;
  for (std::size_t r = 0; r < std::min(k, ranked.size()); ++r) out.push_back({ranked[r], scores[ranked[r]]});
  return out;
}

std::string epoch_log_csv(const ModelConfig& config, std::span<const EpochLog> log) {
  std::ostringstream out;
  for (const auto& [key, value] : split_key_values(recorded_text(config), "config")) {
    out << "# " << key << '=' << value << '\n';
  }
  out << "epoch,rec_loss,kg_loss,val_recall@20,elapsed_ms\n";
  for (const auto& e : log) {
    out << e.epoch << ',' << format_real(e.rec_loss) << ',' << format_real(e.kg_loss) << ','
        << format_real(e.val_recall20) << ',' << format_real(e.elapsed_ms) << '\n';
  }
  return out.str();
}

namespace {

constexpr char kMagic[4] = {'K', 'G', 'A', 'X'};

template <typename U>
void put_le(std::string& out, U v) {
  for (std::size_t b = 0; b < sizeof(U); ++b) out.push_back(static_cast<char>((v >> (8 * b)) & 0xff));
}

template <typename T>
using BitsOf = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>;

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  template <typename U>
  U get_le(const std::string& where) {
    need(sizeof(U), where);
    U v = 0;
    for (std::size_t b = 0; b < sizeof(U); ++b) {
      v |= static_cast<U>(static_cast<unsigned char>(bytes_[pos_ + b])) << (8 * b);
    }
    pos_ += sizeof(U);
    return v;
  }

  std::string_view take(std::size_t n, const std::string& where) {
    need(n, where);
    auto s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  bool at_end() const noexcept { return pos_ == bytes_.size(); }
  std::size_t remaining() const noexcept { return bytes_.size() - pos_; }

 private:
  void need(std::size_t n, const std::string& where) const {
    if (bytes_.size() - pos_ < n) throw TruncatedPayloadError(where);
  }

  std::string_view bytes_;
  std::size_t pos_ = 0;
};

template <typename S>
Matrix<S> read_array(Reader& in, const std::string& name) {
  const auto rows = in.get_le<std::uint64_t>(name + " rows");
  const auto cols = in.get_le<std::uint64_t>(name + " cols");
  if (cols != 0 && rows > in.remaining() / sizeof(S) / cols) throw TruncatedPayloadError(name + " data");
  Matrix<S> m(rows, cols);
  for (auto& v : m.values()) v = std::bit_cast<S>(in.get_le<BitsOf<S>>(name + " data"));
  return m;
}

template <typename S>
ModelParameters<S> read_arrays(Reader& in, std::uint32_t count) {
  if (count < 3 || (count - 3) % 3 != 0) throw ModelFormatError("model file: bad array count " + std::to_string(count));
  ModelParameters<S> p;
  p.entity = read_array<S>(in, "entity");
  p.relation = read_array<S>(in, "relation");
  p.projection = read_array<S>(in, "projection");
  for (std::uint32_t l = 0; l < (count - 3) / 3; ++l) {
    const auto prefix = "layer" + std::to_string(l + 1) + ".";
    LayerParams<S> layer;
    layer.w_triple = read_array<S>(in, prefix + "w_triple");
    layer.w_attention = read_array<S>(in, prefix + "w_attention");
    layer.w_update = read_array<S>(in, prefix + "w_update");
    p.layers.push_back(std::move(layer));
  }
  return p;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open model file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace

template <typename T>
std::string serialize_model(const ModelConfig& config, const ModelParameters<T>& params) {
  std::string out(kMagic, 4);
  put_le<std::uint32_t>(out, kModelFormatVersion);
  put_le<std::uint32_t>(out, sizeof(T));
  const auto text = recorded_text(config);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(text.size()));
  out += text;
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(3 + 3 * params.layers.size()));
  params.visit([&](const std::string&, const Matrix<T>& m) {
    put_le<std::uint64_t>(out, m.rows());
    put_le<std::uint64_t>(out, m.cols());
    for (T v : m.values()) put_le<BitsOf<T>>(out, std::bit_cast<BitsOf<T>>(v));
  });
  return out;
}

template <typename T>
TrainedModel<T> deserialize_model(std::string_view bytes) {
  Reader in(bytes);
  if (bytes.size() < 4 || bytes.substr(0, 4) != std::string_view(kMagic, 4)) {
    if (bytes.size() < 4 && std::string_view(kMagic, bytes.size()) == bytes) throw TruncatedPayloadError("magic");
    throw BadMagicError();
  }
  in.take(4, "magic");
  const auto version = in.get_le<std::uint32_t>("version");
  if (version != kModelFormatVersion) throw VersionMismatchError(version, kModelFormatVersion);
  const auto width = in.get_le<std::uint32_t>("scalar width");
  if (width != 4 && width != 8) throw ModelFormatError("model file: unsupported scalar width " + std::to_string(width));
  const auto text_len = in.get_le<std::uint32_t>("config length");
  const auto text = in.take(text_len, "config");
  const auto count = in.get_le<std::uint32_t>("array count");
  TrainedModel<T> model;
  try {
    model.config = parse_model_config(text);
  } catch (const ConfigError& e) {
    throw ModelFormatError(std::string("model file: bad config: ") + e.what());
  }
  if (width == sizeof(T)) {
    model.params = read_arrays<T>(in, count);
  } else if (width == 4) {
    model.params = convert_parameters<T>(read_arrays<float>(in, count));
  } else {
    model.params = convert_parameters<T>(read_arrays<double>(in, count));
  }
  if (!in.at_end()) throw ModelFormatError("model file: trailing bytes after last array");
  if (model.params.shape().dim != model.config.dim || model.params.layers.size() != model.config.depth()) {
    throw ModelFormatError("model file: arrays do not match the embedded config");
  }
  return model;
}

template <typename T>
void save_model(const TrainedModel<T>& model, const std::filesystem::path& path) {
  const auto bytes = serialize_model(model.config, model.params);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write model file " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("failed writing model file " + path.string());
}

template <typename T>
TrainedModel<T> load_model(const std::filesystem::path& path) {
  return deserialize_model<T>(read_file(path));
}

int model_precision(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  Reader in(bytes);
  if (bytes.substr(0, 4) != std::string_view(kMagic, 4)) throw BadMagicError();
  in.take(4, "magic");
  const auto version = in.get_le<std::uint32_t>("version");
  if (version != kModelFormatVersion) throw VersionMismatchError(version, kModelFormatVersion);
  const auto width = in.get_le<std::uint32_t>("scalar width");
  if (width != 4 && width != 8) throw ModelFormatError("model file: unsupported scalar width " + std::to_string(width));
  return static_cast<int>(width * 8);
}

#define KGAX_INSTANTIATE_RECOMMENDER(T)                                                                \
  template double predict_score<T>(std::span<const T>, std::span<const T>);                           \
  template double rec_batch_loss<T>(const ModelParameters<T>&, const ModelContext&, const Neighborhoods&, \
                                    const PropagationOptions&, std::span<const RecTriple>, double,     \
                                    ModelParameters<T>*);                                              \
  template Matrix<T> compute_embeddings<T>(const ModelParameters<T>&, const ModelContext&,            \
                                           const ModelConfig&);                                       \
  template void refresh_embeddings<T>(TrainedModel<T>&, const ModelContext&);                          \
  template double validation_recall20<T>(const Matrix<T>&, const InteractionDataset&, std::size_t);    \
  template TrainResult<T> train<T>(const Dataset&, const ModelConfig&, const EpochObserver&);          \
  template std::vector<Recommendation> recommend_topk<T>(const TrainedModel<T>&, const InteractionDataset&, \
                                                         UserId, std::size_t);                         \
  template std::string serialize_model<T>(const ModelConfig&, const ModelParameters<T>&);             \
  template TrainedModel<T> deserialize_model<T>(std::string_view);                                     \
  template void save_model<T>(const TrainedModel<T>&, const std::filesystem::path&);                   \
  template TrainedModel<T> load_model<T>(const std::filesystem::path&);

KGAX_INSTANTIATE_RECOMMENDER(float)
KGAX_INSTANTIATE_RECOMMENDER(double)

}  // namespace kgax
