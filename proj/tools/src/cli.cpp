#include "kgax_cli/cli.hpp"

#include <CLI11.hpp>
#include <charconv>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <sstream>

#include "kgax/error.hpp"
#include "kgax/eval.hpp"
#include "kgax/gradcheck.hpp"
#include "kgax/graph.hpp"
#include "kgax/recommender.hpp"

namespace kgax::cli {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_list(std::string_view text) {
  std::vector<std::string_view> out;
  while (true) {
    const auto comma = text.find(',');
    const auto item = trim(text.substr(0, comma));
    if (!item.empty()) out.push_back(item);
    if (comma == std::string_view::npos) break;
    text.remove_prefix(comma + 1);
  }
  return out;
}

std::size_t parse_count(std::string_view key, std::string_view text, std::string_view legal) {
  std::size_t v = 0;
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc{} || ptr != end || text.empty()) {
    throw ConfigError("config key '" + std::string(key) + "': invalid value '" + std::string(text) +
                      "' (legal: " + std::string(legal) + ")");
  }
  return v;
}

/// Each list element parsed and range-checked through the model key of the same name.
template <typename V>
std::vector<V> parse_axis(std::string_view grid_key, std::string_view model_key, std::string_view text,
                          V ModelConfig::*field) {
  std::vector<V> out;
  for (auto item : split_list(text)) {
    ModelConfig scratch;
    try {
      set_config_value(scratch, model_key, item);
      validate(scratch);
    } catch (const ConfigError& e) {
      throw ConfigError("config key '" + std::string(grid_key) + "': " + e.what());
    }
    out.push_back(scratch.*field);
  }
  if (out.empty()) throw ConfigError("config key '" + std::string(grid_key) + "': empty list");
  return out;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
  if (!out) throw DataError("failed writing " + path.string());
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::string config_comment(const ModelConfig& config) {
  std::string out;
  for (const auto& [k, v] : split_key_values(recorded_text(config), "config")) out += "# " + k + "=" + v + "\n";
  return out;
}

nlohmann::ordered_json config_json(const ModelConfig& config) {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (const auto& [k, v] : split_key_values(recorded_text(config), "config")) j[k] = v;
  return j;
}

void require_data_dir(const RunConfig& rc) {
  if (rc.data_dir.empty()) throw ConfigError("missing required path: --data-dir (config key data_dir)");
}

Dataset load_for(const RunConfig& rc, const ModelConfig& model) {
  require_data_dir(rc);
  DatasetOptions options;
  options.seed = model.seed;
  options.load_auxiliary = model.fusion;
  return load_dataset(rc.data_dir, options);
}

int cmd_prepare(const RunConfig& rc, std::ostream& out) {
  const auto data = load_for(rc, rc.model);
  const auto context = make_context(data, rc.model);
  std::size_t train = 0, validation = 0, test = 0;
  for (const auto& u : data.interactions.users()) {
    train += u.train.size();
    validation += u.validation.size();
    test += u.test.size();
  }
  nlohmann::ordered_json j;
  j["users"] = data.index.user_count();
  j["items"] = data.index.item_count();
  j["entities"] = context.entity_count();
  j["tokens"] = data.index.token_count();
  j["relations"] = context.graph.relation_count();
  j["kg_triples"] = data.kg.size();
  j["ckg_triples"] = context.graph.triple_count();
  j["train_interactions"] = train;
  j["validation_interactions"] = validation;
  j["test_interactions"] = test;
  j["config"] = config_json(rc.model);
  j["seed"] = rc.model.seed;
  const auto text = j.dump(2) + "\n";
  write_text(rc.out_dir / "stats.json", text);
  out << text;
  return kExitOk;
}

template <typename T>
int train_and_save(const RunConfig& rc, const Dataset& data, std::ostream& out) {
  const auto result = train<T>(data, rc.model, [&](const EpochLog& log) {
    out << "epoch " << log.epoch << " rec_loss " << format_real(log.rec_loss) << " kg_loss "
        << format_real(log.kg_loss) << " val_recall@20 " << format_real(log.val_recall20) << "\n";
  });
  std::filesystem::create_directories(rc.out_dir);
  save_model(result.model, rc.resolved_model_path());
  write_text(rc.out_dir / "epochs.csv", epoch_log_csv(rc.model, result.log));
  out << "best epoch " << result.best_epoch << ", model written to " << rc.resolved_model_path().string() << "\n";
  return kExitOk;
}

int cmd_train(const RunConfig& rc, std::ostream& out) {
  const auto data = load_for(rc, rc.model);
  return rc.model.precision == 64 ? train_and_save<double>(rc, data, out) : train_and_save<float>(rc, data, out);
}

template <typename T>
int eval_model(const RunConfig& rc, std::ostream& out) {
  auto model = load_model<T>(rc.resolved_model_path());
  const auto data = load_for(rc, model.config);
  refresh_embeddings(model, make_context(data, model.config));
  const auto ks = rc.ks.empty() ? std::vector<std::size_t>{5, 10, 20, 50} : rc.ks;
  const EmbeddingScorer<T> scorer(model.final_embeddings, data.interactions.user_count(),
                                  data.interactions.item_count());
  const auto report = evaluate(scorer, data.interactions, Split::Test, ks, rc.model.eval_threads);

  const auto names = [&](UserId u) { return data.index.users().name(u); };
  write_text(rc.out_dir / "eval.csv", config_comment(model.config) + eval_report_csv(report, names));
  nlohmann::ordered_json metrics;
  for (std::size_t j = 0; j < ks.size(); ++j) {
    metrics["recall@" + std::to_string(ks[j])] = report.recall[j];
    metrics["ndcg@" + std::to_string(ks[j])] = report.ndcg[j];
  }
  metrics["auc"] = report.auc;
  nlohmann::ordered_json j;
  j["metrics"] = metrics;
  j["users"] = report.users;
  j["config"] = config_json(model.config);
  j["seed"] = model.config.seed;
  const auto text = j.dump(2) + "\n";
  write_text(rc.out_dir / "eval.json", text);
  out << text;
  return kExitOk;
}

int cmd_eval(const RunConfig& rc, std::ostream& out) {
  return model_precision(rc.resolved_model_path()) == 64 ? eval_model<double>(rc, out) : eval_model<float>(rc, out);
}

template <typename T>
int recommend_for(const RunConfig& rc, std::ostream& out) {
  if (rc.user.empty()) throw ConfigError("missing required option: --user");
  if (rc.ks.size() > 1) throw ConfigError("config key 'k': recommend takes a single K");
  const std::size_t k = rc.ks.empty() ? 10 : rc.ks.front();
  auto model = load_model<T>(rc.resolved_model_path());
  const auto data = load_for(rc, model.config);
  const auto u = data.index.find_user(rc.user);
  if (!u) throw DataError("unknown user '" + rc.user + "'");
  refresh_embeddings(model, make_context(data, model.config));
  for (const auto& r : recommend_topk(model, data.interactions, *u, k)) {
    out << rc.user << '\t' << data.index.items().name(r.item) << '\t' << format_real(r.score) << '\n';
  }
  return kExitOk;
}

int cmd_recommend(const RunConfig& rc, std::ostream& out) {
  return model_precision(rc.resolved_model_path()) == 64 ? recommend_for<double>(rc, out)
                                                         : recommend_for<float>(rc, out);
}

int cmd_gradcheck(std::ostream& out) {
  bool pass = true;
  for (const auto& c : run_gradcheck_suite()) {
    out << c.name << ": max relative error " << format_real(c.report.max_relative_error) << " at "
        << c.report.worst_parameter << "[" << c.report.worst_coordinate << "] tolerance "
        << format_real(c.report.tolerance) << (c.report.pass ? " PASS" : " FAIL") << "\n";
    pass = pass && c.report.pass;
  }
  return pass ? kExitOk : kExitGradcheck;
}

template <typename T>
double cell_recall(const Dataset& data, const ModelConfig& config) {
  const auto result = train<T>(data, config);
  return result.log.at(result.best_epoch - 1).val_recall20;
}

int cmd_gridsearch(const RunConfig& rc, std::ostream& out) {
  const auto configs = grid_cells(rc);
  if (configs.size() > rc.max_cells) {
    throw ConfigError("gridsearch: " + std::to_string(configs.size()) + " cells exceed max_cells=" +
                      std::to_string(rc.max_cells) + " (raise --max-cells or set grid.* axes)");
  }
  const auto data = load_for(rc, rc.model);
  std::vector<GridCell> cells;
  for (std::size_t c = 0; c < configs.size(); ++c) {
    GridCell cell{configs[c], 0.0};
    cell.val_recall20 = cell.config.precision == 64 ? cell_recall<double>(data, cell.config)
                                                    : cell_recall<float>(data, cell.config);
    out << "cell " << c << " val_recall@20 " << format_real(cell.val_recall20) << "\n";
    cells.push_back(std::move(cell));
  }
  const auto best = best_cell(cells);
  std::ostringstream csv;
  csv << config_comment(rc.model);
  csv << "cell,seed,batch_size,dim,lr,neighbor_cap,depth,layer_dims,val_recall@20,best\n";
  for (std::size_t c = 0; c < cells.size(); ++c) {
    const auto& m = cells[c].config;
    csv << c << ',' << m.seed << ',' << m.batch_size << ',' << m.dim << ',' << format_real(m.lr) << ','
        << m.neighbor_cap << ',' << m.depth() << ',' << get_config_value(m, "layer_dims") << ','
        << format_real(cells[c].val_recall20) << ',' << (c == best ? 1 : 0) << '\n';
  }
  write_text(rc.out_dir / "grid.csv", csv.str());
  out << "best cell " << best << "\n";
  return kExitOk;
}

}  // namespace

GridAxes default_grid() {
  GridAxes g;
  g.batch_size = {128, 256, 512, 1024};
  g.dim = {8, 16, 32, 64};
  g.lr = {1e-6, 1e-5, 1e-4, 1e-3};
  g.neighbor_cap = {10, 20, 25, 50};
  g.depth = {1, 2, 3};
  return g;
}

void set_run_value(RunConfig& rc, std::string_view key, std::string_view raw) {
  const auto value = trim(raw);
  if (is_model_config_key(key)) {
    set_config_value(rc.model, key, value);
  } else if (key == "data_dir") {
    rc.data_dir = std::string(value);
  } else if (key == "out") {
    rc.out_dir = std::string(value);
  } else if (key == "model") {
    rc.model_path = std::string(value);
  } else if (key == "user") {
    rc.user = std::string(value);
  } else if (key == "k") {
    rc.ks.clear();
    for (auto item : split_list(value)) {
      const auto k = parse_count(key, item, "comma-separated integers >= 1");
      if (k == 0) throw ConfigError("config key 'k': K must be >= 1 (legal: comma-separated integers >= 1)");
      rc.ks.push_back(k);
    }
    if (rc.ks.empty()) throw ConfigError("config key 'k': empty list (legal: comma-separated integers >= 1)");
  } else if (key == "max_cells") {
    rc.max_cells = parse_count(key, value, "integer >= 1");
    if (rc.max_cells == 0) throw ConfigError("config key 'max_cells': must be >= 1 (legal: integer >= 1)");
  } else if (key == "grid.batch_size") {
    rc.grid.batch_size = parse_axis(key, "batch_size", value, &ModelConfig::batch_size);
  } else if (key == "grid.dim") {
    rc.grid.dim = parse_axis(key, "dim", value, &ModelConfig::dim);
  } else if (key == "grid.lr") {
    rc.grid.lr = parse_axis(key, "lr", value, &ModelConfig::lr);
  } else if (key == "grid.neighbor_cap") {
    rc.grid.neighbor_cap = parse_axis(key, "neighbor_cap", value, &ModelConfig::neighbor_cap);
  } else if (key == "grid.depth") {
    rc.grid.depth.clear();
    for (auto item : split_list(value)) {
      const auto h = parse_count(key, item, "comma-separated integers in [0, 3]");
      if (h > 3) throw ConfigError("config key 'grid.depth': " + std::string(item) + " out of range (legal: [0, 3])");
      rc.grid.depth.push_back(h);
    }
    if (rc.grid.depth.empty()) throw ConfigError("config key 'grid.depth': empty list");
  } else {
    throw ConfigError("unknown config key '" + std::string(key) + "'");
  }
}

RunConfig parse_run_config(std::string_view file_text, std::string_view source,
                           const std::vector<std::pair<std::string, std::string>>& overrides) {
  RunConfig rc;
  for (const auto& [k, v] : split_key_values(file_text, source)) set_run_value(rc, k, v);
  for (const auto& [k, v] : overrides) set_run_value(rc, k, v);
  validate(rc.model);
  return rc;
}

std::vector<std::size_t> layer_dims_for_depth(const ModelConfig& config, std::size_t depth) {
  std::vector<std::size_t> dims(config.layer_dims.begin(),
                                config.layer_dims.begin() + static_cast<std::ptrdiff_t>(std::min(depth, config.depth())));
  while (dims.size() < depth) {
    const auto prev = dims.empty() ? config.dim : dims.back();
    dims.push_back(std::max<std::size_t>(1, prev / 2));
  }
  return dims;
}

std::vector<ModelConfig> grid_cells(const RunConfig& rc) {
  const auto g = rc.grid.any() ? rc.grid : default_grid();
  const auto axis = [](const auto& values, auto current) {
    using V = std::decay_t<decltype(current)>;
    return values.empty() ? std::vector<V>{current} : std::vector<V>(values.begin(), values.end());
  };
  const auto batch = axis(g.batch_size, rc.model.batch_size);
  const auto dim = axis(g.dim, rc.model.dim);
  const auto lr = axis(g.lr, rc.model.lr);
  const auto cap = axis(g.neighbor_cap, rc.model.neighbor_cap);
  const auto depth = axis(g.depth, rc.model.depth());
  std::vector<ModelConfig> out;
  for (auto b : batch) {
    for (auto d : dim) {
      for (auto l : lr) {
        for (auto n : cap) {
          for (auto h : depth) {
            ModelConfig c = rc.model;
            c.batch_size = b;
            c.dim = d;
            c.lr = l;
            c.neighbor_cap = n;
            c.layer_dims = layer_dims_for_depth(rc.model, h);
            c.seed = derive_seed(rc.model.seed, {out.size()});
            validate(c);
            out.push_back(std::move(c));
          }
        }
      }
    }
  }
  return out;
}

std::size_t best_cell(const std::vector<GridCell>& cells) {
  if (cells.empty()) throw Error("best_cell: no cells");
  std::size_t best = 0;
  for (std::size_t c = 1; c < cells.size(); ++c) {
    const auto& a = cells[c];
    const auto& b = cells[best];
    if (a.val_recall20 > b.val_recall20 || (a.val_recall20 == b.val_recall20 && a.config.lr < b.config.lr)) best = c;
  }
  return best;
}

int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Knowledge-graph attention recommender with auxiliary-information fusion", "kgax"};
  app.require_subcommand(1);

  std::string config_file, data_dir, out_dir, model_path, ks, user;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> max_cells;
  std::vector<std::string> sets;
  const auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_file, "key=value config file");
    sub->add_option("--data-dir", data_dir, "directory with interactions.tsv and optional kg.tsv, item_map.tsv, aux.tsv");
    sub->add_option("--out", out_dir, "output directory");
    sub->add_option("--model", model_path, "model file (default <out>/model.kgax)");
    sub->add_option("--seed", seed, "root seed");
    sub->add_option("--k", ks, "K list for eval, single K for recommend");
    sub->add_option("--user", user, "user name for recommend");
    sub->add_option("--max-cells", max_cells, "gridsearch cell limit");
    sub->add_option("--set", sets, "key=value override, repeatable");
  };
  const char* names[][2] = {
      {"prepare", "build and validate the collaborative knowledge graph, write stats.json"},
      {"train", "train a model, write model.kgax and epochs.csv"},
      {"eval", "evaluate a model on the test split, write eval.csv and eval.json"},
      {"recommend", "print top-K items for --user as TSV"},
      {"gradcheck", "run the built-in 64-bit finite-difference suite"},
      {"gridsearch", "sweep grid.* axes, write grid.csv"},
  };
  for (const auto& n : names) add_common(app.add_subcommand(n[0], n[1]));

  std::vector<std::string> argv_store{"kgax"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& a : argv_store) argv.push_back(a.data());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfig;
  }
  const auto* sub = app.get_subcommands().front();
  const std::string command = sub->get_name();

  try {
    std::vector<std::pair<std::string, std::string>> overrides;
    for (const auto& s : sets) {
      const auto eq = s.find('=');
      if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + s + "'");
      overrides.emplace_back(std::string(trim(s.substr(0, eq))), s.substr(eq + 1));
    }
    if (!data_dir.empty()) overrides.emplace_back("data_dir", data_dir);
    if (!out_dir.empty()) overrides.emplace_back("out", out_dir);
    if (!model_path.empty()) overrides.emplace_back("model", model_path);
    if (seed) overrides.emplace_back("seed", std::to_string(*seed));
    if (!ks.empty()) overrides.emplace_back("k", ks);
    if (!user.empty()) overrides.emplace_back("user", user);
    if (max_cells) overrides.emplace_back("max_cells", std::to_string(*max_cells));
    const auto text = config_file.empty() ? std::string() : read_text(config_file);
    const auto rc = parse_run_config(text, config_file.empty() ? "<none>" : config_file, overrides);

    if (command == "prepare") return cmd_prepare(rc, out);
    if (command == "train") return cmd_train(rc, out);
    if (command == "eval") return cmd_eval(rc, out);
    if (command == "recommend") return cmd_recommend(rc, out);
    if (command == "gradcheck") return cmd_gradcheck(out);
    return cmd_gridsearch(rc, out);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const NumericError& e) {
    err << "numeric divergence: " << e.what() << "\n";
    return kExitDivergence;
  } catch (const ParseError& e) {
    err << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const ModelFormatError& e) {
    err << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
}

}  // namespace kgax::cli
