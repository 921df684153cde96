#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "kgax/error.hpp"
#include "kgax/synthetic.hpp"
#include "kgax_cli/cli.hpp"
#include "support.hpp"

namespace kgax::cli {
namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run_command(args, out, err);
  return {code, out.str(), err.str()};
}

std::filesystem::path synthetic_dir(const std::string& name) {
  const auto dir = test::scratch_dir(name);
  SyntheticOptions o;
  o.users = 40;
  o.items = 30;
  o.tokens = 8;
  o.interactions_per_user = 6;
  write_synthetic_files(make_synthetic_files(o), dir / "data");
  return dir;
}

const std::vector<std::string> kFastTrain{"--set", "dim=8",          "--set", "layer_dims=4,4", "--set",
                                          "epochs=3", "--set",       "batch_size=64", "--set", "kg_warmup_epochs=1",
                                          "--set", "log_elapsed=false"};

std::vector<std::string> with(std::vector<std::string> a, const std::vector<std::string>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

TEST(RunConfig, OverridesWinOverFile) {
  const auto rc = parse_run_config("dim = 32\nlr = 0.01\n", "cfg", {{"dim", "16"}});
  EXPECT_EQ(rc.model.dim, 16u);
  EXPECT_DOUBLE_EQ(rc.model.lr, 0.01);
}

TEST(RunConfig, BadValueNamesKey) {
  try {
    parse_run_config("", "cfg", {{"dim", "banana"}});
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("dim"), std::string::npos);
  }
  EXPECT_THROW(parse_run_config("nonsense = 1\n", "cfg", {}), ConfigError);
}

TEST(RunConfig, RunKeys) {
  RunConfig rc;
  set_run_value(rc, "k", "5,10");
  set_run_value(rc, "user", "u3");
  set_run_value(rc, "out", "/tmp/x");
  EXPECT_EQ(rc.ks, (std::vector<std::size_t>{5, 10}));
  EXPECT_EQ(rc.user, "u3");
  EXPECT_EQ(rc.resolved_model_path(), std::filesystem::path("/tmp/x/model.kgax"));
  EXPECT_THROW(set_run_value(rc, "grid.depth", "9"), ConfigError);
}

TEST(Grid, CellCountAndSeeds) {
  RunConfig rc;
  set_run_value(rc, "grid.lr", "0.001,0.0001");
  set_run_value(rc, "grid.dim", "8,16");
  const auto cells = grid_cells(rc);
  ASSERT_EQ(cells.size(), 4u);
  EXPECT_NE(cells[0].seed, cells[1].seed);
  EXPECT_EQ(grid_cells(rc)[3].seed, cells[3].seed);
  EXPECT_EQ(grid_cells(RunConfig{}).size(), 768u);
}

TEST(Grid, DepthExtendsByHalving) {
  ModelConfig c;
  c.layer_dims = {32};
  EXPECT_EQ(layer_dims_for_depth(c, 3), (std::vector<std::size_t>{32, 16, 8}));
  EXPECT_TRUE(layer_dims_for_depth(c, 0).empty());
}

TEST(Grid, BestCellTiesToLowerLr) {
  std::vector<GridCell> cells(3);
  cells[0].config.lr = 0.01;
  cells[0].val_recall20 = 0.3;
  cells[1].config.lr = 0.001;
  cells[1].val_recall20 = 0.3;
  cells[2].config.lr = 0.1;
  cells[2].val_recall20 = 0.2;
  EXPECT_EQ(best_cell(cells), 1u);
}

TEST(Commands, ExitCodes) {
  EXPECT_EQ(run({"gradcheck"}).code, kExitOk);
  EXPECT_EQ(run({"train", "--set", "dim=banana"}).code, kExitConfig);
  EXPECT_EQ(run({"train", "--bogus"}).code, kExitConfig);
  const auto empty = test::scratch_dir("cli_empty");
  EXPECT_EQ(run({"prepare", "--data-dir", empty.string()}).code, kExitData);
  EXPECT_EQ(run({"gridsearch", "--data-dir", empty.string()}).code, kExitConfig);
}

TEST(Commands, TrainEvalRecommend) {
  const auto dir = synthetic_dir("cli_flow");
  const auto data = (dir / "data").string();
  const auto out = (dir / "out").string();
  ASSERT_EQ(run({"prepare", "--data-dir", data, "--out", out}).code, kExitOk);
  EXPECT_TRUE(std::filesystem::exists(dir / "out" / "stats.json"));
  const auto t = run(with({"train", "--data-dir", data, "--out", out}, kFastTrain));
  ASSERT_EQ(t.code, kExitOk) << t.err;
  EXPECT_TRUE(std::filesystem::exists(dir / "out" / "model.kgax"));
  const auto epochs = slurp(dir / "out" / "epochs.csv");
  EXPECT_NE(epochs.find("epoch,rec_loss,kg_loss,val_recall@20,elapsed_ms"), std::string::npos);

  const auto e = run({"eval", "--data-dir", data, "--out", out});
  ASSERT_EQ(e.code, kExitOk) << e.err;
  EXPECT_NE(slurp(dir / "out" / "eval.json").find("\"recall@20\""), std::string::npos);

  const auto r = run({"recommend", "--data-dir", data, "--out", out, "--user", "u0", "--k", "5"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  std::istringstream lines(r.out);
  std::string line;
  std::vector<double> scores;
  while (std::getline(lines, line)) {
    const auto last = line.rfind('\t');
    ASSERT_NE(last, std::string::npos);
    EXPECT_EQ(line.substr(0, 3), "u0\t");
    scores.push_back(std::stod(line.substr(last + 1)));
  }
  ASSERT_EQ(scores.size(), 5u);
  for (std::size_t i = 1; i < scores.size(); ++i) EXPECT_GE(scores[i - 1], scores[i]);

  EXPECT_EQ(run({"recommend", "--data-dir", data, "--out", out, "--user", "nobody"}).code, kExitData);
}

TEST(Commands, RerunsBitIdentical) {
  const auto dir = synthetic_dir("cli_rerun");
  const auto data = (dir / "data").string();
  std::string first_epochs, first_eval, first_model;
  for (int rep = 0; rep < 2; ++rep) {
    const auto out = (dir / ("out" + std::to_string(rep))).string();
    ASSERT_EQ(run(with({"train", "--data-dir", data, "--out", out, "--set", "precision=64"}, kFastTrain)).code, 0);
    ASSERT_EQ(run({"eval", "--data-dir", data, "--out", out, "--set", "eval_threads=" + std::to_string(1 + 2 * rep)})
                  .code,
              0);
    const auto epochs = slurp(std::filesystem::path(out) / "epochs.csv");
    const auto eval = slurp(std::filesystem::path(out) / "eval.json");
    const auto model = slurp(std::filesystem::path(out) / "model.kgax");
    if (rep == 0) {
      first_epochs = epochs;
      first_eval = eval;
      first_model = model;
    } else {
      EXPECT_EQ(epochs, first_epochs);
      EXPECT_EQ(eval, first_eval);
      EXPECT_EQ(model, first_model);
    }
  }
}

TEST(Commands, CorruptModelIsDataError) {
  const auto dir = synthetic_dir("cli_corrupt");
  std::ofstream(dir / "bad.kgax") << "NOPE";
  const auto r = run({"eval", "--data-dir", (dir / "data").string(), "--model", (dir / "bad.kgax").string()});
  EXPECT_EQ(r.code, kExitData);
  EXPECT_NE(r.err.find("magic"), std::string::npos);
}

}  // namespace
}  // namespace kgax::cli
