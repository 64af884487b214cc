#include <gtest/gtest.h>

#include <sys/wait.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "l2gd/errors.hpp"
#include "l2gd/harness.hpp"
#include "l2gd/svg_plot.hpp"
#include "support.hpp"

using namespace l2gd;
namespace fs = std::filesystem;

namespace {

ExperimentConfig parse(const std::string& text) {
  std::istringstream in(text);
  return parse_experiment_config(in);
}

fs::path scratch_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("l2gd_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

ExperimentConfig small_quadratic() {
  ExperimentConfig c;
  c.dataset = "builtin:quadratic";
  c.devices = 4;
  c.quadratic_dim = 3;
  c.seed = 3;
  c.variant = Variant::L2GD;
  c.lambda = 0.5;
  c.p = 0.3;
  c.max_iters = 100000;
  return c;
}

}  // namespace

// ---------------------------------------------------------------------------
// Configuration

TEST(Config, ParsesSections) {
  const auto c = parse(
      "[data]\ndataset = builtin:a1a-surrogate\ndevices = 7\nsplit = heterogeneous\n"
      "[solver]\nvariant = l2sgd2\nlambda = 0.25\np = 0.2\nalpha = 0.5\nseed = 11\nmax_iters = 1e4\n"
      "[experiment]\np_grid = \"0.1, 0.3\"\nreference = false\n");
  EXPECT_EQ(c.dataset, "builtin:a1a-surrogate");
  EXPECT_EQ(c.devices, 7);
  EXPECT_EQ(c.split, SplitMode::Heterogeneous);
  EXPECT_EQ(c.variant, Variant::L2SGD2);
  EXPECT_DOUBLE_EQ(c.lambda, 0.25);
  EXPECT_EQ(c.alpha, 0.5);
  EXPECT_EQ(c.seed, 11u);
  EXPECT_EQ(c.max_iters, 10000u);
  EXPECT_EQ(c.p_grid, (std::vector<double>{0.1, 0.3}));
  EXPECT_FALSE(c.reference);
}

TEST(Config, DefaultsRoundTrip) {
  std::ostringstream out;
  write_experiment_config(out, ExperimentConfig{});
  const auto c = parse(out.str());
  const ExperimentConfig d;
  EXPECT_EQ(c.dataset, d.dataset);
  EXPECT_EQ(c.p, d.p);
  EXPECT_EQ(c.lambda_grid, d.lambda_grid);
  EXPECT_EQ(c.p_grid, d.p_grid);
  EXPECT_FALSE(c.alpha.has_value());
  EXPECT_FALSE(c.seed.has_value());
  EXPECT_EQ(c.target_rel_subopt, d.target_rel_subopt);
  std::ostringstream again;
  write_experiment_config(again, c);
  EXPECT_EQ(again.str(), out.str());
}

TEST(Config, RejectsBadInput) {
  EXPECT_THROW(parse("[solver]\nfoo = 1\n"), ConfigError);
  EXPECT_THROW(parse("[solver]\np = 1.5\n"), ConfigError);
  EXPECT_THROW(parse("[solver]\np = abc\n"), ConfigError);
  EXPECT_THROW(parse("[data]\ndevices = 0\n"), ConfigError);
  EXPECT_THROW(parse("[solver]\nvariant = sgd\n"), ConfigError);
  EXPECT_THROW(parse("[experiment]\nreference = maybe\n"), ConfigError);
  EXPECT_THROW(load_experiment_config("/nonexistent/l2gd.ini"), ConfigError);
}

TEST(Config, SetValueResolvesSection) {
  ExperimentConfig c;
  set_config_value(c, "", "lambda", "3");
  set_config_value(c, "solver", "alpha", "theory");
  set_config_value(c, "", "lsvrg_rho", "0.25");
  EXPECT_EQ(c.lambda, 3.0);
  EXPECT_FALSE(c.alpha.has_value());
  EXPECT_EQ(c.lsvrg_rho, 0.25);
  EXPECT_THROW(set_config_value(c, "data", "lambda", "1"), ConfigError);
}

// ---------------------------------------------------------------------------
// Data, references, runs

TEST(Harness, LoadsSurrogateSplit) {
  ExperimentConfig c;
  c.dataset = "builtin:a1a-surrogate";
  c.seed = 2;
  const auto data = load_experiment_data(c);
  EXPECT_EQ(data.problem.n(), 5);
  EXPECT_EQ(data.problem.device(0).m(), 321u);
  EXPECT_EQ(data.problem.d(), 123);
  EXPECT_NEAR(data.problem.device(3).component_smoothness(5), 1.0 + 1e-4, 1e-12);
  c.seed = 3;
  EXPECT_NE(load_experiment_data(c).fingerprint, data.fingerprint);
  c.dataset = "builtin:mnist";
  EXPECT_THROW(load_experiment_data(c), ConfigError);
  c.dataset = "/nonexistent/file.libsvm";
  EXPECT_THROW(load_experiment_data(c), DataError);
}

TEST(Harness, LoadsLibsvmFile) {
  const auto dir = scratch_dir("libsvm");
  {
    std::ofstream f(dir / "tiny.libsvm");
    for (int k = 0; k < 12; ++k) f << (k % 3 ? "+1" : "-1") << ' ' << 1 + k % 4 << ":1 " << 6 + k % 2 << ":0.5\n";
  }
  ExperimentConfig c;
  c.dataset = (dir / "tiny.libsvm").string();
  c.devices = 3;
  const auto data = load_experiment_data(c);
  EXPECT_EQ(data.problem.n(), 3);
  EXPECT_EQ(data.problem.device(2).m(), 4u);
  EXPECT_EQ(data.problem.d(), 7);
}

TEST(Harness, ReferenceCacheRoundTrip) {
  const auto dir = scratch_dir("cache");
  auto c = small_quadratic();
  c.cache_dir = dir.string();
  const auto data = load_experiment_data(c);
  const auto first = experiment_reference(c, data, c.lambda);
  std::size_t files = 0;
  for (const auto& e : fs::directory_iterator(dir)) files += e.is_regular_file() ? 1 : 0;
  EXPECT_EQ(files, 1u);
  const auto second = experiment_reference(c, data, c.lambda);
  EXPECT_EQ(first.x_star.blocks(), second.x_star.blocks());
  EXPECT_EQ(first.F_star, second.F_star);
  EXPECT_LE(first.x_star.max_abs_difference(l2gd::testing::closed_form_quadratic(data.centers, 0.5)), 1e-9);
}

TEST(Harness, RunReachesTarget) {
  const auto c = small_quadratic();
  const auto data = load_experiment_data(c);
  const auto ref = experiment_reference(c, data, c.lambda);
  const auto run = run_experiment(c, data, ref);
  ASSERT_TRUE(run.summary.reached);
  EXPECT_LE(run.summary.at_target->rel_subopt, 1e-5);
  EXPECT_NE(format_summary(run.summary, 1e-5).find("reached: iterations="), std::string::npos);
  const auto s = make_solver_config(c, data.problem);
  EXPECT_NEAR(s.alpha, 1.0 / (2.0 * std::max(1.0 / 0.7, 0.5 / 0.3) / 4.0), 1e-14);
}

TEST(Harness, SgdVariantsBorrowPlusStepsize) {
  ExperimentConfig c;
  c.dataset = "builtin:a1a-surrogate";
  c.seed = 1;
  const auto data = load_experiment_data(c);
  c.variant = Variant::L2SGD_PLUS;
  const double plus = make_solver_config(c, data.problem).alpha;
  c.variant = Variant::L2SGD;
  EXPECT_EQ(make_solver_config(c, data.problem).alpha, plus);
  c.alpha = 0.01;
  EXPECT_EQ(make_solver_config(c, data.problem).alpha, 0.01);
}

TEST(Harness, SweepsOnQuadratic) {
  auto c = small_quadratic();
  c.p_grid = {0.2, 0.5};
  const auto data = load_experiment_data(c);
  const auto ref = experiment_reference(c, data, c.lambda);
  const auto rows = sweep_p(c, data, ref);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_TRUE(rows[0].reached && rows[1].reached);
  std::ostringstream out;
  write_sweep_p_csv(out, rows);
  EXPECT_EQ(out.str().substr(0, out.str().find('\n')), "p,comm_rounds_to_target,iters_to_target");

  c.lambda_grid = {0.1, 1.0, 10.0};
  const auto sl = sweep_lambda(c, data);
  ASSERT_EQ(sl.rows.size(), 3u);
  EXPECT_TRUE(sl.monotonicity.violations.empty());
  std::ostringstream a, b;
  write_sweep_lambda_csv(a, sl.rows);
  write_distance_csv(b, sl.monotonicity);
  EXPECT_EQ(a.str().substr(0, a.str().find('\n')), "lambda,data_passes_to_target");
  EXPECT_EQ(b.str().substr(0, b.str().find('\n')), "lambda,dist_to_local,dist_to_global");
}

TEST(Harness, UnreachedSweepPointPrintsNan) {
  std::vector<SweepPRow> rows(1);
  rows[0].p = 0.5;
  std::ostringstream out;
  write_sweep_p_csv(out, rows);
  EXPECT_EQ(out.str(), "p,comm_rounds_to_target,iters_to_target\n0.5,nan,nan\n");
}

TEST(Harness, ModelTextRoundTrip) {
  std::mt19937_64 gen(1);
  const auto x = l2gd::testing::random_model(gen, 3, 4);
  std::ostringstream out;
  write_model_text(out, x);
  int lines = 0;
  for (char ch : out.str()) lines += ch == '\n';
  EXPECT_EQ(lines, 3);
  std::istringstream in(out.str());
  EXPECT_EQ(read_model_text(in).blocks(), x.blocks());
  std::istringstream empty("");
  EXPECT_THROW(read_model_text(empty), DataError);
}

// ---------------------------------------------------------------------------
// Command line

#ifdef L2GD_CLI_PATH

namespace {

int cli(const std::string& args) {
  const std::string cmd = std::string(L2GD_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST(Cli, ExitCodes) {
  EXPECT_EQ(cli("config --print-defaults"), 0);
  EXPECT_EQ(cli("run --dataset builtin:quadratic"), 2);
  EXPECT_EQ(cli("sweep-p --dataset builtin:quadratic"), 2);
  EXPECT_EQ(cli("run --seed 1 --p 2"), 2);
  EXPECT_EQ(cli("run --seed 1 --variant nope"), 2);
  EXPECT_EQ(cli("run --seed 1 --dataset /nonexistent.libsvm"), 2);
  EXPECT_EQ(cli("run --seed 1 --dataset builtin:quadratic --variant l2gd --alpha 1e6 --max-iters 5000"), 3);
  EXPECT_EQ(cli("bogus"), 2);
}

TEST(Cli, RunWritesTrace) {
  const auto dir = scratch_dir("cli_run");
  const auto out = dir / "trace.csv";
  ASSERT_EQ(cli("run --seed 4 --dataset builtin:quadratic --variant l2gd --devices 3 -o " + out.string()), 0);
  std::ifstream in(out);
  const auto table = read_csv(in);
  EXPECT_EQ(table.header, (std::vector<std::string>{"k", "data_passes", "comm_rounds", "objective", "rel_subopt",
                                                    "dist_sq"}));
  EXPECT_EQ(table.rows.front()[4], 1.0);
  EXPECT_LE(table.rows.back()[4], 1e-5);
  const auto again = dir / "again.csv";
  ASSERT_EQ(cli("run --seed 4 --dataset builtin:quadratic --variant l2gd --devices 3 -o " + again.string()), 0);
  EXPECT_EQ(slurp(out), slurp(again));
}

TEST(Cli, ConfigFileAndOverrides) {
  const auto dir = scratch_dir("cli_cfg");
  {
    std::ofstream f(dir / "exp.ini");
    f << "[data]\ndataset = builtin:quadratic\ndevices = 3\n[solver]\nvariant = l2gd\nmax_iters = 7\n"
         "[experiment]\nreference = false\nrecord_every = 1\n";
  }
  const auto out = dir / "t.csv";
  ASSERT_EQ(cli("run --seed 1 --config " + (dir / "exp.ini").string() + " --set solver.max_iters=5 -o " +
                out.string()),
            0);
  std::ifstream in(out);
  const auto table = read_csv(in);
  EXPECT_EQ(table.rows.size(), 6u);
  EXPECT_TRUE(std::isnan(table.rows.back()[4]));
  EXPECT_EQ(cli("run --seed 1 --config " + (dir / "missing.ini").string()), 2);
}

TEST(Cli, SplitReferenceAndPlot) {
  const auto dir = scratch_dir("cli_misc");
  ASSERT_EQ(cli("split --dataset builtin:a1a-surrogate --seed 3 -o " + (dir / "m.tsv").string()), 0);
  const auto manifest = slurp(dir / "m.tsv");
  EXPECT_EQ(std::count(manifest.begin(), manifest.end(), '\n'), 1605);
  EXPECT_EQ(manifest.substr(0, 2), "0\t");

  ASSERT_EQ(cli("reference --dataset builtin:quadratic --devices 4 --lambda 2 -o " + (dir / "x.txt").string()), 0);
  std::ifstream xin(dir / "x.txt");
  EXPECT_EQ(read_model_text(xin).n(), 4);

  ASSERT_EQ(cli("run --seed 1 --dataset builtin:quadratic --variant l2gd -o " + (dir / "a.csv").string()), 0);
  ASSERT_EQ(cli("run --seed 2 --dataset builtin:quadratic --variant l2gd -o " + (dir / "b.csv").string()), 0);
  const std::string files = (dir / "a.csv").string() + " " + (dir / "b.csv").string();
  ASSERT_EQ(cli("plot " + files + " -o " + (dir / "p1.svg").string()), 0);
  ASSERT_EQ(cli("plot " + files + " -o " + (dir / "p2.svg").string()), 0);
  EXPECT_EQ(slurp(dir / "p1.svg"), slurp(dir / "p2.svg"));
  EXPECT_NE(slurp(dir / "p1.svg").find("<svg"), std::string::npos);
  {
    std::ofstream f(dir / "other.csv");
    f << "lambda,data_passes_to_target\n1,2\n";
  }
  EXPECT_EQ(cli("plot " + (dir / "a.csv").string() + " " + (dir / "other.csv").string()), 2);
}

#endif
