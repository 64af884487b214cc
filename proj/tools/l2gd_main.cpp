#include <CLI11.hpp>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "l2gd/errors.hpp"
#include "l2gd/harness.hpp"
#include "l2gd/svg_plot.hpp"

using namespace l2gd;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitNumeric = 3;

// A CLI flag that overrides one configuration key when given.
struct Override {
  std::string section;
  std::string key;
  std::string value;
  CLI::Option* option = nullptr;
};

struct Common {
  std::string config_path;
  std::vector<std::string> sets;
  std::vector<Override> overrides;
  std::string output;
};

// Overrides vector is reserved up front so option pointers stay valid.
void add_config_flags(CLI::App* app, Common& c, bool with_solver) {
  struct Flag {
    const char* name;
    const char* section;
    const char* key;
    const char* help;
    bool solver;
  };
  static const Flag flags[] = {
      {"--dataset", "data", "dataset", "LibSVM path or builtin:a1a / builtin:a1a-surrogate / builtin:quadratic", false},
      {"--devices", "data", "devices", "number of devices n", false},
      {"--split", "data", "split", "homogeneous or heterogeneous", false},
      {"--ridge", "data", "ridge", "ridge mu folded into every component", false},
      {"--smoothness", "data", "smoothness", "target component smoothness after row normalization", false},
      {"--quadratic-dim", "data", "quadratic_dim", "dimension of the quadratic generator", false},
      {"--lambda", "solver", "lambda", "penalty lambda", false},
      {"--variant", "solver", "variant", "l2gd, l2sgd+, l2sgd+-efficient, vr-local-gd, l2sgd, l2sgd2, l2sgd++", true},
      {"--p", "solver", "p", "aggregation probability", true},
      {"--alpha", "solver", "alpha", "stepsize or 'theory'", true},
      {"--max-iters", "solver", "max_iters", "iteration budget", true},
      {"--jacobian-rule", "solver", "jacobian_rule", "saga or lsvrg (l2sgd++)", true},
      {"--participation", "solver", "participation", "device participation probability (l2sgd++)", true},
      {"--minibatch", "solver", "minibatch", "local tau-nice minibatch size (l2sgd++)", true},
      {"--lsvrg-rho", "solver", "lsvrg_rho", "LSVRG refresh probability or 'auto'", true},
      {"--target", "experiment", "target_rel_subopt", "target relative suboptimality", true},
      {"--record-every", "experiment", "record_every", "iterations between trace rows (0: one data pass)", true},
      {"--reference-tol", "experiment", "reference_tol", "gradient-norm tolerance of the reference solver", false},
      {"--cache-dir", "experiment", "cache_dir", "directory for cached reference solutions", false},
      {"--p-grid", "experiment", "p_grid", "comma-separated p values", true},
      {"--lambda-grid", "experiment", "lambda_grid", "comma-separated lambda values", false},
  };
  c.overrides.reserve(sizeof flags / sizeof flags[0]);
  app->add_option("--config", c.config_path, "experiment configuration file")->check(CLI::ExistingFile);
  app->add_option("--set", c.sets, "override as section.key=value (repeatable)");
  for (const auto& f : flags) {
    if (f.solver && !with_solver) continue;
    c.overrides.push_back({f.section, f.key, {}, nullptr});
    c.overrides.back().option = app->add_option(f.name, c.overrides.back().value, f.help);
  }
}

ExperimentConfig resolve_config(const Common& c, std::optional<std::uint64_t> seed) {
  ExperimentConfig config = c.config_path.empty() ? ExperimentConfig{} : load_experiment_config(c.config_path);
  for (const auto& o : c.overrides) {
    if (o.option != nullptr && o.option->count() > 0) set_config_value(config, o.section, o.key, o.value);
  }
  for (const auto& s : c.sets) {
    const auto eq = s.find('=');
    const auto dot = s.find('.');
    if (eq == std::string::npos || dot == std::string::npos || dot > eq) {
      throw ConfigError("--set expects section.key=value, got '" + s + "'");
    }
    set_config_value(config, s.substr(0, dot), s.substr(dot + 1, eq - dot - 1), s.substr(eq + 1));
  }
  if (seed) config.seed = *seed;
  validate_experiment_config(config);
  return config;
}

// Writes to the named file, or stdout for "" and "-".
template <class F>
void with_output(const std::string& path, F&& write) {
  if (path.empty() || path == "-") {
    write(std::cout);
    std::cout.flush();
    return;
  }
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  write(out);
  if (!out) throw DataError("error while writing " + path);
}

std::optional<ReferenceSolution> maybe_reference(const ExperimentConfig& config, const ExperimentData& data) {
  if (!config.reference) return std::nullopt;
  try {
    return experiment_reference(config, data, config.lambda);
  } catch (const NumericError& e) {
    std::cerr << "warning: reference solution failed (" << e.what() << "); rel_subopt omitted\n";
    return std::nullopt;
  }
}

int cmd_run(const Common& c, std::uint64_t seed) {
  const auto config = resolve_config(c, seed);
  const auto data = load_experiment_data(config);
  const auto ref = maybe_reference(config, data);
  const auto t0 = std::chrono::steady_clock::now();
  const auto run = run_experiment(config, data, ref);
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  with_output(c.output, [&](std::ostream& out) { write_trace_csv(out, run.result.trace); });
  std::ostream& info = (c.output.empty() || c.output == "-") ? std::cerr : std::cout;
  info << "dataset=" << data.source << ' ';
  if (ref) {
    info << format_summary(run.summary, config.target_rel_subopt) << '\n';
  } else {
    info << "variant=" << to_string(run.summary.variant) << " iterations=" << run.summary.iterations
         << " data_passes=" << run.summary.last.data_passes << " comm_rounds=" << run.summary.last.comm_rounds
         << " (no reference)\n";
  }
  std::fprintf(stderr, "wall_time_s=%.3f\n", wall);
  return 0;
}

int cmd_sweep_p(const Common& c, std::uint64_t seed) {
  auto config = resolve_config(c, seed);
  const auto data = load_experiment_data(config);
  const auto ref = experiment_reference(config, data, config.lambda);
  const auto rows = sweep_p(config, data, ref);
  with_output(c.output, [&](std::ostream& out) { write_sweep_p_csv(out, rows); });
  const auto c0 = problem_constants(data.problem);
  const auto rates = l2sgd_plus_rates(c0.L, c0.mu, config.lambda, c0.m, config.p, config.target_rel_subopt, c0.n);
  std::fprintf(stderr, "dataset=%s predicted p*=%.6g\n", data.source.c_str(), rates.p_star);
  return 0;
}

int cmd_sweep_lambda(const Common& c, std::uint64_t seed, const std::string& monotonicity_path,
                     const std::string& distance_path) {
  const auto config = resolve_config(c, seed);
  const auto data = load_experiment_data(config);
  const auto result = sweep_lambda(config, data);
  with_output(c.output, [&](std::ostream& out) { write_sweep_lambda_csv(out, result.rows); });
  if (!monotonicity_path.empty()) {
    with_output(monotonicity_path, [&](std::ostream& out) { write_monotonicity_csv(out, result.monotonicity); });
  }
  if (!distance_path.empty()) {
    with_output(distance_path, [&](std::ostream& out) { write_distance_csv(out, result.monotonicity); });
  }
  std::fprintf(stderr, "dataset=%s lambda*=%.6g\n", data.source.c_str(), result.lambda_star);
  for (const auto& v : result.monotonicity.violations) std::fprintf(stderr, "violation: %s\n", v.c_str());
  return result.monotonicity.violations.empty() ? 0 : kExitNumeric;
}

int cmd_split(const Common& c, std::optional<std::uint64_t> seed) {
  auto config = resolve_config(c, seed);
  if (config.dataset == "builtin:quadratic") throw ConfigError("split needs a labelled dataset");
  const auto data = load_experiment_data(config);
  with_output(c.output, [&](std::ostream& out) { write_manifest(out, data.partition); });
  std::fprintf(stderr, "dataset=%s n=%lld m=%zu dropped=%zu\n", data.source.c_str(),
               static_cast<long long>(data.partition.n), data.partition.m, data.partition.dropped);
  return 0;
}

int cmd_reference(const Common& c, std::optional<std::uint64_t> seed) {
  const auto config = resolve_config(c, seed);
  const auto data = load_experiment_data(config);
  const auto ref = experiment_reference(config, data, config.lambda);
  with_output(c.output, [&](std::ostream& out) { write_model_text(out, ref.x_star); });
  std::fprintf(stderr, "dataset=%s lambda=%.6g F*=%.17g grad_norm=%.3g iterations=%llu\n", data.source.c_str(),
               ref.lambda, ref.F_star, ref.grad_norm, static_cast<unsigned long long>(ref.iterations_used));
  return 0;
}

int cmd_plot(const std::vector<std::string>& inputs, const std::string& output, PlotOptions options, bool linear) {
  std::vector<PlotSeries> series;
  for (const auto& path : inputs) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot read " + path);
    series.push_back({std::filesystem::path(path).stem().string(), read_csv(in)});
  }
  if (linear) options.log_y = false;
  const std::string svg = render_svg(series, options);
  with_output(output, [&](std::ostream& out) { out << svg; });
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Simulator for personalized federated learning with loopless local gradient methods"};
  app.require_subcommand(1);

  Common run_c, sweep_p_c, sweep_l_c, split_c, ref_c;
  std::uint64_t seed = 0;
  std::optional<std::uint64_t> opt_seed;
  std::string monotonicity_path, distance_path;

  auto* run = app.add_subcommand("run", "single solver run; writes the trace CSV");
  add_config_flags(run, run_c, true);
  run->add_option("--seed", seed, "random seed")->required();
  run->add_option("-o,--output", run_c.output, "trace CSV path (default stdout)");

  auto* sp = app.add_subcommand("sweep-p", "communication rounds to target over a grid of p");
  add_config_flags(sp, sweep_p_c, true);
  sp->add_option("--seed", seed, "random seed")->required();
  sp->add_option("-o,--output", sweep_p_c.output, "CSV path (default stdout)");

  auto* sl = app.add_subcommand("sweep-lambda", "data passes to target over a grid of lambda");
  add_config_flags(sl, sweep_l_c, true);
  sl->add_option("--seed", seed, "random seed")->required();
  sl->add_option("-o,--output", sweep_l_c.output, "CSV path (default stdout)");
  sl->add_option("--monotonicity", monotonicity_path, "write lambda,f_value,psi_value,bound_lhs,bound_rhs here");
  sl->add_option("--distances", distance_path, "write lambda,dist_to_local,dist_to_global here");

  auto* sc = app.add_subcommand("split", "write the device partition manifest");
  add_config_flags(sc, split_c, false);
  sc->add_option("--seed", opt_seed, "shuffle seed (default from config, else 0)");
  sc->add_option("-o,--output", split_c.output, "manifest path (default stdout)");

  auto* rc = app.add_subcommand("reference", "compute x(lambda) as a text matrix, one block per line");
  add_config_flags(rc, ref_c, false);
  rc->add_option("--seed", opt_seed, "split seed (default from config, else 0)");
  rc->add_option("-o,--output", ref_c.output, "output path (default stdout)");

  std::vector<std::string> plot_inputs;
  std::string plot_output;
  PlotOptions plot_options;
  bool plot_linear = false;
  auto* pc = app.add_subcommand("plot", "render trace CSVs as an SVG line chart");
  pc->add_option("inputs", plot_inputs, "CSV files sharing one schema")->required()->check(CLI::ExistingFile);
  pc->add_option("-o,--output", plot_output, "SVG path (default stdout)");
  pc->add_option("--x", plot_options.x_column, "x column")->capture_default_str();
  pc->add_option("--y", plot_options.y_column, "y column")->capture_default_str();
  pc->add_option("--title", plot_options.title, "chart title");
  pc->add_flag("--linear", plot_linear, "linear y axis");

  bool print_defaults = false;
  auto* cc = app.add_subcommand("config", "configuration helpers");
  cc->add_flag("--print-defaults", print_defaults, "print the default configuration");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*run) return cmd_run(run_c, seed);
    if (*sp) return cmd_sweep_p(sweep_p_c, seed);
    if (*sl) return cmd_sweep_lambda(sweep_l_c, seed, monotonicity_path, distance_path);
    if (*sc) return cmd_split(split_c, opt_seed);
    if (*rc) return cmd_reference(ref_c, opt_seed);
    if (*pc) return cmd_plot(plot_inputs, plot_output, plot_options, plot_linear);
    if (*cc) {
      if (!print_defaults) {
        std::cerr << "config: nothing to do (try --print-defaults)\n";
        return kExitConfig;
      }
      write_experiment_config(std::cout, ExperimentConfig{});
      return 0;
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
