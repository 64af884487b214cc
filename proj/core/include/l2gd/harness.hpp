#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "l2gd/data_io.hpp"
#include "l2gd/solvers.hpp"
#include "l2gd/theory.hpp"

namespace l2gd {

/// One experiment. Serialized as sections [data], [solver], [experiment]
/// of `key = value` lines.
struct ExperimentConfig {
  // [data]
  /// A LibSVM path, `builtin:a1a` (the file named by $L2GD_A1A_PATH if set,
  /// else the surrogate), `builtin:a1a-surrogate` or `builtin:quadratic`.
  std::string dataset = "builtin:a1a";
  Index devices = 5;
  SplitMode split = SplitMode::Homogeneous;
  double ridge = 1e-4;
  double smoothness = 1.0;
  Index quadratic_dim = 10;

  // [solver]
  Variant variant = Variant::L2SGD_PLUS;
  double lambda = 0.1;
  double p = 0.09;
  std::optional<double> alpha;  // theoretical when unset
  std::uint64_t max_iters = 5'000'000;
  std::optional<std::uint64_t> seed;
  JacobianRule jacobian_rule = JacobianRule::SAGA;
  double participation = 1.0;   // per-device independent participation probability
  std::size_t minibatch = 1;    // tau for tau-nice local sampling (1: uniform single)
  std::optional<double> lsvrg_rho;

  // [experiment]
  double target_rel_subopt = 1e-5;
  std::uint64_t record_every = 0;
  double reference_tol = 1e-10;
  bool reference = true;
  std::string cache_dir;
  std::vector<double> p_grid = {0.02, 0.05, 0.09, 0.2, 0.4, 0.6, 0.8};
  std::vector<double> lambda_grid = {0.01, 0.1, 1.0, 10.0, 100.0};
  /// Keep iterating after the target is reached.
  bool run_to_budget = false;
};

/// Parses the sectioned key-value format; unknown keys and malformed values
/// raise ConfigError.
ExperimentConfig parse_experiment_config(std::istream& in);
ExperimentConfig load_experiment_config(const std::filesystem::path& path);
void write_experiment_config(std::ostream& out, const ExperimentConfig& config);
/// Applies one `section.key = value` override.
void set_config_value(ExperimentConfig& config, const std::string& section, const std::string& key,
                      const std::string& value);
/// Range checks; throws ConfigError.
void validate_experiment_config(const ExperimentConfig& config);

struct ExperimentData {
  std::string source;        // resolved description of the dataset
  LabeledDataset dataset;    // normalized rows (empty for the quadratic generator)
  Partition partition;
  MixtureProblem problem;    // lambda = config.lambda
  std::uint64_t fingerprint = 0;  // data + partition
  std::vector<Vector> centers;    // quadratic generator only
};

/// Loads, normalizes and splits the dataset, then builds the devices.
/// The split uses the config seed (0 when unset).
ExperimentData load_experiment_data(const ExperimentConfig& config);

/// x(lambda) for the loaded problem, read from or written to the cache
/// directory when one is configured.
ReferenceSolution experiment_reference(const ExperimentConfig& config, const ExperimentData& data, double lambda);

/// Solver settings for the config; alpha defaults to the theoretical value.
SolverConfig make_solver_config(const ExperimentConfig& config, const MixtureProblem& problem);

struct RunSummary {
  Variant variant = Variant::L2SGD_PLUS;
  double alpha = 0.0;
  double p = 0.0;
  double lambda = 0.0;
  std::uint64_t iterations = 0;
  bool reached = false;
  std::optional<TraceRow> at_target;
  TraceRow last;
};

struct ExperimentRun {
  RunResult result;
  RunSummary summary;
};

ExperimentRun run_experiment(const ExperimentConfig& config, const ExperimentData& data,
                             const std::optional<ReferenceSolution>& reference);
/// "iterations=... data_passes=... comm_rounds=..." or "... not reached".
std::string format_summary(const RunSummary& summary, double target);

struct SweepPRow {
  double p = 0.0;
  double alpha = 0.0;
  bool reached = false;
  std::uint64_t comm_rounds = 0;
  std::uint64_t iterations = 0;
  double data_passes = 0.0;
};
std::vector<SweepPRow> sweep_p(const ExperimentConfig& config, const ExperimentData& data,
                               const ReferenceSolution& reference);
/// `p,comm_rounds_to_target,iters_to_target`; unreached points print nan.
void write_sweep_p_csv(std::ostream& out, const std::vector<SweepPRow>& rows);

struct SweepLambdaRow {
  double lambda = 0.0;
  double alpha = 0.0;
  bool reached = false;
  double data_passes = 0.0;
  std::uint64_t iterations = 0;
  std::uint64_t comm_rounds = 0;
};
struct SweepLambdaResult {
  std::vector<SweepLambdaRow> rows;
  MonotonicityTable monotonicity;
  double lambda_star = 0.0;
};
SweepLambdaResult sweep_lambda(const ExperimentConfig& config, const ExperimentData& data);
/// `lambda,data_passes_to_target`
void write_sweep_lambda_csv(std::ostream& out, const std::vector<SweepLambdaRow>& rows);
/// `lambda,dist_to_local,dist_to_global`
void write_distance_csv(std::ostream& out, const MonotonicityTable& table);

/// One block per line, entries separated by spaces, 17 significant digits.
void write_model_text(std::ostream& out, const StackedModel& x);
StackedModel read_model_text(std::istream& in);

}  // namespace l2gd
