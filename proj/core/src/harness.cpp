#include "l2gd/harness.hpp"

#include <bit>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "l2gd/errors.hpp"
#include "l2gd/log.hpp"
#include "l2gd/rng.hpp"

namespace l2gd {

namespace {

std::uint64_t combine(std::uint64_t h, std::uint64_t v) { return mix64(h ^ mix64(v)); }
std::uint64_t combine(std::uint64_t h, double v) { return combine(h, std::bit_cast<std::uint64_t>(v)); }

std::uint64_t partition_hash(const Partition& p) {
  std::uint64_t h = hash_tag("partition");
  h = combine(h, static_cast<std::uint64_t>(p.n));
  for (const auto& dev : p.assignment) {
    h = combine(h, static_cast<std::uint64_t>(dev.size()));
    for (std::size_t r : dev) h = combine(h, static_cast<std::uint64_t>(r));
  }
  return h;
}

LabeledDataset resolve_dataset(const std::string& name, std::string& source) {
  if (name == "builtin:a1a") {
    if (const char* env = std::getenv("L2GD_A1A_PATH"); env != nullptr && *env != '\0') {
      source = std::string("a1a (") + env + ")";
      return load_libsvm(env);
    }
    source = "a1a surrogate";
    return a1a_surrogate(1);
  }
  if (name == "builtin:a1a-surrogate") {
    source = "a1a surrogate";
    return a1a_surrogate(1);
  }
  if (name.rfind("builtin:", 0) == 0) throw ConfigError("unknown builtin dataset '" + name + "'");
  source = name;
  return load_libsvm(name);
}

MixtureProblem build_problem(const ExperimentConfig& config, ExperimentData& data) {
  const std::uint64_t seed = config.seed.value_or(0);
  if (config.dataset == "builtin:quadratic") {
    data.source = "quadratic generator";
    data.centers = quadratic_centers(config.devices, config.quadratic_dim, seed);
    std::uint64_t h = hash_tag("quadratic");
    for (const auto& c : data.centers) {
      for (Index k = 0; k < c.size(); ++k) h = combine(h, c[k]);
    }
    data.fingerprint = h;
    return quadratic_problem(data.centers, config.lambda);
  }
  NormalizeReport report;
  data.dataset = normalize_rows(resolve_dataset(config.dataset, data.source), config.smoothness, &report);
  if (!report.zero_rows.empty()) {
    warn(std::to_string(report.zero_rows.size()) + " zero rows left unnormalized");
  }
  data.partition = split(data.dataset, config.devices, config.split, seed);
  data.fingerprint = combine(data.dataset.fingerprint(), partition_hash(data.partition));
  return MixtureProblem(config.lambda, build_logistic_devices(data.dataset, data.partition, config.ridge));
}

}  // namespace

ExperimentData load_experiment_data(const ExperimentConfig& config) {
  validate_experiment_config(config);
  ExperimentData data{{}, {}, {}, MixtureProblem(0.0, {DeviceFiniteSum(1, {QuadraticComponent{Vector::Zero(1), 1.0}}, 0.0)}),
                      0, {}};
  data.problem = build_problem(config, data);
  return data;
}

// ---------------------------------------------------------------------------
// Model text

void write_model_text(std::ostream& out, const StackedModel& x) {
  char buf[40];
  for (Index i = 0; i < x.n(); ++i) {
    for (Index k = 0; k < x.d(); ++k) {
      std::snprintf(buf, sizeof buf, "%.17g", x.blocks()(k, i));
      if (k) out << ' ';
      out << buf;
    }
    out << '\n';
  }
}

StackedModel read_model_text(std::istream& in) {
  std::vector<Vector> blocks;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::vector<double> vals;
    std::string tok;
    while (ls >> tok) {
      char* end = nullptr;
      const double v = std::strtod(tok.c_str(), &end);
      if (end == tok.c_str() || *end != '\0') throw DataError("malformed model entry '" + tok + "'");
      vals.push_back(v);
    }
    if (!blocks.empty() && static_cast<std::size_t>(blocks.front().size()) != vals.size()) {
      throw DataError("model blocks have different lengths");
    }
    blocks.push_back(Eigen::Map<const Vector>(vals.data(), static_cast<Index>(vals.size())));
  }
  if (blocks.empty()) throw DataError("no rows");
  return StackedModel::from_blocks(blocks);
}

// ---------------------------------------------------------------------------
// Reference cache

namespace {

void finish_reference(ReferenceSolution& ref, const MixtureProblem& problem) {
  const MixtureProblem P = problem.with_lambda(std::isinf(ref.lambda) ? 0.0 : ref.lambda);
  ref.x_bar = block_average(ref.x_star);
  ref.f_value = loss_value(P, ref.x_star);
  ref.psi_value = psi(ref.x_star);
  ref.F_star = std::isinf(ref.lambda) ? ref.f_value : ref.f_value + ref.lambda * ref.psi_value;
}

}  // namespace

ReferenceSolution experiment_reference(const ExperimentConfig& config, const ExperimentData& data, double lambda) {
  ReferenceOptions options;
  options.tol = config.reference_tol;
  if (config.cache_dir.empty()) return reference_solution(data.problem, lambda, options);

  std::uint64_t key = combine(data.fingerprint, lambda);
  key = combine(key, config.ridge);
  key = combine(key, config.reference_tol);
  key = combine(key, static_cast<std::uint64_t>(data.problem.weighting()));
  char name[64];
  std::snprintf(name, sizeof name, "ref-%016llx.txt", static_cast<unsigned long long>(key));
  const std::filesystem::path path = std::filesystem::path(config.cache_dir) / name;

  if (std::ifstream in(path); in) {
    try {
      std::string header;
      std::getline(in, header);
      ReferenceSolution ref;
      unsigned long long iters = 0;
      if (std::sscanf(header.c_str(), "# lambda=%lg tol=%lg grad_norm=%lg iterations=%llu", &ref.lambda, &ref.tol,
                      &ref.grad_norm, &iters) == 4 &&
          (ref.lambda == lambda || (std::isinf(lambda) && std::isinf(ref.lambda)))) {
        ref.iterations_used = iters;
        ref.x_star = read_model_text(in);
        if (ref.x_star.n() == data.problem.n() && ref.x_star.d() == data.problem.d()) {
          finish_reference(ref, data.problem);
          return ref;
        }
      }
    } catch (const std::exception&) {
      // Unreadable cache entries are recomputed.
    }
    warn("ignoring unreadable reference cache entry " + path.string());
  }

  ReferenceSolution ref = reference_solution(data.problem, lambda, options);
  std::error_code ec;
  std::filesystem::create_directories(config.cache_dir, ec);
  std::ofstream out(path);
  if (out) {
    char header[200];
    std::snprintf(header, sizeof header, "# lambda=%.17g tol=%.17g grad_norm=%.17g iterations=%llu\n", ref.lambda,
                  ref.tol, ref.grad_norm, static_cast<unsigned long long>(ref.iterations_used));
    out << header;
    write_model_text(out, ref.x_star);
  } else {
    warn("cannot write reference cache entry " + path.string());
  }
  return ref;
}

// ---------------------------------------------------------------------------
// Runs and sweeps

SolverConfig make_solver_config(const ExperimentConfig& config, const MixtureProblem& problem) {
  SolverConfig s;
  s.variant = config.variant;
  s.p = config.p;
  s.lambda = config.lambda;
  s.max_iters = config.max_iters;
  s.seed = config.seed.value_or(0);
  s.jacobian_rule = config.jacobian_rule;
  const auto n = static_cast<std::size_t>(problem.n());
  if (config.variant == Variant::L2SGDPP) {
    if (config.participation < 1.0) {
      s.participation = SubsetSampling::independent(std::vector<double>(n, config.participation));
    }
    if (config.minibatch > 1) {
      for (std::size_t i = 0; i < n; ++i) {
        const std::size_t m = problem.device(static_cast<Index>(i)).m();
        s.sampling.push_back(SubsetSampling::tau_nice(m, std::min(config.minibatch, m)));
      }
    }
    if (config.lsvrg_rho) s.lsvrg_probs.assign(n, *config.lsvrg_rho);
  }
  if (config.alpha) {
    s.alpha = *config.alpha;
  } else if (auto a = theoretical_alpha(problem, s)) {
    s.alpha = *a;
  } else {
    // Variants without their own theory share the L2SGD+ stepsize so that
    // comparisons use an identical alpha.
    SolverConfig plus = s;
    plus.variant = Variant::L2SGD_PLUS;
    a = theoretical_alpha(problem, plus);
    if (!a) throw ConfigError("no theoretical stepsize for " + to_string(config.variant) + "; set solver.alpha");
    s.alpha = *a;
  }
  return s;
}

ExperimentRun run_experiment(const ExperimentConfig& config, const ExperimentData& data,
                             const std::optional<ReferenceSolution>& reference) {
  const MixtureProblem problem = data.problem.with_lambda(config.lambda);
  const SolverConfig s = make_solver_config(config, problem);
  RunOptions options;
  options.record_every = config.record_every;
  if (reference) {
    options.reference_value = reference->F_star;
    options.reference_model = reference->x_star;
    if (!config.run_to_budget) options.stop_at_rel_subopt = config.target_rel_subopt;
  }
  const StackedModel x0(problem.n(), problem.d());
  ExperimentRun run{run_solver(problem, x0, s, options), {}};
  RunSummary& sum = run.summary;
  sum.variant = s.variant;
  sum.alpha = s.alpha;
  sum.p = s.p;
  sum.lambda = config.lambda;
  sum.iterations = run.result.trace.iterations;
  sum.at_target = run.result.trace.first_reaching(config.target_rel_subopt);
  sum.reached = sum.at_target.has_value();
  sum.last = run.result.trace.rows.back();
  return run;
}

std::string format_summary(const RunSummary& s, double target) {
  char buf[512];
  if (s.reached) {
    std::snprintf(buf, sizeof buf,
                  "variant=%s alpha=%.6g p=%.6g lambda=%.6g target=%.3g reached: iterations=%llu data_passes=%.6g "
                  "comm_rounds=%llu",
                  to_string(s.variant).c_str(), s.alpha, s.p, s.lambda, target,
                  static_cast<unsigned long long>(s.at_target->k), s.at_target->data_passes,
                  static_cast<unsigned long long>(s.at_target->comm_rounds));
  } else {
    std::snprintf(buf, sizeof buf,
                  "variant=%s alpha=%.6g p=%.6g lambda=%.6g target=%.3g not reached: iterations=%llu data_passes=%.6g "
                  "comm_rounds=%llu final_rel_subopt=%.6g",
                  to_string(s.variant).c_str(), s.alpha, s.p, s.lambda, target,
                  static_cast<unsigned long long>(s.iterations), s.last.data_passes,
                  static_cast<unsigned long long>(s.last.comm_rounds), s.last.rel_subopt);
  }
  return buf;
}

std::vector<SweepPRow> sweep_p(const ExperimentConfig& config, const ExperimentData& data,
                               const ReferenceSolution& reference) {
  if (config.p_grid.empty()) throw ConfigError("experiment.p_grid is empty");
  std::vector<SweepPRow> rows;
  for (double p : config.p_grid) {
    ExperimentConfig c = config;
    c.p = p;
    const auto run = run_experiment(c, data, reference);
    SweepPRow row;
    row.p = p;
    row.alpha = run.summary.alpha;
    row.reached = run.summary.reached;
    const TraceRow& r = row.reached ? *run.summary.at_target : run.summary.last;
    row.comm_rounds = r.comm_rounds;
    row.iterations = r.k;
    row.data_passes = r.data_passes;
    rows.push_back(row);
  }
  return rows;
}

void write_sweep_p_csv(std::ostream& out, const std::vector<SweepPRow>& rows) {
  out << "p,comm_rounds_to_target,iters_to_target\n";
  char buf[64];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%.17g,", r.p);
    out << buf;
    if (r.reached) {
      out << r.comm_rounds << ',' << r.iterations << '\n';
    } else {
      out << "nan,nan\n";
    }
  }
}

SweepLambdaResult sweep_lambda(const ExperimentConfig& config, const ExperimentData& data) {
  if (config.lambda_grid.empty()) throw ConfigError("experiment.lambda_grid is empty");
  SweepLambdaResult result;
  for (double lambda : config.lambda_grid) {
    ExperimentConfig c = config;
    c.lambda = lambda;
    const auto ref = experiment_reference(c, data, lambda);
    const auto run = run_experiment(c, data, ref);
    SweepLambdaRow row;
    row.lambda = lambda;
    row.alpha = run.summary.alpha;
    row.reached = run.summary.reached;
    const TraceRow& r = row.reached ? *run.summary.at_target : run.summary.last;
    row.data_passes = r.data_passes;
    row.iterations = r.k;
    row.comm_rounds = r.comm_rounds;
    result.rows.push_back(row);
  }
  ReferenceOptions options;
  options.tol = config.reference_tol;
  result.monotonicity = monotonicity_curve(data.problem, config.lambda_grid, options);
  result.lambda_star = lambda_threshold(problem_constants(data.problem).L, config.p);
  return result;
}

void write_sweep_lambda_csv(std::ostream& out, const std::vector<SweepLambdaRow>& rows) {
  out << "lambda,data_passes_to_target\n";
  char buf[80];
  for (const auto& r : rows) {
    if (r.reached) {
      std::snprintf(buf, sizeof buf, "%.17g,%.17g\n", r.lambda, r.data_passes);
    } else {
      std::snprintf(buf, sizeof buf, "%.17g,nan\n", r.lambda);
    }
    out << buf;
  }
}

void write_distance_csv(std::ostream& out, const MonotonicityTable& table) {
  out << "lambda,dist_to_local,dist_to_global\n";
  char buf[100];
  for (const auto& r : table.rows) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n", r.lambda, r.dist_to_local, r.dist_to_global);
    out << buf;
  }
}

}  // namespace l2gd
