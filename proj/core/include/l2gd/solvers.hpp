#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "l2gd/objective.hpp"
#include "l2gd/rng.hpp"
#include "l2gd/sampling.hpp"

namespace l2gd {

enum class Variant {
  L2GD,                  // loopless local GD
  L2SGD_PLUS,            // local SGD with full variance reduction
  L2SGD_PLUS_EFFICIENT,  // same iterates, models-only communication
  VR_LOCAL_GD,           // local GD with control variates
  L2SGD,                 // local SGD, no control variates
  L2SGD2,                // local SGD, penalty control variate only
  L2SGDPP,               // partial participation, arbitrary sampling, prox
};

std::string to_string(Variant v);
Variant parse_variant(const std::string& text);
const std::vector<Variant>& all_variants();

enum class JacobianRule { SAGA, LSVRG };
std::string to_string(JacobianRule r);
JacobianRule parse_jacobian_rule(const std::string& text);

/// Gradient memory: J_i (d x m_i; d x 1 for VR local GD) and Psi_i (d).
/// Psi_i only ever holds snapshots lambda (x_i - xbar), so sum_i Psi_i = 0.
struct ControlVariates {
  std::vector<Matrix> J;
  std::vector<Vector> psi;

  static ControlVariates zeros(const MixtureProblem& problem, Variant variant);
};

struct SolverConfig {
  Variant variant = Variant::L2SGD_PLUS;
  double alpha = 0.0;
  double p = 0.5;
  /// Overrides problem.lambda() when set.
  std::optional<double> lambda;
  std::uint64_t max_iters = 1000;
  std::uint64_t seed = 0;

  // L2SGD++ only. Defaults: full participation, uniform single-point
  // sampling, SAGA, rho_i = 1/m_i, ESO constants from SubsetSampling.
  std::optional<SubsetSampling> participation;
  std::vector<SubsetSampling> sampling;
  JacobianRule jacobian_rule = JacobianRule::SAGA;
  std::vector<double> lsvrg_probs;
  std::vector<std::vector<double>> eso_v;
};

/// All randomness consumed by one iteration.
struct StepDraws {
  bool xi = false;
  std::vector<Subset> samples;      // per device; empty when unused
  std::vector<char> active;         // per device participation
  std::vector<char> refresh;        // per device LSVRG coin
};

/// Produces StepDraws from the seeded streams: one master coin stream, one
/// sample stream per device (keyed by seed and device id), a participation
/// stream and one LSVRG stream per device. Draws happen in device order.
class DrawSource {
 public:
  DrawSource(const MixtureProblem& problem, const SolverConfig& config);
  StepDraws next();
  std::uint64_t iteration() const noexcept { return coins_.position(); }

 private:
  Variant variant_;
  CoinStream coins_;
  std::vector<CounterRng> sample_rngs_;
  std::vector<CounterRng> lsvrg_rngs_;
  CounterRng participation_rng_;
  std::vector<SubsetSampling> sampling_;
  std::optional<SubsetSampling> participation_;
  JacobianRule rule_;
  std::vector<double> rho_;
};

/// One solver state machine. step() applies one iteration for given draws,
/// so different engines can be driven by identical randomness.
class Engine {
 public:
  virtual ~Engine() = default;
  virtual void step(const StepDraws& draws) = 0;
  /// Current iterate x^k (materialized if the engine defers work).
  virtual StackedModel iterate() const = 0;
  virtual ControlVariates control_variates() const = 0;
  /// Cumulative component-gradient evaluations.
  virtual std::uint64_t gradient_evaluations() const noexcept = 0;
  virtual std::unique_ptr<Engine> clone() const = 0;
  /// Completes deferred work (efficient L2SGD+ flushes an open aggregation block).
  virtual void finish() {}
};

/// Builds an engine at x0 with the given control variates (zeros if absent).
/// Throws ConfigError on invalid configurations.
std::unique_ptr<Engine> make_engine(const MixtureProblem& problem, const SolverConfig& config,
                                    const StackedModel& x0,
                                    std::optional<ControlVariates> initial = std::nullopt);

/// Validates ranges and returns warnings for questionable settings
/// (aggregation coefficient above 1/2, non-identical start). Throws
/// ConfigError on hard violations.
std::vector<std::string> validate_config(const MixtureProblem& problem, const SolverConfig& config,
                                         const StackedModel& x0);

/// Communication accountant: a round opens at each 0->1 coin transition
/// (device-to-master upload; the coin before the first toss is taken as 0)
/// and closes at the next 1->0 transition.
class CommAccountant {
 public:
  void observe(bool xi) noexcept;
  std::uint64_t rounds() const noexcept { return rounds_; }
  std::uint64_t transitions() const noexcept { return transitions_; }
  std::uint64_t tosses() const noexcept { return tosses_; }

 private:
  bool prev_ = false;
  bool started_ = false;
  std::uint64_t rounds_ = 0;
  std::uint64_t transitions_ = 0;
  std::uint64_t tosses_ = 0;
};

/// Expected rounds over k tosses: p(1-p)k.
double comm_rounds_expected(double p, double k);

struct TraceRow {
  std::uint64_t k = 0;
  double data_passes = 0.0;
  std::uint64_t comm_rounds = 0;
  double objective = 0.0;
  double rel_subopt = 0.0;  // NaN when no reference value is supplied
  double dist_sq = 0.0;     // NaN when no reference model is supplied
};

struct RunTrace {
  std::vector<TraceRow> rows;
  std::uint64_t coin_count = 0;
  std::uint64_t transitions = 0;
  std::uint64_t comm_rounds = 0;
  std::uint64_t iterations = 0;

  /// First recorded row with rel_subopt <= target, if any.
  std::optional<TraceRow> first_reaching(double target) const;
};

/// CSV header `k,data_passes,comm_rounds,objective,rel_subopt,dist_sq`,
/// floats with 17 significant digits, missing values as `nan`.
void write_trace_csv(std::ostream& out, const RunTrace& trace);

struct RunOptions {
  /// Iterations between trace rows; 0 picks one data pass.
  std::uint64_t record_every = 0;
  std::optional<double> reference_value;          // F*
  std::optional<StackedModel> reference_model;    // x(lambda)
  /// Stop at the first recorded row with rel_subopt <= this.
  std::optional<double> stop_at_rel_subopt;
  std::optional<ControlVariates> initial_control_variates;
  bool quiet = false;  // suppress validation warnings
};

struct RunResult {
  StackedModel x;
  RunTrace trace;
  ControlVariates control_variates;
};

RunResult run_solver(const MixtureProblem& problem, const StackedModel& x0, const SolverConfig& config,
                     const RunOptions& options = {});

// Named entry points; each forces config.variant.
RunResult l2gd_run(const MixtureProblem& problem, const StackedModel& x0, SolverConfig config,
                   const RunOptions& options = {});
RunResult l2sgd_plus_run(const MixtureProblem& problem, const StackedModel& x0, SolverConfig config,
                         const RunOptions& options = {});
RunResult l2sgd_plus_efficient_run(const MixtureProblem& problem, const StackedModel& x0, SolverConfig config,
                                   const RunOptions& options = {});
RunResult vr_local_gd_run(const MixtureProblem& problem, const StackedModel& x0, SolverConfig config,
                          const RunOptions& options = {});
RunResult l2sgd_run(const MixtureProblem& problem, const StackedModel& x0, SolverConfig config,
                    const RunOptions& options = {});
RunResult l2sgd2_run(const MixtureProblem& problem, const StackedModel& x0, SolverConfig config,
                     const RunOptions& options = {});
RunResult l2sgdpp_run(const MixtureProblem& problem, const StackedModel& x0, SolverConfig config,
                      const RunOptions& options = {});

/// G(x): grad f(x)/(1-p) if xi = 0, lambda grad psi(x)/p if xi = 1.
StackedModel stochastic_gradient_l2gd(const MixtureProblem& problem, const StackedModel& x, double p, bool xi);

/// One L2GD iteration: local GD step (xi = 0) or step towards the average.
StackedModel l2gd_step(const StackedModel& x, const MixtureProblem& problem, const SolverConfig& config, bool xi);

/// Every realization of one iteration's randomness with its probability.
/// Exact; meant for small instances.
std::vector<std::pair<StepDraws, double>> enumerate_step_outcomes(const MixtureProblem& problem,
                                                                  const SolverConfig& config);

/// Closed-form replay of c consecutive aggregation steps for one device of
/// L2SGD+, in deviation coordinates. With a = 1 - alpha lambda/(n p),
/// beta = alpha (1/p - 1)/n:
///   e' = a e + beta Psi - alpha delta,  Psi' = lambda e,
/// where e = x_i - xbar and delta = J_i 1/(nm) - mean_i(J_i 1/(nm)).
/// Returns the coefficients (rows of the c-th power of the affine map).
struct AggregationReplay {
  double e_from_e = 1.0, e_from_psi = 0.0, e_from_delta = 0.0;
  double psi_from_e = 0.0, psi_from_psi = 1.0, psi_from_delta = 0.0;
};
AggregationReplay aggregation_replay(double alpha, double lambda, double p, Index n, std::uint64_t c);

}  // namespace l2gd
