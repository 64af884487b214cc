#pragma once

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "l2gd/objective.hpp"
#include "l2gd/solvers.hpp"

namespace l2gd {

inline constexpr double kInfiniteLambda = std::numeric_limits<double>::infinity();

/// Constants of a problem instance: L = max_i L_i, mu = min_i mu_i,
/// m = max_i m_i, N = sum_i m_i.
struct ProblemConstants {
  Index n = 0;
  double L = 0.0;
  double mu = 0.0;
  std::size_t m = 0;
  std::size_t N = 0;
};
ProblemConstants problem_constants(const MixtureProblem& problem);

struct ReferenceOptions {
  /// Stop once ||grad F|| <= tol; 0 picks 1e-10 * max(1, ||grad F(x0)||).
  double tol = 0.0;
  std::uint64_t max_iters = 10'000'000;
  /// Starting point; zeros by default.
  std::optional<StackedModel> x0;
};

/// x(lambda) for the smooth problem (R = 0).
struct ReferenceSolution {
  double lambda = 0.0;
  StackedModel x_star{1, 1};
  Vector x_bar;
  double F_star = 0.0;
  double f_value = 0.0;
  double psi_value = 0.0;
  double grad_norm = 0.0;
  double tol = 0.0;
  std::uint64_t iterations_used = 0;
};

/// Deterministic accelerated gradient method (constant momentum from the
/// condition number, step 1/L_F, gradient-based restart). lambda may be
/// kInfiniteLambda, in which case the shared-model problem
/// min_z sum_i w_i f_i(z) is solved and replicated to every block.
/// Throws NumericError when the iteration cap is hit.
ReferenceSolution reference_solution(const MixtureProblem& problem, double lambda,
                                     const ReferenceOptions& options = {});

struct StationarityReport {
  double local_residual = 0.0;  // max_i ||x_i - xbar + (1/lambda) h_i||
  double sum_residual = 0.0;    // ||sum_i h_i||
  double psi_residual = 0.0;    // |psi - (1/(2 n lambda^2)) sum_i ||h_i||^2|
  double slack = 0.0;
  bool passed = false;
};

/// Residuals of the stationarity characterization at a reference solution,
/// with h_i = n w_i grad f_i(x_i(lambda)) (the local gradient itself for
/// device averaging). slack = max(1e-9, 10 tol (1 + ||grad f||) n max(1, 1/lambda)).
StationarityReport check_stationarity(const MixtureProblem& problem, const ReferenceSolution& ref);

struct MonotonicityRow {
  double lambda = 0.0;
  double f_value = 0.0;
  double psi_value = 0.0;
  double bound_lhs = 0.0;
  double bound_rhs = 0.0;
  double dist_to_local = 0.0;   // ||x(lambda) - x(0)||
  double dist_to_global = 0.0;  // ||x(lambda) - x(inf)||
};

struct MonotonicityTable {
  std::vector<MonotonicityRow> rows;
  double f_local = 0.0;   // f(x(0))
  double f_global = 0.0;  // f(x(inf))
  double slack = 0.0;
  /// Human-readable violations; empty when every property holds.
  std::vector<std::string> violations;
};

/// Solves x(lambda) on an ascending grid of positive lambdas plus the two
/// endpoints and checks: psi non-increasing, f non-decreasing (within
/// slack), f(x(lambda)) <= f(x(inf)), psi(x(lambda)) <= (f(x(inf)) - f(x(0)))/lambda
/// and the global-model gradient bound.
MonotonicityTable monotonicity_curve(const MixtureProblem& problem, const std::vector<double>& lambda_grid,
                                     const ReferenceOptions& options = {}, double slack = 1e-8);

/// CSV `lambda,f_value,psi_value,bound_lhs,bound_rhs`, 17 significant digits.
void write_monotonicity_csv(std::ostream& out, const MonotonicityTable& table);

struct BoundCheck {
  double lhs = 0.0;
  double rhs = 0.0;
  bool holds = false;
};

/// lhs = ||sum_i w_i grad f_i(xbar(lambda))||^2,
/// rhs = (2 L^2 / lambda)(f(x(inf)) - f(x(0))).
BoundCheck global_model_bound(const MixtureProblem& problem, const ReferenceSolution& ref,
                              double f_global, double f_local, double slack = 1e-9);
BoundCheck global_model_bound(const MixtureProblem& problem, double lambda, const ReferenceOptions& options = {});

/// (1/n) max{L/(1-p), lambda/p}
double expected_L(double L, double lambda, double p, Index n);
/// (1/n^2) sum_i ((1/(1-p)) ||h_i||^2 + (lambda^2/p) ||x_i - xbar||^2)
double sigma_sq(const MixtureProblem& problem, const ReferenceSolution& ref, double p);

struct RateReport {
  double expected_L = 0.0;
  std::optional<double> sigma_sq;
  double iter_bound = 0.0;
  double comm_bound = 0.0;
  double p_star = 0.0;
  double alpha = 0.0;
};

RateReport l2gd_rates(double L, double mu, double lambda, double p, double eps, Index n);
RateReport l2sgd_plus_rates(double L, double mu, double lambda, std::size_t m, double p, double eps, Index n);
RateReport vr_local_gd_rates(double L, double mu, double lambda, double p, double eps, Index n);

/// Inputs for the partial-participation rates. Per device: participation
/// probability, sampling marginals p_ij, ESO constants v_ij and (LSVRG) rho_i.
struct L2sgdppRateInput {
  double lambda = 0.0;
  double mu = 0.0;
  double p = 0.5;
  double eps = 1e-5;
  JacobianRule rule = JacobianRule::SAGA;
  std::vector<double> participation;
  std::vector<std::vector<double>> marginals;
  std::vector<std::vector<double>> eso_v;
  std::vector<double> rho;
};
RateReport l2sgdpp_rates(const L2sgdppRateInput& input);
/// Rate input assembled from a problem and solver configuration, with the
/// same defaults the solver applies.
L2sgdppRateInput l2sgdpp_rate_input(const MixtureProblem& problem, const SolverConfig& config, double eps);

/// lambda* = L p / (1 - p)
double lambda_threshold(double L, double p);

/// Theoretical stepsize for the variant, if the theory covers it
/// (L2GD, L2SGD+, its efficient form, VR local GD, L2SGD++).
std::optional<double> theoretical_alpha(const MixtureProblem& problem, const SolverConfig& config);

struct ExpectedSmoothnessCheck {
  double lhs = 0.0;  // E||G(x) - G(x(lambda))||^2
  double rhs = 0.0;  // 2 calL (F(x) - F(x(lambda)))
};
/// Enumerates both coin outcomes of the L2GD estimator.
ExpectedSmoothnessCheck expected_smoothness(const MixtureProblem& problem, const ReferenceSolution& ref,
                                            const StackedModel& x, double p);

struct EnvelopeRow {
  std::uint64_t k = 0;
  double mean_dist_sq = 0.0;
  double envelope = 0.0;
};
struct EnvelopeReport {
  double alpha = 0.0;
  double sigma_sq = 0.0;
  std::vector<EnvelopeRow> rows;
  /// True when mean_dist_sq <= (1 + rel_slack) envelope at every row.
  bool holds = false;
};
/// Seed-averaged L2GD distance to x(lambda) with alpha = 1/(2 calL) against
/// (1 - alpha mu/n)^k ||x0 - x(lambda)||^2 + 2 n alpha sigma^2 / mu.
EnvelopeReport l2gd_descent_envelope(const MixtureProblem& problem, const ReferenceSolution& ref,
                                     const StackedModel& x0, double p, std::uint64_t iterations,
                                     std::uint64_t record_every, const std::vector<std::uint64_t>& seeds,
                                     double rel_slack = 0.1);

}  // namespace l2gd
