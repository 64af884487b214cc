#include "l2gd/theory.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <ostream>

#include "l2gd/errors.hpp"

namespace l2gd {

ProblemConstants problem_constants(const MixtureProblem& problem) {
  ProblemConstants c;
  c.n = problem.n();
  c.mu = std::numeric_limits<double>::infinity();
  for (const auto& dev : problem.devices()) {
    const auto profile = smoothness_profile(dev);
    c.L = std::max(c.L, profile.L_local);
    c.mu = std::min(c.mu, profile.mu);
    c.m = std::max(c.m, dev.m());
  }
  c.N = problem.total_components();
  return c;
}

namespace {

struct MinimizeResult {
  Matrix x;
  double grad_norm = 0.0;
  double tol = 0.0;
  std::uint64_t iterations = 0;
};

// Accelerated gradient descent with constant momentum (or k/(k+3) when mu = 0)
// and gradient restart. Returns the extrapolated point whose gradient met the
// tolerance.
MinimizeResult accelerated_minimize(Matrix x0, const std::function<Matrix(const Matrix&)>& grad, double L,
                                    double mu, double tol, std::uint64_t max_iters) {
  const double beta_sc = mu > 0.0 ? (std::sqrt(L) - std::sqrt(mu)) / (std::sqrt(L) + std::sqrt(mu)) : 0.0;
  Matrix x = x0;
  Matrix y = std::move(x0);
  Matrix g = grad(y);
  double gn = g.norm();
  if (tol <= 0.0) tol = 1e-10 * std::max(1.0, gn);
  std::uint64_t iters = 0;
  std::uint64_t since_restart = 0;
  while (gn > tol) {
    if (iters >= max_iters) {
      throw NumericError("reference solver hit the iteration cap (" + std::to_string(max_iters) +
                         ") with gradient norm " + std::to_string(gn));
    }
    Matrix x_new = y - g / L;
    Matrix step = x_new - x;
    if ((g.array() * step.array()).sum() > 0.0) {
      y = x_new;
      since_restart = 0;
    } else {
      const double k = static_cast<double>(since_restart);
      const double beta = mu > 0.0 ? beta_sc : k / (k + 3.0);
      y = x_new + beta * step;
      ++since_restart;
    }
    x = std::move(x_new);
    g = grad(y);
    gn = g.norm();
    if (!std::isfinite(gn)) throw NumericError("reference solver diverged");
    ++iters;
  }
  return {std::move(y), gn, tol, iters};
}

}  // namespace

ReferenceSolution reference_solution(const MixtureProblem& problem_in, double lambda, const ReferenceOptions& options) {
  if (problem_in.has_regularizers()) throw ConfigError("reference solutions require R = 0");
  if (!(lambda >= 0.0)) throw ConfigError("lambda must be non-negative");
  const Index n = problem_in.n();
  const Index d = problem_in.d();
  const double nd = static_cast<double>(n);

  double L_shared = 0.0, mu_shared = 0.0, L_max = 0.0;
  double mu_min = std::numeric_limits<double>::infinity();
  for (Index i = 0; i < n; ++i) {
    const auto profile = smoothness_profile(problem_in.device(i));
    const double w = problem_in.weight(i);
    L_shared += w * profile.L_local;
    mu_shared += w * profile.mu;
    L_max = std::max(L_max, w * profile.L_local);
    mu_min = std::min(mu_min, w * profile.mu);
  }

  ReferenceSolution ref;
  ref.lambda = lambda;
  if (std::isinf(lambda)) {
    const MixtureProblem problem = problem_in.with_lambda(0.0);
    Matrix z0 = options.x0 ? Matrix(block_average(*options.x0)) : Matrix(Matrix::Zero(d, 1));
    const auto grad = [&](const Matrix& z) {
      Matrix g = Matrix::Zero(d, 1);
      for (Index i = 0; i < n; ++i) g.col(0) += problem.weight(i) * problem.device(i).local_grad(z.col(0));
      return g;
    };
    auto res = accelerated_minimize(std::move(z0), grad, L_shared, mu_shared, options.tol, options.max_iters);
    ref.x_star = StackedModel::replicate(res.x.col(0), n);
    ref.grad_norm = res.grad_norm;
    ref.tol = res.tol;
    ref.iterations_used = res.iterations;
    ref.x_bar = res.x.col(0);
    ref.f_value = loss_value(problem, ref.x_star);
    ref.psi_value = 0.0;
    ref.F_star = ref.f_value;
    return ref;
  }

  const MixtureProblem problem = problem_in.with_lambda(lambda);
  Matrix x0 = options.x0 ? options.x0->blocks() : Matrix(Matrix::Zero(d, n));
  if (x0.rows() != d || x0.cols() != n) throw ConfigError("reference starting point has the wrong shape");
  const auto grad = [&](const Matrix& x) { return grad_F(problem, StackedModel(x)).blocks(); };
  auto res = accelerated_minimize(std::move(x0), grad, L_max + lambda / nd, mu_min, options.tol, options.max_iters);
  ref.x_star = StackedModel(std::move(res.x));
  ref.x_bar = block_average(ref.x_star);
  ref.grad_norm = res.grad_norm;
  ref.tol = res.tol;
  ref.iterations_used = res.iterations;
  ref.f_value = loss_value(problem, ref.x_star);
  ref.psi_value = psi(ref.x_star);
  ref.F_star = ref.f_value + lambda * ref.psi_value;
  return ref;
}

namespace {

// h_i = n w_i grad f_i(x_i): the local gradient as it enters stationarity.
Matrix stationarity_gradients(const MixtureProblem& problem, const StackedModel& x) {
  Matrix h = local_gradients(problem, x);
  const double nd = static_cast<double>(problem.n());
  for (Index i = 0; i < problem.n(); ++i) h.col(i) *= nd * problem.weight(i);
  return h;
}

}  // namespace

StationarityReport check_stationarity(const MixtureProblem& problem, const ReferenceSolution& ref) {
  const double lambda = ref.lambda;
  if (!(lambda > 0.0) || std::isinf(lambda)) throw ConfigError("stationarity check needs 0 < lambda < inf");
  const Index n = problem.n();
  const double nd = static_cast<double>(n);
  const Matrix h = stationarity_gradients(problem, ref.x_star);
  const Vector xbar = block_average(ref.x_star);

  StationarityReport r;
  double sum_sq = 0.0;
  double grad_f_sq = 0.0;
  for (Index i = 0; i < n; ++i) {
    const Vector res = ref.x_star.block(i) - xbar + h.col(i) / lambda;
    r.local_residual = std::max(r.local_residual, res.norm());
    sum_sq += h.col(i).squaredNorm();
    grad_f_sq += (h.col(i) / nd).squaredNorm();
  }
  r.sum_residual = h.rowwise().sum().norm();
  r.psi_residual = std::abs(psi(ref.x_star) - sum_sq / (2.0 * nd * lambda * lambda));
  r.slack = std::max(1e-9, 10.0 * ref.tol * (1.0 + std::sqrt(grad_f_sq)) * nd * std::max(1.0, 1.0 / lambda));
  r.passed = r.local_residual <= r.slack && r.sum_residual <= r.slack && r.psi_residual <= r.slack;
  return r;
}

BoundCheck global_model_bound(const MixtureProblem& problem, const ReferenceSolution& ref, double f_global,
                              double f_local, double slack) {
  if (!(ref.lambda > 0.0)) throw ConfigError("global model bound needs lambda > 0");
  Vector g = Vector::Zero(problem.d());
  for (Index i = 0; i < problem.n(); ++i) g += problem.weight(i) * problem.device(i).local_grad(ref.x_bar);
  const double L = problem_constants(problem).L;
  BoundCheck b;
  b.lhs = g.squaredNorm();
  b.rhs = std::isinf(ref.lambda) ? 0.0 : 2.0 * L * L / ref.lambda * (f_global - f_local);
  b.holds = b.lhs <= b.rhs + slack;
  return b;
}

BoundCheck global_model_bound(const MixtureProblem& problem, double lambda, const ReferenceOptions& options) {
  const auto ref = reference_solution(problem, lambda, options);
  const auto local = reference_solution(problem, 0.0, options);
  const auto global = reference_solution(problem, kInfiniteLambda, options);
  return global_model_bound(problem, ref, global.f_value, local.f_value,
                            std::max(1e-9, 10.0 * ref.tol));
}

MonotonicityTable monotonicity_curve(const MixtureProblem& problem, const std::vector<double>& lambda_grid,
                                     const ReferenceOptions& options, double slack) {
  if (lambda_grid.empty()) throw ConfigError("lambda grid is empty");
  for (std::size_t k = 0; k < lambda_grid.size(); ++k) {
    if (!(lambda_grid[k] > 0.0)) throw ConfigError("lambda grid values must be positive");
    if (k > 0 && !(lambda_grid[k] > lambda_grid[k - 1])) throw ConfigError("lambda grid must be ascending");
  }
  MonotonicityTable table;
  table.slack = slack;
  const auto local = reference_solution(problem, 0.0, options);
  const auto global = reference_solution(problem, kInfiniteLambda, options);
  table.f_local = local.f_value;
  table.f_global = global.f_value;

  ReferenceOptions opts = options;
  opts.x0 = local.x_star;
  for (double lambda : lambda_grid) {
    const auto ref = reference_solution(problem, lambda, opts);
    opts.x0 = ref.x_star;
    MonotonicityRow row;
    row.lambda = lambda;
    row.f_value = ref.f_value;
    row.psi_value = ref.psi_value;
    const auto bound = global_model_bound(problem, ref, table.f_global, table.f_local, slack);
    row.bound_lhs = bound.lhs;
    row.bound_rhs = bound.rhs;
    row.dist_to_local = std::sqrt(ref.x_star.squared_distance(local.x_star));
    row.dist_to_global = std::sqrt(ref.x_star.squared_distance(global.x_star));
    table.rows.push_back(row);
  }

  char buf[256];
  for (std::size_t k = 0; k < table.rows.size(); ++k) {
    const auto& r = table.rows[k];
    if (k > 0) {
      const auto& prev = table.rows[k - 1];
      if (r.psi_value > prev.psi_value + slack) {
        std::snprintf(buf, sizeof buf, "psi increases between lambda=%g and lambda=%g", prev.lambda, r.lambda);
        table.violations.emplace_back(buf);
      }
      if (r.f_value < prev.f_value - slack) {
        std::snprintf(buf, sizeof buf, "f decreases between lambda=%g and lambda=%g", prev.lambda, r.lambda);
        table.violations.emplace_back(buf);
      }
    }
    if (r.f_value > table.f_global + slack) {
      std::snprintf(buf, sizeof buf, "f(x(lambda)) exceeds f(x(inf)) at lambda=%g", r.lambda);
      table.violations.emplace_back(buf);
    }
    if (r.psi_value > (table.f_global - table.f_local) / r.lambda + slack) {
      std::snprintf(buf, sizeof buf, "psi bound violated at lambda=%g", r.lambda);
      table.violations.emplace_back(buf);
    }
    if (r.bound_lhs > r.bound_rhs + slack) {
      std::snprintf(buf, sizeof buf, "global model gradient bound violated at lambda=%g", r.lambda);
      table.violations.emplace_back(buf);
    }
  }
  return table;
}

void write_monotonicity_csv(std::ostream& out, const MonotonicityTable& table) {
  out << "lambda,f_value,psi_value,bound_lhs,bound_rhs\n";
  char buf[160];
  for (const auto& r : table.rows) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g,%.17g\n", r.lambda, r.f_value, r.psi_value, r.bound_lhs,
                  r.bound_rhs);
    out << buf;
  }
}

double expected_L(double L, double lambda, double p, Index n) {
  if (!(p > 0.0 && p < 1.0)) throw ConfigError("p must lie in (0, 1)");
  return std::max(L / (1.0 - p), lambda / p) / static_cast<double>(n);
}

double sigma_sq(const MixtureProblem& problem, const ReferenceSolution& ref, double p) {
  if (!(p > 0.0 && p < 1.0)) throw ConfigError("p must lie in (0, 1)");
  const Matrix h = stationarity_gradients(problem, ref.x_star);
  const Vector xbar = block_average(ref.x_star);
  const double nd = static_cast<double>(problem.n());
  double s = 0.0;
  for (Index i = 0; i < problem.n(); ++i) {
    s += h.col(i).squaredNorm() / (1.0 - p) +
         ref.lambda * ref.lambda / p * (ref.x_star.block(i) - xbar).squaredNorm();
  }
  return s / (nd * nd);
}

namespace {

void check_rate_inputs(double mu, double p, double eps) {
  if (!(p > 0.0 && p < 1.0)) throw ConfigError("p must lie in (0, 1)");
  if (!(mu >= 0.0)) throw ConfigError("mu must be non-negative");
  if (!(eps > 0.0 && eps < 1.0)) throw ConfigError("epsilon must lie in (0, 1)");
}

// For iteration bounds max{A/(1-p), B/p} log(1/eps), the communication bound
// max{pA, (1-p)B} log(1/eps) is minimized at p = B/(A+B).
void fill_two_term(RateReport& r, double A, double B, double p, double eps) {
  const double log_term = std::log(1.0 / eps);
  r.iter_bound = std::max(A / (1.0 - p), B / p) * log_term;
  r.comm_bound = p * (1.0 - p) * r.iter_bound;
  r.p_star = B / (A + B);
}

}  // namespace

RateReport l2gd_rates(double L, double mu, double lambda, double p, double eps, Index n) {
  check_rate_inputs(mu, p, eps);
  RateReport r;
  r.expected_L = expected_L(L, lambda, p, n);
  r.alpha = 1.0 / (2.0 * r.expected_L);
  r.iter_bound = 2.0 * static_cast<double>(n) * r.expected_L / mu * std::log(1.0 / eps);
  r.comm_bound = p * (1.0 - p) * r.iter_bound;
  r.p_star = lambda / (L + lambda);
  return r;
}

RateReport l2sgd_plus_rates(double L, double mu, double lambda, std::size_t m, double p, double eps, Index n) {
  check_rate_inputs(mu, p, eps);
  if (m == 0) throw ConfigError("m must be positive");
  const double md = static_cast<double>(m);
  RateReport r;
  r.expected_L = expected_L(L, lambda, p, n);
  r.alpha = static_cast<double>(n) * std::min((1.0 - p) / (4.0 * L + mu * md), p / (4.0 * lambda + mu));
  fill_two_term(r, (4.0 * L + mu * md) / mu, (4.0 * lambda + mu) / mu, p, eps);
  return r;
}

RateReport vr_local_gd_rates(double L, double mu, double lambda, double p, double eps, Index n) {
  check_rate_inputs(mu, p, eps);
  RateReport r;
  r.expected_L = expected_L(L, lambda, p, n);
  r.alpha = static_cast<double>(n) * std::min((1.0 - p) / (4.0 * L + mu), p / (4.0 * lambda + mu));
  fill_two_term(r, (4.0 * L + mu) / mu, (4.0 * lambda + mu) / mu, p, eps);
  return r;
}

RateReport l2sgdpp_rates(const L2sgdppRateInput& in) {
  check_rate_inputs(in.mu, in.p, in.eps);
  const std::size_t n = in.participation.size();
  if (n == 0 || in.marginals.size() != n || in.eso_v.size() != n) {
    throw ConfigError("rate input needs per-device participation, marginals and eso constants");
  }
  if (in.rule == JacobianRule::LSVRG && in.rho.size() != n) throw ConfigError("rate input needs rho per device");
  double N = 0.0;
  for (const auto& q : in.marginals) N += static_cast<double>(q.size());
  const double nd = static_cast<double>(n);
  const double p = in.p;
  const double mu = in.mu;

  double alpha_local = std::numeric_limits<double>::infinity();
  double A = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double pg = in.participation[i];
    if (in.eso_v[i].size() != in.marginals[i].size()) throw ConfigError("eso constants do not match marginals");
    for (std::size_t j = 0; j < in.marginals[i].size(); ++j) {
      const double pij = in.marginals[i][j];
      const double v = in.eso_v[i][j];
      if (in.rule == JacobianRule::SAGA) {
        alpha_local = std::min(alpha_local, N * (1.0 - p) * pij * pg / (4.0 * v + N * mu / nd));
        A = std::max(A, (4.0 * v * nd / N + mu) / (mu * pij * pg));
      } else {
        const double rho = in.rho[i];
        alpha_local = std::min(alpha_local, N * (1.0 - p) * pg / (4.0 * v / pij + N * mu / (nd * rho)));
        A = std::max(A, (4.0 * v * nd / (N * pij) + mu / rho) / (pg * mu));
      }
    }
  }
  RateReport r;
  r.alpha = std::min(alpha_local, nd * p / (4.0 * in.lambda + mu));
  fill_two_term(r, A, (4.0 * in.lambda + mu) / mu, p, in.eps);
  double L = 0.0;
  for (const auto& v : in.eso_v) {
    for (double x : v) L = std::max(L, x);
  }
  r.expected_L = std::max(L / (1.0 - p), in.lambda / p) / nd;
  return r;
}

L2sgdppRateInput l2sgdpp_rate_input(const MixtureProblem& problem, const SolverConfig& config, double eps) {
  const MixtureProblem P = config.lambda ? problem.with_lambda(*config.lambda) : problem;
  L2sgdppRateInput in;
  in.lambda = P.lambda();
  in.mu = problem_constants(P).mu;
  in.p = config.p;
  in.eps = eps;
  in.rule = config.jacobian_rule;
  const auto n = static_cast<std::size_t>(P.n());
  in.participation = config.participation ? config.participation->marginals() : std::vector<double>(n, 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& dev = P.device(static_cast<Index>(i));
    const SubsetSampling s = config.sampling.empty() ? SubsetSampling::uniform_single(dev.m()) : config.sampling[i];
    in.marginals.push_back(s.marginals());
    in.eso_v.push_back(config.eso_v.empty() ? s.eso_default(smoothness_profile(dev).L_components) : config.eso_v[i]);
    in.rho.push_back(config.lsvrg_probs.empty() ? 1.0 / static_cast<double>(dev.m()) : config.lsvrg_probs[i]);
  }
  return in;
}

double lambda_threshold(double L, double p) {
  if (!(p > 0.0 && p < 1.0)) throw ConfigError("p must lie in (0, 1)");
  return L * p / (1.0 - p);
}

std::optional<double> theoretical_alpha(const MixtureProblem& problem, const SolverConfig& config) {
  if (!(config.p > 0.0 && config.p < 1.0)) return std::nullopt;
  const MixtureProblem P = config.lambda ? problem.with_lambda(*config.lambda) : problem;
  const bool device_average = P.weighting() == Weighting::DeviceAverage || P.equal_component_counts();
  const auto c = problem_constants(P);
  constexpr double eps = 1e-5;
  switch (config.variant) {
    case Variant::L2GD:
      if (!device_average) return std::nullopt;
      return 1.0 / (2.0 * expected_L(c.L, P.lambda(), config.p, c.n));
    case Variant::L2SGD_PLUS:
    case Variant::L2SGD_PLUS_EFFICIENT:
      if (!P.equal_component_counts()) return std::nullopt;
      return l2sgd_plus_rates(c.L, c.mu, P.lambda(), c.m, config.p, eps, c.n).alpha;
    case Variant::VR_LOCAL_GD:
      if (!device_average) return std::nullopt;
      return vr_local_gd_rates(c.L, c.mu, P.lambda(), config.p, eps, c.n).alpha;
    case Variant::L2SGDPP:
      if (P.weighting() != Weighting::ComponentAverage && !P.equal_component_counts()) return std::nullopt;
      return l2sgdpp_rates(l2sgdpp_rate_input(P, config, eps)).alpha;
    case Variant::L2SGD:
    case Variant::L2SGD2:
      return std::nullopt;
  }
  return std::nullopt;
}

ExpectedSmoothnessCheck expected_smoothness(const MixtureProblem& problem_in, const ReferenceSolution& ref,
                                            const StackedModel& x, double p) {
  const MixtureProblem problem = problem_in.with_lambda(ref.lambda);
  ExpectedSmoothnessCheck out;
  for (int xi = 0; xi < 2; ++xi) {
    const double prob = xi ? p : 1.0 - p;
    const Matrix diff = stochastic_gradient_l2gd(problem, x, p, xi != 0).blocks() -
                        stochastic_gradient_l2gd(problem, ref.x_star, p, xi != 0).blocks();
    out.lhs += prob * diff.squaredNorm();
  }
  const double calL = expected_L(problem_constants(problem).L, ref.lambda, p, problem.n());
  out.rhs = 2.0 * calL * (smooth_value(problem, x) - smooth_value(problem, ref.x_star));
  return out;
}

EnvelopeReport l2gd_descent_envelope(const MixtureProblem& problem_in, const ReferenceSolution& ref,
                                     const StackedModel& x0, double p, std::uint64_t iterations,
                                     std::uint64_t record_every, const std::vector<std::uint64_t>& seeds,
                                     double rel_slack) {
  if (seeds.empty()) throw ConfigError("envelope check needs at least one seed");
  const MixtureProblem problem = problem_in.with_lambda(ref.lambda);
  const auto c = problem_constants(problem);
  const double nd = static_cast<double>(c.n);
  EnvelopeReport report;
  report.alpha = 1.0 / (2.0 * expected_L(c.L, ref.lambda, p, c.n));
  report.sigma_sq = sigma_sq(problem, ref, p);

  SolverConfig config;
  config.variant = Variant::L2GD;
  config.alpha = report.alpha;
  config.p = p;
  config.max_iters = iterations;
  RunOptions options;
  options.record_every = record_every;
  options.reference_model = ref.x_star;
  options.quiet = true;

  std::vector<double> sums;
  std::vector<std::uint64_t> ks;
  for (std::uint64_t seed : seeds) {
    config.seed = seed;
    const auto result = run_solver(problem, x0, config, options);
    if (sums.empty()) {
      sums.assign(result.trace.rows.size(), 0.0);
      for (const auto& row : result.trace.rows) ks.push_back(row.k);
    }
    for (std::size_t r = 0; r < sums.size(); ++r) sums[r] += result.trace.rows[r].dist_sq;
  }
  const double d0 = x0.squared_distance(ref.x_star);
  const double rate = 1.0 - report.alpha * c.mu / nd;
  const double floor = 2.0 * nd * report.alpha * report.sigma_sq / c.mu;
  report.holds = true;
  for (std::size_t r = 0; r < sums.size(); ++r) {
    EnvelopeRow row;
    row.k = ks[r];
    row.mean_dist_sq = sums[r] / static_cast<double>(seeds.size());
    row.envelope = std::pow(rate, static_cast<double>(ks[r])) * d0 + floor;
    if (row.mean_dist_sq > (1.0 + rel_slack) * row.envelope) report.holds = false;
    report.rows.push_back(row);
  }
  return report;
}

}  // namespace l2gd
