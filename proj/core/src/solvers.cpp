#include "l2gd/solvers.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <stdexcept>

#include "engine_detail.hpp"
#include "l2gd/errors.hpp"
#include "l2gd/log.hpp"
#include "l2gd/theory.hpp"

namespace l2gd {

namespace detail {

JacobianTable::JacobianTable(Matrix J)
    : J_(std::move(J)), sum_(J_.rowwise().sum()), resync_every_(std::max<std::uint64_t>(64, 8 * J_.cols())) {}

void JacobianTable::set_column(Index j, const Eigen::Ref<const Vector>& g) {
  sum_ += g - J_.col(j);
  J_.col(j) = g;
  if (++updates_ >= resync_every_) resync();
}

void JacobianTable::resync() {
  sum_ = J_.rowwise().sum();
  updates_ = 0;
}

bool is_stochastic(Variant v) noexcept {
  return v == Variant::L2SGD_PLUS || v == Variant::L2SGD_PLUS_EFFICIENT || v == Variant::L2SGD ||
         v == Variant::L2SGD2 || v == Variant::L2SGDPP;
}

bool uses_jacobian(Variant v) noexcept {
  return v == Variant::L2SGD_PLUS || v == Variant::L2SGD_PLUS_EFFICIENT || v == Variant::L2SGDPP ||
         v == Variant::VR_LOCAL_GD;
}

bool uses_psi(Variant v) noexcept { return v != Variant::L2GD && v != Variant::L2SGD; }

}  // namespace detail

using detail::JacobianTable;

namespace {

struct VariantName {
  Variant variant;
  const char* name;
};

constexpr VariantName kVariantNames[] = {
    {Variant::L2GD, "l2gd"},
    {Variant::L2SGD_PLUS, "l2sgd+"},
    {Variant::L2SGD_PLUS_EFFICIENT, "l2sgd+-efficient"},
    {Variant::VR_LOCAL_GD, "vr-local-gd"},
    {Variant::L2SGD, "l2sgd"},
    {Variant::L2SGD2, "l2sgd2"},
    {Variant::L2SGDPP, "l2sgd++"},
};

std::string normalize_name(const std::string& text) {
  std::string out;
  for (char c : text) {
    char lc = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    out.push_back(lc == '_' ? '-' : lc);
  }
  if (out.size() > 5 && out.compare(out.size() - 5, 5, "-plus") == 0) out.replace(out.size() - 5, 5, "+");
  if (out == "l2sgd-plus-efficient" || out == "l2sgd+efficient") out = "l2sgd+-efficient";
  if (out == "l2sgdpp") out = "l2sgd++";
  return out;
}

double frac_double(std::size_t a) { return static_cast<double>(a); }

}  // namespace

std::string to_string(Variant v) {
  for (const auto& e : kVariantNames) {
    if (e.variant == v) return e.name;
  }
  return "unknown";
}

Variant parse_variant(const std::string& text) {
  const std::string key = normalize_name(text);
  for (const auto& e : kVariantNames) {
    if (key == e.name) return e.variant;
  }
  throw ConfigError("unknown solver variant '" + text + "'");
}

const std::vector<Variant>& all_variants() {
  static const std::vector<Variant> variants = {Variant::L2GD,  Variant::L2SGD_PLUS, Variant::L2SGD_PLUS_EFFICIENT,
                                                Variant::VR_LOCAL_GD, Variant::L2SGD, Variant::L2SGD2,
                                                Variant::L2SGDPP};
  return variants;
}

std::string to_string(JacobianRule r) { return r == JacobianRule::SAGA ? "saga" : "lsvrg"; }

JacobianRule parse_jacobian_rule(const std::string& text) {
  std::string key;
  for (char c : text) key.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  if (key == "saga") return JacobianRule::SAGA;
  if (key == "lsvrg" || key == "l-svrg") return JacobianRule::LSVRG;
  throw ConfigError("unknown jacobian rule '" + text + "'");
}

ControlVariates ControlVariates::zeros(const MixtureProblem& problem, Variant variant) {
  ControlVariates cv;
  const Index d = problem.d();
  for (Index i = 0; i < problem.n(); ++i) {
    Index cols = 0;
    if (variant == Variant::VR_LOCAL_GD) {
      cols = 1;
    } else if (detail::uses_jacobian(variant)) {
      cols = static_cast<Index>(problem.device(i).m());
    }
    cv.J.push_back(Matrix::Zero(d, cols));
    cv.psi.push_back(Vector::Zero(d));
  }
  return cv;
}

// ---------------------------------------------------------------------------
// Draws

namespace {

std::vector<SubsetSampling> effective_sampling(const MixtureProblem& problem, const SolverConfig& config) {
  if (config.variant == Variant::L2SGDPP && !config.sampling.empty()) return config.sampling;
  std::vector<SubsetSampling> out;
  for (Index i = 0; i < problem.n(); ++i) out.push_back(SubsetSampling::uniform_single(problem.device(i).m()));
  return out;
}

SubsetSampling effective_participation(const MixtureProblem& problem, const SolverConfig& config) {
  if (config.participation) return *config.participation;
  return SubsetSampling::full(static_cast<std::size_t>(problem.n()));
}

std::vector<double> effective_rho(const MixtureProblem& problem, const SolverConfig& config) {
  if (!config.lsvrg_probs.empty()) return config.lsvrg_probs;
  std::vector<double> rho;
  for (Index i = 0; i < problem.n(); ++i) rho.push_back(1.0 / frac_double(problem.device(i).m()));
  return rho;
}

}  // namespace

DrawSource::DrawSource(const MixtureProblem& problem, const SolverConfig& config)
    : variant_(config.variant),
      coins_(config.seed, config.p),
      participation_rng_(derive_key(config.seed, "participation")),
      rule_(config.jacobian_rule) {
  for (Index i = 0; i < problem.n(); ++i) {
    sample_rngs_.emplace_back(derive_key(config.seed, "device", static_cast<std::uint64_t>(i)));
    lsvrg_rngs_.emplace_back(derive_key(config.seed, "lsvrg", static_cast<std::uint64_t>(i)));
  }
  if (detail::is_stochastic(variant_)) sampling_ = effective_sampling(problem, config);
  if (variant_ == Variant::L2SGDPP) {
    participation_ = effective_participation(problem, config);
    rho_ = effective_rho(problem, config);
  }
}

StepDraws DrawSource::next() {
  StepDraws d;
  d.xi = coins_.next();
  if (d.xi || !detail::is_stochastic(variant_)) return d;
  const std::size_t n = sample_rngs_.size();
  d.active.assign(n, 1);
  if (participation_) {
    std::fill(d.active.begin(), d.active.end(), 0);
    for (std::size_t i : participation_->draw(participation_rng_)) d.active[i] = 1;
  }
  d.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (d.active[i]) d.samples[i] = sampling_[i].draw(sample_rngs_[i]);
  }
  if (variant_ == Variant::L2SGDPP && rule_ == JacobianRule::LSVRG) {
    d.refresh.assign(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
      if (d.active[i]) d.refresh[i] = lsvrg_rngs_[i].bernoulli(rho_[i]) ? 1 : 0;
    }
  }
  return d;
}

// ---------------------------------------------------------------------------
// Engine for every variant except the communication-efficient one

namespace {

class GeneralEngine final : public Engine {
 public:
  GeneralEngine(const MixtureProblem& problem, const SolverConfig& config, const StackedModel& x0,
                ControlVariates cv)
      : problem_(problem),
        variant_(config.variant),
        alpha_(config.alpha),
        p_(config.p),
        lambda_(problem.lambda()),
        x_(x0.blocks()),
        scratch_(Vector::Zero(problem.d())),
        grad_(Vector::Zero(problem.d())) {
    const Index n = problem.n();
    for (Index i = 0; i < n; ++i) {
      jac_.emplace_back(std::move(cv.J[static_cast<std::size_t>(i)]));
      w_.push_back(problem.weight(i));
      coef_.push_back(problem.weight(i) / frac_double(problem.device(i).m()));
    }
    psi_ = std::move(cv.psi);
    if (variant_ == Variant::L2SGDPP) {
      const auto participation = effective_participation(problem, config);
      pg_ = participation.marginals();
      for (const auto& s : effective_sampling(problem, config)) {
        std::vector<double> inv;
        for (double q : s.marginals()) inv.push_back(1.0 / q);
        inv_marginals_.push_back(std::move(inv));
      }
      rule_ = config.jacobian_rule;
      for (Index i = 0; i < n; ++i) prox_needed_.push_back(!is_zero(problem.regularizer(i)));
    }
  }

  void step(const StepDraws& draws) override {
    if (draws.xi) {
      aggregate();
    } else {
      local(draws);
    }
  }

  StackedModel iterate() const override { return StackedModel(x_); }

  ControlVariates control_variates() const override {
    ControlVariates cv;
    for (const auto& t : jac_) cv.J.push_back(t.J());
    cv.psi = psi_;
    return cv;
  }

  std::uint64_t gradient_evaluations() const noexcept override { return evals_; }

  std::unique_ptr<Engine> clone() const override { return std::make_unique<GeneralEngine>(*this); }

 private:
  void finish_update(Index i, const Vector& g) {
    if (prox_needed_.empty() || !prox_needed_[static_cast<std::size_t>(i)]) {
      x_.col(i) -= alpha_ * g;
    } else {
      scratch_ = x_.col(i) - alpha_ * g;
      x_.col(i) = regularizer_prox(problem_.regularizer(i), scratch_, alpha_);
    }
  }

  void aggregate() {
    const Index n = problem_.n();
    const double nd = static_cast<double>(n);
    const Vector xbar = block_average(x_);
    const double shrink = lambda_ / (nd * p_);
    const double psi_scale = (1.0 / p_ - 1.0) / nd;
    Vector g(problem_.d());
    Vector diff(problem_.d());
    for (Index i = 0; i < n; ++i) {
      const auto ui = static_cast<std::size_t>(i);
      diff = x_.col(i) - xbar;
      g = shrink * diff;
      if (detail::uses_psi(variant_)) g -= psi_scale * psi_[ui];
      switch (variant_) {
        case Variant::L2SGD_PLUS:
          g += jac_[ui].sum() / (nd * frac_double(problem_.device(i).m()));
          break;
        case Variant::L2SGDPP:
          g += coef_[ui] * jac_[ui].sum();
          break;
        case Variant::VR_LOCAL_GD:
          g += w_[ui] * jac_[ui].J().col(0);
          break;
        default:
          break;
      }
      finish_update(i, g);
      if (detail::uses_psi(variant_)) psi_[ui] = lambda_ * diff;
    }
  }

  void local(const StepDraws& draws) {
    const Index n = problem_.n();
    const double nd = static_cast<double>(n);
    const double q = 1.0 - p_;
    Vector g(problem_.d());
    for (Index i = 0; i < n; ++i) {
      const auto ui = static_cast<std::size_t>(i);
      const DeviceFiniteSum& dev = problem_.device(i);
      const auto xi = x_.col(i);
      switch (variant_) {
        case Variant::L2GD:
          dev.local_grad_into(xi, grad_);
          evals_ += dev.m();
          g = (w_[ui] / q) * grad_;
          break;
        case Variant::VR_LOCAL_GD:
          dev.local_grad_into(xi, grad_);
          evals_ += dev.m();
          g = (w_[ui] / q) * grad_ - (p_ * w_[ui] / q) * jac_[ui].J().col(0) + psi_[ui] / nd;
          jac_[ui].set_column(0, grad_);
          break;
        case Variant::L2SGD:
        case Variant::L2SGD2: {
          const std::size_t j = draws.samples.at(ui).at(0);
          dev.component_grad_into(j, xi, grad_);
          evals_ += 1;
          g = (w_[ui] / q) * grad_;
          if (variant_ == Variant::L2SGD2) g += psi_[ui] / nd;
          break;
        }
        case Variant::L2SGD_PLUS: {
          const std::size_t j = draws.samples.at(ui).at(0);
          const auto jj = static_cast<Index>(j);
          dev.component_grad_into(j, xi, grad_);
          evals_ += 1;
          const double m = frac_double(dev.m());
          g = (grad_ - jac_[ui].J().col(jj)) / (nd * q) + jac_[ui].sum() / (nd * m) + psi_[ui] / nd;
          jac_[ui].set_column(jj, grad_);
          break;
        }
        case Variant::L2SGDPP:
          local_pp(i, draws, g);
          break;
        case Variant::L2SGD_PLUS_EFFICIENT:
          throw std::logic_error("efficient variant handled by its own engine");
      }
      finish_update(i, g);
    }
  }

  void local_pp(Index i, const StepDraws& draws, Vector& g) {
    const auto ui = static_cast<std::size_t>(i);
    const DeviceFiniteSum& dev = problem_.device(i);
    const auto xi = x_.col(i);
    const double nd = static_cast<double>(problem_.n());
    g = coef_[ui] * jac_[ui].sum() + psi_[ui] / nd;
    if (!draws.active.at(ui)) return;
    const Subset& S = draws.samples.at(ui);
    Vector acc = Vector::Zero(problem_.d());
    std::vector<Vector> fresh;
    fresh.reserve(S.size());
    for (std::size_t j : S) {
      dev.component_grad_into(j, xi, grad_);
      acc += inv_marginals_[ui][j] * (grad_ - jac_[ui].J().col(static_cast<Index>(j)));
      fresh.push_back(grad_);
    }
    evals_ += S.size();
    g += (coef_[ui] / ((1.0 - p_) * pg_[ui])) * acc;
    if (rule_ == JacobianRule::SAGA) {
      for (std::size_t k = 0; k < S.size(); ++k) jac_[ui].set_column(static_cast<Index>(S[k]), fresh[k]);
    } else if (draws.refresh.at(ui)) {
      for (std::size_t j = 0; j < dev.m(); ++j) {
        dev.component_grad_into(j, xi, grad_);
        jac_[ui].set_column(static_cast<Index>(j), grad_);
      }
      jac_[ui].resync();
      evals_ += dev.m();
    }
  }

  MixtureProblem problem_;
  Variant variant_;
  double alpha_;
  double p_;
  double lambda_;
  Matrix x_;
  std::vector<JacobianTable> jac_;
  std::vector<Vector> psi_;
  std::vector<double> w_;
  std::vector<double> coef_;
  std::vector<double> pg_;
  std::vector<std::vector<double>> inv_marginals_;
  std::vector<char> prox_needed_;
  JacobianRule rule_ = JacobianRule::SAGA;
  std::uint64_t evals_ = 0;
  Vector scratch_;
  Vector grad_;
};

void check_control_variates(const MixtureProblem& problem, Variant variant, const ControlVariates& cv) {
  const auto expected = ControlVariates::zeros(problem, variant);
  if (cv.J.size() != expected.J.size() || cv.psi.size() != expected.psi.size()) {
    throw ConfigError("control variates have the wrong number of devices");
  }
  for (std::size_t i = 0; i < cv.J.size(); ++i) {
    if (cv.J[i].rows() != expected.J[i].rows() || cv.J[i].cols() != expected.J[i].cols() ||
        cv.psi[i].size() != expected.psi[i].size()) {
      throw ConfigError("control variates have the wrong shape for device " + std::to_string(i));
    }
    if (!cv.J[i].allFinite() || !cv.psi[i].allFinite()) throw NumericError("control variates are not finite");
  }
}

MixtureProblem effective_problem(const MixtureProblem& problem, const SolverConfig& config) {
  return config.lambda ? problem.with_lambda(*config.lambda) : problem;
}

}  // namespace

// ---------------------------------------------------------------------------
// Validation

std::vector<std::string> validate_config(const MixtureProblem& problem_in, const SolverConfig& config,
                                         const StackedModel& x0) {
  if (!(config.alpha > 0.0) || !std::isfinite(config.alpha)) throw ConfigError("alpha must be positive and finite");
  if (!(config.p > 0.0 && config.p < 1.0)) throw ConfigError("p must lie in (0, 1)");
  if (config.lambda && !(*config.lambda >= 0.0 && std::isfinite(*config.lambda))) {
    throw ConfigError("lambda must be finite and non-negative");
  }
  const MixtureProblem problem = effective_problem(problem_in, config);
  const Index n = problem.n();
  if (x0.n() != n || x0.d() != problem.d()) throw ConfigError("initial model has the wrong shape");

  const bool pp = config.variant == Variant::L2SGDPP;
  if (!pp && problem.has_regularizers()) {
    throw ConfigError(to_string(config.variant) + " does not support regularizers; use l2sgd++");
  }
  if ((config.variant == Variant::L2SGD_PLUS || config.variant == Variant::L2SGD_PLUS_EFFICIENT) &&
      !problem.equal_component_counts()) {
    throw ConfigError("unequal m across devices; " + to_string(config.variant) + " needs equal local dataset sizes");
  }
  if (pp) {
    if (config.participation && config.participation->size() != static_cast<std::size_t>(n)) {
      throw ConfigError("participation sampling must range over the n devices");
    }
    if (!config.sampling.empty()) {
      if (config.sampling.size() != static_cast<std::size_t>(n)) throw ConfigError("one local sampling per device required");
      for (Index i = 0; i < n; ++i) {
        if (config.sampling[static_cast<std::size_t>(i)].size() != problem.device(i).m()) {
          throw ConfigError("local sampling of device " + std::to_string(i) + " does not match its m");
        }
      }
    }
    if (!config.lsvrg_probs.empty()) {
      if (config.lsvrg_probs.size() != static_cast<std::size_t>(n)) throw ConfigError("one lsvrg probability per device required");
      for (double r : config.lsvrg_probs) {
        if (!(r > 0.0 && r <= 1.0)) throw ConfigError("lsvrg probabilities must lie in (0, 1]");
      }
    }
    if (!config.eso_v.empty()) {
      if (config.eso_v.size() != static_cast<std::size_t>(n)) throw ConfigError("eso_v needs one vector per device");
      for (Index i = 0; i < n; ++i) {
        if (config.eso_v[static_cast<std::size_t>(i)].size() != problem.device(i).m()) {
          throw ConfigError("eso_v of device " + std::to_string(i) + " does not match its m");
        }
      }
    }
  }

  std::vector<std::string> warnings;
  const Vector first = x0.block(0);
  for (Index i = 1; i < n; ++i) {
    if (x0.block(i) != first) {
      warnings.emplace_back("initial local models are not identical; proceeding anyway");
      break;
    }
  }
  const double coefficient = config.alpha * problem.lambda() / (static_cast<double>(n) * config.p);
  if (coefficient > 0.5) {
    warnings.emplace_back("aggregation coefficient alpha*lambda/(n*p) = " + std::to_string(coefficient) +
                          " exceeds 1/2");
  }
  if (const auto theory = theoretical_alpha(problem, config)) {
    if (config.alpha > *theory * (1.0 + 1e-12)) {
      warnings.emplace_back("stepsize " + std::to_string(config.alpha) + " exceeds the theoretical value " +
                            std::to_string(*theory));
    } else if (coefficient > 0.5 * (1.0 + 1e-12)) {
      throw std::logic_error("theoretical stepsize produced an aggregation coefficient above 1/2");
    }
    if (config.variant == Variant::L2SGDPP && !config.eso_v.empty()) {
      for (Index i = 0; i < n; ++i) {
        const auto profile = smoothness_profile(problem.device(i));
        for (std::size_t j = 0; j < profile.L_components.size(); ++j) {
          if (config.eso_v[static_cast<std::size_t>(i)][j] < profile.L_components[j] * (1.0 - 1e-12)) {
            warnings.emplace_back("eso_v below the component smoothness on device " + std::to_string(i));
            i = n;
            break;
          }
        }
      }
    }
  }
  return warnings;
}

std::unique_ptr<Engine> make_engine(const MixtureProblem& problem_in, const SolverConfig& config,
                                    const StackedModel& x0, std::optional<ControlVariates> initial) {
  validate_config(problem_in, config, x0);
  const MixtureProblem problem = effective_problem(problem_in, config);
  ControlVariates cv = initial ? std::move(*initial) : ControlVariates::zeros(problem, config.variant);
  check_control_variates(problem, config.variant, cv);
  if (config.variant == Variant::L2SGD_PLUS_EFFICIENT) {
    return detail::make_efficient_engine(problem, config, x0, std::move(cv));
  }
  return std::make_unique<GeneralEngine>(problem, config, x0, std::move(cv));
}

// ---------------------------------------------------------------------------
// Communication accounting

void CommAccountant::observe(bool xi) noexcept {
  if (started_ && xi != prev_) ++transitions_;
  if (xi && !prev_) ++rounds_;
  prev_ = xi;
  started_ = true;
  ++tosses_;
}

double comm_rounds_expected(double p, double k) { return p * (1.0 - p) * k; }

// ---------------------------------------------------------------------------
// Traces

std::optional<TraceRow> RunTrace::first_reaching(double target) const {
  for (const auto& row : rows) {
    if (!std::isnan(row.rel_subopt) && row.rel_subopt <= target) return row;
  }
  return std::nullopt;
}

namespace {

void put_double(std::ostream& out, double v) {
  if (std::isnan(v)) {
    out << "nan";
    return;
  }
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  out << buf;
}

}  // namespace

void write_trace_csv(std::ostream& out, const RunTrace& trace) {
  out << "k,data_passes,comm_rounds,objective,rel_subopt,dist_sq\n";
  for (const auto& r : trace.rows) {
    out << r.k << ',';
    put_double(out, r.data_passes);
    out << ',' << r.comm_rounds << ',';
    put_double(out, r.objective);
    out << ',';
    put_double(out, r.rel_subopt);
    out << ',';
    put_double(out, r.dist_sq);
    out << '\n';
  }
}

// ---------------------------------------------------------------------------
// Runs

RunResult run_solver(const MixtureProblem& problem_in, const StackedModel& x0, const SolverConfig& config,
                     const RunOptions& options) {
  const auto warnings = validate_config(problem_in, config, x0);
  if (!options.quiet) {
    for (const auto& w : warnings) warn(w);
  }
  const MixtureProblem problem = effective_problem(problem_in, config);
  auto engine = make_engine(problem, config, x0, options.initial_control_variates);
  DrawSource draws(problem, config);
  CommAccountant comm;

  const double N = frac_double(problem.total_components());
  std::uint64_t every = options.record_every;
  if (every == 0) {
    every = detail::is_stochastic(config.variant)
                ? std::max<std::uint64_t>(1, problem.total_components() / static_cast<std::uint64_t>(problem.n()))
                : 1;
  }

  const double F0 = objective_value(problem, x0);
  const auto make_row = [&](std::uint64_t k, const StackedModel& x) {
    TraceRow row;
    row.k = k;
    row.data_passes = static_cast<double>(engine->gradient_evaluations()) / N;
    row.comm_rounds = comm.rounds();
    row.objective = objective_value(problem, x);
    if (!std::isfinite(row.objective)) {
      throw NumericError("objective is not finite at iteration " + std::to_string(k));
    }
    row.rel_subopt = std::numeric_limits<double>::quiet_NaN();
    if (options.reference_value) {
      const double gap0 = F0 - *options.reference_value;
      if (k == 0) {
        row.rel_subopt = 1.0;
      } else if (gap0 > 0.0) {
        row.rel_subopt = std::max(0.0, (row.objective - *options.reference_value) / gap0);
      } else {
        row.rel_subopt = 0.0;
      }
    }
    row.dist_sq = options.reference_model ? x.squared_distance(*options.reference_model)
                                          : std::numeric_limits<double>::quiet_NaN();
    return row;
  };

  RunResult result{x0, {}, {}};
  result.trace.rows.push_back(make_row(0, x0));
  std::uint64_t k = 0;
  bool stopped = false;
  while (k < config.max_iters) {
    const StepDraws d = draws.next();
    comm.observe(d.xi);
    engine->step(d);
    ++k;
    if (k % every == 0 || k == config.max_iters) {
      const TraceRow row = make_row(k, engine->iterate());
      result.trace.rows.push_back(row);
      if (options.stop_at_rel_subopt && !std::isnan(row.rel_subopt) && row.rel_subopt <= *options.stop_at_rel_subopt) {
        stopped = true;
        break;
      }
    }
  }
  (void)stopped;
  engine->finish();
  result.x = engine->iterate();
  result.control_variates = engine->control_variates();
  result.trace.coin_count = comm.tosses();
  result.trace.transitions = comm.transitions();
  result.trace.comm_rounds = comm.rounds();
  result.trace.iterations = k;
  return result;
}

namespace {

RunResult run_as(Variant v, const MixtureProblem& problem, const StackedModel& x0, SolverConfig config,
                 const RunOptions& options) {
  config.variant = v;
  return run_solver(problem, x0, config, options);
}

}  // namespace

RunResult l2gd_run(const MixtureProblem& problem, const StackedModel& x0, SolverConfig config, const RunOptions& options) {
  return run_as(Variant::L2GD, problem, x0, std::move(config), options);
}
RunResult l2sgd_plus_run(const MixtureProblem& problem, const StackedModel& x0, SolverConfig config,
                         const RunOptions& options) {
  return run_as(Variant::L2SGD_PLUS, problem, x0, std::move(config), options);
}
RunResult l2sgd_plus_efficient_run(const MixtureProblem& problem, const StackedModel& x0, SolverConfig config,
                                   const RunOptions& options) {
  return run_as(Variant::L2SGD_PLUS_EFFICIENT, problem, x0, std::move(config), options);
}
RunResult vr_local_gd_run(const MixtureProblem& problem, const StackedModel& x0, SolverConfig config,
                          const RunOptions& options) {
  return run_as(Variant::VR_LOCAL_GD, problem, x0, std::move(config), options);
}
RunResult l2sgd_run(const MixtureProblem& problem, const StackedModel& x0, SolverConfig config, const RunOptions& options) {
  return run_as(Variant::L2SGD, problem, x0, std::move(config), options);
}
RunResult l2sgd2_run(const MixtureProblem& problem, const StackedModel& x0, SolverConfig config, const RunOptions& options) {
  return run_as(Variant::L2SGD2, problem, x0, std::move(config), options);
}
RunResult l2sgdpp_run(const MixtureProblem& problem, const StackedModel& x0, SolverConfig config, const RunOptions& options) {
  return run_as(Variant::L2SGDPP, problem, x0, std::move(config), options);
}

StackedModel stochastic_gradient_l2gd(const MixtureProblem& problem, const StackedModel& x, double p, bool xi) {
  if (!(p > 0.0 && p < 1.0)) throw ConfigError("p must lie in (0, 1)");
  if (x.n() != problem.n() || x.d() != problem.d()) throw ConfigError("model has the wrong shape");
  if (xi) return StackedModel(grad_psi(x).blocks() * (problem.lambda() / p));
  Matrix g = local_gradients(problem, x);
  for (Index i = 0; i < problem.n(); ++i) g.col(i) *= problem.weight(i) / (1.0 - p);
  return StackedModel(std::move(g));
}

StackedModel l2gd_step(const StackedModel& x, const MixtureProblem& problem_in, const SolverConfig& config, bool xi) {
  const MixtureProblem problem = effective_problem(problem_in, config);
  if (x.n() != problem.n() || x.d() != problem.d()) throw ConfigError("model has the wrong shape");
  if (!(config.p > 0.0 && config.p < 1.0)) throw ConfigError("p must lie in (0, 1)");
  const double n = static_cast<double>(problem.n());
  Matrix out = x.blocks();
  if (xi) {
    const double c = config.alpha * problem.lambda() / (n * config.p);
    if (c > 0.5) warn("aggregation coefficient alpha*lambda/(n*p) exceeds 1/2");
    const Vector xbar = block_average(x);
    for (Index i = 0; i < problem.n(); ++i) out.col(i) = (1.0 - c) * x.block(i) + c * xbar;
  } else {
    const Matrix g = local_gradients(problem, x);
    for (Index i = 0; i < problem.n(); ++i) {
      out.col(i) -= (config.alpha * problem.weight(i) / (1.0 - config.p)) * g.col(i);
    }
  }
  return StackedModel(std::move(out));
}

std::vector<std::pair<StepDraws, double>> enumerate_step_outcomes(const MixtureProblem& problem_in,
                                                                  const SolverConfig& config) {
  const MixtureProblem problem = effective_problem(problem_in, config);
  const auto n = static_cast<std::size_t>(problem.n());
  std::vector<std::pair<StepDraws, double>> out;
  StepDraws agg;
  agg.xi = true;
  out.emplace_back(agg, config.p);
  const double q = 1.0 - config.p;
  if (!detail::is_stochastic(config.variant)) {
    out.emplace_back(StepDraws{}, q);
    return out;
  }

  const auto sampling = effective_sampling(problem, config);
  std::vector<std::vector<std::pair<Subset, double>>> local_outcomes;
  for (const auto& s : sampling) local_outcomes.push_back(s.enumerate());

  std::vector<std::pair<Subset, double>> participation = {{Subset{}, 1.0}};
  std::vector<double> rho;
  const bool lsvrg = config.variant == Variant::L2SGDPP && config.jacobian_rule == JacobianRule::LSVRG;
  if (config.variant == Variant::L2SGDPP) {
    participation = effective_participation(problem, config).enumerate();
    rho = effective_rho(problem, config);
  } else {
    Subset all(n);
    for (std::size_t i = 0; i < n; ++i) all[i] = i;
    participation = {{all, 1.0}};
  }

  for (const auto& [active_set, p_active] : participation) {
    StepDraws base;
    base.active.assign(n, 0);
    for (std::size_t i : active_set) base.active[i] = 1;
    base.samples.resize(n);
    if (lsvrg) base.refresh.assign(n, 0);
    // Cartesian product over devices of (local outcome, refresh coin).
    std::vector<std::pair<StepDraws, double>> partial = {{base, q * p_active}};
    for (std::size_t i = 0; i < n; ++i) {
      if (!base.active[i]) continue;
      std::vector<std::pair<StepDraws, double>> next;
      for (const auto& [draw, prob] : partial) {
        for (const auto& [subset, ps] : local_outcomes[i]) {
          if (lsvrg) {
            for (int coin = 0; coin < 2; ++coin) {
              StepDraws dd = draw;
              dd.samples[i] = subset;
              dd.refresh[i] = static_cast<char>(coin);
              const double pc = coin ? rho[i] : 1.0 - rho[i];
              if (pc > 0.0) next.emplace_back(std::move(dd), prob * ps * pc);
            }
          } else {
            StepDraws dd = draw;
            dd.samples[i] = subset;
            next.emplace_back(std::move(dd), prob * ps);
          }
        }
      }
      partial = std::move(next);
      if (partial.size() > (1u << 22)) throw ConfigError("too many outcomes to enumerate");
    }
    for (auto& e : partial) out.push_back(std::move(e));
  }
  return out;
}

}  // namespace l2gd
