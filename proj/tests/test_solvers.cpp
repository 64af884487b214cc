#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "l2gd/data_io.hpp"
#include "l2gd/errors.hpp"
#include "l2gd/solvers.hpp"
#include "l2gd/theory.hpp"
#include "support.hpp"

using namespace l2gd;
using namespace l2gd::testing;

namespace l2gd {
void PrintTo(Variant v, std::ostream* os) { *os << to_string(v); }
}  // namespace l2gd

namespace {

SolverConfig config_for(Variant v, double alpha, double p, std::uint64_t seed = 1) {
  SolverConfig c;
  c.variant = v;
  c.alpha = alpha;
  c.p = p;
  c.seed = seed;
  return c;
}

MixtureProblem unequal_problem(double lambda) {
  // devices with m = 1, 2, 3 and component weighting
  std::vector<DeviceFiniteSum> devs;
  std::mt19937_64 gen(12);
  for (std::size_t m = 1; m <= 3; ++m) {
    std::vector<Component> comps;
    for (std::size_t j = 0; j < m; ++j) {
      const Vector a = random_vector(gen, 2);
      SparseRow row{{0, 1}, {a(0), a(1)}};
      comps.push_back(LogisticComponent{row, j % 2 ? 1.0 : -1.0});
    }
    devs.emplace_back(2, std::move(comps), 0.05);
  }
  return MixtureProblem(lambda, devs, {}, Weighting::ComponentAverage);
}

}  // namespace

// ---------------------------------------------------------------------------

TEST(Variants, NamesRoundTrip) {
  for (auto v : all_variants()) EXPECT_EQ(parse_variant(to_string(v)), v);
  EXPECT_EQ(all_variants().size(), 7u);
  EXPECT_EQ(parse_variant("L2SGD_PLUS"), Variant::L2SGD_PLUS);
  EXPECT_EQ(parse_variant("l2sgdpp"), Variant::L2SGDPP);
  EXPECT_EQ(parse_variant("vr_local_gd"), Variant::VR_LOCAL_GD);
  EXPECT_THROW(parse_variant("fedavg"), ConfigError);
  EXPECT_EQ(parse_jacobian_rule("LSVRG"), JacobianRule::LSVRG);
  EXPECT_THROW(parse_jacobian_rule("svrg2"), ConfigError);
}

TEST(ControlVariates, ShapesPerVariant) {
  const auto prob = logistic_toy_problem(3, 2, 4, 1.0, 0.1, 1);
  EXPECT_EQ(ControlVariates::zeros(prob, Variant::L2SGD_PLUS).J[0].cols(), 4);
  EXPECT_EQ(ControlVariates::zeros(prob, Variant::L2SGDPP).J[2].cols(), 4);
  EXPECT_EQ(ControlVariates::zeros(prob, Variant::VR_LOCAL_GD).J[1].cols(), 1);
  EXPECT_EQ(ControlVariates::zeros(prob, Variant::L2SGD).J[0].cols(), 0);
  EXPECT_EQ(ControlVariates::zeros(prob, Variant::L2GD).psi.size(), 3u);
}

TEST(Draws, OutcomesFormDistribution) {
  const auto prob = logistic_toy_problem(2, 2, 3, 1.0, 0.1, 1);
  auto cfg = config_for(Variant::L2SGDPP, 0.1, 0.4);
  cfg.participation = SubsetSampling::independent({0.5, 0.8});
  cfg.sampling = {SubsetSampling::tau_nice(3, 2), SubsetSampling::independent({0.3, 0.6, 1.0})};
  cfg.jacobian_rule = JacobianRule::LSVRG;
  double total = 0.0;
  for (const auto& [d, pr] : enumerate_step_outcomes(prob, cfg)) total += pr;
  EXPECT_NEAR(total, 1.0, 1e-14);
}

TEST(Draws, AggregationStepsConsumeNoSamples) {
  const auto prob = logistic_toy_problem(2, 2, 7, 1.0, 0.1, 1);
  const auto cfg = config_for(Variant::L2SGD_PLUS, 0.1, 0.5, 9);
  DrawSource src(prob, cfg);
  CounterRng dev0(derive_key(9, "device", 0));
  CoinStream coins(9, 0.5);
  for (int k = 0; k < 200; ++k) {
    const auto d = src.next();
    ASSERT_EQ(d.xi, coins.at(static_cast<std::uint64_t>(k)));
    if (d.xi) {
      EXPECT_TRUE(d.samples.empty());
    } else {
      EXPECT_EQ(d.samples[0].at(0), dev0.below(7));
    }
  }
  EXPECT_EQ(src.iteration(), 200u);
}

TEST(Draws, DeterministicVariantsDrawOnlyCoins) {
  const auto prob = logistic_toy_problem(2, 2, 3, 1.0, 0.1, 1);
  DrawSource src(prob, config_for(Variant::VR_LOCAL_GD, 0.1, 0.5));
  for (int k = 0; k < 20; ++k) EXPECT_TRUE(src.next().samples.empty());
}

// ---------------------------------------------------------------------------
// Unbiasedness by exact enumeration

class Unbiased : public ::testing::TestWithParam<Variant> {};

TEST_P(Unbiased, ExpectedDirectionIsGradient) {
  const auto prob = logistic_toy_problem(2, 2, 2, 0.7, 0.05, 3);
  const auto cfg = config_for(GetParam(), 0.05, 0.3);
  std::mt19937_64 gen(static_cast<unsigned>(GetParam()) + 100);
  for (int t = 0; t < 25; ++t) {
    const auto x = random_model(gen, 2, 2);
    const auto cv = random_control_variates(gen, prob, GetParam());
    EXPECT_LE(unbiasedness_error(prob, cfg, x, cv), 1e-11);
  }
}

INSTANTIATE_TEST_SUITE_P(AllVariants, Unbiased, ::testing::ValuesIn(all_variants()),
                         [](const auto& info) {
                           std::string s = to_string(info.param);
                           for (auto& c : s) {
                             if (c == '+') c = 'P';
                             if (c == '-') c = '_';
                           }
                           return s;
                         });

TEST(Unbiased, PartialParticipationMinibatchLsvrg) {
  const auto prob = logistic_toy_problem(2, 2, 3, 1.3, 0.05, 4);
  for (auto rule : {JacobianRule::SAGA, JacobianRule::LSVRG}) {
    auto cfg = config_for(Variant::L2SGDPP, 0.05, 0.6);
    cfg.participation = SubsetSampling::independent({0.5, 0.7});
    cfg.sampling = {SubsetSampling::tau_nice(3, 2), SubsetSampling::independent({0.2, 0.9, 0.5})};
    cfg.jacobian_rule = rule;
    cfg.lsvrg_probs = {0.3, 0.8};
    std::mt19937_64 gen(5);
    for (int t = 0; t < 10; ++t) {
      const auto x = random_model(gen, 2, 2);
      const auto cv = random_control_variates(gen, prob, Variant::L2SGDPP);
      EXPECT_LE(unbiasedness_error(prob, cfg, x, cv), 1e-11);
    }
  }
}

TEST(Unbiased, ComponentWeightingWithUnequalCounts) {
  const auto prob = unequal_problem(0.9);
  std::mt19937_64 gen(6);
  for (auto v : {Variant::L2GD, Variant::VR_LOCAL_GD, Variant::L2SGD, Variant::L2SGD2, Variant::L2SGDPP}) {
    const auto cfg = config_for(v, 0.05, 0.35);
    for (int t = 0; t < 5; ++t) {
      const auto x = random_model(gen, 3, 2);
      EXPECT_LE(unbiasedness_error(prob, cfg, x, random_control_variates(gen, prob, v)), 1e-11) << to_string(v);
    }
  }
}

TEST(Unbiased, L2gdEstimator) {
  const auto prob = logistic_toy_problem(3, 2, 2, 2.0, 0.1, 5);
  std::mt19937_64 gen(7);
  const auto x = random_model(gen, 3, 2);
  const double p = 0.25;
  const Matrix e = (1 - p) * stochastic_gradient_l2gd(prob, x, p, false).blocks() +
                   p * stochastic_gradient_l2gd(prob, x, p, true).blocks();
  EXPECT_LE((e - oracle_grad(prob, x)).norm(), 1e-14);
}

TEST(L2gd, StepMatchesDefinition) {
  const auto prob = quadratic_problem(quadratic_centers(3, 2, 1), 1.5);
  std::mt19937_64 gen(8);
  const auto x = random_model(gen, 3, 2);
  const auto cfg = config_for(Variant::L2GD, 0.2, 0.4);
  const auto local = l2gd_step(x, prob, cfg, false);
  const auto agg = l2gd_step(x, prob, cfg, true);
  const Vector xbar = block_average(x);
  for (Index i = 0; i < 3; ++i) {
    const Vector g = prob.device(i).local_grad(x.block(i));
    EXPECT_LE((local.block(i) - (x.block(i) - 0.2 / (3 * 0.6) * g)).norm(), 1e-15);
    const double c = 0.2 * 1.5 / (3 * 0.4);
    EXPECT_LE((agg.block(i) - ((1 - c) * x.block(i) + c * xbar)).norm(), 1e-15);
  }
}

// ---------------------------------------------------------------------------
// Reductions under shared randomness

TEST(Reductions, PlusPlusToPlus) {
  const auto prob = logistic_toy_problem(2, 2, 2, 0.5, 0.05, 7);
  const StackedModel x0(2, 2);
  EXPECT_LE(shared_randomness_gap(prob, config_for(Variant::L2SGDPP, 0.2, 0.3), prob,
                                  config_for(Variant::L2SGD_PLUS, 0.2, 0.3), x0, 500),
            1e-9);
}

TEST(Reductions, PlusPlusToVrLocalGd) {
  const auto prob = logistic_toy_problem(2, 2, 1, 0.5, 0.05, 7);
  EXPECT_LE(shared_randomness_gap(prob, config_for(Variant::L2SGDPP, 0.2, 0.3), prob,
                                  config_for(Variant::VR_LOCAL_GD, 0.2, 0.3), StackedModel(2, 2), 500),
            1e-9);
}

TEST(Reductions, EfficientMatchesPlus) {
  const auto prob = logistic_toy_problem(3, 2, 4, 0.5, 0.05, 8);
  std::mt19937_64 gen(9);
  const auto x0 = StackedModel::replicate(random_vector(gen, 2), 3);
  for (double p : {0.1, 0.5, 0.9}) {
    EXPECT_LE(shared_randomness_gap(prob, config_for(Variant::L2SGD_PLUS, 0.3, p), prob,
                                    config_for(Variant::L2SGD_PLUS_EFFICIENT, 0.3, p), x0, 500),
              1e-9);
  }
}

TEST(Reductions, EfficientFromRandomState) {
  const auto prob = logistic_toy_problem(2, 3, 3, 1.1, 0.05, 9);
  std::mt19937_64 gen(10);
  const auto x0 = random_model(gen, 2, 3);
  const auto cv = random_control_variates(gen, prob, Variant::L2SGD_PLUS);
  auto a = make_engine(prob, config_for(Variant::L2SGD_PLUS, 0.2, 0.6), x0, cv);
  auto b = make_engine(prob, config_for(Variant::L2SGD_PLUS_EFFICIENT, 0.2, 0.6), x0, cv);
  DrawSource src(prob, config_for(Variant::L2SGD_PLUS, 0.2, 0.6));
  for (int k = 0; k < 300; ++k) {
    const auto d = src.next();
    a->step(d);
    b->step(d);
  }
  b->finish();
  EXPECT_LE(a->iterate().max_abs_difference(b->iterate()), 1e-9);
  const auto ca = a->control_variates();
  const auto cb = b->control_variates();
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_LE((ca.J[i] - cb.J[i]).cwiseAbs().maxCoeff(), 1e-9);
    EXPECT_LE((ca.psi[i] - cb.psi[i]).cwiseAbs().maxCoeff(), 1e-9);
  }
  EXPECT_EQ(a->gradient_evaluations(), b->gradient_evaluations());
}

TEST(Reductions, EfficientRejectsUnbalancedPenaltyMemory) {
  const auto prob = logistic_toy_problem(2, 2, 2, 1.0, 0.05, 1);
  auto cv = ControlVariates::zeros(prob, Variant::L2SGD_PLUS_EFFICIENT);
  cv.psi[0].setConstant(1.0);
  EXPECT_THROW(make_engine(prob, config_for(Variant::L2SGD_PLUS_EFFICIENT, 0.1, 0.5), StackedModel(2, 2), cv),
               ConfigError);
}

TEST(AggregationReplay, MatchesRepeatedMap) {
  const double alpha = 0.3, lambda = 0.8, p = 0.35;
  const Index n = 4;
  const double a = 1 - alpha * lambda / (n * p), beta = alpha * (1 / p - 1) / n;
  for (std::uint64_t c : {0u, 1u, 2u, 5u, 17u}) {
    const auto r = aggregation_replay(alpha, lambda, p, n, c);
    // apply the recurrence to each unit input
    double basis[3][3] = {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
    for (auto& s : basis) {
      double e = s[0], ps = s[1];
      const double delta = s[2];
      for (std::uint64_t k = 0; k < c; ++k) {
        const double e2 = a * e + beta * ps - alpha * delta;
        ps = lambda * e;
        e = e2;
      }
      s[0] = e;
      s[1] = ps;
    }
    EXPECT_NEAR(r.e_from_e, basis[0][0], 1e-13);
    EXPECT_NEAR(r.psi_from_e, basis[0][1], 1e-13);
    EXPECT_NEAR(r.e_from_psi, basis[1][0], 1e-13);
    EXPECT_NEAR(r.psi_from_psi, basis[1][1], 1e-13);
    EXPECT_NEAR(r.e_from_delta, basis[2][0], 1e-13);
    EXPECT_NEAR(r.psi_from_delta, basis[2][1], 1e-13);
  }
}

// ---------------------------------------------------------------------------
// Fixed points

TEST(FixedPoint, OptimumWithOptimalMemoryIsStationary) {
  const auto prob = logistic_toy_problem(3, 2, 3, 0.6, 0.05, 11);
  ReferenceOptions opts;
  opts.tol = 1e-14;
  const auto ref = reference_solution(prob, 0.6, opts);
  for (auto v : {Variant::L2SGD_PLUS, Variant::L2SGD_PLUS_EFFICIENT, Variant::VR_LOCAL_GD, Variant::L2SGDPP}) {
    auto cv = ControlVariates::zeros(prob, v);
    const Vector xbar = block_average(ref.x_star);
    for (Index i = 0; i < 3; ++i) {
      const auto& dev = prob.device(i);
      const auto ui = static_cast<std::size_t>(i);
      if (v == Variant::VR_LOCAL_GD) {
        cv.J[ui].col(0) = dev.local_grad(ref.x_star.block(i));
      } else {
        for (std::size_t j = 0; j < dev.m(); ++j) cv.J[ui].col(static_cast<Index>(j)) = dev.component_grad(j, ref.x_star.block(i));
      }
      cv.psi[ui] = 0.6 * (ref.x_star.block(i) - xbar);
    }
    const auto cfg = config_for(v, 0.3, 0.4);
    const auto engine = make_engine(prob, cfg, ref.x_star, cv);
    for (const auto& [d, pr] : enumerate_step_outcomes(prob, cfg)) {
      auto e = engine->clone();
      e->step(d);
      EXPECT_LE(e->iterate().max_abs_difference(ref.x_star), 1e-12) << to_string(v);
    }
  }
}

TEST(FixedPoint, PlainSgdVariantsMoveAtOptimum) {
  const auto prob = logistic_toy_problem(2, 2, 3, 0.6, 0.05, 11);
  ReferenceOptions opts;
  opts.tol = 1e-14;
  const auto ref = reference_solution(prob, 0.6, opts);
  const auto cfg = config_for(Variant::L2SGD, 0.3, 0.4);
  const auto engine = make_engine(prob, cfg, ref.x_star);
  double moved = 0.0;
  for (const auto& [d, pr] : enumerate_step_outcomes(prob, cfg)) {
    auto e = engine->clone();
    e->step(d);
    moved = std::max(moved, e->iterate().max_abs_difference(ref.x_star));
  }
  EXPECT_GT(moved, 1e-6);
}

// ---------------------------------------------------------------------------
// Communication accounting

TEST(Comm, CountsUploadTransitions) {
  CommAccountant acc;
  for (bool b : {false, true, true, false, true, false, false}) acc.observe(b);
  EXPECT_EQ(acc.rounds(), 2u);
  EXPECT_EQ(acc.transitions(), 4u);
  EXPECT_EQ(acc.tosses(), 7u);
  CommAccountant first;
  first.observe(true);
  first.observe(true);
  EXPECT_EQ(first.rounds(), 1u);
  EXPECT_EQ(first.transitions(), 0u);
  EXPECT_DOUBLE_EQ(comm_rounds_expected(0.2, 1000), 160.0);
}

TEST(Comm, RunTraceAgreesWithCoinStream) {
  const auto prob = quadratic_problem(quadratic_centers(3, 2, 1), 1.0);
  auto cfg = config_for(Variant::L2GD, 0.1, 0.3, 4);
  cfg.max_iters = 1000;
  RunOptions opts;
  opts.quiet = true;
  const auto res = run_solver(prob, StackedModel(3, 2), cfg, opts);
  CommAccountant acc;
  CoinStream coins(4, 0.3);
  for (int k = 0; k < 1000; ++k) acc.observe(coins.next());
  EXPECT_EQ(res.trace.comm_rounds, acc.rounds());
  EXPECT_EQ(res.trace.transitions, acc.transitions());
  EXPECT_EQ(res.trace.coin_count, 1000u);
  EXPECT_EQ(res.trace.rows.back().comm_rounds, acc.rounds());
}

// ---------------------------------------------------------------------------
// Runs

TEST(Run, TraceLayoutAndReproducibility) {
  const auto prob = logistic_toy_problem(3, 2, 5, 0.5, 0.05, 2);
  const auto ref = reference_solution(prob, 0.5);
  auto cfg = config_for(Variant::L2SGD_PLUS, 0.5, 0.3, 7);
  cfg.max_iters = 400;
  RunOptions opts;
  opts.reference_value = ref.F_star;
  opts.reference_model = ref.x_star;
  opts.quiet = true;
  const auto a = run_solver(prob, StackedModel(3, 2), cfg, opts);
  const auto b = run_solver(prob, StackedModel(3, 2), cfg, opts);
  ASSERT_FALSE(a.trace.rows.empty());
  EXPECT_EQ(a.trace.rows.front().k, 0u);
  EXPECT_EQ(a.trace.rows.front().rel_subopt, 1.0);
  EXPECT_EQ(a.trace.rows.back().k, 400u);
  EXPECT_EQ(a.trace.rows[1].k, 5u);  // one pass: N/n iterations
  EXPECT_EQ(a.x.blocks(), b.x.blocks());
  cfg.seed = 8;
  const auto c = run_solver(prob, StackedModel(3, 2), cfg, opts);
  EXPECT_NE(a.x.blocks(), c.x.blocks());
  for (const auto& r : a.trace.rows) {
    EXPECT_GE(r.rel_subopt, 0.0);
    EXPECT_GE(r.dist_sq, 0.0);
  }
}

TEST(Run, DataPassesCountComponentGradients) {
  const auto prob = logistic_toy_problem(2, 2, 4, 0.5, 0.05, 2);
  auto cfg = config_for(Variant::L2GD, 0.1, 0.5, 3);
  cfg.max_iters = 100;
  RunOptions opts;
  opts.quiet = true;
  const auto res = run_solver(prob, StackedModel(2, 2), cfg, opts);
  CoinStream coins(3, 0.5);
  int local = 0;
  for (int k = 0; k < 100; ++k) local += coins.next() ? 0 : 1;
  EXPECT_DOUBLE_EQ(res.trace.rows.back().data_passes, local);
  EXPECT_TRUE(std::isnan(res.trace.rows.back().rel_subopt));
}

TEST(Run, StopsAtTarget) {
  const auto prob = logistic_toy_problem(2, 2, 4, 0.5, 0.05, 2);
  const auto ref = reference_solution(prob, 0.5);
  SolverConfig cfg = config_for(Variant::L2SGD_PLUS, 0.0, 0.3, 2);
  cfg.alpha = *theoretical_alpha(prob, cfg);
  cfg.max_iters = 2'000'000;
  RunOptions opts;
  opts.reference_value = ref.F_star;
  opts.stop_at_rel_subopt = 1e-8;
  opts.record_every = 10;
  const auto res = run_solver(prob, StackedModel(2, 2), cfg, opts);
  const auto hit = res.trace.first_reaching(1e-8);
  ASSERT_TRUE(hit.has_value());
  EXPECT_EQ(hit->k, res.trace.rows.back().k);
  EXPECT_LT(res.trace.iterations, 2'000'000u);
}

TEST(Run, AllVariantsConvergeOnToy) {
  const auto prob = logistic_toy_problem(3, 2, 4, 0.5, 0.1, 5);
  ReferenceOptions ro;
  ro.tol = 1e-13;
  const auto ref = reference_solution(prob, 0.5, ro);
  for (auto v : {Variant::L2SGD_PLUS, Variant::L2SGD_PLUS_EFFICIENT, Variant::VR_LOCAL_GD, Variant::L2SGDPP}) {
    SolverConfig cfg = config_for(v, 0.0, 0.3, 3);
    cfg.alpha = *theoretical_alpha(prob, cfg);
    cfg.max_iters = 200'000;
    RunOptions opts;
    opts.reference_value = ref.F_star;
    opts.stop_at_rel_subopt = 1e-9;
    opts.record_every = 50;
    const auto res = run_solver(prob, StackedModel(3, 2), cfg, opts);
    EXPECT_TRUE(res.trace.first_reaching(1e-9).has_value()) << to_string(v);
  }
}

TEST(Run, PlainL2gdReachesNeighbourhood) {
  const auto prob = logistic_toy_problem(3, 2, 4, 0.5, 0.1, 5);
  ReferenceOptions ro;
  ro.tol = 1e-13;
  const auto ref = reference_solution(prob, 0.5, ro);
  SolverConfig cfg = config_for(Variant::L2GD, 0.0, 0.3, 3);
  cfg.alpha = *theoretical_alpha(prob, cfg);
  cfg.max_iters = 20'000;
  RunOptions opts;
  opts.reference_value = ref.F_star;
  opts.record_every = 50;
  const auto res = run_solver(prob, StackedModel(3, 2), cfg, opts);
  // no variance reduction: stalls at a noise floor
  EXPECT_TRUE(res.trace.first_reaching(1e-2).has_value());
  EXPECT_GT(res.trace.rows.back().rel_subopt, 1e-12);
}

TEST(Run, ProxVariantReachesProxStationarity) {
  const auto base = logistic_toy_problem(2, 3, 4, 0.8, 0.1, 6);
  const MixtureProblem prob(0.8, base.devices(), {L1Regularizer{0.05}, BoxRegularizer{-0.2, 0.2}});
  SolverConfig cfg = config_for(Variant::L2SGDPP, 0.0, 0.4, 2);
  cfg.alpha = *theoretical_alpha(prob, cfg);
  cfg.max_iters = 300'000;
  RunOptions opts;
  opts.quiet = true;
  const auto res = run_solver(prob, StackedModel(2, 3), cfg, opts);
  // x = prox(x - t grad) at the composite minimizer
  const double t = 0.1;
  const auto g = grad_F(prob, res.x);
  double residual = 0.0;
  for (Index i = 0; i < 2; ++i) {
    const Vector z = res.x.block(i) - t * g.block(i);
    residual += (res.x.block(i) - regularizer_prox(prob.regularizer(i), z, t)).squaredNorm();
  }
  EXPECT_LE(std::sqrt(residual) / t, 1e-7);
  for (Index k = 0; k < 3; ++k) EXPECT_LE(std::abs(res.x.block(1)(k)), 0.2 + 1e-15);
}

TEST(Run, CsvFormat) {
  RunTrace t;
  t.rows.push_back({0, 0.0, 0, 0.5, 1.0, std::nan("")});
  t.rows.push_back({3, 1.5, 2, 0.1, 1.0 / 3.0, 2.0});
  std::ostringstream out;
  write_trace_csv(out, t);
  EXPECT_EQ(out.str(),
            "k,data_passes,comm_rounds,objective,rel_subopt,dist_sq\n"
            "0,0,0,0.5,1,nan\n"
            "3,1.5,2,0.10000000000000001,0.33333333333333331,2\n");
}

TEST(Run, DivergenceIsNumericError) {
  const auto prob = logistic_toy_problem(2, 2, 2, 100.0, 0.1, 1);
  auto cfg = config_for(Variant::L2GD, 50.0, 0.5, 1);
  cfg.max_iters = 2000;
  RunOptions opts;
  opts.quiet = true;
  EXPECT_THROW(run_solver(prob, StackedModel(2, 2), cfg, opts), NumericError);
}

TEST(Validation, RejectsBadConfigurations) {
  const auto prob = logistic_toy_problem(2, 2, 2, 1.0, 0.1, 1);
  const StackedModel x0(2, 2);
  EXPECT_THROW(validate_config(prob, config_for(Variant::L2GD, 0.0, 0.5), x0), ConfigError);
  EXPECT_THROW(validate_config(prob, config_for(Variant::L2GD, 0.1, 1.0), x0), ConfigError);
  EXPECT_THROW(validate_config(prob, config_for(Variant::L2GD, 0.1, 0.5), StackedModel(3, 2)), ConfigError);
  const MixtureProblem reg(1.0, prob.devices(), {L1Regularizer{0.1}, ZeroRegularizer{}});
  EXPECT_THROW(validate_config(reg, config_for(Variant::L2SGD_PLUS, 0.1, 0.5), x0), ConfigError);
  EXPECT_NO_THROW(validate_config(reg, config_for(Variant::L2SGDPP, 0.1, 0.5), x0));
  const auto uneq = unequal_problem(1.0);
  EXPECT_THROW(validate_config(uneq, config_for(Variant::L2SGD_PLUS, 0.1, 0.5), StackedModel(3, 2)), ConfigError);
  EXPECT_THROW(validate_config(uneq, config_for(Variant::L2SGD_PLUS_EFFICIENT, 0.1, 0.5), StackedModel(3, 2)),
               ConfigError);
  auto pp = config_for(Variant::L2SGDPP, 0.1, 0.5);
  pp.lsvrg_probs = {0.5};
  EXPECT_THROW(validate_config(prob, pp, x0), ConfigError);
}

TEST(Validation, Warnings) {
  const auto prob = logistic_toy_problem(2, 2, 2, 1.0, 0.1, 1);
  std::mt19937_64 gen(1);
  const auto w1 = validate_config(prob, config_for(Variant::L2GD, 0.01, 0.5), random_model(gen, 2, 2));
  ASSERT_EQ(w1.size(), 1u);
  EXPECT_NE(w1[0].find("not identical"), std::string::npos);
  const auto w2 = validate_config(prob, config_for(Variant::L2GD, 5.0, 0.5), StackedModel(2, 2));
  bool coef = false, above = false;
  for (const auto& w : w2) {
    coef |= w.find("exceeds 1/2") != std::string::npos;
    above |= w.find("theoretical") != std::string::npos;
  }
  EXPECT_TRUE(coef);
  EXPECT_TRUE(above);
}
