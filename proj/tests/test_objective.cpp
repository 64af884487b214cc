#include <gtest/gtest.h>

#include <random>

#include "l2gd/data_io.hpp"
#include "l2gd/errors.hpp"
#include "l2gd/objective.hpp"
#include "support.hpp"

using namespace l2gd;
using namespace l2gd::testing;

TEST(StackedModel, LayoutsAgree) {
  Vector flat(6);
  flat << 1, 2, 3, 4, 5, 6;
  const auto x = StackedModel::from_flat(2, 3, flat);
  EXPECT_EQ(x.n(), 2);
  EXPECT_EQ(x.d(), 3);
  EXPECT_DOUBLE_EQ(x.block(1)(0), 4.0);
  EXPECT_EQ(x.flat(), flat);
  const auto r = StackedModel::replicate(Vector::Constant(3, 2.0), 4);
  EXPECT_DOUBLE_EQ(r.squared_norm(), 48.0);
  EXPECT_DOUBLE_EQ(r.max_abs_difference(StackedModel(4, 3)), 2.0);
  EXPECT_DOUBLE_EQ(r.squared_distance(StackedModel(4, 3)), 48.0);
}

TEST(Penalty, MatchesDefinitionAndHessian) {
  std::mt19937_64 gen(4);
  const auto x = random_model(gen, 4, 3);
  const Vector xbar = block_average(x);
  double expect = 0.0;
  for (Index i = 0; i < 4; ++i) expect += (x.block(i) - xbar).squaredNorm();
  EXPECT_NEAR(psi(x), expect / 8.0, 1e-14);
  // psi is quadratic: gradient is H x and psi = 0.5 x^T H x
  const Matrix H = psi_hessian_dense(4, 3);
  const Vector hx = H * x.flat();
  EXPECT_LE((grad_psi(x).flat() - hx).norm(), 1e-13);
  EXPECT_NEAR(0.5 * x.flat().dot(hx), psi(x), 1e-13);
  EXPECT_NEAR(psi(StackedModel::replicate(xbar, 4)), 0.0, 1e-15);
  EXPECT_THROW(psi_hessian_dense(200, 100), ConfigError);
}

TEST(Objective, MatchesFirstPrinciples) {
  const auto prob = logistic_toy_problem(3, 4, 5, 0.7, 1e-2, 9);
  std::mt19937_64 gen(5);
  for (int t = 0; t < 10; ++t) {
    const auto x = random_model(gen, 3, 4);
    EXPECT_NEAR(objective_value(prob, x), oracle_objective(prob, x), 1e-12);
    EXPECT_NEAR(smooth_value(prob, x), oracle_objective(prob, x), 1e-12);
    EXPECT_LE((grad_F(prob, x).blocks() - oracle_grad(prob, x)).norm(), 1e-12);
    EXPECT_NEAR(loss_value(prob, x), oracle_objective(prob.with_lambda(0.0), x), 1e-12);
  }
}

TEST(Objective, GradientMatchesFiniteDifferences) {
  const auto prob = quadratic_finite_sum_problem(3, 2, 4, 2.5, 0.1, 3);
  std::mt19937_64 gen(6);
  const auto x = random_model(gen, 3, 2);
  const Vector g = grad_F(prob, x).flat();
  const Vector flat = x.flat();
  const double h = 1e-6;
  for (Index k = 0; k < flat.size(); ++k) {
    Vector p = flat, m = flat;
    p(k) += h;
    m(k) -= h;
    const double fd = (objective_value(prob, StackedModel::from_flat(3, 2, p)) -
                       objective_value(prob, StackedModel::from_flat(3, 2, m))) / (2 * h);
    EXPECT_NEAR(g(k), fd, 1e-7);
  }
}

TEST(Objective, ComponentWeighting) {
  std::vector<DeviceFiniteSum> devs;
  devs.emplace_back(1, std::vector<Component>{QuadraticComponent{Vector::Constant(1, 1.0), 1.0}}, 0.0);
  devs.emplace_back(1,
                    std::vector<Component>{QuadraticComponent{Vector::Constant(1, -1.0), 1.0},
                                           QuadraticComponent{Vector::Constant(1, -1.0), 1.0},
                                           QuadraticComponent{Vector::Constant(1, -1.0), 1.0}},
                    0.0);
  const MixtureProblem dev_avg(0.0, devs);
  const auto comp_avg = dev_avg.with_weighting(Weighting::ComponentAverage);
  EXPECT_DOUBLE_EQ(dev_avg.weight(1), 0.5);
  EXPECT_DOUBLE_EQ(comp_avg.weight(1), 0.75);
  EXPECT_EQ(comp_avg.total_components(), 4u);
  EXPECT_FALSE(comp_avg.equal_component_counts());
  StackedModel x(2, 1);
  EXPECT_NEAR(objective_value(comp_avg, x), oracle_objective(comp_avg, x), 1e-15);
  EXPECT_LE((grad_F(comp_avg, x).blocks() - oracle_grad(comp_avg, x)).norm(), 1e-15);
}

TEST(Objective, LocalGradientsAreUnweighted) {
  const auto prob = quadratic_finite_sum_problem(2, 3, 2, 1.0, 0.0, 1);
  std::mt19937_64 gen(7);
  const auto x = random_model(gen, 2, 3);
  const Matrix G = local_gradients(prob, x);
  for (Index i = 0; i < 2; ++i) EXPECT_LE((G.col(i) - prob.device(i).local_grad(x.block(i))).norm(), 1e-15);
}

TEST(Objective, WithLambdaKeepsData) {
  const auto prob = logistic_toy_problem(2, 2, 3, 1.0, 0.1, 2);
  const auto other = prob.with_lambda(5.0);
  EXPECT_EQ(other.lambda(), 5.0);
  EXPECT_EQ(&prob.devices(), &other.devices());
}

TEST(Regularizer, ProxClosedForms) {
  Vector z(3);
  z << 2.0, -0.3, 0.5;
  const Vector l1 = regularizer_prox(L1Regularizer{1.0}, z, 0.5);
  EXPECT_DOUBLE_EQ(l1(0), 1.5);
  EXPECT_DOUBLE_EQ(l1(1), 0.0);
  EXPECT_DOUBLE_EQ(l1(2), 0.0);
  const Vector l2 = regularizer_prox(SquaredL2Regularizer{2.0}, z, 0.5);
  EXPECT_DOUBLE_EQ(l2(0), 1.0);
  const Vector box = regularizer_prox(BoxRegularizer{-0.1, 1.0}, z, 3.0);
  EXPECT_DOUBLE_EQ(box(0), 1.0);
  EXPECT_DOUBLE_EQ(box(1), -0.1);
  EXPECT_DOUBLE_EQ(box(2), 0.5);
  EXPECT_EQ(regularizer_prox(ZeroRegularizer{}, z, 1.0), z);
  EXPECT_TRUE(is_zero(Regularizer{}));
  EXPECT_FALSE(is_zero(L1Regularizer{0.1}));
  EXPECT_DOUBLE_EQ(regularizer_value(L1Regularizer{2.0}, z), 5.6);
}

TEST(Regularizer, ProxMinimizesItsModel) {
  // prox_{tR}(z) minimizes R(u) + ||u - z||^2 / (2t); compare against perturbations
  std::mt19937_64 gen(8);
  const Regularizer rs[] = {L1Regularizer{0.7}, SquaredL2Regularizer{1.3}, BoxRegularizer{-0.5, 0.5}};
  for (const auto& r : rs) {
    const Vector z = random_vector(gen, 4);
    const double t = 0.6;
    const Vector u = regularizer_prox(r, z, t);
    const auto model = [&](const Vector& v) { return regularizer_value(r, v) + (v - z).squaredNorm() / (2 * t); };
    for (int k = 0; k < 50; ++k) {
      Vector v = u + random_vector(gen, 4, 0.05);
      if (std::holds_alternative<BoxRegularizer>(r)) v = v.cwiseMax(-0.5).cwiseMin(0.5);
      EXPECT_LE(model(u), model(v) + 1e-12);
    }
  }
}

TEST(Objective, RegularizerEntersObjective) {
  auto base = quadratic_finite_sum_problem(2, 2, 1, 1.0, 0.0, 4);
  const MixtureProblem prob(1.0, base.devices(), {L1Regularizer{1.0}, ZeroRegularizer{}});
  EXPECT_TRUE(prob.has_regularizers());
  const auto x = StackedModel::replicate(Vector::Constant(2, 1.0), 2);
  EXPECT_NEAR(objective_value(prob, x) - smooth_value(prob, x), 2.0, 1e-14);
}
