#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <variant>
#include <vector>

#include "l2gd/objective.hpp"
#include "l2gd/solvers.hpp"

namespace l2gd::testing {

inline Vector random_vector(std::mt19937_64& gen, Index d, double scale = 1.0) {
  std::normal_distribution<double> nd(0.0, scale);
  Vector v(d);
  for (Index k = 0; k < d; ++k) v(k) = nd(gen);
  return v;
}

inline StackedModel random_model(std::mt19937_64& gen, Index n, Index d, double scale = 1.0) {
  std::vector<Vector> blocks;
  for (Index i = 0; i < n; ++i) blocks.push_back(random_vector(gen, d, scale));
  return StackedModel::from_blocks(blocks);
}

// Random table entries and zero-sum penalty memory.
inline ControlVariates random_control_variates(std::mt19937_64& gen, const MixtureProblem& problem,
                                               Variant variant) {
  ControlVariates cv = ControlVariates::zeros(problem, variant);
  for (auto& J : cv.J) {
    for (Index c = 0; c < J.cols(); ++c) J.col(c) = random_vector(gen, J.rows());
  }
  if (!cv.psi.empty()) {
    Vector mean = Vector::Zero(problem.d());
    for (auto& v : cv.psi) {
      v = random_vector(gen, problem.d());
      mean += v;
    }
    mean /= static_cast<double>(cv.psi.size());
    for (auto& v : cv.psi) v -= mean;
  }
  return cv;
}

// Hand-written component gradient, independent of DeviceFiniteSum.
inline Vector oracle_component_grad(const Component& c, double ridge, const Vector& z) {
  Vector g = ridge * z;
  if (const auto* lg = std::get_if<LogisticComponent>(&c)) {
    const Vector a = lg->row.to_dense(z.size());
    const double t = lg->label * a.dot(z);
    g += lg->label / (1.0 + std::exp(-t)) * a;
  } else {
    const auto& q = std::get<QuadraticComponent>(c);
    g += q.scale * (z - q.center);
  }
  return g;
}

inline double oracle_component_value(const Component& c, double ridge, const Vector& z) {
  double v = 0.5 * ridge * z.squaredNorm();
  if (const auto* lg = std::get_if<LogisticComponent>(&c)) {
    const double t = lg->label * lg->row.to_dense(z.size()).dot(z);
    v += std::log(1.0 + std::exp(t));
  } else {
    const auto& q = std::get<QuadraticComponent>(c);
    v += 0.5 * q.scale * (z - q.center).squaredNorm();
  }
  return v;
}

inline double oracle_weight(const MixtureProblem& p, Index i) {
  if (p.weighting() == Weighting::DeviceAverage) return 1.0 / static_cast<double>(p.n());
  return static_cast<double>(p.device(i).m()) / static_cast<double>(p.total_components());
}

// F(x) from first principles.
inline double oracle_objective(const MixtureProblem& p, const StackedModel& x) {
  const Index n = p.n();
  Vector xbar = Vector::Zero(p.d());
  for (Index i = 0; i < n; ++i) xbar += x.blocks().col(i);
  xbar /= static_cast<double>(n);
  double f = 0.0, ps = 0.0;
  for (Index i = 0; i < n; ++i) {
    const auto& dev = p.device(i);
    double fi = 0.0;
    for (std::size_t j = 0; j < dev.m(); ++j) fi += oracle_component_value(dev.component(j), dev.ridge(), x.blocks().col(i));
    f += oracle_weight(p, i) * fi / static_cast<double>(dev.m());
    ps += (x.blocks().col(i) - xbar).squaredNorm();
  }
  return f + p.lambda() * ps / (2.0 * static_cast<double>(n));
}

// Smooth gradient from first principles, as a d x n matrix.
inline Matrix oracle_grad(const MixtureProblem& p, const StackedModel& x) {
  const Index n = p.n();
  Vector xbar = Vector::Zero(p.d());
  for (Index i = 0; i < n; ++i) xbar += x.blocks().col(i);
  xbar /= static_cast<double>(n);
  Matrix g(p.d(), n);
  for (Index i = 0; i < n; ++i) {
    const auto& dev = p.device(i);
    const Vector z = x.blocks().col(i);
    Vector gi = Vector::Zero(p.d());
    for (std::size_t j = 0; j < dev.m(); ++j) gi += oracle_component_grad(dev.component(j), dev.ridge(), z);
    gi /= static_cast<double>(dev.m());
    g.col(i) = oracle_weight(p, i) * gi + p.lambda() / static_cast<double>(n) * (z - xbar);
  }
  return g;
}

// Closed form minimizer for f_i = 0.5||z - c_i||^2 under device averaging.
inline StackedModel closed_form_quadratic(const std::vector<Vector>& centers, double lambda) {
  Vector cbar = Vector::Zero(centers.front().size());
  for (const auto& c : centers) cbar += c;
  cbar /= static_cast<double>(centers.size());
  std::vector<Vector> blocks;
  for (const auto& c : centers) blocks.push_back((c + lambda * cbar) / (1.0 + lambda));
  return StackedModel::from_blocks(blocks);
}

// Relative error between the exact expectation of (x - x^+)/alpha over one
// iteration's randomness and the smooth gradient at x.
inline double unbiasedness_error(const MixtureProblem& problem, const SolverConfig& config, const StackedModel& x,
                                 const ControlVariates& cv) {
  const auto engine = make_engine(problem, config, x, cv);
  Matrix expected = Matrix::Zero(problem.d(), problem.n());
  double total = 0.0;
  for (const auto& [draws, prob] : enumerate_step_outcomes(problem, config)) {
    auto e = engine->clone();
    e->step(draws);
    expected += prob * (x.blocks() - e->iterate().blocks()) / config.alpha;
    total += prob;
  }
  const Matrix truth = oracle_grad(config.lambda ? problem.with_lambda(*config.lambda) : problem, x);
  return std::max((expected - truth).norm() / truth.norm(), std::abs(total - 1.0));
}

// Drives two engines with the same draws and returns the largest iterate gap.
inline double shared_randomness_gap(const MixtureProblem& pa, const SolverConfig& ca, const MixtureProblem& pb,
                                    const SolverConfig& cb, const StackedModel& x0, std::uint64_t iters) {
  auto a = make_engine(pa, ca, x0);
  auto b = make_engine(pb, cb, x0);
  DrawSource draws(pa, ca);
  double gap = 0.0;
  for (std::uint64_t k = 0; k < iters; ++k) {
    const auto d = draws.next();
    a->step(d);
    b->step(d);
    gap = std::max(gap, a->iterate().max_abs_difference(b->iterate()));
  }
  return gap;
}

}  // namespace l2gd::testing
