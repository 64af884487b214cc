#pragma once

#include <Eigen/Dense>
#include <memory>
#include <variant>
#include <vector>

#include "l2gd/local_losses.hpp"

namespace l2gd {

using Matrix = Eigen::MatrixXd;

/// n device models of dimension d, stored as the columns of a d x n matrix
/// (block i is contiguous). All entries are finite.
class StackedModel {
 public:
  StackedModel(Index n, Index d);  // zeros
  explicit StackedModel(Matrix blocks);

  static StackedModel replicate(const Eigen::Ref<const Vector>& v, Index n);
  static StackedModel from_blocks(const std::vector<Vector>& blocks);
  /// Flat layout is block-major: entry (i, k) sits at i * d + k.
  static StackedModel from_flat(Index n, Index d, const Eigen::Ref<const Vector>& flat);

  Index n() const noexcept { return blocks_.cols(); }
  Index d() const noexcept { return blocks_.rows(); }
  const Matrix& blocks() const noexcept { return blocks_; }
  Matrix::ConstColXpr block(Index i) const { return blocks_.col(i); }
  Vector flat() const;

  double squared_norm() const { return blocks_.squaredNorm(); }
  double squared_distance(const StackedModel& other) const;
  double max_abs_difference(const StackedModel& other) const;

 private:
  Matrix blocks_;
};

/// Proximable per-device regularizer R_i. Defaults to zero (identity prox).
struct ZeroRegularizer {};
struct L1Regularizer {
  double weight = 0.0;
};
struct SquaredL2Regularizer {
  double weight = 0.0;  // (weight/2)||z||^2
};
struct BoxRegularizer {
  double lower = 0.0;
  double upper = 0.0;
};
using Regularizer = std::variant<ZeroRegularizer, L1Regularizer, SquaredL2Regularizer, BoxRegularizer>;

double regularizer_value(const Regularizer& r, const Eigen::Ref<const Vector>& z);
/// prox_{step * R}(z)
Vector regularizer_prox(const Regularizer& r, const Eigen::Ref<const Vector>& z, double step);
bool is_zero(const Regularizer& r) noexcept;

/// How the device losses are averaged into f.
enum class Weighting {
  DeviceAverage,     // f(x) = (1/n) sum_i f_i(x_i)
  ComponentAverage,  // f(x) = (1/N) sum_i m_i f_i(x_i), N = sum_i m_i
};

/// F(x) = f(x) + lambda * psi(x) + sum_i R_i(x_i).
class MixtureProblem {
 public:
  MixtureProblem(double lambda, std::vector<DeviceFiniteSum> devices,
                 std::vector<Regularizer> regularizers = {},
                 Weighting weighting = Weighting::DeviceAverage);

  double lambda() const noexcept { return lambda_; }
  Index n() const noexcept { return static_cast<Index>(devices_->size()); }
  Index d() const noexcept { return devices_->front().dim(); }
  std::size_t total_components() const noexcept { return total_components_; }
  Weighting weighting() const noexcept { return weighting_; }
  /// w_i with f(x) = sum_i w_i f_i(x_i).
  double weight(Index i) const;

  const DeviceFiniteSum& device(Index i) const { return devices_->at(static_cast<std::size_t>(i)); }
  const std::vector<DeviceFiniteSum>& devices() const noexcept { return *devices_; }
  const Regularizer& regularizer(Index i) const { return regularizers_.at(static_cast<std::size_t>(i)); }
  bool has_regularizers() const noexcept;
  bool equal_component_counts() const noexcept;

  /// Same data, different penalty; the device table is shared.
  MixtureProblem with_lambda(double lambda) const;
  MixtureProblem with_weighting(Weighting weighting) const;

 private:
  double lambda_;
  std::shared_ptr<const std::vector<DeviceFiniteSum>> devices_;
  std::vector<Regularizer> regularizers_;
  Weighting weighting_;
  std::size_t total_components_ = 0;
};

Vector block_average(const StackedModel& x);
Vector block_average(const Matrix& blocks);

double psi(const StackedModel& x);
StackedModel grad_psi(const StackedModel& x);

/// Dense (nd x nd) Hessian (1/n)(I_n - ee^T/n) kron I_d. Test scale only:
/// throws ConfigError when n*d > 10^4.
Matrix psi_hessian_dense(Index n, Index d);

/// f(x) alone.
double loss_value(const MixtureProblem& problem, const StackedModel& x);
/// f(x) + lambda psi(x) + R(x).
double objective_value(const MixtureProblem& problem, const StackedModel& x);
/// f(x) + lambda psi(x).
double smooth_value(const MixtureProblem& problem, const StackedModel& x);
/// Gradient of the smooth part: w_i grad f_i(x_i) + (lambda/n)(x_i - xbar).
StackedModel grad_F(const MixtureProblem& problem, const StackedModel& x);
/// Unweighted local gradients grad f_i(x_i) as the columns of a d x n matrix.
Matrix local_gradients(const MixtureProblem& problem, const StackedModel& x);

}  // namespace l2gd
