#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <variant>
#include <vector>

namespace l2gd {

using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// Sparse vector with strictly increasing 0-based indices.
struct SparseRow {
  std::vector<Index> indices;
  std::vector<double> values;

  std::size_t nnz() const noexcept { return indices.size(); }
  double dot(const Eigen::Ref<const Vector>& z) const;
  double squared_norm() const;
  /// out += scale * row
  void add_scaled_to(double scale, Eigen::Ref<Vector> out) const;
  Vector to_dense(Index dim) const;
};

/// log(1 + exp(b * a.z)) as printed, plus the device ridge.
struct LogisticComponent {
  SparseRow row;
  double label = 1.0;  // +1 or -1
};

/// (scale/2)||z - center||^2 plus the device ridge.
struct QuadraticComponent {
  Vector center;
  double scale = 1.0;
};

using Component = std::variant<LogisticComponent, QuadraticComponent>;

/// Stable log(1 + e^t).
double log1p_exp(double t) noexcept;
/// Stable 1 / (1 + e^-t).
double sigmoid(double t) noexcept;

/// f_i(z) = (1/m) sum_j f_ij(z), with the ridge (mu/2)||z||^2 folded into
/// every component so that the components are themselves strongly convex.
class DeviceFiniteSum {
 public:
  DeviceFiniteSum(Index dim, std::vector<Component> components, double ridge);

  Index dim() const noexcept { return dim_; }
  std::size_t m() const noexcept { return components_.size(); }
  double ridge() const noexcept { return ridge_; }
  const Component& component(std::size_t j) const { return components_.at(j); }
  const std::vector<Component>& components() const noexcept { return components_; }

  double component_value(std::size_t j, const Eigen::Ref<const Vector>& z) const;
  Vector component_grad(std::size_t j, const Eigen::Ref<const Vector>& z) const;
  /// out = grad f_ij(z); out must already have size dim().
  void component_grad_into(std::size_t j, const Eigen::Ref<const Vector>& z,
                           Eigen::Ref<Vector> out) const;
  /// Curvature bound of component j (||a||^2/4 + mu or s + mu).
  double component_smoothness(std::size_t j) const;

  double value(const Eigen::Ref<const Vector>& z) const;
  Vector local_grad(const Eigen::Ref<const Vector>& z) const;
  void local_grad_into(const Eigen::Ref<const Vector>& z, Eigen::Ref<Vector> out) const;

 private:
  Index dim_;
  std::vector<Component> components_;
  double ridge_;
};

struct SmoothnessProfile {
  std::vector<double> L_components;  // L_ij
  double L_local = 0.0;              // max_j L_ij
  double mu = 0.0;                   // strong convexity of f_i
};

/// mu is the ridge plus the mean quadratic curvature, which is an exact
/// lower bound on the Hessian of f_i; logistic terms contribute nothing.
SmoothnessProfile smoothness_profile(const DeviceFiniteSum& device);

}  // namespace l2gd
