#pragma once

#include <memory>
#include <optional>

#include "l2gd/solvers.hpp"

namespace l2gd::detail {

/// Gradient table with an incrementally maintained row sum. The sum is
/// recomputed from scratch periodically to bound drift.
class JacobianTable {
 public:
  JacobianTable() = default;
  explicit JacobianTable(Matrix J);

  const Matrix& J() const noexcept { return J_; }
  const Vector& sum() const noexcept { return sum_; }
  Index cols() const noexcept { return J_.cols(); }

  void set_column(Index j, const Eigen::Ref<const Vector>& g);
  void resync();

 private:
  Matrix J_;
  Vector sum_;
  std::uint64_t updates_ = 0;
  std::uint64_t resync_every_ = 64;
};

bool is_stochastic(Variant v) noexcept;
bool uses_jacobian(Variant v) noexcept;
bool uses_psi(Variant v) noexcept;

std::unique_ptr<Engine> make_efficient_engine(const MixtureProblem& problem, const SolverConfig& config,
                                              const StackedModel& x0, ControlVariates cv);

}  // namespace l2gd::detail
