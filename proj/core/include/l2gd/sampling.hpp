#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "l2gd/rng.hpp"

namespace l2gd {

using Subset = std::vector<std::size_t>;

/// A distribution over subsets of {0, ..., size-1}. Used both for local
/// minibatch sampling (S_i) and for device participation (S).
class SubsetSampling {
 public:
  enum class Kind { UniformSingle, TauNice, Independent, Full, Explicit };

  static SubsetSampling uniform_single(std::size_t size);
  static SubsetSampling tau_nice(std::size_t size, std::size_t tau);
  static SubsetSampling independent(std::vector<double> probabilities);
  static SubsetSampling full(std::size_t size);
  /// Subsets must be sorted and duplicate-free; probabilities must sum to 1.
  static SubsetSampling explicit_subsets(std::size_t size, std::vector<std::pair<Subset, double>> outcomes);

  Kind kind() const noexcept { return kind_; }
  std::size_t size() const noexcept { return size_; }
  /// P(j in S) for each j; all lie in (0, 1].
  const std::vector<double>& marginals() const noexcept { return marginals_; }
  std::size_t tau() const noexcept { return tau_; }
  /// Largest subset that can be drawn.
  std::size_t max_subset_size() const;

  /// Sorted subset. Full sampling consumes no randomness.
  Subset draw(CounterRng& rng) const;
  /// Every outcome with its probability (exact; throws ConfigError if the
  /// support has more than 2^20 outcomes).
  std::vector<std::pair<Subset, double>> enumerate() const;

  /// Conservative ESO constants v_j for scalar component smoothness L_j:
  /// uniform single -> L_j, tau-nice -> tau L_j, independent ->
  /// L_j (1 - q_j + sum q), full/explicit -> (max subset size) L_j.
  std::vector<double> eso_default(const std::vector<double>& component_smoothness) const;

 private:
  SubsetSampling(Kind kind, std::size_t size) : kind_(kind), size_(size) {}
  void finalize();

  Kind kind_;
  std::size_t size_;
  std::size_t tau_ = 1;
  std::vector<double> probabilities_;  // Independent
  std::vector<std::pair<Subset, double>> outcomes_;  // Explicit
  std::vector<double> cumulative_;  // Explicit
  std::vector<double> marginals_;
};

}  // namespace l2gd
