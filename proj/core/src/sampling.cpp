#include "l2gd/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "l2gd/errors.hpp"

namespace l2gd {

SubsetSampling SubsetSampling::uniform_single(std::size_t size) {
  if (size == 0) throw ConfigError("sampling over an empty set");
  SubsetSampling s(Kind::UniformSingle, size);
  s.finalize();
  return s;
}

SubsetSampling SubsetSampling::tau_nice(std::size_t size, std::size_t tau) {
  if (size == 0) throw ConfigError("sampling over an empty set");
  if (tau == 0 || tau > size) throw ConfigError("tau-nice sampling needs 1 <= tau <= size");
  SubsetSampling s(Kind::TauNice, size);
  s.tau_ = tau;
  s.finalize();
  return s;
}

SubsetSampling SubsetSampling::independent(std::vector<double> probabilities) {
  if (probabilities.empty()) throw ConfigError("sampling over an empty set");
  for (double q : probabilities) {
    if (!(q > 0.0 && q <= 1.0)) throw ConfigError("invalid sampling distribution: marginal not in (0,1]");
  }
  SubsetSampling s(Kind::Independent, probabilities.size());
  s.probabilities_ = std::move(probabilities);
  s.finalize();
  return s;
}

SubsetSampling SubsetSampling::full(std::size_t size) {
  if (size == 0) throw ConfigError("sampling over an empty set");
  SubsetSampling s(Kind::Full, size);
  s.tau_ = size;
  s.finalize();
  return s;
}

SubsetSampling SubsetSampling::explicit_subsets(std::size_t size, std::vector<std::pair<Subset, double>> outcomes) {
  if (size == 0) throw ConfigError("sampling over an empty set");
  if (outcomes.empty()) throw ConfigError("explicit sampling needs at least one outcome");
  double total = 0.0;
  for (const auto& [subset, prob] : outcomes) {
    if (!(prob >= 0.0)) throw ConfigError("invalid sampling distribution: negative probability");
    for (std::size_t k = 0; k < subset.size(); ++k) {
      if (subset[k] >= size || (k > 0 && subset[k] <= subset[k - 1])) {
        throw ConfigError("explicit subsets must be sorted, unique and in range");
      }
    }
    total += prob;
  }
  if (std::abs(total - 1.0) > 1e-12) throw ConfigError("invalid sampling distribution: probabilities do not sum to 1");
  SubsetSampling s(Kind::Explicit, size);
  s.outcomes_ = std::move(outcomes);
  s.finalize();
  return s;
}

void SubsetSampling::finalize() {
  marginals_.assign(size_, 0.0);
  switch (kind_) {
    case Kind::UniformSingle:
      std::fill(marginals_.begin(), marginals_.end(), 1.0 / static_cast<double>(size_));
      break;
    case Kind::TauNice:
      std::fill(marginals_.begin(), marginals_.end(), static_cast<double>(tau_) / static_cast<double>(size_));
      break;
    case Kind::Independent:
      marginals_ = probabilities_;
      break;
    case Kind::Full:
      std::fill(marginals_.begin(), marginals_.end(), 1.0);
      break;
    case Kind::Explicit: {
      double acc = 0.0;
      for (const auto& [subset, prob] : outcomes_) {
        for (std::size_t j : subset) marginals_[j] += prob;
        acc += prob;
        cumulative_.push_back(acc);
      }
      tau_ = max_subset_size();
      break;
    }
  }
  for (double q : marginals_) {
    if (!(q > 0.0 && q <= 1.0 + 1e-12)) throw ConfigError("invalid sampling distribution: marginal not in (0,1]");
  }
}

std::size_t SubsetSampling::max_subset_size() const {
  switch (kind_) {
    case Kind::UniformSingle:
      return 1;
    case Kind::TauNice:
    case Kind::Full:
      return tau_;
    case Kind::Independent:
      return size_;
    case Kind::Explicit: {
      std::size_t mx = 0;
      for (const auto& o : outcomes_) mx = std::max(mx, o.first.size());
      return mx;
    }
  }
  return size_;
}

Subset SubsetSampling::draw(CounterRng& rng) const {
  switch (kind_) {
    case Kind::UniformSingle:
      return {static_cast<std::size_t>(rng.below(size_))};
    case Kind::TauNice: {
      // Partial Fisher-Yates over the index set.
      Subset pool(size_);
      std::iota(pool.begin(), pool.end(), std::size_t{0});
      for (std::size_t t = 0; t < tau_; ++t) {
        const auto j = t + static_cast<std::size_t>(rng.below(size_ - t));
        std::swap(pool[t], pool[j]);
      }
      pool.resize(tau_);
      std::sort(pool.begin(), pool.end());
      return pool;
    }
    case Kind::Independent: {
      Subset out;
      for (std::size_t j = 0; j < size_; ++j) {
        if (rng.bernoulli(probabilities_[j])) out.push_back(j);
      }
      return out;
    }
    case Kind::Full: {
      Subset out(size_);
      std::iota(out.begin(), out.end(), std::size_t{0});
      return out;
    }
    case Kind::Explicit: {
      const double u = rng.uniform() * cumulative_.back();
      auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
      if (it == cumulative_.end()) --it;
      return outcomes_[static_cast<std::size_t>(it - cumulative_.begin())].first;
    }
  }
  return {};
}

namespace {

void combinations(std::size_t size, std::size_t tau, std::size_t start, Subset& current,
                  std::vector<Subset>& out) {
  if (current.size() == tau) {
    out.push_back(current);
    return;
  }
  for (std::size_t j = start; j < size; ++j) {
    current.push_back(j);
    combinations(size, tau, j + 1, current, out);
    current.pop_back();
  }
}

}  // namespace

std::vector<std::pair<Subset, double>> SubsetSampling::enumerate() const {
  std::vector<std::pair<Subset, double>> out;
  switch (kind_) {
    case Kind::UniformSingle:
      for (std::size_t j = 0; j < size_; ++j) out.push_back({{j}, 1.0 / static_cast<double>(size_)});
      break;
    case Kind::TauNice: {
      double count = 1.0;
      for (std::size_t t = 0; t < tau_; ++t) {
        count = count * static_cast<double>(size_ - t) / static_cast<double>(t + 1);
      }
      if (count > double(1 << 20)) throw ConfigError("sampling support too large to enumerate");
      std::vector<Subset> subsets;
      Subset current;
      combinations(size_, tau_, 0, current, subsets);
      for (auto& s : subsets) out.push_back({std::move(s), 1.0 / static_cast<double>(subsets.size())});
      break;
    }
    case Kind::Independent: {
      if (size_ > 20) throw ConfigError("sampling support too large to enumerate");
      for (std::size_t mask = 0; mask < (std::size_t{1} << size_); ++mask) {
        Subset s;
        double prob = 1.0;
        for (std::size_t j = 0; j < size_; ++j) {
          if (mask & (std::size_t{1} << j)) {
            s.push_back(j);
            prob *= probabilities_[j];
          } else {
            prob *= 1.0 - probabilities_[j];
          }
        }
        if (prob > 0.0) out.push_back({std::move(s), prob});
      }
      break;
    }
    case Kind::Full: {
      Subset s(size_);
      std::iota(s.begin(), s.end(), std::size_t{0});
      out.push_back({std::move(s), 1.0});
      break;
    }
    case Kind::Explicit:
      for (const auto& o : outcomes_) {
        if (o.second > 0.0) out.push_back(o);
      }
      break;
  }
  return out;
}

std::vector<double> SubsetSampling::eso_default(const std::vector<double>& component_smoothness) const {
  if (component_smoothness.size() != size_) throw ConfigError("ESO: smoothness vector has wrong length");
  std::vector<double> v(size_);
  const double sum_q = std::accumulate(marginals_.begin(), marginals_.end(), 0.0);
  for (std::size_t j = 0; j < size_; ++j) {
    double factor = 1.0;
    switch (kind_) {
      case Kind::UniformSingle:
        factor = 1.0;
        break;
      case Kind::TauNice:
      case Kind::Full:
      case Kind::Explicit:
        factor = static_cast<double>(max_subset_size());
        break;
      case Kind::Independent:
        factor = 1.0 - marginals_[j] + sum_q;
        break;
    }
    v[j] = factor * component_smoothness[j];
  }
  return v;
}

}  // namespace l2gd
