#include "l2gd/data_io.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <string_view>

#include "l2gd/errors.hpp"
#include "l2gd/log.hpp"
#include "l2gd/rng.hpp"

namespace l2gd {

std::uint64_t LabeledDataset::fingerprint() const {
  std::uint64_t h = mix64(static_cast<std::uint64_t>(dim));
  auto feed = [&h](std::uint64_t v) { h = mix64(h ^ v); };
  for (std::size_t r = 0; r < rows.size(); ++r) {
    feed(std::bit_cast<std::uint64_t>(labels[r]));
    for (std::size_t k = 0; k < rows[r].nnz(); ++k) {
      feed(static_cast<std::uint64_t>(rows[r].indices[k]));
      feed(std::bit_cast<std::uint64_t>(rows[r].values[k]));
    }
    feed(0xFFFFFFFFFFFFFFFFULL);
  }
  return h;
}

namespace {

[[noreturn]] void parse_fail(std::size_t line_no, const std::string& what) {
  throw DataError("libsvm line " + std::to_string(line_no) + ": " + what);
}

double parse_number(std::string_view tok, std::size_t line_no, const char* what) {
  if (!tok.empty() && tok.front() == '+') tok.remove_prefix(1);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || ptr != tok.data() + tok.size() || !std::isfinite(v)) {
    parse_fail(line_no, std::string("bad ") + what + " '" + std::string(tok) + "'");
  }
  return v;
}

}  // namespace

LabeledDataset parse_libsvm(std::istream& in) {
  LabeledDataset ds;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream tokens(line);
    std::string tok;
    if (!(tokens >> tok)) continue;  // blank line

    const double raw = parse_number(tok, line_no, "label");
    double label = 0.0;
    if (raw == 1.0) {
      label = 1.0;
    } else if (raw == -1.0 || raw == 0.0) {
      label = -1.0;
    } else {
      parse_fail(line_no, "label must be -1, 0 or 1, got '" + tok + "'");
    }

    SparseRow row;
    long long prev = 0;
    while (tokens >> tok) {
      const auto colon = tok.find(':');
      if (colon == std::string::npos || colon == 0 || colon + 1 == tok.size()) {
        parse_fail(line_no, "expected <index>:<value>, got '" + tok + "'");
      }
      long long idx = 0;
      const std::string_view idx_text(tok.data(), colon);
      const auto [ptr, ec] = std::from_chars(idx_text.data(), idx_text.data() + idx_text.size(), idx);
      if (ec != std::errc() || ptr != idx_text.data() + idx_text.size() || idx < 1) {
        parse_fail(line_no, "bad feature index '" + std::string(idx_text) + "'");
      }
      if (idx <= prev) parse_fail(line_no, "feature indices must be strictly increasing");
      prev = idx;
      const double v = parse_number(std::string_view(tok).substr(colon + 1), line_no, "feature value");
      row.indices.push_back(static_cast<Index>(idx - 1));
      row.values.push_back(v);
    }
    ds.dim = std::max<Index>(ds.dim, static_cast<Index>(prev));
    ds.rows.push_back(std::move(row));
    ds.labels.push_back(label);
  }
  if (ds.rows.empty()) throw DataError("no data");
  if (ds.dim == 0) ds.dim = 1;
  return ds;
}

LabeledDataset load_libsvm(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open dataset '" + path.string() + "'");
  return parse_libsvm(in);
}

void write_libsvm(std::ostream& out, const LabeledDataset& ds) {
  std::ostringstream line;
  line << std::setprecision(17);
  for (std::size_t r = 0; r < ds.size(); ++r) {
    line.str("");
    line << (ds.labels[r] > 0 ? "+1" : "-1");
    for (std::size_t k = 0; k < ds.rows[r].nnz(); ++k) {
      line << ' ' << ds.rows[r].indices[k] + 1 << ':' << ds.rows[r].values[k];
    }
    out << line.str() << '\n';
  }
}

LabeledDataset normalize_rows(const LabeledDataset& ds, double target_smoothness, NormalizeReport* report) {
  if (!(target_smoothness > 0.0)) throw ConfigError("target smoothness must be positive");
  const double target_norm = 2.0 * std::sqrt(target_smoothness);
  LabeledDataset out = ds;
  for (std::size_t r = 0; r < out.size(); ++r) {
    const double norm = std::sqrt(out.rows[r].squared_norm());
    if (norm == 0.0) {
      if (report) report->zero_rows.push_back(r);
      continue;
    }
    const double s = target_norm / norm;
    for (double& v : out.rows[r].values) v *= s;
  }
  return out;
}

SplitMode parse_split_mode(const std::string& text) {
  if (text == "homogeneous" || text == "homo") return SplitMode::Homogeneous;
  if (text == "heterogeneous" || text == "hetero") return SplitMode::Heterogeneous;
  throw ConfigError("unknown split mode '" + text + "' (expected homogeneous|heterogeneous)");
}

std::string to_string(SplitMode mode) {
  return mode == SplitMode::Homogeneous ? "homogeneous" : "heterogeneous";
}

Partition split(const LabeledDataset& ds, Index n, SplitMode mode, std::uint64_t seed) {
  const std::size_t total = ds.size();
  if (n < 1) throw ConfigError("device count must be >= 1");
  if (static_cast<std::size_t>(n) > total) {
    throw ConfigError("device count " + std::to_string(n) + " exceeds dataset size " + std::to_string(total));
  }
  std::vector<std::size_t> order(total);
  std::iota(order.begin(), order.end(), std::size_t{0});
  if (mode == SplitMode::Homogeneous) {
    CounterRng rng(derive_key(seed, "split"));
    for (std::size_t i = total - 1; i > 0; --i) {
      const auto j = static_cast<std::size_t>(rng.below(i + 1));
      std::swap(order[i], order[j]);
    }
  } else {
    std::stable_sort(order.begin(), order.end(),
                     [&ds](std::size_t a, std::size_t b) { return ds.labels[a] < ds.labels[b]; });
  }
  Partition part;
  part.n = n;
  part.m = total / static_cast<std::size_t>(n);
  part.dropped = total - part.m * static_cast<std::size_t>(n);
  part.assignment.resize(static_cast<std::size_t>(n));
  for (std::size_t i = 0; i < part.assignment.size(); ++i) {
    part.assignment[i].assign(order.begin() + static_cast<std::ptrdiff_t>(i * part.m),
                              order.begin() + static_cast<std::ptrdiff_t>((i + 1) * part.m));
  }
  if (part.dropped > 0) {
    warn("split dropped " + std::to_string(part.dropped) + " trailing rows (N mod n)");
  }
  return part;
}

void write_manifest(std::ostream& out, const Partition& partition) {
  for (std::size_t i = 0; i < partition.assignment.size(); ++i) {
    for (std::size_t r : partition.assignment[i]) out << i << '\t' << r << '\n';
  }
}

std::vector<DeviceFiniteSum> build_logistic_devices(const LabeledDataset& ds, const Partition& partition,
                                                    double ridge) {
  std::vector<DeviceFiniteSum> devices;
  devices.reserve(partition.assignment.size());
  for (const auto& rows : partition.assignment) {
    std::vector<Component> comps;
    comps.reserve(rows.size());
    for (std::size_t r : rows) comps.emplace_back(LogisticComponent{ds.rows.at(r), ds.labels.at(r)});
    devices.emplace_back(ds.dim, std::move(comps), ridge);
  }
  return devices;
}

namespace {

double standard_normal(CounterRng& rng) {
  // Box-Muller on two uniforms; the first uniform is shifted away from 0.
  const double u1 = (static_cast<double>(rng.next_u64() >> 11) + 0.5) * 0x1.0p-53;
  const double u2 = rng.uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
}

}  // namespace

LabeledDataset a1a_surrogate(std::uint64_t seed) {
  // Attribute groups of the Adult census features after one-hot encoding.
  constexpr std::array<int, 14> kGroups{5, 8, 5, 16, 5, 7, 14, 6, 5, 2, 2, 2, 5, 41};
  constexpr std::array<bool, 14> kMaybeMissing{false, true,  false, false, false, false, true,
                                               false, false, false, false, false, false, true};
  constexpr std::size_t kRows = 1605;
  constexpr std::size_t kPositives = 395;

  CounterRng rng(derive_key(seed, "a1a-surrogate"));
  std::vector<Index> group_start(kGroups.size());
  std::vector<std::vector<double>> cumulative(kGroups.size());
  Index dim = 0;
  for (std::size_t g = 0; g < kGroups.size(); ++g) {
    group_start[g] = dim;
    dim += kGroups[g];
    // Skewed category frequencies with a shuffled rank order per group.
    std::vector<double> w(static_cast<std::size_t>(kGroups[g]));
    for (std::size_t k = 0; k < w.size(); ++k) w[k] = 1.0 / std::pow(static_cast<double>(k) + 1.0, 1.3);
    for (std::size_t k = w.size() - 1; k > 0; --k) std::swap(w[k], w[static_cast<std::size_t>(rng.below(k + 1))]);
    std::partial_sum(w.begin(), w.end(), w.begin());
    for (double& v : w) v /= w.back();
    cumulative[g] = std::move(w);
  }

  Vector planted(dim);
  for (Index k = 0; k < dim; ++k) planted[k] = 1.2 * standard_normal(rng);

  LabeledDataset ds;
  ds.dim = dim;
  std::vector<double> score(kRows);
  for (std::size_t r = 0; r < kRows; ++r) {
    SparseRow row;
    double s = 0.0;
    for (std::size_t g = 0; g < kGroups.size(); ++g) {
      if (kMaybeMissing[g] && rng.uniform() < 0.03) continue;
      const double u = rng.uniform();
      const auto& cum = cumulative[g];
      const auto pos = static_cast<Index>(std::upper_bound(cum.begin(), cum.end(), u) - cum.begin());
      const Index idx = group_start[g] + std::min<Index>(pos, kGroups[g] - 1);
      row.indices.push_back(idx);
      row.values.push_back(1.0);
      s += planted[idx];
    }
    const double v = std::clamp(rng.uniform(), 1e-12, 1.0 - 1e-12);
    score[r] = s + std::log(v / (1.0 - v));  // logistic noise
    ds.rows.push_back(std::move(row));
  }
  std::vector<std::size_t> rank(kRows);
  std::iota(rank.begin(), rank.end(), std::size_t{0});
  std::stable_sort(rank.begin(), rank.end(), [&score](std::size_t a, std::size_t b) { return score[a] > score[b]; });
  ds.labels.assign(kRows, -1.0);
  for (std::size_t k = 0; k < kPositives; ++k) ds.labels[rank[k]] = 1.0;
  return ds;
}

std::vector<Vector> quadratic_centers(Index n, Index d, std::uint64_t seed) {
  CounterRng rng(derive_key(seed, "quadratic-centers"));
  std::vector<Vector> centers;
  centers.reserve(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    Vector c(d);
    const double offset = 2.0 * rng.uniform() - 1.0;
    for (Index k = 0; k < d; ++k) c[k] = offset + (2.0 * rng.uniform() - 1.0);
    centers.push_back(std::move(c));
  }
  return centers;
}

MixtureProblem quadratic_problem(const std::vector<Vector>& centers, double lambda) {
  if (centers.empty()) throw ConfigError("quadratic problem needs at least one center");
  std::vector<DeviceFiniteSum> devices;
  devices.reserve(centers.size());
  for (const auto& c : centers) {
    devices.emplace_back(c.size(), std::vector<Component>{QuadraticComponent{c, 1.0}}, 0.0);
  }
  return MixtureProblem(lambda, std::move(devices));
}

MixtureProblem quadratic_finite_sum_problem(Index n, Index d, std::size_t m, double lambda, double ridge,
                                            std::uint64_t seed) {
  CounterRng rng(derive_key(seed, "quadratic-finite-sum"));
  std::vector<DeviceFiniteSum> devices;
  for (Index i = 0; i < n; ++i) {
    std::vector<Component> comps;
    const double offset = 2.0 * rng.uniform() - 1.0;
    for (std::size_t j = 0; j < m; ++j) {
      Vector c(d);
      for (Index k = 0; k < d; ++k) c[k] = offset + (2.0 * rng.uniform() - 1.0);
      comps.emplace_back(QuadraticComponent{std::move(c), 0.5 + rng.uniform()});
    }
    devices.emplace_back(d, std::move(comps), ridge);
  }
  return MixtureProblem(lambda, std::move(devices));
}

MixtureProblem logistic_toy_problem(Index n, Index d, std::size_t m, double lambda, double ridge,
                                    std::uint64_t seed) {
  CounterRng rng(derive_key(seed, "logistic-toy"));
  std::vector<DeviceFiniteSum> devices;
  for (Index i = 0; i < n; ++i) {
    std::vector<Component> comps;
    for (std::size_t j = 0; j < m; ++j) {
      SparseRow row;
      for (Index k = 0; k < d; ++k) {
        row.indices.push_back(k);
        row.values.push_back(2.0 * rng.uniform() - 1.0 + 0.3 * static_cast<double>(i));
      }
      comps.emplace_back(LogisticComponent{std::move(row), rng.uniform() < 0.5 ? -1.0 : 1.0});
    }
    devices.emplace_back(d, std::move(comps), ridge);
  }
  return MixtureProblem(lambda, std::move(devices));
}

}  // namespace l2gd
