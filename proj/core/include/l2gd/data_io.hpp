#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "l2gd/local_losses.hpp"
#include "l2gd/objective.hpp"

namespace l2gd {

/// N labelled sparse rows; labels are exactly +1 or -1.
struct LabeledDataset {
  std::vector<SparseRow> rows;
  std::vector<double> labels;
  Index dim = 0;

  std::size_t size() const noexcept { return rows.size(); }
  /// Content hash (rows, labels, dim); stable across platforms.
  std::uint64_t fingerprint() const;
};

/// Parses "<label> <idx>:<val> ..." lines with strictly increasing 1-based
/// indices. Labels 0/1 are mapped to -1/+1. Throws DataError with the
/// offending line number.
LabeledDataset parse_libsvm(std::istream& in);
LabeledDataset load_libsvm(const std::filesystem::path& path);
void write_libsvm(std::ostream& out, const LabeledDataset& ds);

struct NormalizeReport {
  std::vector<std::size_t> zero_rows;
};

/// Scales every nonzero row to norm 2*sqrt(target_smoothness) so that the
/// logistic curvature bound ||a||^2/4 equals target_smoothness. Zero rows
/// pass through unchanged and are listed in the report.
LabeledDataset normalize_rows(const LabeledDataset& ds, double target_smoothness = 1.0,
                              NormalizeReport* report = nullptr);

enum class SplitMode { Homogeneous, Heterogeneous };

SplitMode parse_split_mode(const std::string& text);
std::string to_string(SplitMode mode);

/// Equal-size assignment of row indices to devices.
struct Partition {
  Index n = 0;
  std::size_t m = 0;
  std::vector<std::vector<std::size_t>> assignment;
  std::size_t dropped = 0;
};

/// Homogeneous: seeded Fisher-Yates shuffle, then contiguous chunks of
/// m = floor(N/n). Heterogeneous: stable sort by label (-1 first), then
/// chunks. Trailing rows beyond n*m are dropped (and reported via warn()).
Partition split(const LabeledDataset& ds, Index n, SplitMode mode, std::uint64_t seed);

/// One line per retained row: "device_id<TAB>row_index".
void write_manifest(std::ostream& out, const Partition& partition);

/// Logistic devices with ridge mu folded into every component.
std::vector<DeviceFiniteSum> build_logistic_devices(const LabeledDataset& ds, const Partition& partition,
                                                    double ridge);

/// Synthetic stand-in for the LibSVM a1a file: 1605 rows, 123 binary
/// one-hot features in 14 attribute groups, 395 positive labels. Rows are
/// not normalized.
LabeledDataset a1a_surrogate(std::uint64_t seed = 1);

/// Centers c_i for the quadratic generator, one per device (entries in [-1, 1]
/// plus a per-device offset so devices differ).
std::vector<Vector> quadratic_centers(Index n, Index d, std::uint64_t seed);

/// Devices f_i(z) = (1/2)||z - c_i||^2 (one component, scale 1, no ridge).
MixtureProblem quadratic_problem(const std::vector<Vector>& centers, double lambda);

/// Devices with m quadratic components each, scales in [0.5, 1.5] and a
/// ridge; used by toy finite-sum tests.
MixtureProblem quadratic_finite_sum_problem(Index n, Index d, std::size_t m, double lambda,
                                            double ridge, std::uint64_t seed);

/// Small logistic instance with dense random rows; used by toy tests.
MixtureProblem logistic_toy_problem(Index n, Index d, std::size_t m, double lambda, double ridge,
                                    std::uint64_t seed);

}  // namespace l2gd
