#include "l2gd/objective.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "l2gd/errors.hpp"

namespace l2gd {

StackedModel::StackedModel(Index n, Index d) : blocks_(Matrix::Zero(d, n)) {
  if (n <= 0 || d <= 0) throw ConfigError("stacked model needs n >= 1 and d >= 1");
}

StackedModel::StackedModel(Matrix blocks) : blocks_(std::move(blocks)) {
  if (blocks_.rows() <= 0 || blocks_.cols() <= 0) throw ConfigError("stacked model needs n >= 1 and d >= 1");
  if (!blocks_.allFinite()) throw NumericError("stacked model has non-finite entries");
}

StackedModel StackedModel::replicate(const Eigen::Ref<const Vector>& v, Index n) {
  if (n <= 0) throw ConfigError("stacked model needs n >= 1");
  return StackedModel(Matrix(v.replicate(1, n)));
}

StackedModel StackedModel::from_blocks(const std::vector<Vector>& blocks) {
  if (blocks.empty()) throw ConfigError("stacked model needs n >= 1");
  const Index d = blocks.front().size();
  Matrix m(d, static_cast<Index>(blocks.size()));
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    if (blocks[i].size() != d) throw ConfigError("blocks must share one dimension");
    m.col(static_cast<Index>(i)) = blocks[i];
  }
  return StackedModel(std::move(m));
}

StackedModel StackedModel::from_flat(Index n, Index d, const Eigen::Ref<const Vector>& flat) {
  if (flat.size() != n * d) throw ConfigError("flat vector length is not n*d");
  return StackedModel(Matrix(Eigen::Map<const Matrix>(flat.data(), d, n)));
}

Vector StackedModel::flat() const { return Eigen::Map<const Vector>(blocks_.data(), blocks_.size()); }

double StackedModel::squared_distance(const StackedModel& other) const {
  if (other.n() != n() || other.d() != d()) throw ConfigError("stacked model shape mismatch");
  return (blocks_ - other.blocks_).squaredNorm();
}

double StackedModel::max_abs_difference(const StackedModel& other) const {
  if (other.n() != n() || other.d() != d()) throw ConfigError("stacked model shape mismatch");
  return (blocks_ - other.blocks_).cwiseAbs().maxCoeff();
}

double regularizer_value(const Regularizer& r, const Eigen::Ref<const Vector>& z) {
  if (std::holds_alternative<ZeroRegularizer>(r)) return 0.0;
  if (const auto* l1 = std::get_if<L1Regularizer>(&r)) return l1->weight * z.lpNorm<1>();
  if (const auto* l2 = std::get_if<SquaredL2Regularizer>(&r)) return 0.5 * l2->weight * z.squaredNorm();
  const auto& box = std::get<BoxRegularizer>(r);
  for (Index k = 0; k < z.size(); ++k) {
    if (z[k] < box.lower || z[k] > box.upper) return std::numeric_limits<double>::infinity();
  }
  return 0.0;
}

Vector regularizer_prox(const Regularizer& r, const Eigen::Ref<const Vector>& z, double step) {
  if (std::holds_alternative<ZeroRegularizer>(r)) return z;
  if (const auto* l1 = std::get_if<L1Regularizer>(&r)) {
    const double t = step * l1->weight;
    Vector out(z.size());
    for (Index k = 0; k < z.size(); ++k) {
      const double a = std::abs(z[k]) - t;
      out[k] = a > 0.0 ? std::copysign(a, z[k]) : 0.0;
    }
    return out;
  }
  if (const auto* l2 = std::get_if<SquaredL2Regularizer>(&r)) return z / (1.0 + step * l2->weight);
  const auto& box = std::get<BoxRegularizer>(r);
  return z.cwiseMax(box.lower).cwiseMin(box.upper);
}

bool is_zero(const Regularizer& r) noexcept { return std::holds_alternative<ZeroRegularizer>(r); }

namespace {

void validate_regularizer(const Regularizer& r) {
  if (const auto* l1 = std::get_if<L1Regularizer>(&r)) {
    if (!(l1->weight >= 0.0) || !std::isfinite(l1->weight)) throw ConfigError("L1 weight must be >= 0");
  } else if (const auto* l2 = std::get_if<SquaredL2Regularizer>(&r)) {
    if (!(l2->weight >= 0.0) || !std::isfinite(l2->weight)) throw ConfigError("L2 weight must be >= 0");
  } else if (const auto* box = std::get_if<BoxRegularizer>(&r)) {
    if (!(box->lower <= box->upper)) throw ConfigError("box bounds must satisfy lower <= upper");
  }
}

}  // namespace

MixtureProblem::MixtureProblem(double lambda, std::vector<DeviceFiniteSum> devices,
                               std::vector<Regularizer> regularizers, Weighting weighting)
    : lambda_(lambda), weighting_(weighting) {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw ConfigError("lambda must be finite and >= 0");
  if (devices.empty()) throw ConfigError("mixture problem needs at least one device");
  const Index d = devices.front().dim();
  for (const auto& dev : devices) {
    if (dev.dim() != d) throw ConfigError("all devices must share the model dimension");
    total_components_ += dev.m();
  }
  if (regularizers.empty()) regularizers.assign(devices.size(), ZeroRegularizer{});
  if (regularizers.size() != devices.size()) throw ConfigError("need one regularizer per device");
  for (const auto& r : regularizers) validate_regularizer(r);
  regularizers_ = std::move(regularizers);
  devices_ = std::make_shared<const std::vector<DeviceFiniteSum>>(std::move(devices));
}

double MixtureProblem::weight(Index i) const {
  if (weighting_ == Weighting::DeviceAverage) return 1.0 / static_cast<double>(n());
  return static_cast<double>(device(i).m()) / static_cast<double>(total_components_);
}

bool MixtureProblem::has_regularizers() const noexcept {
  for (const auto& r : regularizers_) {
    if (!is_zero(r)) return true;
  }
  return false;
}

bool MixtureProblem::equal_component_counts() const noexcept {
  for (const auto& dev : *devices_) {
    if (dev.m() != devices_->front().m()) return false;
  }
  return true;
}

MixtureProblem MixtureProblem::with_lambda(double lambda) const {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw ConfigError("lambda must be finite and >= 0");
  MixtureProblem copy = *this;
  copy.lambda_ = lambda;
  return copy;
}

MixtureProblem MixtureProblem::with_weighting(Weighting weighting) const {
  MixtureProblem copy = *this;
  copy.weighting_ = weighting;
  return copy;
}

Vector block_average(const Matrix& blocks) {
  Vector avg = Vector::Zero(blocks.rows());
  for (Index i = 0; i < blocks.cols(); ++i) avg += blocks.col(i);
  return avg / static_cast<double>(blocks.cols());
}

Vector block_average(const StackedModel& x) { return block_average(x.blocks()); }

double psi(const StackedModel& x) {
  const Vector avg = block_average(x);
  double s = 0.0;
  for (Index i = 0; i < x.n(); ++i) s += (x.block(i) - avg).squaredNorm();
  return s / (2.0 * static_cast<double>(x.n()));
}

StackedModel grad_psi(const StackedModel& x) {
  const Vector avg = block_average(x);
  Matrix g = x.blocks();
  g.colwise() -= avg;
  return StackedModel(Matrix(g / static_cast<double>(x.n())));
}

Matrix psi_hessian_dense(Index n, Index d) {
  if (n <= 0 || d <= 0) throw ConfigError("psi_hessian_dense needs n, d >= 1");
  if (n * d > 10000) throw ConfigError("psi_hessian_dense is limited to n*d <= 10^4");
  const double inv_n = 1.0 / static_cast<double>(n);
  Matrix h = Matrix::Zero(n * d, n * d);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < n; ++j) {
      const double c = inv_n * ((i == j ? 1.0 : 0.0) - inv_n);
      for (Index k = 0; k < d; ++k) h(i * d + k, j * d + k) = c;
    }
  }
  return h;
}

namespace {

void check_shape(const MixtureProblem& problem, const StackedModel& x) {
  if (x.n() != problem.n() || x.d() != problem.d()) {
    throw ConfigError("model shape (" + std::to_string(x.n()) + "x" + std::to_string(x.d()) +
                      ") does not match problem (" + std::to_string(problem.n()) + "x" +
                      std::to_string(problem.d()) + ")");
  }
}

}  // namespace

double loss_value(const MixtureProblem& problem, const StackedModel& x) {
  check_shape(problem, x);
  double s = 0.0;
  for (Index i = 0; i < x.n(); ++i) s += problem.weight(i) * problem.device(i).value(x.block(i));
  return s;
}

double smooth_value(const MixtureProblem& problem, const StackedModel& x) {
  return loss_value(problem, x) + problem.lambda() * psi(x);
}

double objective_value(const MixtureProblem& problem, const StackedModel& x) {
  double value = smooth_value(problem, x);
  for (Index i = 0; i < x.n(); ++i) value += regularizer_value(problem.regularizer(i), x.block(i));
  return value;
}

Matrix local_gradients(const MixtureProblem& problem, const StackedModel& x) {
  check_shape(problem, x);
  Matrix g(x.d(), x.n());
  for (Index i = 0; i < x.n(); ++i) problem.device(i).local_grad_into(x.block(i), g.col(i));
  return g;
}

StackedModel grad_F(const MixtureProblem& problem, const StackedModel& x) {
  Matrix g = local_gradients(problem, x);
  const Vector avg = block_average(x);
  const double c = problem.lambda() / static_cast<double>(x.n());
  for (Index i = 0; i < x.n(); ++i) g.col(i) = problem.weight(i) * g.col(i) + c * (x.block(i) - avg);
  return StackedModel(std::move(g));
}

}  // namespace l2gd
