#include "l2gd/local_losses.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "l2gd/errors.hpp"

namespace l2gd {

double SparseRow::dot(const Eigen::Ref<const Vector>& z) const {
  double s = 0.0;
  for (std::size_t k = 0; k < indices.size(); ++k) s += values[k] * z[indices[k]];
  return s;
}

double SparseRow::squared_norm() const {
  double s = 0.0;
  for (double v : values) s += v * v;
  return s;
}

void SparseRow::add_scaled_to(double scale, Eigen::Ref<Vector> out) const {
  for (std::size_t k = 0; k < indices.size(); ++k) out[indices[k]] += scale * values[k];
}

Vector SparseRow::to_dense(Index dim) const {
  Vector v = Vector::Zero(dim);
  add_scaled_to(1.0, v);
  return v;
}

double log1p_exp(double t) noexcept {
  if (t > 0.0) return t + std::log1p(std::exp(-t));
  return std::log1p(std::exp(t));
}

double sigmoid(double t) noexcept {
  if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

namespace {

void validate(Index dim, const std::vector<Component>& components, double ridge) {
  if (dim <= 0) throw ConfigError("device dimension must be positive");
  if (components.empty()) throw ConfigError("device needs at least one component");
  if (!(ridge >= 0.0) || !std::isfinite(ridge)) throw ConfigError("ridge must be finite and >= 0");
  for (std::size_t j = 0; j < components.size(); ++j) {
    const auto where = " (component " + std::to_string(j) + ")";
    if (const auto* lc = std::get_if<LogisticComponent>(&components[j])) {
      if (lc->label != 1.0 && lc->label != -1.0) throw ConfigError("label must be +1 or -1" + where);
      if (lc->row.indices.size() != lc->row.values.size())
        throw ConfigError("sparse row index/value length mismatch" + where);
      Index prev = -1;
      for (std::size_t k = 0; k < lc->row.indices.size(); ++k) {
        const Index idx = lc->row.indices[k];
        if (idx <= prev || idx >= dim) throw ConfigError("sparse row index out of order or range" + where);
        if (!std::isfinite(lc->row.values[k])) throw ConfigError("non-finite feature value" + where);
        prev = idx;
      }
    } else {
      const auto& qc = std::get<QuadraticComponent>(components[j]);
      if (qc.center.size() != dim) throw ConfigError("quadratic center has wrong length" + where);
      if (!qc.center.allFinite()) throw ConfigError("non-finite quadratic center" + where);
      if (!(qc.scale > 0.0) || !std::isfinite(qc.scale)) throw ConfigError("quadratic scale must be > 0" + where);
    }
  }
}

}  // namespace

DeviceFiniteSum::DeviceFiniteSum(Index dim, std::vector<Component> components, double ridge)
    : dim_(dim), components_(std::move(components)), ridge_(ridge) {
  validate(dim_, components_, ridge_);
}

double DeviceFiniteSum::component_value(std::size_t j, const Eigen::Ref<const Vector>& z) const {
  const double ridge_term = 0.5 * ridge_ * z.squaredNorm();
  const Component& c = components_.at(j);
  if (const auto* lc = std::get_if<LogisticComponent>(&c)) {
    return log1p_exp(lc->label * lc->row.dot(z)) + ridge_term;
  }
  const auto& qc = std::get<QuadraticComponent>(c);
  return 0.5 * qc.scale * (z - qc.center).squaredNorm() + ridge_term;
}

void DeviceFiniteSum::component_grad_into(std::size_t j, const Eigen::Ref<const Vector>& z,
                                          Eigen::Ref<Vector> out) const {
  const Component& c = components_.at(j);
  if (const auto* lc = std::get_if<LogisticComponent>(&c)) {
    out = ridge_ * z;
    const double s = lc->label * sigmoid(lc->label * lc->row.dot(z));
    lc->row.add_scaled_to(s, out);
    return;
  }
  const auto& qc = std::get<QuadraticComponent>(c);
  out = qc.scale * (z - qc.center) + ridge_ * z;
}

Vector DeviceFiniteSum::component_grad(std::size_t j, const Eigen::Ref<const Vector>& z) const {
  if (j >= components_.size()) throw ConfigError("component index out of range");
  Vector out(dim_);
  component_grad_into(j, z, out);
  return out;
}

double DeviceFiniteSum::component_smoothness(std::size_t j) const {
  const Component& c = components_.at(j);
  if (const auto* lc = std::get_if<LogisticComponent>(&c)) return lc->row.squared_norm() / 4.0 + ridge_;
  return std::get<QuadraticComponent>(c).scale + ridge_;
}

double DeviceFiniteSum::value(const Eigen::Ref<const Vector>& z) const {
  double s = 0.0;
  for (std::size_t j = 0; j < components_.size(); ++j) {
    const Component& c = components_[j];
    if (const auto* lc = std::get_if<LogisticComponent>(&c)) {
      s += log1p_exp(lc->label * lc->row.dot(z));
    } else {
      const auto& qc = std::get<QuadraticComponent>(c);
      s += 0.5 * qc.scale * (z - qc.center).squaredNorm();
    }
  }
  return s / static_cast<double>(components_.size()) + 0.5 * ridge_ * z.squaredNorm();
}

void DeviceFiniteSum::local_grad_into(const Eigen::Ref<const Vector>& z, Eigen::Ref<Vector> out) const {
  out.setZero();
  for (const Component& c : components_) {
    if (const auto* lc = std::get_if<LogisticComponent>(&c)) {
      lc->row.add_scaled_to(lc->label * sigmoid(lc->label * lc->row.dot(z)), out);
    } else {
      const auto& qc = std::get<QuadraticComponent>(c);
      out += qc.scale * (z - qc.center);
    }
  }
  out /= static_cast<double>(components_.size());
  out += ridge_ * z;
}

Vector DeviceFiniteSum::local_grad(const Eigen::Ref<const Vector>& z) const {
  Vector out(dim_);
  local_grad_into(z, out);
  return out;
}

SmoothnessProfile smoothness_profile(const DeviceFiniteSum& device) {
  SmoothnessProfile prof;
  prof.L_components.reserve(device.m());
  double quad_curvature = 0.0;
  for (std::size_t j = 0; j < device.m(); ++j) {
    prof.L_components.push_back(device.component_smoothness(j));
    if (const auto* qc = std::get_if<QuadraticComponent>(&device.component(j))) quad_curvature += qc->scale;
  }
  prof.L_local = *std::max_element(prof.L_components.begin(), prof.L_components.end());
  prof.mu = device.ridge() + quad_curvature / static_cast<double>(device.m());
  return prof;
}

}  // namespace l2gd
