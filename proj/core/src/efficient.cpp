#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "engine_detail.hpp"
#include "l2gd/errors.hpp"

namespace l2gd {

AggregationReplay aggregation_replay(double alpha, double lambda, double p, Index n, std::uint64_t c) {
  const double nd = static_cast<double>(n);
  Eigen::Matrix3d M;
  M << 1.0 - alpha * lambda / (nd * p), alpha * (1.0 / p - 1.0) / nd, -alpha,  //
      lambda, 0.0, 0.0,                                                        //
      0.0, 0.0, 1.0;
  Eigen::Matrix3d result = Eigen::Matrix3d::Identity();
  Eigen::Matrix3d base = M;
  while (c > 0) {
    if (c & 1u) result = result * base;
    base = base * base;
    c >>= 1u;
  }
  AggregationReplay r;
  r.e_from_e = result(0, 0);
  r.e_from_psi = result(0, 1);
  r.e_from_delta = result(0, 2);
  r.psi_from_e = result(1, 0);
  r.psi_from_psi = result(1, 1);
  r.psi_from_delta = result(1, 2);
  return r;
}

namespace detail {

namespace {

// Devices keep their own models and only talk to the master when an
// aggregation block opens (upload x_i and the table drift b_i = J_i 1/(nm))
// and when it closes (download the block length). Between those events the
// master never touches per-device state; each device replays the whole
// block in closed form.
class EfficientEngine final : public Engine {
 public:
  EfficientEngine(const MixtureProblem& problem, const SolverConfig& config, const StackedModel& x0, ControlVariates cv)
      : problem_(problem),
        alpha_(config.alpha),
        p_(config.p),
        lambda_(problem.lambda()),
        x_(x0.blocks()),
        psi_(std::move(cv.psi)),
        grad_(Vector::Zero(problem.d())) {
    for (auto& J : cv.J) jac_.emplace_back(std::move(J));
    Vector psi_sum = Vector::Zero(problem.d());
    double scale = 1.0;
    for (const auto& v : psi_) {
      psi_sum += v;
      scale = std::max(scale, v.lpNorm<Eigen::Infinity>());
    }
    if (psi_sum.lpNorm<Eigen::Infinity>() > 1e-10 * scale * static_cast<double>(psi_.size())) {
      throw ConfigError("efficient l2sgd+ needs penalty control variates that sum to zero");
    }
  }

  void step(const StepDraws& draws) override {
    if (draws.xi) {
      if (!in_block_) open_block();
      ++block_length_;
      return;
    }
    if (in_block_) close_block();
    local(draws);
  }

  StackedModel iterate() const override {
    if (!in_block_) return StackedModel(x_);
    Matrix x = x_;
    std::vector<Vector> psi = psi_;
    replay(x, psi);
    return StackedModel(std::move(x));
  }

  ControlVariates control_variates() const override {
    ControlVariates cv;
    for (const auto& t : jac_) cv.J.push_back(t.J());
    cv.psi = psi_;
    if (in_block_) {
      Matrix x = x_;
      replay(x, cv.psi);
    }
    return cv;
  }

  std::uint64_t gradient_evaluations() const noexcept override { return evals_; }

  std::unique_ptr<Engine> clone() const override { return std::make_unique<EfficientEngine>(*this); }

  void finish() override {
    if (in_block_) close_block();
  }

 private:
  void open_block() {
    const Index n = problem_.n();
    const double nd = static_cast<double>(n);
    Matrix b(problem_.d(), n);
    for (Index i = 0; i < n; ++i) {
      b.col(i) = jac_[static_cast<std::size_t>(i)].sum() / (nd * static_cast<double>(problem_.device(i).m()));
    }
    xbar0_ = block_average(x_);
    bbar_ = block_average(b);
    delta_ = b.colwise() - bbar_;
    in_block_ = true;
    block_length_ = 0;
  }

  void replay(Matrix& x, std::vector<Vector>& psi) const {
    const auto r = aggregation_replay(alpha_, lambda_, p_, problem_.n(), block_length_);
    const Vector center = xbar0_ - static_cast<double>(block_length_) * alpha_ * bbar_;
    for (Index i = 0; i < problem_.n(); ++i) {
      const auto ui = static_cast<std::size_t>(i);
      const Vector e0 = x_.col(i) - xbar0_;
      const Vector psi0 = psi_[ui];
      x.col(i) = center + r.e_from_e * e0 + r.e_from_psi * psi0 + r.e_from_delta * delta_.col(i);
      psi[ui] = r.psi_from_e * e0 + r.psi_from_psi * psi0 + r.psi_from_delta * delta_.col(i);
    }
  }

  void close_block() {
    Matrix x = x_;
    std::vector<Vector> psi = psi_;
    replay(x, psi);
    x_ = std::move(x);
    psi_ = std::move(psi);
    in_block_ = false;
    block_length_ = 0;
  }

  void local(const StepDraws& draws) {
    const Index n = problem_.n();
    const double nd = static_cast<double>(n);
    const double q = 1.0 - p_;
    for (Index i = 0; i < n; ++i) {
      const auto ui = static_cast<std::size_t>(i);
      const DeviceFiniteSum& dev = problem_.device(i);
      const std::size_t j = draws.samples.at(ui).at(0);
      const auto jj = static_cast<Index>(j);
      dev.component_grad_into(j, x_.col(i), grad_);
      ++evals_;
      const double m = static_cast<double>(dev.m());
      const Vector g = (grad_ - jac_[ui].J().col(jj)) / (nd * q) + jac_[ui].sum() / (nd * m) + psi_[ui] / nd;
      jac_[ui].set_column(jj, grad_);
      x_.col(i) -= alpha_ * g;
    }
  }

  MixtureProblem problem_;
  double alpha_;
  double p_;
  double lambda_;
  Matrix x_;
  std::vector<JacobianTable> jac_;
  std::vector<Vector> psi_;
  bool in_block_ = false;
  std::uint64_t block_length_ = 0;
  Vector xbar0_;
  Vector bbar_;
  Matrix delta_;
  std::uint64_t evals_ = 0;
  Vector grad_;
};

}  // namespace

std::unique_ptr<Engine> make_efficient_engine(const MixtureProblem& problem, const SolverConfig& config,
                                              const StackedModel& x0, ControlVariates cv) {
  return std::make_unique<EfficientEngine>(problem, config, x0, std::move(cv));
}

}  // namespace detail

}  // namespace l2gd
