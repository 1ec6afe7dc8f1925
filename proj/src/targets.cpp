#include "pxmc/targets.hpp"

#include <cmath>
#include <numbers>

namespace pxmc {

Mog25::Mog25(double component_variance, Eigen::Vector2d offset) : variance_(component_variance) {
  if (!(component_variance > 0.0)) throw ConfigError("component variance must be positive");
  for (int i = -2; i <= 2; ++i)
    for (int j = -2; j <= 2; ++j) means_.push_back(offset + Eigen::Vector2d(2.0 * i, 2.0 * j));
}

double Mog25::log_prob(const Eigen::Vector2d& p) const {
  const std::size_t k = means_.size();
  Eigen::VectorXd terms(static_cast<Eigen::Index>(k));
  for (std::size_t i = 0; i < k; ++i)
    terms(static_cast<Eigen::Index>(i)) = -(p - means_[i]).squaredNorm() / (2.0 * variance_);
  const double peak = terms.maxCoeff();
  const double lse = peak + std::log((terms.array() - peak).exp().sum());
  return lse - std::log(static_cast<double>(k)) - std::log(2.0 * std::numbers::pi * variance_);
}

Eigen::Vector2d Mog25::grad_log_prob(const Eigen::Vector2d& p) const {
  const std::size_t k = means_.size();
  Eigen::VectorXd terms(static_cast<Eigen::Index>(k));
  for (std::size_t i = 0; i < k; ++i)
    terms(static_cast<Eigen::Index>(i)) = -(p - means_[i]).squaredNorm() / (2.0 * variance_);
  const Eigen::VectorXd weights = (terms.array() - terms.maxCoeff()).exp();
  Eigen::Vector2d g = Eigen::Vector2d::Zero();
  for (std::size_t i = 0; i < k; ++i) g += weights(static_cast<Eigen::Index>(i)) * (means_[i] - p);
  return g / (weights.sum() * variance_);
}

namespace {

Eigen::Matrix2d factor(const Eigen::VectorXd& position, int index) {
  return Eigen::Map<const Eigen::Matrix2d>(position.data() + 4 * index);
}

}  // namespace

Eigen::Vector2d ProductTarget::emit(const Eigen::VectorXd& position) {
  if (position.size() != kDim) throw ShapeError("product target position must have 14 coordinates");
  return factor(position, 2) * factor(position, 1) * factor(position, 0) * position.tail<2>();
}

Eigen::VectorXd ProductTarget::identity_position(const Eigen::Vector2d& x) {
  Eigen::VectorXd pos(kDim);
  for (int f = 0; f < 3; ++f) Eigen::Map<Eigen::Matrix2d>(pos.data() + 4 * f).setIdentity();
  pos.tail<2>() = x;
  return pos;
}

double ProductTarget::potential(const Eigen::VectorXd& position) const { return -base_.log_prob(emit(position)); }

Eigen::VectorXd ProductTarget::potential_grad(const Eigen::VectorXd& position) const {
  const Eigen::Matrix2d w1 = factor(position, 0), w2 = factor(position, 1), w3 = factor(position, 2);
  const Eigen::Vector2d x = position.tail<2>();
  const Eigen::Vector2d h1 = w1 * x, h2 = w2 * h1;
  const Eigen::Vector2d gy = -base_.grad_log_prob(w3 * h2);

  Eigen::VectorXd g(kDim);
  const Eigen::Vector2d g2 = w3.transpose() * gy;  // dU/dh2
  const Eigen::Vector2d g1 = w2.transpose() * g2;  // dU/dh1
  Eigen::Map<Eigen::Matrix2d>(g.data() + 8) = gy * h2.transpose();
  Eigen::Map<Eigen::Matrix2d>(g.data() + 4) = g2 * h1.transpose();
  Eigen::Map<Eigen::Matrix2d>(g.data()) = g1 * x.transpose();
  g.tail<2>() = w1.transpose() * g1;
  return g;
}

int mode_coverage(const std::vector<Eigen::Vector2d>& samples, const std::vector<Eigen::Vector2d>& means,
                  double radius) {
  if (!(radius > 0.0)) throw ConfigError("coverage radius must be positive");
  int covered = 0;
  for (const auto& mu : means) {
    for (const auto& s : samples) {
      if ((s - mu).norm() <= radius) {
        ++covered;
        break;
      }
    }
  }
  return covered;
}

MogResult run_mog(const MogSettings& settings, std::uint64_t seed) {
  const Mog25 mog(settings.component_variance);
  const ProductTarget product(mog);
  const RngStream root(seed);
  RngStream start_rng = root.split(1);
  MogResult result;
  result.start.x() = -5.0 + 10.0 * start_rng.uniform();
  result.start.y() = -5.0 + 10.0 * start_rng.uniform();

  HmcOptions options;
  options.step_size = settings.step_size;
  options.leapfrog_steps = settings.leapfrog_steps;
  options.num_samples = settings.num_samples;
  options.metropolis = settings.metropolis;
  options.reject_divergent = settings.reject_divergent;

  RngStream sp_rng = root.split(2);
  const HmcResult sp = run_hmc(
      result.start, [&](const VectorX<double>& q) { return VectorX<double>(-mog.grad_log_prob(q)); },
      [&](const VectorX<double>& q) { return -mog.log_prob(q); }, options, sp_rng);
  for (const auto& q : sp.samples) result.sp.samples.emplace_back(q);
  result.sp.accepted = sp.accepted;
  result.sp.divergent = sp.divergent;
  result.sp.coverage = mode_coverage(result.sp.samples, mog.means(), settings.radius);

  RngStream ep_rng = root.split(3);
  const HmcResult ep = run_hmc(
      ProductTarget::identity_position(result.start),
      [&](const VectorX<double>& q) { return product.potential_grad(q); },
      [&](const VectorX<double>& q) { return product.potential(q); }, options, ep_rng);
  for (const auto& q : ep.samples) result.ep.samples.push_back(ProductTarget::emit(q));
  result.ep.accepted = ep.accepted;
  result.ep.divergent = ep.divergent;
  result.ep.coverage = mode_coverage(result.ep.samples, mog.means(), settings.radius);
  return result;
}

}  // namespace pxmc
