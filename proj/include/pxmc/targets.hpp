#pragma once

#include <array>
#include <vector>

#include <Eigen/Dense>

#include "pxmc/errors.hpp"
#include "pxmc/samplers.hpp"

namespace pxmc {

// Uniform mixture of 25 isotropic Gaussians centred on {-4,-2,0,2,4}^2.
class Mog25 {
 public:
  explicit Mog25(double component_variance = 0.03, Eigen::Vector2d offset = Eigen::Vector2d::Zero());

  double log_prob(const Eigen::Vector2d& p) const;
  Eigen::Vector2d grad_log_prob(const Eigen::Vector2d& p) const;

  const std::vector<Eigen::Vector2d>& means() const { return means_; }
  double component_variance() const { return variance_; }

 private:
  std::vector<Eigen::Vector2d> means_;
  double variance_;
};

// Position (W1, W2, W3, x) packed as 14 coordinates: three column-major 2x2
// factors followed by x. The emitted point is y = W3 W2 W1 x and the
// potential is U = -log p(y).
class ProductTarget {
 public:
  static constexpr int kDim = 14;

  explicit ProductTarget(Mog25 base) : base_(std::move(base)) {}

  static Eigen::Vector2d emit(const Eigen::VectorXd& position);
  /// Identity factors with the given x.
  static Eigen::VectorXd identity_position(const Eigen::Vector2d& x);

  double potential(const Eigen::VectorXd& position) const;
  Eigen::VectorXd potential_grad(const Eigen::VectorXd& position) const;

  const Mog25& base() const { return base_; }

 private:
  Mog25 base_;
};

/// Number of mixture means with at least one sample within `radius`.
int mode_coverage(const std::vector<Eigen::Vector2d>& samples, const std::vector<Eigen::Vector2d>& means,
                  double radius);

struct MogSettings {
  double component_variance = 0.03;
  double step_size = 0.05;
  int leapfrog_steps = 10;
  Index num_samples = 10000;
  double radius = 0.5;
  bool metropolis = false;
  bool reject_divergent = false;
};

struct MogChain {
  std::vector<Eigen::Vector2d> samples;  // emitted points
  int coverage = 0;
  Index accepted = 0;
  Index divergent = 0;
};

struct MogResult {
  Eigen::Vector2d start;  // shared initial point, uniform over [-5, 5]^2
  MogChain sp;
  MogChain ep;            // W1, W2, W3 start at identity
};

/// HMC on the mixture directly and through the product parameterization,
/// from the same start. Streams: start from split(1), SP from split(2), EP from split(3).
MogResult run_mog(const MogSettings& settings, std::uint64_t seed);

}  // namespace pxmc
