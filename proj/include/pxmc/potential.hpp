#pragma once

#include <span>

#include "pxmc/nn.hpp"

namespace pxmc {

// Gaussian-prior, categorical-likelihood potential
//   U~(theta) = (|D| / |B|) * sum_{i in B} -log p(y_i | x_i, theta) + |theta|^2 / (2 sigma^2).
// Normalizing constants are dropped. The prior applies to every tensor of the
// tree, i.e. to expanded factors individually. Temperature is carried here
// for the samplers; it never changes U itself.
struct PotentialSpec {
  double prior_variance = 1.0;
  double temperature = 1.0;
  Index dataset_size = 0;
  Index batch_size = 0;

  void validate() const;
  double likelihood_scale() const { return static_cast<double>(dataset_size) / static_cast<double>(batch_size); }
};

/// A minibatch: rows of features and their labels.
struct Batch {
  MatrixX<double> x;
  std::vector<int> y;
  Index size() const { return x.rows(); }
};

double prior_energy(const ParamTree& params, double prior_variance);
ParamTree prior_gradient(const ParamTree& params, double prior_variance);

/// U~ on `batch`, with the likelihood scaled by |D| / |B| using the batch's actual size.
double stochastic_potential(const ParamTree& params, const ModelSpec& spec, const Batch& batch,
                            const PotentialSpec& pot);

struct PotentialEval {
  double value = 0.0;
  ParamTree grad;
};
PotentialEval potential_gradient(const ParamTree& params, const ModelSpec& spec, const Batch& batch,
                                 const PotentialSpec& pot);

}  // namespace pxmc
