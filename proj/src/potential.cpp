#include "pxmc/potential.hpp"

namespace pxmc {

namespace {

double batch_scale(const Batch& batch, const PotentialSpec& pot) {
  if (batch.size() == 0) throw ConfigError("potential evaluated on an empty batch");
  return static_cast<double>(pot.dataset_size) / static_cast<double>(batch.size());
}

}  // namespace

void PotentialSpec::validate() const {
  if (!(prior_variance > 0.0)) throw ConfigError("prior variance must be positive");
  if (!(temperature > 0.0)) throw ConfigError("temperature must be positive");
  if (dataset_size <= 0 || batch_size <= 0 || batch_size > dataset_size)
    throw ConfigError("batch size must be in [1, dataset size]");
}

double prior_energy(const ParamTree& params, double prior_variance) {
  if (!(prior_variance > 0.0)) throw ConfigError("prior variance must be positive");
  return params.squared_norm() / (2.0 * prior_variance);
}

ParamTree prior_gradient(const ParamTree& params, double prior_variance) {
  if (!(prior_variance > 0.0)) throw ConfigError("prior variance must be positive");
  ParamTree g = params;
  return g.scale(1.0 / prior_variance);
}

double stochastic_potential(const ParamTree& params, const ModelSpec& spec, const Batch& batch,
                            const PotentialSpec& pot) {
  const double scale = batch_scale(batch, pot);
  const double nll = cross_entropy(forward(params, spec, batch.x), batch.y).loss;
  return scale * nll + prior_energy(params, pot.prior_variance);
}

PotentialEval potential_gradient(const ParamTree& params, const ModelSpec& spec, const Batch& batch,
                                 const PotentialSpec& pot) {
  const double scale = batch_scale(batch, pot);
  LossAndGrad lg = cross_entropy_gradient(params, spec, batch.x, batch.y, scale);
  lg.grad.axpy(1.0 / pot.prior_variance, params);
  return {lg.loss + prior_energy(params, pot.prior_variance), std::move(lg.grad)};
}

}  // namespace pxmc
