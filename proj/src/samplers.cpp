#include "pxmc/samplers.hpp"

#include <cmath>
#include <numbers>

namespace pxmc {

SamplerKind parse_sampler(const std::string& name) {
  if (name == "sgld") return SamplerKind::Sgld;
  if (name == "psgld") return SamplerKind::Psgld;
  if (name == "sghmc") return SamplerKind::Sghmc;
  if (name == "sgnht") return SamplerKind::Sgnht;
  throw ConfigError("unknown sampler '" + name + "'");
}

std::string to_string(SamplerKind kind) {
  switch (kind) {
    case SamplerKind::Sgld:
      return "sgld";
    case SamplerKind::Psgld:
      return "psgld";
    case SamplerKind::Sghmc:
      return "sghmc";
    case SamplerKind::Sgnht:
      return "sgnht";
  }
  return "?";
}

double step_size(const Schedule& schedule, Index t) {
  if (schedule.kind == Schedule::Kind::Constant) return schedule.peak;
  const double phase = static_cast<double>(t % schedule.steps_per_cycle) / static_cast<double>(schedule.steps_per_cycle);
  return 0.5 * schedule.peak * (std::cos(std::numbers::pi * phase) + 1.0);
}

void SamplerConfig::validate() const {
  if (friction_base < 0.0 || friction_expanded < 0.0) throw ConfigError("friction must be non-negative");
  if (!(temperature > 0.0)) throw ConfigError("temperature must be positive");
  if (!(psgld_beta > 0.0 && psgld_beta < 1.0)) throw ConfigError("pSGLD beta must be in (0, 1)");
  if (!(psgld_epsilon > 0.0)) throw ConfigError("pSGLD stability constant must be positive");
}

SamplerState make_state(SamplerKind kind, ParamTree position, RngStream rng, const SamplerConfig& config) {
  SamplerState state;
  state.rng = rng;
  if (kind == SamplerKind::Sghmc || kind == SamplerKind::Sgnht) state.momentum = position.zeros_like();
  if (kind == SamplerKind::Sgnht) state.thermostat = config.sgnht_xi;
  if (kind == SamplerKind::Psgld) state.second_moment = position.zeros_like();
  state.position = std::move(position);
  return state;
}

namespace {

void check_gradient(const SamplerState& state, const ParamTree& grad) {
  state.position.require_congruent(grad, "sampler step");
  if (!grad.all_finite()) throw DivergedError(state.step, "non-finite gradient");
}

void finish(SamplerState& state) {
  if (!state.position.all_finite() || (state.momentum && !state.momentum->all_finite()) ||
      (state.thermostat && !std::isfinite(*state.thermostat)))
    throw DivergedError(state.step, "sampler diverged");
  ++state.step;
}

// Standard normal noise for one tensor; one stream call per tensor.
Tensor::Storage noise_for(SamplerState& state, const Tensor& like, const SamplerConfig& config) {
  if (!config.inject_noise) return Tensor::Storage::Zero(like.size());
  return gaussian(state.rng, like.dims()).flat();
}

double friction_for(const std::string& name, const SamplerConfig& config) {
  return role_of(name) == Role::Expanded ? config.friction_expanded : config.friction_base;
}

}  // namespace

SamplerState sgld_step(SamplerState state, const ParamTree& grad, double eps, const SamplerConfig& config) {
  check_gradient(state, grad);
  const double noise_scale = std::sqrt(2.0 * eps * config.temperature);
  for (std::size_t i = 0; i < state.position.size(); ++i) {
    auto& theta = state.position[i].second;
    const auto z = noise_for(state, theta, config);
    theta.flat() += -eps * grad[i].second.flat() + noise_scale * z;
  }
  finish(state);
  return state;
}

SamplerState psgld_step(SamplerState state, const ParamTree& grad, double eps, const SamplerConfig& config) {
  check_gradient(state, grad);
  if (!state.second_moment) throw ConfigError("pSGLD state has no second-moment accumulator");
  const double beta = config.psgld_beta;
  const double noise_scale = std::sqrt(2.0 * eps * config.temperature);
  for (std::size_t i = 0; i < state.position.size(); ++i) {
    auto& theta = state.position[i].second.flat();
    auto& nu = (*state.second_moment)[i].second.flat();
    const auto& g = grad[i].second.flat();
    nu = beta * nu + (1.0 - beta) * g.cwiseAbs2();
    const Tensor::Storage denom = nu.cwiseSqrt().array() + config.psgld_epsilon;
    const auto z = noise_for(state, state.position[i].second, config);
    theta.array() += -eps * g.array() / denom.array() + noise_scale * z.array() / denom.array().sqrt();
  }
  finish(state);
  return state;
}

SamplerState sghmc_step(SamplerState state, const ParamTree& grad, double eps, const SamplerConfig& config) {
  check_gradient(state, grad);
  if (!state.momentum) throw ConfigError("SGHMC state has no momentum");
  for (std::size_t i = 0; i < state.position.size(); ++i) {
    const double gamma = friction_for(state.position[i].first, config);
    auto& r = (*state.momentum)[i].second.flat();
    const auto z = noise_for(state, state.position[i].second, config);
    r = (1.0 - gamma * eps) * r + eps * grad[i].second.flat() + std::sqrt(2.0 * gamma * eps * config.temperature) * z;
    state.position[i].second.flat() -= eps * r;
  }
  finish(state);
  return state;
}

SamplerState sgnht_step(SamplerState state, const ParamTree& grad, double eps, const SamplerConfig& config) {
  check_gradient(state, grad);
  if (!state.momentum || !state.thermostat) throw ConfigError("SGNHT state needs momentum and a thermostat");
  const double xi = *state.thermostat;
  const double n = static_cast<double>(state.momentum->total_size());
  const double kinetic = n > 0 ? state.momentum->squared_norm() / n : 0.0;
  const double noise_xi = config.sgnht_noise_uses_current_xi ? std::max(xi, 0.0) : config.sgnht_xi;
  const double noise_scale = std::sqrt(2.0 * noise_xi * eps * config.temperature);
  for (std::size_t i = 0; i < state.position.size(); ++i) {
    auto& r = (*state.momentum)[i].second.flat();
    const auto z = noise_for(state, state.position[i].second, config);
    r = (1.0 - xi * eps) * r + eps * grad[i].second.flat() + noise_scale * z;
    state.position[i].second.flat() -= eps * r;
  }
  *state.thermostat = xi + eps * (kinetic - config.temperature);
  finish(state);
  return state;
}

SamplerState sampler_step(SamplerKind kind, SamplerState state, const ParamTree& grad, double eps,
                          const SamplerConfig& config) {
  switch (kind) {
    case SamplerKind::Sgld:
      return sgld_step(std::move(state), grad, eps, config);
    case SamplerKind::Psgld:
      return psgld_step(std::move(state), grad, eps, config);
    case SamplerKind::Sghmc:
      return sghmc_step(std::move(state), grad, eps, config);
    case SamplerKind::Sgnht:
      return sgnht_step(std::move(state), grad, eps, config);
  }
  throw ConfigError("unknown sampler");
}

PhasePoint leapfrog(VectorX<double> position, VectorX<double> momentum, const GradientFn& grad_u, double eps,
                    int steps) {
  for (int s = 0; s < steps; ++s) {
    momentum -= 0.5 * eps * grad_u(position);
    position += eps * momentum;
    momentum -= 0.5 * eps * grad_u(position);
    if (!position.allFinite() || !momentum.allFinite()) throw DivergedError(s, "leapfrog diverged");
  }
  return {std::move(position), std::move(momentum)};
}

HmcResult run_hmc(const VectorX<double>& init, const GradientFn& grad_u, const EnergyFn& energy,
                  const HmcOptions& options, RngStream& rng) {
  if (options.metropolis && !energy) throw ConfigError("Metropolis correction needs an energy function");
  HmcResult result;
  result.samples.reserve(static_cast<std::size_t>(options.num_samples));
  VectorX<double> current = init;
  for (Index i = 0; i < options.num_samples; ++i) {
    VectorX<double> momentum(current.size());
    rng.fill_normal(momentum.data(), static_cast<std::size_t>(momentum.size()));
    PhasePoint next;
    bool diverged = false;
    try {
      next = leapfrog(current, momentum, grad_u, options.step_size, options.leapfrog_steps);
    } catch (const DivergedError&) {
      if (!options.metropolis && !options.reject_divergent) throw DivergedError(i, "HMC trajectory diverged");
      ++result.divergent;
      diverged = true;
    }
    bool accept = !diverged;
    if (options.metropolis) {
      const double u = rng.uniform();
      if (!diverged) {
        const double h0 = energy(current) + 0.5 * momentum.squaredNorm();
        const double h1 = energy(next.position) + 0.5 * next.momentum.squaredNorm();
        accept = std::isfinite(h1) && std::log(u) < h0 - h1;
      }
    }
    if (accept) {
      current = std::move(next.position);
      ++result.accepted;
    }
    result.samples.push_back(current);
  }
  return result;
}

ClassifierTarget::ClassifierTarget(ModelSpec spec, const Dataset& data, PotentialSpec potential, RngStream batch_rng)
    : spec_(std::move(spec)),
      data_(&data),
      potential_(potential),
      batches_(data, potential.batch_size, batch_rng) {
  validate(spec_);
  potential_.validate();
  if (potential_.dataset_size != data.size()) throw ConfigError("potential dataset size does not match the data");
}

PotentialEval ClassifierTarget::evaluate(const ParamTree& position) {
  last_batch_ = batches_.next();
  return potential_gradient(position, spec_, last_batch_, potential_);
}

ParamTree ClassifierTarget::merged(const ParamTree& position) const { return merge_params(position, spec_); }

SampleSet run_chain(ChainTarget& target, SamplerKind kind, const Schedule& schedule, const SamplerConfig& config,
                    ParamTree init, RngStream rng, const StepObserver& observer) {
  config.validate();
  if (schedule.steps_per_cycle <= 0 || schedule.cycles < 0 || !(schedule.peak > 0.0))
    throw ConfigError("schedule needs a positive peak step size and steps per cycle");
  SampleSet out;
  SamplerState state = make_state(kind, std::move(init), rng, config);
  for (Index m = 1; m <= schedule.cycles; ++m) {
    state.cycle = m;
    for (Index k = 0; k < schedule.steps_per_cycle; ++k) {
      const Index t = state.step;
      const double eps = step_size(schedule, t);
      const PotentialEval eval = target.evaluate(state.position);
      if (!std::isfinite(eval.value)) throw DivergedError(t, "non-finite potential");
      state = sampler_step(kind, std::move(state), eval.grad, eps, config);
      if (observer) observer({t, m, eps, eval.value, &state});
    }
    const Index last = state.step - 1;
    out.samples.push_back({target.merged(state.position), m, state.step,
                           static_cast<double>(last % schedule.steps_per_cycle) /
                               static_cast<double>(schedule.steps_per_cycle)});
  }
  return out;
}

}  // namespace pxmc
