#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "pxmc/data.hpp"
#include "pxmc/nn.hpp"
#include "pxmc/potential.hpp"
#include "pxmc/sample_set.hpp"

namespace pxmc {

enum class SamplerKind { Sgld, Psgld, Sghmc, Sgnht };

SamplerKind parse_sampler(const std::string& name);
std::string to_string(SamplerKind kind);

struct Schedule {
  enum class Kind { Cyclical, Constant };
  Kind kind = Kind::Cyclical;
  double peak = 1e-4;        // epsilon_0
  Index steps_per_cycle = 1;  // T
  Index cycles = 1;           // M
};

/// Cyclical: (eps0 / 2) [cos(pi mod(t, T) / T) + 1]; Constant: eps0.
double step_size(const Schedule& schedule, Index t);

struct SamplerConfig {
  double friction_base = 100.0;     // SGHMC friction for V and biases
  double friction_expanded = 1.0;   // SGHMC friction for P_i, Q_j
  double temperature = 1.0;
  double psgld_beta = 0.99;
  double psgld_epsilon = 1e-8;
  double sgnht_xi = 1.0;            // initial thermostat; also the noise scale
  bool sgnht_noise_uses_current_xi = false;
  bool inject_noise = true;

  void validate() const;
};

struct SamplerState {
  ParamTree position;
  std::optional<ParamTree> momentum;       // SGHMC, SGNHT
  std::optional<double> thermostat;        // SGNHT
  std::optional<ParamTree> second_moment;  // pSGLD
  Index step = 0;
  Index cycle = 0;
  RngStream rng;
};

/// Fresh state with zero momentum / accumulator and xi = config.sgnht_xi as the kind requires.
SamplerState make_state(SamplerKind kind, ParamTree position, RngStream rng, const SamplerConfig& config);

// One update each. All throw DivergedError (carrying state.step) on a
// non-finite gradient or result, and advance state.step by one.

/// theta <- theta - eps g + sqrt(2 eps T) z
SamplerState sgld_step(SamplerState state, const ParamTree& grad, double eps, const SamplerConfig& config);
/// nu <- beta nu + (1 - beta) g^2;
/// theta <- theta - eps g / (sqrt(nu) + e) + sqrt(2 eps T) z / sqrt(sqrt(nu) + e)
SamplerState psgld_step(SamplerState state, const ParamTree& grad, double eps, const SamplerConfig& config);
/// r <- (1 - gamma eps) r + eps g + sqrt(2 gamma eps T) z; theta <- theta - eps r.
/// gamma is friction_expanded for P/Q entries and friction_base otherwise.
SamplerState sghmc_step(SamplerState state, const ParamTree& grad, double eps, const SamplerConfig& config);
/// r <- (1 - xi eps) r + eps g + sqrt(2 xi0 eps T) z; theta <- theta - eps r;
/// xi <- xi + eps (r_prev . r_prev / n - T), with r_prev the momentum before this step.
SamplerState sgnht_step(SamplerState state, const ParamTree& grad, double eps, const SamplerConfig& config);

SamplerState sampler_step(SamplerKind kind, SamplerState state, const ParamTree& grad, double eps,
                          const SamplerConfig& config);

// --- Hamiltonian dynamics on flat vectors -----------------------------------

using GradientFn = std::function<VectorX<double>(const VectorX<double>&)>;
using EnergyFn = std::function<double(const VectorX<double>&)>;

struct PhasePoint {
  VectorX<double> position;
  VectorX<double> momentum;
};

/// `steps` rounds of half-kick, drift, half-kick for H = U(q) + |p|^2 / 2.
PhasePoint leapfrog(VectorX<double> position, VectorX<double> momentum, const GradientFn& grad_u, double eps,
                    int steps);

struct HmcOptions {
  double step_size = 0.05;
  int leapfrog_steps = 10;
  Index num_samples = 0;
  bool metropolis = false;  // requires `energy`
  bool reject_divergent = false;  // keep the current state instead of throwing
};

struct HmcResult {
  std::vector<VectorX<double>> samples;
  Index accepted = 0;
  Index divergent = 0;
};

/// Fresh N(0, I) momentum per sample, one leapfrog trajectory, optional MH test.
HmcResult run_hmc(const VectorX<double>& init, const GradientFn& grad_u, const EnergyFn& energy,
                  const HmcOptions& options, RngStream& rng);

// --- SGMCMC chains ------------------------------------------------------------

/// Something a chain can sample: stochastic potential + gradient, and the
/// merged form of a position for storage.
class ChainTarget {
 public:
  virtual ~ChainTarget() = default;
  /// U~ and its gradient at `position`; may advance an internal batch stream.
  virtual PotentialEval evaluate(const ParamTree& position) = 0;
  virtual ParamTree merged(const ParamTree& position) const = 0;
};

/// MLP classifier posterior over a dataset with seeded minibatches.
class ClassifierTarget : public ChainTarget {
 public:
  ClassifierTarget(ModelSpec spec, const Dataset& data, PotentialSpec potential, RngStream batch_rng);
  PotentialEval evaluate(const ParamTree& position) override;
  ParamTree merged(const ParamTree& position) const override;

  const ModelSpec& spec() const { return spec_; }
  const PotentialSpec& potential() const { return potential_; }
  const Batch& last_batch() const { return last_batch_; }

 private:
  ModelSpec spec_;
  const Dataset* data_;
  PotentialSpec potential_;
  BatchIterator batches_;
  Batch last_batch_;
};

struct StepInfo {
  Index step = 0;   // global step index t used for the schedule
  Index cycle = 0;  // 1-based
  double step_size = 0.0;
  double potential = 0.0;
  const SamplerState* state = nullptr;  // after the update
};

using StepObserver = std::function<void(const StepInfo&)>;

/// M cycles of T steps; the merged position at each cycle end is collected.
/// Step t (0-based, global) uses step_size(schedule, t), so every cycle starts
/// at the peak and ends at the smallest step.
SampleSet run_chain(ChainTarget& target, SamplerKind kind, const Schedule& schedule, const SamplerConfig& config,
                    ParamTree init, RngStream rng, const StepObserver& observer = {});

}  // namespace pxmc
