#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "pxmc/analysis.hpp"
#include "pxmc/data.hpp"
#include "pxmc/nn.hpp"
#include "pxmc/samplers.hpp"

namespace pxmc {

using Json = nlohmann::ordered_json;

// Exit codes of the command-line runner.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitDiverged = 3;
inline constexpr int kExitIo = 4;

/// Every recognised configuration key with its default value.
Json default_config();

/// Flat run configuration. Field names follow the config keys.
struct RunConfig {
  std::uint64_t seed = 0;
  std::string out = "out";
  int chains = 1;

  // sampler and schedule
  std::string sampler = "sghmc";
  std::string schedule = "cyclical";
  double step_size = 1e-4;
  Index steps_per_cycle = 200;
  Index cycles = 10;
  double friction_base = 100.0;
  double friction_expanded = 1.0;
  double temperature = 1.0;
  double psgld_beta = 0.99;
  double psgld_epsilon = 1e-8;
  double sgnht_xi = 1.0;
  bool sgnht_noise_uses_current_xi = false;

  // model
  std::vector<Index> widths{2, 16, 16, 2};
  std::string activation = "swish";
  std::string param_mode = "ep";  // sp | ep | lowrank
  int c = 1;
  int d = 1;
  int rank = 1;
  std::string ep_init = "identity";

  // potential
  double prior_variance = 0.02;
  Index batch_size = 256;

  // data
  std::string dataset = "two_moons";  // two_moons | spirals | idx | csv
  Index n_train = 1000;
  Index n_test = 500;
  double noise = 0.1;
  int classes = 3;
  std::string train_images, train_labels, test_images, test_labels;
  std::string train_csv, test_csv;
  bool standardize = true;

  // mog
  Index mog_samples = 10000;
  int mog_leapfrog = 10;
  double mog_step_size = 0.05;
  double mog_variance = 0.03;
  double mog_radius = 0.5;
  bool mog_metropolis = false;
  bool mog_reject_divergent = true;
  int mog_grid = 121;

  // eval / diag
  std::string checkpoint;  // defaults to <out>/samples.pxs
  int ece_bins = 15;
  int barrier_points = 21;
  Index barrier_examples = 1000;
  int subspace_grid = 11;
  Index bound_steps = 1000;
  double bound_step_size = 1e-4;

  static RunConfig from_json(const Json& j);
  Json to_json() const;
  void validate() const;
  std::string checkpoint_path() const;
};

/// Defaults, then the config file (if any), then `key=value` overrides.
/// Unknown keys and ill-typed values raise ConfigError.
Json merge_config(const std::string& config_path, const std::vector<std::string>& overrides);

ModelSpec model_spec(const RunConfig& cfg);
SamplerConfig sampler_config(const RunConfig& cfg);
Schedule schedule_of(const RunConfig& cfg);
PotentialSpec potential_spec(const RunConfig& cfg, Index dataset_size);

struct DataSplits {
  Dataset train;
  Dataset test;
};
/// Train and test data per the config; synthetic sets draw from the run seed.
/// With `standardize`, both splits use the training statistics.
DataSplits load_data(const RunConfig& cfg);

// Commands write into cfg.out and return an exit code.
int cmd_mog(const RunConfig& cfg);
int cmd_sample(const RunConfig& cfg);
int cmd_eval(const RunConfig& cfg);
int cmd_diag(const RunConfig& cfg);

/// Full command-line entry point.
int run_cli(int argc, char** argv);

/// Shortest round-trip decimal form.
std::string format_number(double v);

}  // namespace pxmc
