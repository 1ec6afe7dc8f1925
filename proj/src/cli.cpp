#include "pxmc/cli.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <mutex>
#include <optional>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "pxmc/store.hpp"
#include "pxmc/targets.hpp"

namespace pxmc {

std::string format_number(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

namespace {

std::string fmt(double v) { return format_number(v); }
std::string fmt(Index v) { return std::to_string(v); }
std::string fmt(int v) { return std::to_string(v); }

class CsvWriter {
 public:
  explicit CsvWriter(std::initializer_list<std::string> header) { row(header); }

  void row(std::initializer_list<std::string> cells) {
    bool first = true;
    for (const auto& c : cells) {
      if (!first) text_ += ',';
      text_ += c;
      first = false;
    }
    text_ += '\n';
  }

  void save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    out << text_;
    if (!out) throw IoError("error writing '" + path.string() + "'");
  }

 private:
  std::string text_;
};

void write_json(const std::filesystem::path& path, const Json& j) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << j.dump(2) << '\n';
  if (!out) throw IoError("error writing '" + path.string() + "'");
}

std::filesystem::path output_dir(const RunConfig& cfg) {
  std::error_code ec;
  std::filesystem::create_directories(cfg.out, ec);
  if (ec) throw IoError("cannot create output directory '" + cfg.out + "': " + ec.message());
  return cfg.out;
}

Json parse_value(const std::string& text) {
  try {
    return Json::parse(text);
  } catch (const Json::parse_error&) {
    return Json(text);
  }
}

// Coerces `value` to the JSON type of `like`; widths may be given as "2,16,2".
Json coerce(const std::string& key, const Json& like, Json value) {
  if (like.is_array() && value.is_string()) {
    Json arr = Json::array();
    std::stringstream ss(value.get<std::string>());
    std::string part;
    while (std::getline(ss, part, ',')) arr.push_back(parse_value(part));
    value = std::move(arr);
  }
  if (like.is_array() && value.is_number_integer()) value = Json::array({value});
  if (like.is_string() && !value.is_string()) value = value.dump();
  const bool ok = (like.is_boolean() && value.is_boolean()) || (like.is_string() && value.is_string()) ||
                  (like.is_number_integer() && value.is_number_integer()) ||
                  (like.is_number_float() && value.is_number()) || (like.is_array() && value.is_array());
  if (!ok) throw ConfigError("config key '" + key + "' expects " + like.type_name() + ", got " + value.dump());
  return value;
}

std::string normalize_key(std::string key) {
  while (!key.empty() && key.front() == '-') key.erase(key.begin());
  std::replace(key.begin(), key.end(), '-', '_');
  return key;
}

template <typename T>
T get(const Json& j, const char* key) {
  try {
    return j.at(key).get<T>();
  } catch (const Json::exception& e) {
    throw ConfigError(std::string("config key '") + key + "': " + e.what());
  }
}

}  // namespace

Json default_config() { return RunConfig{}.to_json(); }

Json RunConfig::to_json() const {
  Json j;
  j["seed"] = seed;
  j["out"] = out;
  j["chains"] = chains;
  j["sampler"] = sampler;
  j["schedule"] = schedule;
  j["step_size"] = step_size;
  j["steps_per_cycle"] = steps_per_cycle;
  j["cycles"] = cycles;
  j["friction_base"] = friction_base;
  j["friction_expanded"] = friction_expanded;
  j["temperature"] = temperature;
  j["psgld_beta"] = psgld_beta;
  j["psgld_epsilon"] = psgld_epsilon;
  j["sgnht_xi"] = sgnht_xi;
  j["sgnht_noise_uses_current_xi"] = sgnht_noise_uses_current_xi;
  j["widths"] = widths;
  j["activation"] = activation;
  j["param_mode"] = param_mode;
  j["c"] = c;
  j["d"] = d;
  j["rank"] = rank;
  j["ep_init"] = ep_init;
  j["prior_variance"] = prior_variance;
  j["batch_size"] = batch_size;
  j["dataset"] = dataset;
  j["n_train"] = n_train;
  j["n_test"] = n_test;
  j["noise"] = noise;
  j["classes"] = classes;
  j["train_images"] = train_images;
  j["train_labels"] = train_labels;
  j["test_images"] = test_images;
  j["test_labels"] = test_labels;
  j["train_csv"] = train_csv;
  j["test_csv"] = test_csv;
  j["standardize"] = standardize;
  j["mog_samples"] = mog_samples;
  j["mog_leapfrog"] = mog_leapfrog;
  j["mog_step_size"] = mog_step_size;
  j["mog_variance"] = mog_variance;
  j["mog_radius"] = mog_radius;
  j["mog_metropolis"] = mog_metropolis;
  j["mog_reject_divergent"] = mog_reject_divergent;
  j["mog_grid"] = mog_grid;
  j["checkpoint"] = checkpoint;
  j["ece_bins"] = ece_bins;
  j["barrier_points"] = barrier_points;
  j["barrier_examples"] = barrier_examples;
  j["subspace_grid"] = subspace_grid;
  j["bound_steps"] = bound_steps;
  j["bound_step_size"] = bound_step_size;
  return j;
}

RunConfig RunConfig::from_json(const Json& j) {
  const Json defaults = default_config();
  for (const auto& [key, value] : j.items())
    if (!defaults.contains(key)) throw ConfigError("unknown config key '" + key + "'");
  Json full = defaults;
  for (const auto& [key, value] : j.items()) full[key] = coerce(key, defaults[key], value);

  RunConfig cfg;
  cfg.seed = get<std::uint64_t>(full, "seed");
  cfg.out = get<std::string>(full, "out");
  cfg.chains = get<int>(full, "chains");
  cfg.sampler = get<std::string>(full, "sampler");
  cfg.schedule = get<std::string>(full, "schedule");
  cfg.step_size = get<double>(full, "step_size");
  cfg.steps_per_cycle = get<Index>(full, "steps_per_cycle");
  cfg.cycles = get<Index>(full, "cycles");
  cfg.friction_base = get<double>(full, "friction_base");
  cfg.friction_expanded = get<double>(full, "friction_expanded");
  cfg.temperature = get<double>(full, "temperature");
  cfg.psgld_beta = get<double>(full, "psgld_beta");
  cfg.psgld_epsilon = get<double>(full, "psgld_epsilon");
  cfg.sgnht_xi = get<double>(full, "sgnht_xi");
  cfg.sgnht_noise_uses_current_xi = get<bool>(full, "sgnht_noise_uses_current_xi");
  cfg.widths = get<std::vector<Index>>(full, "widths");
  cfg.activation = get<std::string>(full, "activation");
  cfg.param_mode = get<std::string>(full, "param_mode");
  cfg.c = get<int>(full, "c");
  cfg.d = get<int>(full, "d");
  cfg.rank = get<int>(full, "rank");
  cfg.ep_init = get<std::string>(full, "ep_init");
  cfg.prior_variance = get<double>(full, "prior_variance");
  cfg.batch_size = get<Index>(full, "batch_size");
  cfg.dataset = get<std::string>(full, "dataset");
  cfg.n_train = get<Index>(full, "n_train");
  cfg.n_test = get<Index>(full, "n_test");
  cfg.noise = get<double>(full, "noise");
  cfg.classes = get<int>(full, "classes");
  cfg.train_images = get<std::string>(full, "train_images");
  cfg.train_labels = get<std::string>(full, "train_labels");
  cfg.test_images = get<std::string>(full, "test_images");
  cfg.test_labels = get<std::string>(full, "test_labels");
  cfg.train_csv = get<std::string>(full, "train_csv");
  cfg.test_csv = get<std::string>(full, "test_csv");
  cfg.standardize = get<bool>(full, "standardize");
  cfg.mog_samples = get<Index>(full, "mog_samples");
  cfg.mog_leapfrog = get<int>(full, "mog_leapfrog");
  cfg.mog_step_size = get<double>(full, "mog_step_size");
  cfg.mog_variance = get<double>(full, "mog_variance");
  cfg.mog_radius = get<double>(full, "mog_radius");
  cfg.mog_metropolis = get<bool>(full, "mog_metropolis");
  cfg.mog_reject_divergent = get<bool>(full, "mog_reject_divergent");
  cfg.mog_grid = get<int>(full, "mog_grid");
  cfg.checkpoint = get<std::string>(full, "checkpoint");
  cfg.ece_bins = get<int>(full, "ece_bins");
  cfg.barrier_points = get<int>(full, "barrier_points");
  cfg.barrier_examples = get<Index>(full, "barrier_examples");
  cfg.subspace_grid = get<int>(full, "subspace_grid");
  cfg.bound_steps = get<Index>(full, "bound_steps");
  cfg.bound_step_size = get<double>(full, "bound_step_size");
  cfg.validate();
  return cfg;
}

void RunConfig::validate() const {
  if (chains < 1) throw ConfigError("chains must be at least 1");
  if (out.empty()) throw ConfigError("out must name a directory");
  parse_sampler(sampler);
  if (schedule != "cyclical" && schedule != "constant") throw ConfigError("schedule must be cyclical or constant");
  if (!(step_size > 0.0)) throw ConfigError("step_size must be positive");
  if (steps_per_cycle < 1 || cycles < 0) throw ConfigError("steps_per_cycle must be >= 1 and cycles >= 0");
  sampler_config(*this).validate();
  pxmc::validate(model_spec(*this));
  if (ep_init != "identity" && ep_init != "balanced") throw ConfigError("ep_init must be identity or balanced");
  if (!(prior_variance > 0.0)) throw ConfigError("prior_variance must be positive");
  if (batch_size < 1) throw ConfigError("batch_size must be positive");
  if (dataset != "two_moons" && dataset != "spirals" && dataset != "idx" && dataset != "csv")
    throw ConfigError("dataset must be two_moons, spirals, idx or csv");
  if (n_train < 1 || n_test < 0) throw ConfigError("n_train must be positive and n_test non-negative");
  if (!(noise >= 0.0)) throw ConfigError("noise must be non-negative");
  if (classes < 2) throw ConfigError("classes must be at least 2");
  if (mog_samples < 0 || mog_leapfrog < 1) throw ConfigError("mog_samples must be >= 0 and mog_leapfrog >= 1");
  if (!(mog_step_size > 0.0) || !(mog_variance > 0.0) || !(mog_radius > 0.0))
    throw ConfigError("mog step size, variance and radius must be positive");
  if (mog_grid < 2) throw ConfigError("mog_grid must be at least 2");
  if (ece_bins < 1) throw ConfigError("ece_bins must be positive");
  if (barrier_points < 2 || subspace_grid < 2) throw ConfigError("barrier_points and subspace_grid must be >= 2");
  if (barrier_examples < 1 || bound_steps < 0 || !(bound_step_size > 0.0))
    throw ConfigError("barrier_examples, bound_steps and bound_step_size out of range");
}

std::string RunConfig::checkpoint_path() const {
  return checkpoint.empty() ? (std::filesystem::path(out) / "samples.pxs").string() : checkpoint;
}

Json merge_config(const std::string& config_path, const std::vector<std::string>& overrides) {
  const Json defaults = default_config();
  Json merged = Json::object();
  if (!config_path.empty()) {
    std::ifstream in(config_path);
    if (!in) throw IoError("cannot open config '" + config_path + "'");
    Json file;
    try {
      file = Json::parse(in);
    } catch (const Json::parse_error& e) {
      throw ConfigError("config '" + config_path + "' is not valid JSON: " + e.what());
    }
    if (!file.is_object()) throw ConfigError("config must be a flat JSON object");
    for (const auto& [key, value] : file.items()) {
      if (!defaults.contains(key)) throw ConfigError("unknown config key '" + key + "'");
      merged[key] = coerce(key, defaults[key], value);
    }
  }
  for (const auto& item : overrides) {
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw ConfigError("override '" + item + "' is not of the form --key=value");
    const std::string key = normalize_key(item.substr(0, eq));
    if (!defaults.contains(key)) throw ConfigError("unknown config key '" + key + "'");
    merged[key] = coerce(key, defaults[key], parse_value(item.substr(eq + 1)));
  }
  return merged;
}

ModelSpec model_spec(const RunConfig& cfg) {
  ParamMode mode;
  if (cfg.param_mode == "sp")
    mode = ParamMode::standard();
  else if (cfg.param_mode == "ep")
    mode = ParamMode::expanded(cfg.c, cfg.d);
  else if (cfg.param_mode == "lowrank")
    mode = ParamMode::low_rank(cfg.c, cfg.d, cfg.rank);
  else
    throw ConfigError("param_mode must be sp, ep or lowrank");
  if (cfg.widths.size() < 2) throw ConfigError("widths needs at least an input and an output width");
  return mlp_spec(cfg.widths, parse_activation(cfg.activation), mode);
}

SamplerConfig sampler_config(const RunConfig& cfg) {
  SamplerConfig sc;
  sc.friction_base = cfg.friction_base;
  sc.friction_expanded = cfg.friction_expanded;
  sc.temperature = cfg.temperature;
  sc.psgld_beta = cfg.psgld_beta;
  sc.psgld_epsilon = cfg.psgld_epsilon;
  sc.sgnht_xi = cfg.sgnht_xi;
  sc.sgnht_noise_uses_current_xi = cfg.sgnht_noise_uses_current_xi;
  return sc;
}

Schedule schedule_of(const RunConfig& cfg) {
  Schedule s;
  s.kind = cfg.schedule == "constant" ? Schedule::Kind::Constant : Schedule::Kind::Cyclical;
  s.peak = cfg.step_size;
  s.steps_per_cycle = cfg.steps_per_cycle;
  s.cycles = cfg.cycles;
  return s;
}

PotentialSpec potential_spec(const RunConfig& cfg, Index dataset_size) {
  PotentialSpec p;
  p.prior_variance = cfg.prior_variance;
  p.temperature = cfg.temperature;
  p.dataset_size = dataset_size;
  p.batch_size = cfg.batch_size;
  p.validate();
  return p;
}

DataSplits load_data(const RunConfig& cfg) {
  DataSplits out;
  const RngStream root(cfg.seed);
  if (cfg.dataset == "two_moons" || cfg.dataset == "spirals") {
    RngStream train_rng = root.split(100);
    RngStream test_rng = root.split(101);
    const bool moons = cfg.dataset == "two_moons";
    out.train = moons ? two_moons(cfg.n_train, cfg.noise, train_rng)
                      : spirals(cfg.n_train, cfg.classes, cfg.noise, train_rng);
    out.test = moons ? two_moons(cfg.n_test, cfg.noise, test_rng)
                     : spirals(cfg.n_test, cfg.classes, cfg.noise, test_rng);
  } else {
    const bool idx = cfg.dataset == "idx";
    const std::string& train_a = idx ? cfg.train_images : cfg.train_csv;
    if (train_a.empty()) throw ConfigError("dataset " + cfg.dataset + " needs training file paths");
    Dataset all = idx ? load_idx(cfg.train_images, cfg.train_labels) : load_csv(cfg.train_csv);
    const std::string& test_a = idx ? cfg.test_images : cfg.test_csv;
    if (!test_a.empty()) {
      out.train = std::move(all);
      out.test = idx ? load_idx(cfg.test_images, cfg.test_labels) : load_csv(cfg.test_csv);
    } else {
      if (cfg.n_test >= all.size()) throw ConfigError("n_test leaves no training data");
      auto [train, test] = split_dataset(all, all.size() - cfg.n_test);
      out.train = std::move(train);
      out.test = std::move(test);
    }
  }
  out.train.split = "train";
  out.test.split = "test";
  if (cfg.standardize) {
    const Standardization st = standardize(out.train);
    if (out.test.size() > 0) apply_standardization(out.test, st);
  }
  return out;
}

// --- mog ------------------------------------------------------------------------

int cmd_mog(const RunConfig& cfg) {
  MogSettings settings;
  settings.component_variance = cfg.mog_variance;
  settings.step_size = cfg.mog_step_size;
  settings.leapfrog_steps = cfg.mog_leapfrog;
  settings.num_samples = cfg.mog_samples;
  settings.radius = cfg.mog_radius;
  settings.metropolis = cfg.mog_metropolis;
  settings.reject_divergent = cfg.mog_reject_divergent;
  const MogResult result = run_mog(settings, cfg.seed);
  const auto dir = output_dir(cfg);

  CsvWriter samples({"method", "x", "y"});
  for (const auto& p : result.sp.samples) samples.row({"sp", fmt(p.x()), fmt(p.y())});
  for (const auto& p : result.ep.samples) samples.row({"ep", fmt(p.x()), fmt(p.y())});
  samples.save(dir / "samples.csv");

  CsvWriter modes({"method", "coverage", "accepted", "divergent"});
  modes.row({"sp", fmt(result.sp.coverage), fmt(result.sp.accepted), fmt(result.sp.divergent)});
  modes.row({"ep", fmt(result.ep.coverage), fmt(result.ep.accepted), fmt(result.ep.divergent)});
  modes.save(dir / "modes.csv");

  const Mog25 mog(cfg.mog_variance);
  CsvWriter grid({"x", "y", "neg_log_prob"});
  const double lo = -6.0, hi = 6.0;
  for (int i = 0; i < cfg.mog_grid; ++i) {
    for (int j = 0; j < cfg.mog_grid; ++j) {
      const double x = lo + (hi - lo) * j / (cfg.mog_grid - 1);
      const double y = lo + (hi - lo) * i / (cfg.mog_grid - 1);
      grid.row({fmt(x), fmt(y), fmt(-mog.log_prob(Eigen::Vector2d(x, y)))});
    }
  }
  grid.save(dir / "density-grid.csv");

  std::cout << "sp coverage " << result.sp.coverage << ", ep coverage " << result.ep.coverage << " (of 25)\n";
  if (result.ep.divergent > 0 || result.sp.divergent > 0)
    std::cout << "divergent trajectories rejected: sp " << result.sp.divergent << ", ep " << result.ep.divergent
              << "\n";
  return kExitOk;
}

// --- sample ---------------------------------------------------------------------

namespace {

struct StepRow {
  Index step;
  Index cycle;
  double step_size;
  double potential;
};

struct ChainRun {
  SampleSet samples;
  std::vector<StepRow> steps;
  std::optional<Index> diverged_at;
  std::string error;
};

int thread_cap() {
  if (const char* env = std::getenv("PX_THREADS")) {
    int n = 0;
    const std::string_view s(env);
    const auto res = std::from_chars(s.data(), s.data() + s.size(), n);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size() || n < 1)
      throw ConfigError("PX_THREADS must be a positive integer");
    return n;
  }
  return static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
}

// Runs job(i) for i in [0, n) on at most `workers` threads.
template <typename Job>
void parallel_for(int n, int workers, const Job& job) {
  workers = std::clamp(workers, 1, std::max(n, 1));
  if (workers == 1) {
    for (int i = 0; i < n; ++i) job(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (int i = next++; i < n; i = next++) job(i);
    });
  for (auto& t : pool) t.join();
}

ChainRun run_one_chain(const RunConfig& cfg, const ModelSpec& spec, const Dataset& train, int chain) {
  const RngStream root(cfg.seed + static_cast<std::uint64_t>(chain));
  RngStream init_rng = root.split(1);
  const EpInit init_kind = cfg.ep_init == "balanced" ? EpInit::Balanced : EpInit::Identity;
  ParamTree init = init_params(spec, init_rng, init_kind);
  ClassifierTarget target(spec, train, potential_spec(cfg, train.size()), root.split(3));
  ChainRun run;
  const StepObserver observer = [&](const StepInfo& info) {
    run.steps.push_back({info.step, info.cycle, info.step_size, info.potential});
  };
  try {
    run.samples = run_chain(target, parse_sampler(cfg.sampler), schedule_of(cfg), sampler_config(cfg),
                            std::move(init), root.split(2), observer);
  } catch (const DivergedError& e) {
    run.diverged_at = e.step();
    run.error = e.what();
  }
  return run;
}

void bound_sigma(const ParamTree& params, const ModelSpec& spec, double& sigma_max, double& sigma_min) {
  sigma_max = 0.0;
  sigma_min = std::numeric_limits<double>::infinity();
  for (const auto& layer : merged_layers(params, spec)) {
    const auto values = svd_values(layer.weight);
    sigma_max = std::max(sigma_max, values.front());
    sigma_min = std::min(sigma_min, values.back());
  }
}

}  // namespace

int cmd_sample(const RunConfig& cfg) {
  const ModelSpec spec = model_spec(cfg);
  const DataSplits data = load_data(cfg);
  const auto dir = output_dir(cfg);

  std::vector<ChainRun> runs(static_cast<std::size_t>(cfg.chains));
  parallel_for(cfg.chains, thread_cap(),
               [&](int i) { runs[static_cast<std::size_t>(i)] = run_one_chain(cfg, spec, data.train, i); });

  const ModelSpec merged_spec = standard_spec(spec);
  CsvWriter trace({"chain", "step", "cycle", "step_size", "potential", "d", "d_rel", "sigma_max", "sigma_min"});
  CsvWriter singular({"chain", "sample", "layer", "sigma_max", "sigma_min", "condition"});
  SampleSet all;
  int status = kExitOk;
  for (std::size_t c = 0; c < runs.size(); ++c) {
    const ChainRun& run = runs[c];
    const auto dist = distances(run.samples);
    std::size_t next_sample = 0;
    for (const auto& row : run.steps) {
      std::string d, d_rel, smax, smin;
      if (next_sample < run.samples.size() && row.step + 1 == run.samples.samples[next_sample].step) {
        if (next_sample > 0) {
          d = fmt(dist[next_sample - 1].d);
          d_rel = fmt(dist[next_sample - 1].d_rel);
        }
        double hi = 0.0, lo = 0.0;
        bound_sigma(run.samples.samples[next_sample].params, merged_spec, hi, lo);
        smax = fmt(hi);
        smin = fmt(lo);
        ++next_sample;
      }
      trace.row({fmt(static_cast<Index>(c)), fmt(row.step), fmt(row.cycle), fmt(row.step_size), fmt(row.potential),
                 d, d_rel, smax, smin});
    }
    for (const auto& s : singular_trace(run.samples, merged_spec))
      singular.row({fmt(static_cast<Index>(c)), fmt(s.sample), fmt(s.layer), fmt(s.sigma_max), fmt(s.sigma_min),
                    fmt(s.condition)});
    if (run.diverged_at) {
      std::cerr << "chain " << c << ": " << run.error << "\n";
      status = kExitDiverged;
    }
    all.samples.insert(all.samples.end(), run.samples.samples.begin(), run.samples.samples.end());
  }
  trace.save(dir / "trace.csv");
  singular.save(dir / "singular.csv");
  if (status != kExitOk) return status;

  const std::string path = cfg.checkpoint_path();
  save_samples(all, path);
  Json meta;
  meta["config"] = cfg.to_json();
  meta["samples"] = all.size();
  meta["samples_per_chain"] = cfg.cycles;
  write_sidecar(path, meta);
  std::cout << "collected " << all.size() << " samples into " << path << "\n";
  return kExitOk;
}

// --- eval -----------------------------------------------------------------------

int cmd_eval(const RunConfig& cfg) {
  const ModelSpec spec = standard_spec(model_spec(cfg));
  const SampleSet samples = load_samples(cfg.checkpoint_path());
  if (samples.empty()) throw ConfigError("checkpoint holds no samples");
  const DataSplits data = load_data(cfg);
  const Dataset& test = data.test.size() > 0 ? data.test : data.train;
  const MetricsReport report = evaluate(samples, spec, test, cfg.ece_bins);

  Json j;
  j["split"] = test.split;
  j["examples"] = test.size();
  j["members"] = report.members;
  j["err"] = report.err;
  j["nll"] = report.nll;
  j["amb"] = report.amb;
  j["ece"] = report.ece;
  j["mean_individual_nll"] = report.mean_individual_nll;
  j["individual_nll"] = report.individual_nll;
  write_json(output_dir(cfg) / "metrics.json", j);
  std::cout << "err " << fmt(report.err) << " nll " << fmt(report.nll) << " amb " << fmt(report.amb) << " ece "
            << fmt(report.ece) << "\n";
  return kExitOk;
}

// --- diag -----------------------------------------------------------------------

int cmd_diag(const RunConfig& cfg) {
  const ModelSpec spec = model_spec(cfg);
  const ModelSpec merged_spec = standard_spec(spec);
  const SampleSet samples = load_samples(cfg.checkpoint_path());
  const DataSplits data = load_data(cfg);
  const Dataset probe = data.train.slice(0, std::min(cfg.barrier_examples, data.train.size()));
  const auto dir = output_dir(cfg);

  CsvWriter barrier({"pair", "alpha", "err"});
  for (std::size_t m = 0; m + 1 < samples.size(); ++m)
    for (const auto& [alpha, e] : loss_barrier(samples.samples[m].params, samples.samples[m + 1].params, merged_spec,
                                               probe, cfg.barrier_points))
      barrier.row({fmt(static_cast<Index>(m)), fmt(alpha), fmt(e)});
  barrier.save(dir / "barrier.csv");

  CsvWriter subspace({"kind", "u", "v", "err"});
  if (samples.size() >= 3) {
    try {
      const SubspaceGrid grid = subspace_grid(samples.samples[0].params, samples.samples[1].params,
                                              samples.samples[2].params, merged_spec, probe, cfg.subspace_grid);
      for (std::size_t k = 0; k < 3; ++k) {
        const auto& [u, v] = grid.anchors[k];
        subspace.row({"anchor", fmt(u), fmt(v), fmt(error_rate(samples.samples[k].params, merged_spec, probe))});
      }
      for (std::size_t i = 0; i < grid.v.size(); ++i)
        for (std::size_t j = 0; j < grid.u.size(); ++j)
          subspace.row({"grid", fmt(grid.u[j]), fmt(grid.v[i]),
                        fmt(grid.err(static_cast<Index>(i), static_cast<Index>(j)))});
    } catch (const DegenerateBasisError& e) {
      std::cerr << "subspace skipped: " << e.what() << "\n";
    }
  } else {
    std::cerr << "subspace skipped: needs three samples\n";
  }
  subspace.save(dir / "subspace.csv");

  Schedule schedule;
  schedule.kind = Schedule::Kind::Constant;
  schedule.peak = cfg.bound_step_size;
  schedule.steps_per_cycle = std::max<Index>(cfg.bound_steps, 1);
  schedule.cycles = cfg.bound_steps > 0 ? 1 : 0;
  const RngStream root(cfg.seed);
  RngStream init_rng = root.split(4);
  ParamTree init = init_params(spec, init_rng);
  const auto trace = sgld_bound_trace(spec, data.train, potential_spec(cfg, data.train.size()), schedule,
                                      sampler_config(cfg), std::move(init), root.split(5), root.split(6));
  int depth = 0;
  for (const auto& layer : spec) depth = std::max(depth, layer.mode.depth());
  const BoundReport report = exploration_bound(trace, static_cast<int>(spec.size()), depth);
  CsvWriter bound({"step", "step_size", "lhs", "rhs", "h", "s", "noise", "m", "violated"});
  for (std::size_t t = 0; t < trace.size(); ++t) {
    const auto& row = trace[t];
    const auto& check = report.rows[t];
    bound.row({fmt(row.step), fmt(row.step_size), fmt(check.lhs), fmt(check.rhs), fmt(row.h), fmt(row.s),
               fmt(row.noise), fmt(row.m), check.violated ? "1" : "0"});
  }
  bound.save(dir / "bound.csv");
  std::cout << "bound audit: " << report.violations << " violations over " << trace.size() << " steps\n";
  return kExitOk;
}

// --- entry point ----------------------------------------------------------------

int run_cli(int argc, char** argv) {
  CLI::App app{"Parameter-expanded SGMCMC experiments"};
  app.require_subcommand(1);
  struct Common {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    std::optional<int> chains;
  };
  Common common;
  const std::vector<std::pair<std::string, std::string>> commands = {
      {"mog", "HMC on the 25-Gaussian mixture, direct and factor-expanded"},
      {"sample", "run SGMCMC chains and write a sample checkpoint"},
      {"eval", "ensemble metrics of a sample checkpoint"},
      {"diag", "loss barrier, subspace grid and exploration-bound audit"}};
  for (const auto& [name, help] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->allow_extras();
    sub->add_option("--config", common.config, "flat JSON config file");
    sub->add_option("--seed", common.seed, "run seed");
    sub->add_option("--out", common.out, "output directory");
    sub->add_option("--chains", common.chains, "independent chains (seeds seed+i)");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  const CLI::App* active = app.get_subcommands().front();
  const std::string name = active->get_name();
  try {
    std::vector<std::string> overrides;
    const auto extras = active->remaining();
    for (std::size_t i = 0; i < extras.size(); ++i) {
      const std::string& arg = extras[i];
      if (arg.rfind("--", 0) != 0) throw ConfigError("unexpected argument '" + arg + "'");
      if (arg.find('=') != std::string::npos) {
        overrides.push_back(arg);
      } else if (i + 1 < extras.size() && extras[i + 1].rfind("--", 0) != 0) {
        overrides.push_back(arg + "=" + extras[i + 1]);
        ++i;
      } else {
        throw ConfigError("flag '" + arg + "' needs a value");
      }
    }
    if (common.seed) overrides.push_back("seed=" + std::to_string(*common.seed));
    if (common.out) overrides.push_back("out=" + Json(*common.out).dump());
    if (common.chains) overrides.push_back("chains=" + std::to_string(*common.chains));
    const RunConfig cfg = RunConfig::from_json(merge_config(common.config, overrides));

    if (name == "mog") return cmd_mog(cfg);
    if (name == "sample") return cmd_sample(cfg);
    if (name == "eval") return cmd_eval(cfg);
    return cmd_diag(cfg);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const ShapeError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const DivergedError& e) {
    std::cerr << "diverged: " << e.what() << "\n";
    return kExitDiverged;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return kExitDiverged;
  } catch (const DegenerateBasisError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return kExitDiverged;
  } catch (const IoError& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return kExitIo;
  } catch (const FormatError& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return kExitIo;
  }
}

}  // namespace pxmc
