#include "pxmc/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace pxmc {

namespace {

using Mat = MatrixX<double>;
using Vec = VectorX<double>;

void require_labels(const Mat& probs, std::span<const int> labels, const char* what) {
  if (static_cast<Index>(labels.size()) != probs.rows())
    throw ShapeError(std::string(what) + ": " + std::to_string(labels.size()) + " labels for " +
                     std::to_string(probs.rows()) + " rows");
  for (int y : labels)
    if (y < 0 || y >= probs.cols()) throw ShapeError(std::string(what) + ": label out of range");
}

Index argmax_row(const Mat& m, Index i) {
  Index best = 0;
  for (Index k = 1; k < m.cols(); ++k)
    if (m(i, k) > m(i, best)) best = k;
  return best;
}

// Mean cross-entropy of softmax(logits).
double mean_cross_entropy(const Mat& logits, std::span<const int> labels) {
  return cross_entropy(logits, labels).loss / static_cast<double>(logits.rows());
}

double max_sigma(const Mat& m) {
  const auto values = svd_values(m);
  return values.empty() ? 0.0 : values.front();
}

}  // namespace

Mat softmax(const Mat& logits) {
  Mat out(logits.rows(), logits.cols());
  for (Index i = 0; i < logits.rows(); ++i) {
    const auto e = (logits.row(i).array() - logits.row(i).maxCoeff()).exp().eval();
    out.row(i) = (e / e.sum()).matrix();
  }
  return out;
}

std::vector<Mat> member_logits(const SampleSet& samples, const ModelSpec& spec, const Mat& x) {
  std::vector<Mat> out;
  out.reserve(samples.size());
  for (const auto& s : samples.samples) out.push_back(forward(s.params, spec, x));
  return out;
}

Mat bma_from_logits(const std::vector<Mat>& logits) {
  if (logits.empty()) throw ConfigError("BMA needs at least one member");
  Mat probs = Mat::Zero(logits.front().rows(), logits.front().cols());
  for (const auto& z : logits) {
    if (z.rows() != probs.rows() || z.cols() != probs.cols()) throw ShapeError("BMA members disagree in shape");
    probs += softmax(z);
  }
  return probs / static_cast<double>(logits.size());
}

Mat bma_predict(const SampleSet& samples, const ModelSpec& spec, const Mat& x) {
  if (samples.empty()) throw ConfigError("BMA needs at least one member");
  return bma_from_logits(member_logits(samples, spec, x));
}

double err(const Mat& probs, std::span<const int> labels) {
  require_labels(probs, labels, "err");
  if (probs.rows() == 0) return 0.0;
  Index wrong = 0;
  for (Index i = 0; i < probs.rows(); ++i)
    if (argmax_row(probs, i) != labels[static_cast<std::size_t>(i)]) ++wrong;
  return static_cast<double>(wrong) / static_cast<double>(probs.rows());
}

double nll(const Mat& probs, std::span<const int> labels) {
  require_labels(probs, labels, "nll");
  if (probs.rows() == 0) return 0.0;
  double total = 0.0;
  for (Index i = 0; i < probs.rows(); ++i) total -= std::log(probs(i, labels[static_cast<std::size_t>(i)]));
  return total / static_cast<double>(probs.rows());
}

Ambiguity ambiguity(const std::vector<Mat>& logits, std::span<const int> labels) {
  if (logits.empty()) throw ConfigError("ambiguity needs at least one member");
  Mat mean = Mat::Zero(logits.front().rows(), logits.front().cols());
  Ambiguity out;
  for (const auto& z : logits) {
    if (z.rows() != mean.rows() || z.cols() != mean.cols()) throw ShapeError("ensemble members disagree in shape");
    out.average_loss += mean_cross_entropy(z, labels);
    mean += z;
  }
  const double m = static_cast<double>(logits.size());
  out.average_loss /= m;
  out.ensemble_loss = mean_cross_entropy(mean / m, labels);
  out.amb = out.average_loss - out.ensemble_loss;
  return out;
}

double amb(const std::vector<Mat>& logits, std::span<const int> labels) { return ambiguity(logits, labels).amb; }

double ece(const Mat& probs, std::span<const int> labels, int bins) {
  require_labels(probs, labels, "ece");
  if (bins < 1) throw ConfigError("ECE needs at least one bin");
  if (probs.rows() == 0) return 0.0;
  std::vector<double> confidence(static_cast<std::size_t>(bins), 0.0);
  std::vector<double> correct(static_cast<std::size_t>(bins), 0.0);
  std::vector<Index> count(static_cast<std::size_t>(bins), 0);
  for (Index i = 0; i < probs.rows(); ++i) {
    const Index k = argmax_row(probs, i);
    const double conf = probs(i, k);
    const int j = std::clamp(static_cast<int>(std::ceil(conf * bins)), 1, bins) - 1;
    confidence[static_cast<std::size_t>(j)] += conf;
    correct[static_cast<std::size_t>(j)] += k == labels[static_cast<std::size_t>(i)] ? 1.0 : 0.0;
    ++count[static_cast<std::size_t>(j)];
  }
  double total = 0.0;
  for (std::size_t j = 0; j < count.size(); ++j)
    if (count[j] > 0) total += std::abs(correct[j] - confidence[j]);
  return total / static_cast<double>(probs.rows());
}

MetricsReport evaluate(const SampleSet& samples, const ModelSpec& spec, const Dataset& data, int ece_bins) {
  data.validate();
  const auto logits = member_logits(samples, spec, data.features);
  const Mat probs = bma_from_logits(logits);
  MetricsReport report;
  report.members = static_cast<Index>(logits.size());
  report.err = err(probs, data.labels);
  report.nll = nll(probs, data.labels);
  report.amb = amb(logits, data.labels);
  report.ece = ece(probs, data.labels, ece_bins);
  for (const auto& z : logits) report.individual_nll.push_back(mean_cross_entropy(z, data.labels));
  double sum = 0.0;
  for (double v : report.individual_nll) sum += v;
  report.mean_individual_nll = sum / static_cast<double>(report.members);
  return report;
}

std::vector<DistanceRow> distances(const SampleSet& samples) {
  std::vector<DistanceRow> rows;
  for (std::size_t m = 0; m + 1 < samples.size(); ++m) {
    const Vec a = samples.samples[m].params.flatten();
    const Vec b = samples.samples[m + 1].params.flatten();
    if (a.size() != b.size()) throw ShapeError("consecutive samples have different sizes");
    const double d = (b - a).norm();
    const double base = a.norm();
    double rel = 0.0;
    if (base > 0.0)
      rel = d / base;
    else if (d > 0.0)
      rel = std::numeric_limits<double>::infinity();
    rows.push_back({static_cast<Index>(m), d, rel});
  }
  return rows;
}

std::vector<SingularRow> singular_trace(const SampleSet& samples, const ModelSpec& spec) {
  std::vector<SingularRow> rows;
  for (std::size_t m = 0; m < samples.size(); ++m) {
    const auto layers = merged_layers(samples.samples[m].params, spec);
    for (std::size_t l = 0; l < layers.size(); ++l) {
      const auto values = svd_values(layers[l].weight);
      SingularRow row{static_cast<Index>(m), static_cast<Index>(l), values.front(), values.back(), 0.0};
      row.condition = row.sigma_min > 0.0 ? row.sigma_max / row.sigma_min : std::numeric_limits<double>::infinity();
      rows.push_back(row);
    }
  }
  return rows;
}

DiversityTrace diversity_trace(const SampleSet& samples, const ModelSpec& spec) {
  return {distances(samples), singular_trace(samples, spec)};
}

MatrixX<double> precond_matrix(std::span<const Mat> factors) {
  if (factors.empty()) throw ShapeError("precond_matrix needs at least one factor");
  for (std::size_t i = 0; i + 1 < factors.size(); ++i)
    if (factors[i].cols() != factors[i + 1].rows()) throw ShapeError("precond_matrix: factors are not conformable");
  const std::size_t e = factors.size();
  const Index rows = factors.front().rows();
  const Index cols = factors.back().cols();
  const Mat ir = Mat::Identity(rows, rows);
  const Mat ic = Mat::Identity(cols, cols);

  if (e == 1) return Mat::Identity(rows * cols, rows * cols);

  if (e == 2) {
    const Mat& w1 = factors[0];
    const Mat& w2 = factors[1];
    return kron(w2.transpose() * w2, ir) + kron(ic, w1 * w1.transpose());
  }

  // W_{j+1:e} and W_{1:j-1} for j = 1..e, with empty products as identities.
  Mat p = Mat::Zero(rows * cols, rows * cols);
  for (std::size_t j = 0; j < e; ++j) {
    const Mat left = chain_product(factors.subspan(0, j), rows);
    const Mat right = chain_product(factors.subspan(j + 1), cols);
    p += kron(right.transpose() * right, left * left.transpose());
  }
  return p;
}

double precond_flow_check(std::span<const Mat> factors, const MatrixGradFn& grad, double eps) {
  if (factors.empty()) throw ShapeError("precond_flow_check needs at least one factor");
  const Mat w = chain_product(factors, factors.front().rows());
  const Mat g = grad(w);
  if (g.rows() != w.rows() || g.cols() != w.cols()) throw ShapeError("gradient does not match the merged matrix");
  const auto factor_grads = product_gradients(factors, g);

  std::vector<Mat> stepped(factors.begin(), factors.end());
  for (std::size_t j = 0; j < stepped.size(); ++j) stepped[j] -= eps * factor_grads[j];
  const Mat dw = chain_product(stepped, w.rows()) - w;

  const Vec target = eps * precond_matrix(factors) * vec(g);
  const double denom = target.norm();
  const double num = (vec(dw) + target).norm();
  if (denom == 0.0) return num == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
  return num / denom;
}

double exploration_rhs(double eps, int layers, int depth, double m, double h, double s, double c) {
  const double l = static_cast<double>(layers);
  return eps * l * l * static_cast<double>(depth + 1) * std::pow(m, depth) * (h + s) + eps * l * c;
}

BoundReport exploration_bound(const std::vector<BoundRow>& trace, int layers, int depth) {
  BoundReport report;
  double h = 0.0, s = 0.0, c = 0.0, m = 0.0;
  for (const auto& row : trace) {
    h = std::max(h, row.h);
    s = std::max(s, row.s);
    c = std::max(c, row.noise);
    m = std::max(m, row.m);
    BoundCheck check{row.step, row.lhs, exploration_rhs(row.step_size, layers, depth, m, h, s, c), false};
    check.violated = !(check.lhs <= check.rhs);
    if (check.violated) ++report.violations;
    report.rows.push_back(check);
  }
  return report;
}

namespace {

double max_factor_sigma(const ParamTree& params, const ModelSpec& spec) {
  double m = 0.0;
  for (std::size_t l = 0; l < spec.size(); ++l)
    for (const auto& f : layer_chain(params, spec, l)) m = std::max(m, max_sigma(f));
  return m;
}

// Merged-level weight gradients of U~ on `batch` (prior on W, b).
std::vector<Mat> merged_weight_grads(const std::vector<MergedLayer>& layers, const ModelSpec& sp, const Batch& batch,
                                     const PotentialSpec& potential) {
  const ParamTree grads = potential_gradient(standard_params(layers), sp, batch, potential).grad;
  std::vector<Mat> out;
  for (std::size_t l = 0; l < layers.size(); ++l) out.emplace_back(grads.at(layer_key(l, "V")).matrix());
  return out;
}

}  // namespace

std::vector<BoundRow> sgld_bound_trace(const ModelSpec& spec, const Dataset& data, const PotentialSpec& potential,
                                       const Schedule& schedule, const SamplerConfig& config, ParamTree init,
                                       RngStream rng, RngStream batch_rng) {
  validate(spec);
  potential.validate();
  config.validate();
  if (potential.dataset_size != data.size()) throw ConfigError("potential dataset size does not match the data");
  const ModelSpec sp = standard_spec(spec);
  const Batch full = data.as_batch();
  SamplerConfig quiet = config;
  quiet.inject_noise = false;

  BatchIterator batches(data, potential.batch_size, batch_rng);
  SamplerState state = make_state(SamplerKind::Sgld, std::move(init), rng, config);
  const Index total = schedule.steps_per_cycle * schedule.cycles;
  std::vector<BoundRow> trace;
  trace.reserve(static_cast<std::size_t>(total));
  for (Index t = 0; t < total; ++t) {
    const double eps = step_size(schedule, t);
    const Batch batch = batches.next();
    const PotentialEval eval = potential_gradient(state.position, spec, batch, potential);

    const auto before = merged_layers(state.position, spec);
    const auto g_full = merged_weight_grads(before, sp, full, potential);
    const auto g_batch = merged_weight_grads(before, sp, batch, potential);

    BoundRow row;
    row.step = t;
    row.step_size = eps;
    for (std::size_t l = 0; l < before.size(); ++l) {
      row.h = std::max(row.h, g_full[l].norm());
      row.s = std::max(row.s, (g_full[l] - g_batch[l]).norm());
    }
    row.m = max_factor_sigma(state.position, spec);

    const SamplerState drift = sgld_step(state, eval.grad, eps, quiet);
    state = sgld_step(std::move(state), eval.grad, eps, config);
    const auto after = merged_layers(state.position, spec);
    const auto drifted = merged_layers(drift.position, spec);

    double lhs2 = 0.0;
    for (std::size_t l = 0; l < before.size(); ++l) {
      lhs2 += (after[l].weight - before[l].weight).squaredNorm();
      row.noise = std::max(row.noise, (after[l].weight - drifted[l].weight).norm() / eps);
    }
    row.lhs = std::sqrt(lhs2);
    row.m = std::max(row.m, max_factor_sigma(state.position, spec));
    trace.push_back(row);
  }
  return trace;
}

double error_rate(const ParamTree& params, const ModelSpec& spec, const Dataset& data) {
  return err(softmax(forward(params, spec, data.features)), data.labels);
}

std::vector<std::pair<double, double>> loss_barrier(const ParamTree& theta_a, const ParamTree& theta_b,
                                                    const ModelSpec& spec, const Dataset& data, int points) {
  if (points < 2) throw ConfigError("loss barrier needs at least two points");
  theta_a.require_congruent(theta_b, "loss barrier");
  const Vec a = theta_a.flatten();
  const Vec b = theta_b.flatten();
  std::vector<std::pair<double, double>> out;
  for (int i = 0; i < points; ++i) {
    const double alpha = static_cast<double>(i) / static_cast<double>(points - 1);
    const ParamTree theta = theta_a.unflatten((1.0 - alpha) * a + alpha * b);
    out.emplace_back(alpha, error_rate(theta, spec, data));
  }
  return out;
}

SubspaceGrid subspace_grid(const ParamTree& theta0, const ParamTree& theta1, const ParamTree& theta2,
                           const ModelSpec& spec, const Dataset& data, int grid_n) {
  if (grid_n < 2) throw ConfigError("subspace grid needs at least two points per axis");
  theta0.require_congruent(theta1, "subspace grid");
  theta0.require_congruent(theta2, "subspace grid");
  SubspaceGrid grid;
  grid.origin = theta0.flatten();
  const Vec u = theta1.flatten() - grid.origin;
  const Vec v = theta2.flatten() - grid.origin;

  const double nu = u.norm();
  if (nu == 0.0) throw DegenerateBasisError("first two samples coincide");
  grid.e1 = u / nu;
  const double proj = v.dot(grid.e1);
  const Vec w = v - proj * grid.e1;
  const double nw = w.norm();
  if (nw <= 1e-10 * std::max(nu, v.norm())) throw DegenerateBasisError("samples are collinear");
  grid.e2 = w / nw;
  grid.anchors = {{{0.0, 0.0}, {nu, 0.0}, {proj, nw}}};

  double umin = 0.0, umax = 0.0, vmin = 0.0, vmax = 0.0;
  for (const auto& [a, b] : grid.anchors) {
    umin = std::min(umin, a);
    umax = std::max(umax, a);
    vmin = std::min(vmin, b);
    vmax = std::max(vmax, b);
  }
  const double mu = 0.2 * (umax - umin), mv = 0.2 * (vmax - vmin);
  umin -= mu;
  umax += mu;
  vmin -= mv;
  vmax += mv;

  const double step = 1.0 / static_cast<double>(grid_n - 1);
  for (int i = 0; i < grid_n; ++i) {
    grid.u.push_back(umin + (umax - umin) * step * i);
    grid.v.push_back(vmin + (vmax - vmin) * step * i);
  }
  grid.err.resize(grid_n, grid_n);
  for (int i = 0; i < grid_n; ++i)
    for (int j = 0; j < grid_n; ++j)
      grid.err(i, j) = error_rate(subspace_point(grid, theta0, grid.u[static_cast<std::size_t>(j)],
                                                 grid.v[static_cast<std::size_t>(i)]),
                                  spec, data);
  return grid;
}

ParamTree subspace_point(const SubspaceGrid& grid, const ParamTree& like, double u, double v) {
  return like.unflatten(grid.origin + u * grid.e1 + v * grid.e2);
}

}  // namespace pxmc
