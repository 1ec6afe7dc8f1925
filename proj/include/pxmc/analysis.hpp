#pragma once

#include <array>
#include <functional>
#include <span>
#include <utility>
#include <vector>

#include "pxmc/data.hpp"
#include "pxmc/nn.hpp"
#include "pxmc/sample_set.hpp"
#include "pxmc/samplers.hpp"

namespace pxmc {

// --- Predictions and metrics ---------------------------------------------------

/// Row-wise softmax.
MatrixX<double> softmax(const MatrixX<double>& logits);

/// Logits of every member of the set on `x`.
std::vector<MatrixX<double>> member_logits(const SampleSet& samples, const ModelSpec& spec, const MatrixX<double>& x);

/// (1/M) sum_m softmax(z_m).
MatrixX<double> bma_from_logits(const std::vector<MatrixX<double>>& logits);
MatrixX<double> bma_predict(const SampleSet& samples, const ModelSpec& spec, const MatrixX<double>& x);

/// Fraction of argmax mismatches; ties go to the lowest class index.
double err(const MatrixX<double>& probs, std::span<const int> labels);
/// -(1/N) sum_i log p_i(y_i).
double nll(const MatrixX<double>& probs, std::span<const int> labels);

struct Ambiguity {
  double average_loss = 0.0;   // mean over members of the member cross-entropy
  double ensemble_loss = 0.0;  // cross-entropy of softmax(mean logits)
  double amb = 0.0;            // average_loss - ensemble_loss
};
Ambiguity ambiguity(const std::vector<MatrixX<double>>& logits, std::span<const int> labels);
double amb(const std::vector<MatrixX<double>>& logits, std::span<const int> labels);

/// Binned |accuracy - confidence| over bins ((j-1)/J, j/J].
double ece(const MatrixX<double>& probs, std::span<const int> labels, int bins = 15);

struct MetricsReport {
  double err = 0.0;
  double nll = 0.0;  // ensemble NLL
  double amb = 0.0;
  double ece = 0.0;
  std::vector<double> individual_nll;
  double mean_individual_nll = 0.0;
  Index members = 0;
};
MetricsReport evaluate(const SampleSet& samples, const ModelSpec& spec, const Dataset& data, int ece_bins = 15);

// --- Diversity diagnostics -----------------------------------------------------

struct DistanceRow {
  Index index = 0;      // pair (index, index + 1), 0-based
  double d = 0.0;       // |theta_{m+1} - theta_m|
  double d_rel = 0.0;   // d / |theta_m|
};

struct SingularRow {
  Index sample = 0;
  Index layer = 0;
  double sigma_max = 0.0;
  double sigma_min = 0.0;
  double condition = 0.0;  // sigma_max / sigma_min, +inf when sigma_min is 0
};

struct DiversityTrace {
  std::vector<DistanceRow> distances;
  std::vector<SingularRow> singular;
};

std::vector<DistanceRow> distances(const SampleSet& samples);
/// Singular values of each merged layer weight of each sample.
std::vector<SingularRow> singular_trace(const SampleSet& samples, const ModelSpec& spec);
DiversityTrace diversity_trace(const SampleSet& samples, const ModelSpec& spec);

// --- Preconditioning -----------------------------------------------------------

/// P_X for W_{1:e} = W_1 ... W_e:
///   e = 1: I
///   e = 2: W_2^T W_2 (x) I + I (x) W_1 W_1^T
///   e > 2: sum_j W_{j+1:e}^T W_{j+1:e} (x) W_{1:j-1} W_{1:j-1}^T
MatrixX<double> precond_matrix(std::span<const MatrixX<double>> factors);

using MatrixGradFn = std::function<MatrixX<double>(const MatrixX<double>&)>;

/// One Euler step W_j -= eps dF/dW_j on every factor; returns
/// |vec(dW_{1:e}) + eps P_X vec(G)| / |eps P_X vec(G)| with G = dF/dW_{1:e}.
double precond_flow_check(std::span<const MatrixX<double>> factors, const MatrixGradFn& grad, double eps);

// --- Exploration bound ---------------------------------------------------------

/// Raw per-step measurements of an SGLD run.
struct BoundRow {
  Index step = 0;
  double step_size = 0.0;
  double lhs = 0.0;    // |W(t+1) - W(t)| over all merged layer weights
  double h = 0.0;      // max_l |grad U(W^(l))|, full data
  double s = 0.0;      // max_l |grad U - grad U~| on the step's batch
  double noise = 0.0;  // max_l |noise displacement of W^(l)| / eps
  double m = 0.0;      // max sigma_max over all P_i, V, Q_j
};

struct BoundCheck {
  Index step = 0;
  double lhs = 0.0;
  double rhs = 0.0;
  bool violated = false;
};

struct BoundReport {
  std::vector<BoundCheck> rows;
  Index violations = 0;
};

/// eps L^2 (c + d + 1) M^(c + d) (h + s) + eps L C
double exploration_rhs(double eps, int layers, int depth, double m, double h, double s, double c);

/// rhs per step with h, s, C and M taken as running suprema of the trace.
BoundReport exploration_bound(const std::vector<BoundRow>& trace, int layers, int depth);

/// SGLD on a classifier posterior, recording BoundRow per step. The noise
/// displacement is the difference between the full step and the same step
/// with noise switched off. Gradients at the merged level use the merged
/// weights with the same Gaussian prior.
std::vector<BoundRow> sgld_bound_trace(const ModelSpec& spec, const Dataset& data, const PotentialSpec& potential,
                                       const Schedule& schedule, const SamplerConfig& config, ParamTree init,
                                       RngStream rng, RngStream batch_rng);

// --- Loss landscape ------------------------------------------------------------

/// Classification error of a single parameter set on `data`.
double error_rate(const ParamTree& params, const ModelSpec& spec, const Dataset& data);

/// err at (1 - alpha) theta_a + alpha theta_b for `points` evenly spaced alphas in [0, 1].
std::vector<std::pair<double, double>> loss_barrier(const ParamTree& theta_a, const ParamTree& theta_b,
                                                    const ModelSpec& spec, const Dataset& data, int points = 21);

struct SubspaceGrid {
  VectorX<double> origin;  // theta_0, flattened
  VectorX<double> e1, e2;  // orthonormal basis
  std::vector<double> u;   // first coordinate of each column
  std::vector<double> v;   // second coordinate of each row
  MatrixX<double> err;     // err(i, j) at origin + u[j] e1 + v[i] e2
  std::array<std::pair<double, double>, 3> anchors;  // coordinates of theta_0, theta_1, theta_2
};

/// Gram-Schmidt basis of (theta_1 - theta_0, theta_2 - theta_0) and err on a
/// grid_n x grid_n lattice over the anchors' bounding box widened by 20% per side.
SubspaceGrid subspace_grid(const ParamTree& theta0, const ParamTree& theta1, const ParamTree& theta2,
                           const ModelSpec& spec, const Dataset& data, int grid_n);

/// Parameters at coordinates (u, v) of a grid's plane, shaped like `like`.
ParamTree subspace_point(const SubspaceGrid& grid, const ParamTree& like, double u, double v);

}  // namespace pxmc
