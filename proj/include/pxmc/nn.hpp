#pragma once

#include <span>
#include <string>
#include <vector>

#include "pxmc/param_tree.hpp"
#include "pxmc/tensor.hpp"

namespace pxmc {

enum class Activation { Swish, Relu, Identity };

Activation parse_activation(const std::string& name);
std::string to_string(Activation act);

/// How a layer's weight is parameterized.
struct ParamMode {
  enum class Kind { Standard, Expanded, LowRank };
  Kind kind = Kind::Standard;
  int c = 0;     // left expanded matrices (P_1..P_c, out x out)
  int d = 0;     // right expanded matrices (Q_1..Q_d, in x in)
  int rank = 0;  // LowRank only: each expanded matrix is diag(D) + L1^T L2

  static ParamMode standard() { return {}; }
  static ParamMode expanded(int c, int d) { return {Kind::Expanded, c, d, 0}; }
  static ParamMode low_rank(int c, int d, int rank) { return {Kind::LowRank, c, d, rank}; }

  int depth() const { return kind == Kind::Standard ? 0 : c + d; }
  friend bool operator==(const ParamMode&, const ParamMode&) = default;
};

struct LayerSpec {
  Index in = 0;
  Index out = 0;
  Activation activation = Activation::Swish;  // ignored on the final layer
  ParamMode mode;
};

using ModelSpec = std::vector<LayerSpec>;

/// MLP over `widths` (input, hidden..., output) with one mode for every layer.
ModelSpec mlp_spec(const std::vector<Index>& widths, Activation act, ParamMode mode);
/// Same architecture with every layer in the standard parameterization.
ModelSpec standard_spec(const ModelSpec& spec);
void validate(const ModelSpec& spec);

enum class EpInit { Identity, Balanced };

/// He-normal base matrices, zero biases, identity expanded matrices
/// (Balanced: I + 1e-3 N(0, 1)). Low-rank pieces start at D = 1, L1 = L2 = 0.
ParamTree init_params(const ModelSpec& spec, RngStream& rng, EpInit ep_init = EpInit::Identity);

// Entry names used in parameter trees.
std::string layer_key(std::size_t layer, const std::string& role);

/// Ordered product F_0 F_1 ... F_{n-1}; identity(n_identity) if empty.
MatrixX<double> chain_product(std::span<const MatrixX<double>> factors, Index n_identity);

/// Gradients of a loss through W = F_0 ... F_{n-1} given dL/dW:
///   dL/dF_j = (F_0..F_{j-1})^T dL/dW (F_{j+1}..F_{n-1})^T.
std::vector<MatrixX<double>> product_gradients(std::span<const MatrixX<double>> factors,
                                               const MatrixX<double>& grad_product);

struct MergedLayer {
  MatrixX<double> weight;  // out x in
  VectorX<double> bias;    // out
};

/// W = P_c ... P_1 V Q_1 ... Q_d and b = P_c ... P_1 a.
MergedLayer merge_linear(std::span<const MatrixX<double>> p, const MatrixX<double>& v,
                         std::span<const MatrixX<double>> q, const VectorX<double>& a);

/// Expanded matrix materialized from its low-rank-plus-diagonal pieces.
MatrixX<double> low_rank_matrix(const Tensor& diag, const Tensor& l1, const Tensor& l2);

/// Merged (W, b) of every layer. Accepts expanded trees and merged trees
/// (entries named l<k>.W / l<k>.b).
std::vector<MergedLayer> merged_layers(const ParamTree& params, const ModelSpec& spec);
/// Left-to-right factors P_c, ..., P_1, V, Q_1, ..., Q_d of one layer
/// (low-rank pieces materialized). A merged tree yields just W.
std::vector<MatrixX<double>> layer_chain(const ParamTree& params, const ModelSpec& spec, std::size_t layer);
/// Merged tree with entries l<k>.W, l<k>.b.
ParamTree merge_params(const ParamTree& params, const ModelSpec& spec);
/// Standard-parameterization tree (l<k>.V, l<k>.a) from merged weights.
ParamTree standard_params(const std::vector<MergedLayer>& layers);

// Convolution kernel merge on channels: W_abij = sum_{u,l} P_iu V_abul Q_lj,
// kernel dims (k, k, c_out, c_in).
Tensor merge_conv(const MatrixX<double>& p, const Tensor& v, const MatrixX<double>& q);
VectorX<double> merge_conv_bias(const MatrixX<double>& p, const VectorX<double>& a);

struct ConvMergeGrad {
  MatrixX<double> p;
  Tensor v;
  MatrixX<double> q;
};
ConvMergeGrad merge_conv_backward(const MatrixX<double>& p, const Tensor& v, const MatrixX<double>& q,
                                  const Tensor& grad_w);

/// FRN vector merge s_i = sum_{u,l} P_iu Q_ul s_l, P c_o x w, Q w x c_o (w >= c_o).
VectorX<double> merge_frn(const MatrixX<double>& p, const MatrixX<double>& q, const VectorX<double>& s);

struct FrnMergeGrad {
  MatrixX<double> p;
  MatrixX<double> q;
  VectorX<double> s;
};
FrnMergeGrad merge_frn_backward(const MatrixX<double>& p, const MatrixX<double>& q, const VectorX<double>& s,
                                const VectorX<double>& grad_out);

/// Network outputs (logits) for a batch of rows, merging expanded layers on the fly.
MatrixX<double> forward(const ParamTree& params, const ModelSpec& spec, const MatrixX<double>& x);

/// Gradient w.r.t. every tensor in `params` given dL/d(outputs).
ParamTree backward(const ParamTree& params, const ModelSpec& spec, const MatrixX<double>& x,
                   const MatrixX<double>& grad_outputs);

/// Summed softmax cross-entropy and its gradient w.r.t. logits.
struct CrossEntropy {
  double loss = 0.0;
  MatrixX<double> grad_logits;
};
CrossEntropy cross_entropy(const MatrixX<double>& logits, std::span<const int> labels);

/// scale * summed cross-entropy of the batch and its parameter gradient.
struct LossAndGrad {
  double loss = 0.0;
  ParamTree grad;
};
LossAndGrad cross_entropy_gradient(const ParamTree& params, const ModelSpec& spec, const MatrixX<double>& x,
                                   std::span<const int> labels, double scale = 1.0);

}  // namespace pxmc
