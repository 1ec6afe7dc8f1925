#include "pxmc/nn.hpp"

#include <cmath>

namespace pxmc {

namespace {

using Mat = MatrixX<double>;
using Vec = VectorX<double>;

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

Mat activate(const Mat& z, Activation act) {
  switch (act) {
    case Activation::Swish:
      return z.unaryExpr([](double v) { return v * sigmoid(v); });
    case Activation::Relu:
      return z.cwiseMax(0.0);
    case Activation::Identity:
      return z;
  }
  return z;
}

Mat activation_derivative(const Mat& z, Activation act) {
  switch (act) {
    case Activation::Swish:
      return z.unaryExpr([](double v) {
        const double s = sigmoid(v);
        return s + v * s * (1.0 - s);
      });
    case Activation::Relu:
      return z.unaryExpr([](double v) { return v > 0.0 ? 1.0 : 0.0; });
    case Activation::Identity:
      return Mat::Ones(z.rows(), z.cols());
  }
  return Mat::Ones(z.rows(), z.cols());
}

std::string expanded_key(std::size_t layer, char side, int index) {
  return layer_key(layer, std::string(1, side) + std::to_string(index));
}

// Expanded factors of one layer, in the tree's own representation.
struct LayerFactors {
  std::vector<Mat> p;  // P_1 .. P_c
  Mat v;
  std::vector<Mat> q;  // Q_1 .. Q_d
  Vec a;
};

Mat read_expanded(const ParamTree& params, const std::string& key, const ParamMode& mode) {
  if (mode.kind == ParamMode::Kind::LowRank)
    return low_rank_matrix(params.at(key + ".D"), params.at(key + ".L1"), params.at(key + ".L2"));
  return params.at(key).matrix();
}

LayerFactors read_layer(const ParamTree& params, const LayerSpec& s, std::size_t layer) {
  LayerFactors f;
  const int c = s.mode.kind == ParamMode::Kind::Standard ? 0 : s.mode.c;
  const int d = s.mode.kind == ParamMode::Kind::Standard ? 0 : s.mode.d;
  for (int i = 1; i <= c; ++i) f.p.push_back(read_expanded(params, expanded_key(layer, 'P', i), s.mode));
  f.v = params.at(layer_key(layer, "V")).matrix();
  for (int j = 1; j <= d; ++j) f.q.push_back(read_expanded(params, expanded_key(layer, 'Q', j), s.mode));
  f.a = params.at(layer_key(layer, "a")).flat();
  if (f.v.rows() != s.out || f.v.cols() != s.in || f.a.size() != s.out)
    throw ShapeError("layer " + std::to_string(layer) + " parameters do not match its spec");
  return f;
}

// Left-to-right factor list P_c, ..., P_1, V, Q_1, ..., Q_d.
std::vector<Mat> weight_chain(const LayerFactors& f) {
  std::vector<Mat> chain(f.p.rbegin(), f.p.rend());
  chain.push_back(f.v);
  chain.insert(chain.end(), f.q.begin(), f.q.end());
  return chain;
}

void store_expanded_grad(ParamTree& grads, const std::string& key, const ParamMode& mode, const ParamTree& params,
                         const Mat& g) {
  if (mode.kind == ParamMode::Kind::LowRank) {
    const Mat l1 = params.at(key + ".L1").matrix();
    const Mat l2 = params.at(key + ".L2").matrix();
    grads.at(key + ".D").flat() = g.diagonal();
    grads.at(key + ".L1").matrix() = l2 * g.transpose();
    grads.at(key + ".L2").matrix() = l1 * g;
  } else {
    grads.at(key).matrix() = g;
  }
}

// Maps merged-weight gradients (dW, db) of one layer onto its factors.
void layer_gradients(const ParamTree& params, const LayerSpec& s, std::size_t layer, const Mat& grad_w,
                     const Vec& grad_b, ParamTree& grads) {
  if (params.contains(layer_key(layer, "W"))) {
    grads.at(layer_key(layer, "W")).matrix() = grad_w;
    grads.at(layer_key(layer, "b")).flat() = grad_b;
    return;
  }
  const LayerFactors f = read_layer(params, s, layer);
  const int c = static_cast<int>(f.p.size());
  const int d = static_cast<int>(f.q.size());

  const std::vector<Mat> chain = weight_chain(f);
  std::vector<Mat> g = product_gradients(chain, grad_w);

  // bias path b = P_c ... P_1 a
  std::vector<Mat> bias_chain(f.p.rbegin(), f.p.rend());
  bias_chain.push_back(f.a);
  const std::vector<Mat> gb = product_gradients(bias_chain, grad_b);

  // chain index k holds P_{c-k}
  for (int k = 0; k < c; ++k) {
    const int i = c - k;
    store_expanded_grad(grads, expanded_key(layer, 'P', i), s.mode, params, g[k] + gb[k]);
  }
  grads.at(layer_key(layer, "V")).matrix() = g[c];
  for (int j = 1; j <= d; ++j) store_expanded_grad(grads, expanded_key(layer, 'Q', j), s.mode, params, g[c + j]);
  grads.at(layer_key(layer, "a")).flat() = gb[c];
}

}  // namespace

Activation parse_activation(const std::string& name) {
  if (name == "swish") return Activation::Swish;
  if (name == "relu") return Activation::Relu;
  if (name == "identity") return Activation::Identity;
  throw ConfigError("unknown activation '" + name + "'");
}

std::string to_string(Activation act) {
  switch (act) {
    case Activation::Swish:
      return "swish";
    case Activation::Relu:
      return "relu";
    case Activation::Identity:
      return "identity";
  }
  return "?";
}

ModelSpec mlp_spec(const std::vector<Index>& widths, Activation act, ParamMode mode) {
  if (widths.size() < 2) throw ConfigError("an MLP needs at least input and output widths");
  ModelSpec spec;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) spec.push_back({widths[l], widths[l + 1], act, mode});
  validate(spec);
  return spec;
}

ModelSpec standard_spec(const ModelSpec& spec) {
  ModelSpec out = spec;
  for (auto& s : out) s.mode = ParamMode::standard();
  return out;
}

void validate(const ModelSpec& spec) {
  if (spec.empty()) throw ConfigError("model has no layers");
  for (std::size_t l = 0; l < spec.size(); ++l) {
    const auto& s = spec[l];
    if (s.in <= 0 || s.out <= 0) throw ConfigError("layer " + std::to_string(l) + " has zero width");
    if (l > 0 && spec[l - 1].out != s.in) throw ConfigError("layer " + std::to_string(l) + " input width mismatch");
    if (s.mode.c < 0 || s.mode.d < 0) throw ConfigError("negative expansion depth");
    if (s.mode.kind == ParamMode::Kind::LowRank) {
      const bool too_wide = (s.mode.c > 0 && s.mode.rank > s.out) || (s.mode.d > 0 && s.mode.rank > s.in);
      if (s.mode.rank < 1 || too_wide)
        throw ConfigError("low-rank expansion rank must be in [1, width]");
    }
  }
}

std::string layer_key(std::size_t layer, const std::string& role) {
  return "l" + std::to_string(layer) + "." + role;
}

ParamTree init_params(const ModelSpec& spec, RngStream& rng, EpInit ep_init) {
  validate(spec);
  constexpr double kBalancedScale = 1e-3;
  ParamTree tree;

  auto expanded = [&](const std::string& key, Index width, const ParamMode& mode) {
    if (mode.kind == ParamMode::Kind::LowRank) {
      Tensor diag = Tensor::from_vector(Vec::Ones(width));
      if (ep_init == EpInit::Balanced) diag += kBalancedScale * gaussian(rng, {width});
      tree.add(key + ".D", std::move(diag));
      tree.add(key + ".L1", Tensor({mode.rank, width}));
      tree.add(key + ".L2", Tensor({mode.rank, width}));
    } else {
      Tensor m = Tensor::identity(width);
      if (ep_init == EpInit::Balanced) m += kBalancedScale * gaussian(rng, {width, width});
      tree.add(key, std::move(m));
    }
  };

  for (std::size_t l = 0; l < spec.size(); ++l) {
    const auto& s = spec[l];
    const bool standard = s.mode.kind == ParamMode::Kind::Standard;
    Tensor v = gaussian(rng, {s.out, s.in});
    v *= std::sqrt(2.0 / static_cast<double>(s.in));
    if (!standard)
      for (int i = 1; i <= s.mode.c; ++i) expanded(expanded_key(l, 'P', i), s.out, s.mode);
    tree.add(layer_key(l, "V"), std::move(v));
    if (!standard)
      for (int j = 1; j <= s.mode.d; ++j) expanded(expanded_key(l, 'Q', j), s.in, s.mode);
    tree.add(layer_key(l, "a"), Tensor({s.out}));
  }
  return tree;
}

Mat chain_product(std::span<const Mat> factors, Index n_identity) {
  if (factors.empty()) return Mat::Identity(n_identity, n_identity);
  Mat out = factors.front();
  for (std::size_t i = 1; i < factors.size(); ++i) {
    if (out.cols() != factors[i].rows()) throw ShapeError("chain_product: factors are not conformable");
    out = out * factors[i];
  }
  return out;
}

std::vector<Mat> product_gradients(std::span<const Mat> factors, const Mat& grad_product) {
  const std::size_t n = factors.size();
  std::vector<Mat> grads(n);
  if (n == 0) return grads;
  // prefix[j] = F_0..F_{j-1}, suffix[j] = F_{j+1}..F_{n-1}
  std::vector<Mat> prefix(n), suffix(n);
  prefix[0] = Mat::Identity(factors[0].rows(), factors[0].rows());
  for (std::size_t j = 1; j < n; ++j) prefix[j] = prefix[j - 1] * factors[j - 1];
  suffix[n - 1] = Mat::Identity(factors[n - 1].cols(), factors[n - 1].cols());
  for (std::size_t j = n - 1; j-- > 0;) suffix[j] = factors[j + 1] * suffix[j + 1];
  if (grad_product.rows() != prefix[0].rows() || grad_product.cols() != suffix[n - 1].cols())
    throw ShapeError("product_gradients: gradient does not match the product shape");
  for (std::size_t j = 0; j < n; ++j) grads[j] = prefix[j].transpose() * grad_product * suffix[j].transpose();
  return grads;
}

MergedLayer merge_linear(std::span<const Mat> p, const Mat& v, std::span<const Mat> q, const Vec& a) {
  for (const auto& m : p)
    if (m.rows() != v.rows() || m.cols() != v.rows()) throw ShapeError("merge_linear: P must be out x out");
  for (const auto& m : q)
    if (m.rows() != v.cols() || m.cols() != v.cols()) throw ShapeError("merge_linear: Q must be in x in");
  if (a.size() != v.rows()) throw ShapeError("merge_linear: bias length must equal out");
  Mat left = Mat::Identity(v.rows(), v.rows());
  for (const auto& m : p) left = m * left;  // P_c ... P_1
  const Mat right = chain_product(q, v.cols());
  return {left * v * right, left * a};
}

Mat low_rank_matrix(const Tensor& diag, const Tensor& l1, const Tensor& l2) {
  if (l1.dims() != l2.dims() || l1.rank() != 2 || diag.size() != l1.dim(1))
    throw ShapeError("low-rank pieces do not agree");
  Mat m = l1.matrix().transpose() * l2.matrix();
  m.diagonal() += diag.flat();
  return m;
}

std::vector<MergedLayer> merged_layers(const ParamTree& params, const ModelSpec& spec) {
  std::vector<MergedLayer> layers;
  layers.reserve(spec.size());
  for (std::size_t l = 0; l < spec.size(); ++l) {
    if (params.contains(layer_key(l, "W"))) {
      MergedLayer m{params.at(layer_key(l, "W")).matrix(), params.at(layer_key(l, "b")).flat()};
      if (m.weight.rows() != spec[l].out || m.weight.cols() != spec[l].in)
        throw ShapeError("merged layer " + std::to_string(l) + " does not match its spec");
      layers.push_back(std::move(m));
      continue;
    }
    const LayerFactors f = read_layer(params, spec[l], l);
    layers.push_back(merge_linear(f.p, f.v, f.q, f.a));
  }
  return layers;
}

std::vector<Mat> layer_chain(const ParamTree& params, const ModelSpec& spec, std::size_t layer) {
  if (layer >= spec.size()) throw ShapeError("layer index out of range");
  if (params.contains(layer_key(layer, "W"))) return {params.at(layer_key(layer, "W")).matrix()};
  return weight_chain(read_layer(params, spec[layer], layer));
}

ParamTree merge_params(const ParamTree& params, const ModelSpec& spec) {
  ParamTree out;
  const auto layers = merged_layers(params, spec);
  for (std::size_t l = 0; l < layers.size(); ++l) {
    out.add(layer_key(l, "W"), Tensor::from_matrix(layers[l].weight));
    out.add(layer_key(l, "b"), Tensor::from_vector(layers[l].bias));
  }
  return out;
}

ParamTree standard_params(const std::vector<MergedLayer>& layers) {
  ParamTree out;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    out.add(layer_key(l, "V"), Tensor::from_matrix(layers[l].weight));
    out.add(layer_key(l, "a"), Tensor::from_vector(layers[l].bias));
  }
  return out;
}

namespace {

void require_conv_dims(const Mat& p, const Tensor& v, const Mat& q) {
  if (v.rank() != 4 || v.dim(0) != v.dim(1)) throw ShapeError("conv kernel must be k x k x c_out x c_in");
  if (p.rows() != v.dim(2) || p.cols() != v.dim(2)) throw ShapeError("conv P must be c_out x c_out");
  if (q.rows() != v.dim(3) || q.cols() != v.dim(3)) throw ShapeError("conv Q must be c_in x c_in");
}

Mat kernel_slice(const Tensor& t, Index a, Index b) {
  Mat s(t.dim(2), t.dim(3));
  for (Index l = 0; l < t.dim(3); ++l)
    for (Index u = 0; u < t.dim(2); ++u) s(u, l) = t(a, b, u, l);
  return s;
}

void set_kernel_slice(Tensor& t, Index a, Index b, const Mat& s) {
  for (Index l = 0; l < t.dim(3); ++l)
    for (Index u = 0; u < t.dim(2); ++u) t(a, b, u, l) = s(u, l);
}

}  // namespace

Tensor merge_conv(const Mat& p, const Tensor& v, const Mat& q) {
  require_conv_dims(p, v, q);
  Tensor w(v.dims());
  for (Index b = 0; b < v.dim(1); ++b)
    for (Index a = 0; a < v.dim(0); ++a) set_kernel_slice(w, a, b, p * kernel_slice(v, a, b) * q);
  return w;
}

Vec merge_conv_bias(const Mat& p, const Vec& a) {
  if (p.cols() != a.size()) throw ShapeError("merge_conv_bias: P and bias disagree");
  return p * a;
}

ConvMergeGrad merge_conv_backward(const Mat& p, const Tensor& v, const Mat& q, const Tensor& grad_w) {
  require_conv_dims(p, v, q);
  v.require_same_dims(grad_w);
  ConvMergeGrad g{Mat::Zero(p.rows(), p.cols()), Tensor(v.dims()), Mat::Zero(q.rows(), q.cols())};
  for (Index b = 0; b < v.dim(1); ++b) {
    for (Index a = 0; a < v.dim(0); ++a) {
      const Mat s = kernel_slice(v, a, b);
      const Mat gs = kernel_slice(grad_w, a, b);
      g.p += gs * (s * q).transpose();
      g.q += (p * s).transpose() * gs;
      set_kernel_slice(g.v, a, b, p.transpose() * gs * q.transpose());
    }
  }
  return g;
}

Vec merge_frn(const Mat& p, const Mat& q, const Vec& s) {
  if (p.cols() != q.rows() || q.cols() != s.size() || p.rows() != s.size() || p.cols() < s.size())
    throw ShapeError("merge_frn: P must be c_o x w and Q w x c_o with w >= c_o");
  return p * (q * s);
}

FrnMergeGrad merge_frn_backward(const Mat& p, const Mat& q, const Vec& s, const Vec& grad_out) {
  merge_frn(p, q, s);
  return {grad_out * (q * s).transpose(), p.transpose() * grad_out * s.transpose(),
          q.transpose() * (p.transpose() * grad_out)};
}

MatrixX<double> forward(const ParamTree& params, const ModelSpec& spec, const Mat& x) {
  const auto layers = merged_layers(params, spec);
  if (x.cols() != spec.front().in) throw ShapeError("forward: input width does not match the model");
  Mat h = x;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    Mat z = h * layers[l].weight.transpose();
    z.rowwise() += layers[l].bias.transpose();
    h = l + 1 < layers.size() ? activate(z, spec[l].activation) : std::move(z);
  }
  return h;
}

ParamTree backward(const ParamTree& params, const ModelSpec& spec, const Mat& x, const Mat& grad_outputs) {
  const auto layers = merged_layers(params, spec);
  if (x.cols() != spec.front().in) throw ShapeError("backward: input width does not match the model");

  std::vector<Mat> inputs;       // h^(l-1) per layer
  std::vector<Mat> preactivations;
  Mat h = x;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    inputs.push_back(h);
    Mat z = h * layers[l].weight.transpose();
    z.rowwise() += layers[l].bias.transpose();
    if (l + 1 < layers.size()) h = activate(z, spec[l].activation);
    preactivations.push_back(std::move(z));
  }
  if (grad_outputs.rows() != x.rows() || grad_outputs.cols() != spec.back().out)
    throw ShapeError("backward: output gradient has the wrong shape");

  ParamTree grads = params.zeros_like();
  Mat dz = grad_outputs;
  for (std::size_t l = layers.size(); l-- > 0;) {
    const Mat grad_w = dz.transpose() * inputs[l];
    const Vec grad_b = dz.colwise().sum().transpose();
    layer_gradients(params, spec[l], l, grad_w, grad_b, grads);
    if (l > 0) {
      const Mat dh = dz * layers[l].weight;
      dz = dh.cwiseProduct(activation_derivative(preactivations[l - 1], spec[l - 1].activation));
    }
  }
  return grads;
}

CrossEntropy cross_entropy(const Mat& logits, std::span<const int> labels) {
  if (static_cast<Index>(labels.size()) != logits.rows()) throw ShapeError("cross_entropy: label count mismatch");
  CrossEntropy out{0.0, Mat(logits.rows(), logits.cols())};
  for (Index i = 0; i < logits.rows(); ++i) {
    const int y = labels[static_cast<std::size_t>(i)];
    if (y < 0 || y >= logits.cols()) throw ShapeError("cross_entropy: label out of range");
    const double peak = logits.row(i).maxCoeff();
    const auto shifted = (logits.row(i).array() - peak).eval();
    const double log_norm = std::log(shifted.exp().sum());
    out.loss += log_norm - shifted(y);
    out.grad_logits.row(i) = (shifted - log_norm).exp().matrix();
    out.grad_logits(i, y) -= 1.0;
  }
  return out;
}

LossAndGrad cross_entropy_gradient(const ParamTree& params, const ModelSpec& spec, const Mat& x,
                                   std::span<const int> labels, double scale) {
  const Mat logits = forward(params, spec, x);
  CrossEntropy ce = cross_entropy(logits, labels);
  ce.grad_logits *= scale;
  return {scale * ce.loss, backward(params, spec, x, ce.grad_logits)};
}

}  // namespace pxmc
