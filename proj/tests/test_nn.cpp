#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "pxmc/nn.hpp"

using namespace pxmc;
using oracle::Mat;
using oracle::Vec;

namespace {

Tensor conv_oracle(const Mat& p, const Tensor& v, const Mat& q) {
  Tensor w(v.dims());
  const Index k = v.dim(0), co = v.dim(2), ci = v.dim(3);
  for (Index a = 0; a < k; ++a)
    for (Index b = 0; b < k; ++b)
      for (Index i = 0; i < co; ++i)
        for (Index j = 0; j < ci; ++j) {
          double s = 0.0;
          for (Index u = 0; u < co; ++u)
            for (Index l = 0; l < ci; ++l) s += p(i, u) * v(a, b, u, l) * q(l, j);
          w(a, b, i, j) = s;
        }
  return w;
}

Vec frn_oracle(const Mat& p, const Mat& q, const Vec& s) {
  Vec out = Vec::Zero(s.size());
  for (Index i = 0; i < s.size(); ++i)
    for (Index u = 0; u < p.cols(); ++u)
      for (Index l = 0; l < s.size(); ++l) out(i) += p(i, u) * q(u, l) * s(l);
  return out;
}

ParamTree perturbed(ParamTree params, RngStream& rng, double scale) {
  for (auto& [name, t] : params) t += scale * gaussian(rng, t.dims());
  return params;
}

struct Problem {
  Mat x;
  std::vector<int> y;
};

Problem small_problem(RngStream& rng, Index n, Index in, int classes) {
  Problem p{oracle::random_matrix(rng, n, in), std::vector<int>(static_cast<std::size_t>(n))};
  for (Index i = 0; i < n; ++i) p.y[static_cast<std::size_t>(i)] = static_cast<int>(rng.index(classes));
  return p;
}

double fd_check(const ParamTree& params, const ModelSpec& spec, const Problem& prob) {
  const auto analytic = cross_entropy_gradient(params, spec, prob.x, prob.y).grad;
  const auto numeric = oracle::fd_gradient(
      [&](const ParamTree& t) { return cross_entropy(forward(t, spec, prob.x), prob.y).loss; }, params);
  return oracle::max_rel_err(analytic.flatten(), numeric.flatten());
}

}  // namespace

TEST(Spec, ValidationRejectsBadLayers) {
  EXPECT_THROW(mlp_spec({2}, Activation::Swish, {}), ConfigError);
  EXPECT_THROW(mlp_spec({2, 0, 2}, Activation::Swish, {}), ConfigError);
  EXPECT_THROW(mlp_spec({2, 4, 2}, Activation::Swish, ParamMode::low_rank(1, 1, 0)), ConfigError);
  EXPECT_THROW(mlp_spec({2, 4, 2}, Activation::Swish, ParamMode::low_rank(1, 1, 5)), ConfigError);
  EXPECT_NO_THROW(mlp_spec({2, 4, 2}, Activation::Swish, ParamMode::low_rank(1, 1, 2)));
  ModelSpec broken{{2, 3, Activation::Relu, {}}, {4, 1, Activation::Relu, {}}};
  EXPECT_THROW(validate(broken), ConfigError);
}

TEST(Spec, ActivationNames) {
  EXPECT_EQ(parse_activation("relu"), Activation::Relu);
  EXPECT_EQ(to_string(parse_activation("swish")), "swish");
  EXPECT_THROW(parse_activation("tanh"), ConfigError);
}

TEST(Init, TreeLayoutAndRoles) {
  RngStream rng(1);
  const auto spec = mlp_spec({3, 4, 2}, Activation::Swish, ParamMode::expanded(2, 1));
  const ParamTree p = init_params(spec, rng);
  std::vector<std::string> names;
  for (const auto& [name, t] : p) names.push_back(name);
  const std::vector<std::string> expected{"l0.P1", "l0.P2", "l0.V", "l0.Q1", "l0.a",
                                          "l1.P1", "l1.P2", "l1.V", "l1.Q1", "l1.a"};
  EXPECT_EQ(names, expected);
  EXPECT_EQ(p.at("l0.P2").dims(), (Dims{4, 4}));
  EXPECT_EQ(p.at("l0.Q1").dims(), (Dims{3, 3}));
  EXPECT_EQ(role_of("l0.P2"), Role::Expanded);
  EXPECT_EQ(role_of("l1.Q1.L2"), Role::Expanded);
  EXPECT_EQ(role_of("l0.V"), Role::Base);
  EXPECT_EQ(role_of("l0.a"), Role::Base);
  EXPECT_EQ(role_of("l0.W"), Role::Base);
}

TEST(Init, StandardTreeHoldsOnlyBaseRoles) {
  RngStream rng(2);
  const ParamTree p = init_params(mlp_spec({2, 5, 2}, Activation::Swish, {}), rng);
  for (const auto& [name, t] : p) EXPECT_EQ(role_of(name), Role::Base) << name;
  EXPECT_EQ(p.size(), 4u);
}

TEST(Init, MergedWeightEqualsVAtIdentityInit) {
  RngStream rng(3);
  const auto spec = mlp_spec({3, 5, 2}, Activation::Swish, ParamMode::expanded(1, 1));
  const ParamTree p = init_params(spec, rng);
  const auto layers = merged_layers(p, spec);
  EXPECT_EQ(layers[0].weight, p.at("l0.V").matrix());
  EXPECT_EQ(layers[1].weight, p.at("l1.V").matrix());
}

TEST(Init, BiasesStartAtZero) {
  RngStream rng(4);
  const ParamTree p = init_params(mlp_spec({3, 5, 2}, Activation::Swish, ParamMode::expanded(1, 1)), rng);
  EXPECT_TRUE(p.at("l0.a").flat().isZero(0.0));
  EXPECT_TRUE(p.at("l1.a").flat().isZero(0.0));
}

TEST(Init, HeNormalStd) {
  RngStream rng(5);
  const ParamTree p = init_params(mlp_spec({50, 2000, 2}, Activation::Swish, {}), rng);
  const Vec v = p.at("l0.V").flat();
  ASSERT_EQ(v.size(), 100000);
  const double mean = v.mean();
  const double sd = std::sqrt((v.array() - mean).square().mean());
  EXPECT_LT(std::abs(sd - std::sqrt(2.0 / 50.0)) / std::sqrt(2.0 / 50.0), 0.02);
}

TEST(Init, LowRankStartsAtIdentity) {
  RngStream rng(6);
  const auto spec = mlp_spec({3, 4, 2}, Activation::Swish, ParamMode::low_rank(1, 1, 2));
  const ParamTree p = init_params(spec, rng);
  EXPECT_EQ(p.at("l0.P1.D").flat(), Vec::Ones(4));
  EXPECT_EQ(p.at("l0.P1.L1").dims(), (Dims{2, 4}));
  EXPECT_TRUE(p.at("l0.P1.L2").flat().isZero(0.0));
  EXPECT_EQ(merged_layers(p, spec)[0].weight, p.at("l0.V").matrix());
}

TEST(Init, BalancedIsNearIdentity) {
  RngStream rng(7);
  const auto spec = mlp_spec({3, 4, 2}, Activation::Swish, ParamMode::expanded(1, 1));
  const ParamTree p = init_params(spec, rng, EpInit::Balanced);
  const Mat dev = p.at("l0.P1").matrix() - Mat::Identity(4, 4);
  EXPECT_GT(dev.norm(), 0.0);
  EXPECT_LT(dev.cwiseAbs().maxCoeff(), 1e-2);
}

TEST(MergeLinear, NoFactorsGivesV) {
  RngStream rng(8);
  const Mat v = oracle::random_matrix(rng, 3, 2);
  const Vec a = oracle::random_matrix(rng, 3, 1);
  const auto m = merge_linear({}, v, {}, a);
  EXPECT_EQ(m.weight, v);
  EXPECT_EQ(m.bias, a);
}

TEST(MergeLinear, ScaledIdentity) {
  const std::vector<Mat> p{2.0 * Mat::Identity(2, 2)};
  const std::vector<Mat> q{Mat::Identity(2, 2)};
  const auto m = merge_linear(p, Mat::Identity(2, 2), q, Vec::Ones(2));
  EXPECT_EQ(m.weight, 2.0 * Mat::Identity(2, 2));
  EXPECT_EQ(m.bias, 2.0 * Vec::Ones(2));
}

TEST(MergeLinear, MatchesFlatProductOracle) {
  RngStream rng(9);
  const std::vector<Mat> p{oracle::random_matrix(rng, 3, 3), oracle::random_matrix(rng, 3, 3)};
  const std::vector<Mat> q{oracle::random_matrix(rng, 4, 4), oracle::random_matrix(rng, 4, 4)};
  const Mat v = oracle::random_matrix(rng, 3, 4);
  const Vec a = oracle::random_matrix(rng, 3, 1);
  using oracle::triple_loop_matmul;
  const Mat expected = triple_loop_matmul(
      triple_loop_matmul(triple_loop_matmul(triple_loop_matmul(p[1], p[0]), v), q[0]), q[1]);
  const auto m = merge_linear(p, v, q, a);
  EXPECT_LT((m.weight - expected).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT((m.bias - p[1] * (p[0] * a)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(MergeLinear, DimMismatchIsShapeError) {
  const std::vector<Mat> bad{Mat::Identity(3, 3)};
  EXPECT_THROW(merge_linear(bad, Mat::Zero(2, 2), {}, Vec::Zero(2)), ShapeError);
  EXPECT_THROW(merge_linear({}, Mat::Zero(2, 2), bad, Vec::Zero(2)), ShapeError);
  EXPECT_THROW(merge_linear({}, Mat::Zero(2, 2), {}, Vec::Zero(3)), ShapeError);
}

TEST(LowRank, FullRankReproducesDenseMerge) {
  RngStream rng(10);
  const Index w = 3;
  const Mat target = oracle::random_matrix(rng, w, w);
  // D = I, L1 = I, L2 = target - I spans any matrix when r = width.
  const Tensor d = Tensor::from_vector(Vec::Ones(w));
  const Tensor l1 = Tensor::identity(w);
  const Tensor l2 = Tensor::from_matrix(target - Mat::Identity(w, w));
  EXPECT_LT((low_rank_matrix(d, l1, l2) - target).cwiseAbs().maxCoeff(), 1e-15);

  const auto spec = mlp_spec({w, w}, Activation::Identity, ParamMode::low_rank(1, 0, static_cast<int>(w)));
  ParamTree p = init_params(spec, rng);
  p.at("l0.P1.L1") = l1;
  p.at("l0.P1.L2") = l2;
  const Mat v = p.at("l0.V").matrix();
  const std::vector<Mat> dense{target};
  EXPECT_LT((merged_layers(p, spec)[0].weight - merge_linear(dense, v, {}, Vec::Zero(w)).weight).norm(), 1e-12);
}

TEST(MergeConv, IdentityFactorsLeaveKernel) {
  RngStream rng(11);
  const Tensor v = gaussian(rng, {3, 3, 2, 4});
  EXPECT_EQ(merge_conv(Mat::Identity(2, 2), v, Mat::Identity(4, 4)), v);
}

TEST(MergeConv, OneByOneKernelIsLinearMerge) {
  RngStream rng(12);
  const Tensor v = gaussian(rng, {1, 1, 3, 2});
  const Mat p = oracle::random_matrix(rng, 3, 3);
  const Mat q = oracle::random_matrix(rng, 2, 2);
  const Tensor w = merge_conv(p, v, q);
  const Mat v2 = Eigen::Map<const Mat>(v.flat().data(), 3, 2);
  const std::vector<Mat> ps{p}, qs{q};
  const Mat expected = merge_linear(ps, v2, qs, Vec::Zero(3)).weight;
  EXPECT_LT((Eigen::Map<const Mat>(w.flat().data(), 3, 2) - expected).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(MergeConv, MatchesIndexLoopOracle) {
  RngStream rng(13);
  const Tensor v = gaussian(rng, {3, 3, 2, 2});
  const Mat p = oracle::random_matrix(rng, 2, 2);
  const Mat q = oracle::random_matrix(rng, 2, 2);
  EXPECT_LT((merge_conv(p, v, q).flat() - conv_oracle(p, v, q).flat()).cwiseAbs().maxCoeff(), 1e-12);
  const Vec a = oracle::random_matrix(rng, 2, 1);
  EXPECT_LT((merge_conv_bias(p, a) - p * a).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(MergeConv, DimMismatchIsShapeError) {
  EXPECT_THROW(merge_conv(Mat::Identity(3, 3), Tensor({3, 3, 2, 2}), Mat::Identity(2, 2)), ShapeError);
  EXPECT_THROW(merge_conv(Mat::Identity(2, 2), Tensor({3, 3}), Mat::Identity(2, 2)), ShapeError);
}

TEST(MergeConv, BackwardMatchesFiniteDifferences) {
  RngStream rng(14);
  const Mat p = oracle::random_matrix(rng, 2, 2);
  const Tensor v = gaussian(rng, {2, 2, 2, 3});
  const Mat q = oracle::random_matrix(rng, 3, 3);
  const Tensor weights = gaussian(rng, v.dims());
  const auto loss = [&](const Mat& pp, const Tensor& vv, const Mat& qq) {
    return merge_conv(pp, vv, qq).flat().dot(weights.flat());
  };
  const auto g = merge_conv_backward(p, v, q, weights);
  const Vec np = oracle::fd_gradient([&](const Vec& x) { return loss(oracle::unvec_like(x, p), v, q); }, vec(p));
  const Vec nv = oracle::fd_gradient([&](const Vec& x) { return loss(p, Tensor(v.dims(), x), q); }, v.flat());
  const Vec nq = oracle::fd_gradient([&](const Vec& x) { return loss(p, v, oracle::unvec_like(x, q)); }, vec(q));
  EXPECT_LT(oracle::max_rel_err(vec(g.p), np), 1e-5);
  EXPECT_LT(oracle::max_rel_err(g.v.flat(), nv), 1e-5);
  EXPECT_LT(oracle::max_rel_err(vec(g.q), nq), 1e-5);
}

TEST(MergeFrn, IdentityAndScaled) {
  RngStream rng(15);
  const Vec s = oracle::random_matrix(rng, 4, 1);
  EXPECT_EQ(merge_frn(Mat::Identity(4, 4), Mat::Identity(4, 4), s), s);
  EXPECT_EQ(merge_frn(2.0 * Mat::Identity(4, 4), Mat::Identity(4, 4), s), 2.0 * s);
}

TEST(MergeFrn, MatchesLoopOracle) {
  RngStream rng(16);
  const Vec s = oracle::random_matrix(rng, 4, 1);
  const Mat p = oracle::random_matrix(rng, 4, 6);
  const Mat q = oracle::random_matrix(rng, 6, 4);
  EXPECT_LT((merge_frn(p, q, s) - frn_oracle(p, q, s)).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_THROW(merge_frn(Mat::Identity(4, 3), Mat::Identity(3, 4), s), ShapeError);
}

TEST(MergeFrn, BackwardMatchesFiniteDifferences) {
  RngStream rng(17);
  const Vec s = oracle::random_matrix(rng, 3, 1);
  const Mat p = oracle::random_matrix(rng, 3, 3);
  const Mat q = oracle::random_matrix(rng, 3, 3);
  const Vec w = oracle::random_matrix(rng, 3, 1);
  const auto g = merge_frn_backward(p, q, s, w);
  const Vec np = oracle::fd_gradient([&](const Vec& x) { return merge_frn(oracle::unvec_like(x, p), q, s).dot(w); }, vec(p));
  const Vec nq = oracle::fd_gradient([&](const Vec& x) { return merge_frn(p, oracle::unvec_like(x, q), s).dot(w); }, vec(q));
  const Vec ns = oracle::fd_gradient([&](const Vec& x) { return merge_frn(p, q, x).dot(w); }, s);
  EXPECT_LT(oracle::max_rel_err(vec(g.p), np), 1e-5);
  EXPECT_LT(oracle::max_rel_err(vec(g.q), nq), 1e-5);
  EXPECT_LT(oracle::max_rel_err(g.s, ns), 1e-5);
}

TEST(Forward, IdentityLayerPassesInput) {
  const ModelSpec spec{{3, 3, Activation::Identity, {}}};
  ParamTree p;
  p.add("l0.V", Tensor::identity(3));
  p.add("l0.a", Tensor({3}));
  RngStream rng(18);
  const Mat x = oracle::random_matrix(rng, 5, 3);
  EXPECT_EQ(forward(p, spec, x), x);
}

TEST(Forward, HandComputedTwoLayerNet) {
  const ModelSpec spec{{2, 2, Activation::Relu, {}}, {2, 1, Activation::Relu, {}}};
  ParamTree p;
  Mat w1(2, 2);
  w1 << 1, 2, 0, 1;
  p.add("l0.V", Tensor::from_matrix(w1));
  p.add("l0.a", Tensor::from_vector(Eigen::Vector2d(0.0, 0.5)));
  p.add("l1.V", Tensor::from_matrix(Eigen::RowVector2d(1, -1)));
  p.add("l1.a", Tensor::from_vector(Vec::Constant(1, 0.25)));
  Mat x(2, 2);
  x << 2, 1, 1, -1;
  // row 0: z1 = (4, 1.5) -> 4 - 1.5 + 0.25; row 1: z1 = (-1, -0.5) -> relu 0 -> 0.25
  const Mat out = forward(p, spec, x);
  EXPECT_DOUBLE_EQ(out(0, 0), 2.75);
  EXPECT_DOUBLE_EQ(out(1, 0), 0.25);
}

TEST(Forward, SwishHandComputed) {
  const ModelSpec spec{{1, 1, Activation::Swish, {}}, {1, 1, Activation::Swish, {}}};
  ParamTree p;
  p.add("l0.V", Tensor::from_matrix(Mat::Constant(1, 1, 1.0)));
  p.add("l0.a", Tensor({1}));
  p.add("l1.V", Tensor::from_matrix(Mat::Constant(1, 1, 1.0)));
  p.add("l1.a", Tensor({1}));
  const double out = forward(p, spec, Mat::Constant(1, 1, 1.0))(0, 0);
  EXPECT_DOUBLE_EQ(out, 1.0 / (1.0 + std::exp(-1.0)));
}

TEST(Forward, EpEqualsMergedSp) {
  RngStream rng(19);
  const auto spec = mlp_spec({3, 6, 6, 2}, Activation::Swish, ParamMode::expanded(2, 2));
  const ParamTree p = perturbed(init_params(spec, rng), rng, 0.3);
  const Mat x = oracle::random_matrix(rng, 7, 3);
  const Mat sp = forward(standard_params(merged_layers(p, spec)), standard_spec(spec), x);
  EXPECT_LT((forward(p, spec, x) - sp).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT((forward(merge_params(p, spec), spec, x) - sp).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Forward, ShapeMismatch) {
  RngStream rng(20);
  const auto spec = mlp_spec({3, 2}, Activation::Swish, {});
  const ParamTree p = init_params(spec, rng);
  EXPECT_THROW(forward(p, spec, Mat::Zero(2, 4)), ShapeError);
  EXPECT_THROW(forward(p, mlp_spec({3, 5}, Activation::Swish, {}), Mat::Zero(2, 3)), ShapeError);
}

TEST(LayerChain, FactorsLeftToRight) {
  RngStream rng(21);
  const auto spec = mlp_spec({3, 4, 2}, Activation::Swish, ParamMode::expanded(2, 1));
  const ParamTree p = perturbed(init_params(spec, rng), rng, 0.1);
  const auto chain = layer_chain(p, spec, 0);
  ASSERT_EQ(chain.size(), 4u);
  EXPECT_EQ(chain[0], p.at("l0.P2").matrix());
  EXPECT_EQ(chain[1], p.at("l0.P1").matrix());
  EXPECT_EQ(chain[2], p.at("l0.V").matrix());
  EXPECT_EQ(chain[3], p.at("l0.Q1").matrix());
  EXPECT_EQ(layer_chain(merge_params(p, spec), spec, 1).size(), 1u);
  EXPECT_THROW(layer_chain(p, spec, 2), ShapeError);
}

TEST(Backward, BiasGradientOfZeroWeightFinalLayer) {
  const ModelSpec spec{{2, 2, Activation::Identity, {}}};
  ParamTree p;
  p.add("l0.V", Tensor({2, 2}));
  p.add("l0.a", Tensor::from_vector(Eigen::Vector2d(0.3, -0.2)));
  RngStream rng(22);
  const Mat x = oracle::random_matrix(rng, 4, 2);
  const std::vector<int> y{0, 1, 0, 1};
  const auto g = cross_entropy_gradient(p, spec, x, y, 0.25).grad;
  const Eigen::Vector2d sm = (Eigen::Vector2d(0.3, -0.2).array().exp() /
                              Eigen::Vector2d(0.3, -0.2).array().exp().sum()).matrix();
  const Eigen::Vector2d expected = sm - Eigen::Vector2d(0.5, 0.5);
  EXPECT_LT((g.at("l0.a").flat() - expected).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Backward, CrossEntropyValue) {
  const Mat logits = Mat::Zero(2, 4);
  const std::vector<int> y{0, 3};
  const auto ce = cross_entropy(logits, y);
  EXPECT_NEAR(ce.loss, 2.0 * std::log(4.0), 1e-15);
  EXPECT_THROW(cross_entropy(logits, std::vector<int>{0, 4}), ShapeError);
  EXPECT_THROW(cross_entropy(logits, std::vector<int>{0}), ShapeError);
}

TEST(Backward, FiniteDifferencesEp11) {
  RngStream rng(23);
  const auto spec = mlp_spec({3, 5, 3}, Activation::Swish, ParamMode::expanded(1, 1));
  const ParamTree p = perturbed(init_params(spec, rng), rng, 0.2);
  EXPECT_LT(fd_check(p, spec, small_problem(rng, 6, 3, 3)), 1e-5);
}

TEST(Backward, FiniteDifferencesSpAndDeepEp) {
  RngStream rng(24);
  for (const ParamMode mode : {ParamMode::standard(), ParamMode::expanded(2, 2), ParamMode::expanded(0, 3)}) {
    const auto spec = mlp_spec({2, 4, 4, 2}, Activation::Swish, mode);
    const ParamTree p = perturbed(init_params(spec, rng), rng, 0.2);
    EXPECT_LT(fd_check(p, spec, small_problem(rng, 5, 2, 2)), 1e-5);
  }
}

TEST(Backward, FiniteDifferencesLowRank) {
  RngStream rng(25);
  const auto spec = mlp_spec({3, 4, 2}, Activation::Swish, ParamMode::low_rank(1, 1, 2));
  const ParamTree p = perturbed(init_params(spec, rng), rng, 0.3);
  EXPECT_LT(fd_check(p, spec, small_problem(rng, 5, 3, 2)), 1e-5);
}

TEST(Backward, FiniteDifferencesReluAwayFromKinks) {
  RngStream rng(26);
  const auto spec = mlp_spec({2, 3, 2}, Activation::Relu, ParamMode::expanded(1, 0));
  const ParamTree p = perturbed(init_params(spec, rng), rng, 0.2);
  EXPECT_LT(fd_check(p, spec, small_problem(rng, 4, 2, 2)), 1e-5);
}

TEST(Backward, ChainRuleFactorIdentity) {
  RngStream rng(27);
  for (int e = 2; e <= 4; ++e) {
    std::vector<Mat> factors;
    for (int j = 0; j < e; ++j) factors.push_back(oracle::random_matrix(rng, 3, 3));
    const Mat g = oracle::random_matrix(rng, 3, 3);
    const auto grads = product_gradients(factors, g);
    for (int j = 0; j < e; ++j) {
      Mat left = Mat::Identity(3, 3), right = Mat::Identity(3, 3);
      for (int k = 0; k < j; ++k) left = oracle::triple_loop_matmul(left, factors[static_cast<std::size_t>(k)]);
      for (int k = j + 1; k < e; ++k) right = oracle::triple_loop_matmul(right, factors[static_cast<std::size_t>(k)]);
      const Mat expected = left.transpose() * g * right.transpose();
      EXPECT_LT((grads[static_cast<std::size_t>(j)] - expected).cwiseAbs().maxCoeff(), 1e-10);
    }
  }
}

TEST(Backward, GradientTreeIsCongruent) {
  RngStream rng(28);
  const auto spec = mlp_spec({2, 3, 2}, Activation::Swish, ParamMode::expanded(1, 2));
  const ParamTree p = init_params(spec, rng);
  const auto prob = small_problem(rng, 3, 2, 2);
  EXPECT_TRUE(cross_entropy_gradient(p, spec, prob.x, prob.y).grad.congruent(p));
}
