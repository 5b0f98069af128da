#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "foul/dense.hpp"
#include "foul/geometry.hpp"
#include "foul/grad_check.hpp"
#include "foul/param_vector.hpp"
#include "foul/rng.hpp"

namespace foul {
namespace {

TEST(DenseForward, IdentityActivationIdentityWeights) {
  DenseLayer layer(2, 2, Activation::identity);
  layer.weights = {1, 0, 0, 1};
  const auto out = dense_forward(layer, std::vector<double>{3, -1});
  EXPECT_DOUBLE_EQ(out[0], 3.0);
  EXPECT_DOUBLE_EQ(out[1], -1.0);
}

TEST(DenseForward, ReluClampsNegatives) {
  DenseLayer layer(2, 2, Activation::relu);
  layer.weights = {1, 0, 0, 1};
  const auto out = dense_forward(layer, std::vector<double>{-2, 5});
  EXPECT_DOUBLE_EQ(out[0], 0.0);
  EXPECT_DOUBLE_EQ(out[1], 5.0);
}

TEST(DenseForward, TanhAtZero) {
  DenseLayer layer(2, 1, Activation::tanh);
  layer.weights = {1, 0};
  const auto out = dense_forward(layer, std::vector<double>{0, 7});
  EXPECT_DOUBLE_EQ(out[0], 0.0);
}

TEST(DenseForward, RejectsWrongInputLength) {
  DenseLayer layer(3, 2, Activation::identity);
  EXPECT_THROW(dense_forward(layer, std::vector<double>{1, 2}), ShapeError);
}

TEST(DenseBackward, OuterProductForIdentity) {
  DenseLayer layer(2, 2, Activation::identity);
  layer.weights = {0.5, -0.25, 1.0, 2.0};
  DenseCache cache;
  dense_forward(layer, std::vector<double>{2, 3}, &cache);
  const DenseGrads g =
      dense_backward(layer, cache, std::vector<double>{1, 0});
  EXPECT_DOUBLE_EQ(g.weights[0], 2.0);
  EXPECT_DOUBLE_EQ(g.weights[1], 3.0);
  EXPECT_DOUBLE_EQ(g.weights[2], 0.0);
  EXPECT_DOUBLE_EQ(g.weights[3], 0.0);
}

TEST(DenseBackward, ZeroUpstreamGivesZeroGradients) {
  DenseLayer layer(3, 2, Activation::tanh);
  RngStream rng(7, "init");
  layer.init_xavier(rng);
  DenseCache cache;
  dense_forward(layer, std::vector<double>{0.1, -0.4, 2.0}, &cache);
  const DenseGrads g =
      dense_backward(layer, cache, std::vector<double>{0, 0});
  for (const double v : g.weights) EXPECT_DOUBLE_EQ(v, 0.0);
  for (const double v : g.bias) EXPECT_DOUBLE_EQ(v, 0.0);
  for (const double v : g.input) EXPECT_DOUBLE_EQ(v, 0.0);
}

// Loss(theta) = <output(theta), upstream>: the layer gradients returned by
// dense_backward must match central differences of that scalar.
double layer_fd_worst_error(Activation act, std::uint64_t seed) {
  DenseLayer layer(4, 3, act);
  RngStream rng(seed, "layer");
  layer.init_xavier(rng);
  for (double& b : layer.bias) b = 0.25 * rng.next_normal();
  std::vector<double> input(4);
  for (double& v : input) v = rng.next_normal();
  std::vector<double> upstream(3);
  for (double& v : upstream) v = rng.next_normal();

  DenseCache cache;
  dense_forward(layer, input, &cache);
  const DenseGrads g = dense_backward(layer, cache, upstream);

  std::vector<double> flat = layer.weights;
  flat.insert(flat.end(), layer.bias.begin(), layer.bias.end());
  flat.insert(flat.end(), input.begin(), input.end());
  std::vector<double> analytic = g.weights;
  analytic.insert(analytic.end(), g.bias.begin(), g.bias.end());
  analytic.insert(analytic.end(), g.input.begin(), g.input.end());

  const auto loss = [&](std::span<const double> x) {
    DenseLayer probe = layer;
    std::size_t c = 0;
    for (double& w : probe.weights) w = x[c++];
    for (double& b : probe.bias) b = x[c++];
    std::vector<double> in(x.begin() + static_cast<std::ptrdiff_t>(c),
                           x.end());
    const auto out = dense_forward(probe, in);
    return dot(out, upstream);
  };
  return finite_diff_check(loss, flat, analytic, 1e-5);
}

TEST(DenseBackward, MatchesFiniteDifferencesTanh) {
  EXPECT_LT(layer_fd_worst_error(Activation::tanh, 11), 1e-5);
}

TEST(DenseBackward, MatchesFiniteDifferencesAllActivationsManySeeds) {
  for (const Activation act :
       {Activation::identity, Activation::tanh, Activation::relu,
        Activation::softplus}) {
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
      EXPECT_LT(layer_fd_worst_error(act, 1000 + seed), 1e-4)
          << "activation " << static_cast<int>(act) << " seed " << seed;
    }
  }
}

TEST(Cosine, BasicDirections) {
  EXPECT_DOUBLE_EQ(cosine_similarity(std::vector<double>{1, 0},
                                     std::vector<double>{0, 1}),
                   0.0);
  EXPECT_DOUBLE_EQ(cosine_similarity(std::vector<double>{2, 2},
                                     std::vector<double>{1, 1}),
                   1.0);
  EXPECT_DOUBLE_EQ(cosine_similarity(std::vector<double>{1, 0},
                                     std::vector<double>{-1, 0}),
                   -1.0);
}

TEST(Cosine, ZeroNormIsAnError) {
  EXPECT_THROW(cosine_similarity(std::vector<double>{0, 0},
                                 std::vector<double>{1, 0}),
               NumericError);
}

TEST(Cosine, ScaleInvariance) {
  RngStream rng(3, "cos");
  for (int t = 0; t < 50; ++t) {
    std::vector<double> a(5), b(5);
    for (double& v : a) v = rng.next_normal();
    for (double& v : b) v = rng.next_normal();
    const double alpha = 0.1 + 10.0 * rng.next_double();
    const double beta = 0.1 + 10.0 * rng.next_double();
    std::vector<double> sa = a, sb = b;
    scale_inplace(sa, alpha);
    scale_inplace(sb, beta);
    EXPECT_NEAR(cosine_similarity(a, b), cosine_similarity(sa, sb), 1e-12);
  }
}

TEST(SimplexProjection, FeasibleInputUnchanged) {
  const std::vector<double> v{0.5, 0.5};
  EXPECT_EQ(project_to_simplex(v), v);
}

TEST(SimplexProjection, SymmetricInput) {
  const auto out = project_to_simplex(std::vector<double>{0.6, 0.6, 0.6});
  for (const double x : out) EXPECT_NEAR(x, 1.0 / 3.0, 1e-12);
}

// Oracle: brute-force minimization of |x - v| over a 0.001-step grid on the
// 2-simplex. For v = (2, 0) the grid argmin converges to (1, 0), which the
// exact projection must return.
TEST(SimplexProjection, MatchesBruteForceGridOnTwoSimplex) {
  const std::vector<double> v{2.0, 0.0};
  double best_t = -1.0;
  double best_dist = 1e100;
  for (int i = 0; i <= 1000; ++i) {
    const double t = static_cast<double>(i) / 1000.0;
    const double dx = t - v[0];
    const double dy = (1.0 - t) - v[1];
    const double dist = dx * dx + dy * dy;
    if (dist < best_dist) {
      best_dist = dist;
      best_t = t;
    }
  }
  EXPECT_NEAR(best_t, 1.0, 1e-9);  // grid oracle lands on the vertex
  const auto out = project_to_simplex(v);
  EXPECT_DOUBLE_EQ(out[0], 1.0);
  EXPECT_DOUBLE_EQ(out[1], 0.0);
}

TEST(SimplexProjection, EmptyInputIsAnError) {
  EXPECT_THROW(project_to_simplex(std::vector<double>{}), ShapeError);
}

TEST(SimplexProjection, InvariantsOnRandomInputs) {
  RngStream rng(5, "simplex");
  for (int t = 0; t < 50; ++t) {
    const std::size_t n = 1 + rng.next_below(8);
    std::vector<double> v(n);
    for (double& x : v) x = 4.0 * rng.next_normal();
    const auto p = project_to_simplex(v);
    double sum = 0.0;
    for (const double x : p) {
      sum += x;
      EXPECT_GE(x, -1e-12);
    }
    EXPECT_NEAR(sum, 1.0, 1e-12);
    EXPECT_EQ(project_to_simplex(p), p);  // exact idempotence
  }
}

TEST(FiniteDiffCheck, QuadraticIsExact) {
  const auto loss = [](std::span<const double> x) {
    return 0.5 * (x[0] * x[0] + x[1] * x[1]);
  };
  const std::vector<double> point{1, 2};
  const std::vector<double> grad{1, 2};
  EXPECT_LT(finite_diff_check(loss, point, grad, 1e-5), 1e-8);
}

TEST(FiniteDiffCheck, ConstantLossPassesWithZeroError) {
  const auto loss = [](std::span<const double>) { return 42.0; };
  const std::vector<double> point{0.3, -0.7, 1.1};
  const std::vector<double> grad{0, 0, 0};
  EXPECT_DOUBLE_EQ(finite_diff_check(loss, point, grad, 1e-5), 0.0);
}

TEST(FiniteDiffCheck, NonFiniteLossIsAnError) {
  const auto loss = [](std::span<const double> x) {
    return std::log(x[0]);  // -inf just below zero
  };
  const std::vector<double> point{1e-9};
  const std::vector<double> grad{1e9};
  EXPECT_THROW(finite_diff_check(loss, point, grad, 1e-5), NumericError);
}

TEST(RngStream, SameKeySameSequence) {
  RngStream a(42, 3, 7, "batch");
  RngStream b(42, 3, 7, "batch");
  for (int i = 0; i < 100; ++i) {
    EXPECT_EQ(a.next_u64(), b.next_u64());
  }
}

TEST(RngStream, InterleavingDoesNotChangeStreams) {
  RngStream a1(9, 0, 0, "x");
  RngStream b1(9, 1, 0, "x");
  std::vector<std::uint64_t> a_seq, b_seq;
  for (int i = 0; i < 50; ++i) {
    a_seq.push_back(a1.next_u64());
    b_seq.push_back(b1.next_u64());
  }
  RngStream a2(9, 0, 0, "x");
  RngStream b2(9, 1, 0, "x");
  for (int i = 0; i < 50; ++i) EXPECT_EQ(a2.next_u64(), a_seq[i]);
  for (int i = 0; i < 50; ++i) EXPECT_EQ(b2.next_u64(), b_seq[i]);
}

TEST(RngStream, DistinctKeysDecorrelate) {
  RngStream a(1, 0, 0, "p");
  RngStream b(1, 0, 1, "p");
  RngStream c(1, 0, 0, "q");
  EXPECT_NE(a.next_u64(), b.next_u64());
  RngStream a2(1, 0, 0, "p");
  EXPECT_NE(a2.next_u64(), c.next_u64());
}

TEST(ParamVector, SegmentsTileTheValues) {
  ParamVector p;
  p.append_segment("E", {1, 2, 3});
  p.append_segment("K", {4, 5});
  EXPECT_EQ(p.size(), 5u);
  EXPECT_EQ(p.segment("E").size(), 3u);
  EXPECT_EQ(p.segment("K")[1], 5.0);
  EXPECT_THROW(p.append_segment("E", {0}), LookupError);
  EXPECT_THROW(p.segment("Z"), LookupError);
}

TEST(ParamVector, ZerosLikeKeepsLayout) {
  ParamVector p;
  p.append_segment("A", {1, 2});
  p.append_segment("B", {3});
  const ParamVector z = p.zeros_like();
  EXPECT_TRUE(z.layout_matches(p));
  for (const double v : z.values()) EXPECT_DOUBLE_EQ(v, 0.0);
}

}  // namespace
}  // namespace foul
