#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "foul/geometry.hpp"
#include "foul/rng.hpp"
#include "foul/server.hpp"

namespace foul {
namespace {

ParamVector flat(std::vector<double> v) {
  return ParamVector::flat("V", std::move(v));
}

TEST(FedavgAggregate, WeightedMean) {
  const std::vector<ParamVector> items{flat({1, 1}), flat({3, 3})};
  const std::vector<double> weights{0.5, 0.5};
  const ParamVector out = fedavg_aggregate(items, weights);
  EXPECT_DOUBLE_EQ(out.values()[0], 2.0);
  EXPECT_DOUBLE_EQ(out.values()[1], 2.0);
}

TEST(FedavgAggregate, SingleClientIdentity) {
  const std::vector<ParamVector> items{flat({0.25, -8})};
  const std::vector<double> weights{1.0};
  EXPECT_EQ(fedavg_aggregate(items, weights).values(),
            items[0].values());
}

TEST(FedavgAggregate, ZeroWeightDropsAClient) {
  const std::vector<ParamVector> items{flat({1, 2}), flat({100, 100})};
  const std::vector<double> weights{1.0, 0.0};
  EXPECT_EQ(fedavg_aggregate(items, weights).values(), items[0].values());
}

TEST(FedavgAggregate, RejectsBadWeightSumAndShapes) {
  const std::vector<ParamVector> items{flat({1, 2}), flat({3, 4})};
  const std::vector<double> bad{0.5, 0.6};
  EXPECT_THROW(fedavg_aggregate(items, bad), NumericError);
  const std::vector<ParamVector> mixed{flat({1, 2}), flat({3, 4, 5})};
  const std::vector<double> weights{0.5, 0.5};
  EXPECT_THROW(fedavg_aggregate(mixed, weights), ShapeError);
}

TEST(FedavgAggregate, EqualWeightsPermutationInvariant) {
  const std::vector<ParamVector> items{flat({1, -2}), flat({0.5, 4}),
                                       flat({-3, 0.25})};
  const std::vector<double> weights(3, 1.0 / 3.0);
  const auto a = fedavg_aggregate(items, weights);
  const std::vector<ParamVector> permuted{items[2], items[0], items[1]};
  const auto b = fedavg_aggregate(permuted, weights);
  EXPECT_EQ(a.values(), b.values());
}

MatchConfig config_with(double kappa, double p = 1.0, double beta = 1.0) {
  MatchConfig c;
  c.kappa = kappa;
  c.dual_exponent = p;
  c.beta = beta;
  return c;
}

TEST(DualObjective, LinearCaseAtKappaZero) {
  const std::vector<double> r{1, 0};
  const std::vector<double> f{0, 1};
  const std::vector<double> g_fl{2, -3};
  const GammaWeights gamma{{1.0}, {1.0}};
  const double j = dual_objective(gamma, {GradView(r)}, {GradView(f)}, g_fl,
                                  config_with(0.0));
  EXPECT_DOUBLE_EQ(j, dot(std::vector<double>{1, -1}, g_fl));
}

TEST(DualObjective, EqualGroupCombinationsGiveZero) {
  const std::vector<double> u{0.7, -0.2, 0.1};
  const GammaWeights gamma{{1.0}, {1.0}};
  for (const double kappa : {0.0, 0.5, 2.0}) {
    EXPECT_DOUBLE_EQ(dual_objective(gamma, {GradView(u)}, {GradView(u)}, u,
                                    config_with(kappa)),
                     0.0);
  }
}

TEST(DualObjective, SingletonHandValue) {
  const std::vector<double> r{1, 0};
  const std::vector<double> f{0, 1};
  const std::vector<double> g_fl{0.5, -0.5};
  const GammaWeights gamma{{1.0}, {1.0}};
  const double j = dual_objective(gamma, {GradView(r)}, {GradView(f)}, g_fl,
                                  config_with(1.0, 1.0));
  EXPECT_NEAR(j, 2.0, 1e-12);
}

std::vector<std::vector<double>> random_vectors(std::size_t n, std::size_t dim,
                                                RngStream& rng) {
  std::vector<std::vector<double>> out(n, std::vector<double>(dim));
  for (auto& v : out) {
    for (double& x : v) x = rng.next_normal();
  }
  return out;
}

std::vector<GradView> views_of(const std::vector<std::vector<double>>& vs) {
  return {vs.begin(), vs.end()};
}

TEST(OptimizeGamma, SingletonGroupsAreForced) {
  const std::vector<double> r{1, 0};
  const std::vector<double> f{0, 1};
  const std::vector<double> g_fl{0.3, 0.3};
  RngStream rng(1, "solver");
  const MatchingSolution sol = optimize_gamma({GradView(r)}, {GradView(f)},
                                              g_fl, config_with(0.5), rng);
  ASSERT_EQ(sol.gamma.retain.size(), 1u);
  EXPECT_DOUBLE_EQ(sol.gamma.retain[0], 1.0);
  EXPECT_DOUBLE_EQ(sol.gamma.forget[0], 1.0);
}

TEST(OptimizeGamma, IdenticalRetainUpdatesStayUniform) {
  const std::vector<double> g{0.5, -1.0, 0.25};
  const std::vector<double> f{1.0, 1.0, 0.0};
  const std::vector<double> g_fl{0.1, 0.2, 0.3};
  RngStream rng(2, "solver");
  const MatchingSolution sol = optimize_gamma(
      {GradView(g), GradView(g)}, {GradView(f)}, g_fl, config_with(0.5), rng);
  EXPECT_DOUBLE_EQ(sol.gamma.retain[0], 0.5);
  EXPECT_DOUBLE_EQ(sol.gamma.retain[1], 0.5);
}

TEST(OptimizeGamma, NonFiniteUpdateIsNumericError) {
  const std::vector<double> bad{std::nan(""), 0.0};
  const std::vector<double> f{0, 1};
  const std::vector<double> g_fl{1, 1};
  RngStream rng(3, "solver");
  EXPECT_THROW(optimize_gamma({GradView(bad)}, {GradView(f)}, g_fl,
                              config_with(0.5), rng),
               NumericError);
}

double grid_search_j(const std::vector<std::vector<double>>& retain,
                     const std::vector<std::vector<double>>& forget,
                     const std::vector<double>& g_fl,
                     const MatchConfig& config, double step) {
  double best = 1e100;
  for (double tr = 0.0; tr <= 1.0 + 1e-12; tr += step) {
    for (double tf = 0.0; tf <= 1.0 + 1e-12; tf += step) {
      const GammaWeights gamma{{tr, 1.0 - tr}, {tf, 1.0 - tf}};
      best = std::min(best, dual_objective(gamma, views_of(retain),
                                           views_of(forget), g_fl, config));
    }
  }
  return best;
}

TEST(OptimizeGamma, MatchesExhaustiveGridSearch) {
  RngStream rng(5, "instances");
  for (int trial = 0; trial < 5; ++trial) {
    const auto retain = random_vectors(2, 3, rng);
    const auto forget = random_vectors(2, 3, rng);
    std::vector<double> g_fl(3);
    for (double& x : g_fl) x = rng.next_normal();
    const MatchConfig config = config_with(0.25 + rng.next_double());
    RngStream solver_rng(100 + static_cast<std::uint64_t>(trial), "solver");
    const MatchingSolution sol = optimize_gamma(
        views_of(retain), views_of(forget), g_fl, config, solver_rng);
    const double grid = grid_search_j(retain, forget, g_fl, config, 0.02);
    EXPECT_LE(sol.j_star, grid + 1e-3);
    EXPECT_GE(sol.j_star, grid - 0.05);  // grid is only 0.02-resolution
  }
}

TEST(OptimizeGamma, DualObjectiveIsConvexOnRandomPairs) {
  RngStream rng(7, "convex");
  const auto retain = random_vectors(3, 4, rng);
  const auto forget = random_vectors(2, 4, rng);
  std::vector<double> g_fl(4);
  for (double& x : g_fl) x = rng.next_normal();
  const MatchConfig config = config_with(0.8);
  for (int t = 0; t < 50; ++t) {
    const auto draw_gamma = [&](std::size_t n) {
      std::vector<double> g(n);
      for (double& x : g) x = rng.next_double();
      return project_to_simplex(g);
    };
    const GammaWeights a{draw_gamma(3), draw_gamma(2)};
    const GammaWeights b{draw_gamma(3), draw_gamma(2)};
    GammaWeights mid;
    mid.retain.resize(3);
    mid.forget.resize(2);
    for (std::size_t i = 0; i < 3; ++i) {
      mid.retain[i] = 0.5 * (a.retain[i] + b.retain[i]);
    }
    for (std::size_t i = 0; i < 2; ++i) {
      mid.forget[i] = 0.5 * (a.forget[i] + b.forget[i]);
    }
    const auto j = [&](const GammaWeights& g) {
      return dual_objective(g, views_of(retain), views_of(forget), g_fl,
                            config);
    };
    EXPECT_LE(j(mid), 0.5 * (j(a) + j(b)) + 1e-9);
  }
}

TEST(OptimizeGamma, KappaZeroReachesVertexMinimum) {
  RngStream rng(9, "lp");
  for (int trial = 0; trial < 10; ++trial) {
    const auto retain = random_vectors(3, 4, rng);
    const auto forget = random_vectors(3, 4, rng);
    std::vector<double> g_fl(4);
    for (double& x : g_fl) x = rng.next_normal();
    const MatchConfig config = config_with(0.0);
    RngStream solver_rng(40 + static_cast<std::uint64_t>(trial), "solver");
    const MatchingSolution sol = optimize_gamma(
        views_of(retain), views_of(forget), g_fl, config, solver_rng);
    // linear objective: the minimum sits on a vertex pair
    double vertex_best = 1e100;
    for (std::size_t i = 0; i < 3; ++i) {
      for (std::size_t j = 0; j < 3; ++j) {
        GammaWeights gamma{{0, 0, 0}, {0, 0, 0}};
        gamma.retain[i] = 1.0;
        gamma.forget[j] = 1.0;
        vertex_best =
            std::min(vertex_best, dual_objective(gamma, views_of(retain),
                                                 views_of(forget), g_fl,
                                                 config));
      }
    }
    EXPECT_NEAR(sol.j_star, vertex_best, 1e-6);
  }
}

TEST(ComputeFoulGradient, UnitNormArithmetic) {
  const std::vector<double> g_fl{1, 0};
  const std::vector<double> g_r{0, 1};
  const std::vector<double> g_f{0, 0};
  const MatchingSolution sol =
      compute_foul_gradient(g_fl, g_r, g_f, config_with(0.5));
  EXPECT_FALSE(sol.degenerate);
  EXPECT_DOUBLE_EQ(sol.g_foul[0], 1.0);
  EXPECT_DOUBLE_EQ(sol.g_foul[1], 0.5);
}

TEST(ComputeFoulGradient, KappaZeroKeepsFedavgDirection) {
  const std::vector<double> g_fl{0.3, -0.7};
  const std::vector<double> g_r{1, 2};
  const std::vector<double> g_f{-1, 0};
  const MatchingSolution sol =
      compute_foul_gradient(g_fl, g_r, g_f, config_with(0.0));
  EXPECT_EQ(sol.g_foul, g_fl);
}

TEST(ComputeFoulGradient, VanishingDirectionDegradesToFedavg) {
  const std::vector<double> g_fl{0.3, -0.7};
  const std::vector<double> same{0.5, 0.5};
  const MatchingSolution sol =
      compute_foul_gradient(g_fl, same, same, config_with(0.5));
  EXPECT_TRUE(sol.degenerate);
  EXPECT_EQ(sol.g_foul, g_fl);
}

TEST(ComputeFoulGradient, HypersphereRadiusHolds) {
  RngStream rng(11, "sphere");
  const MatchConfig config = config_with(0.5);
  for (int t = 0; t < 100; ++t) {
    std::vector<double> g_fl(5), g_r(5), g_f(5);
    for (double& x : g_fl) x = rng.next_normal();
    for (double& x : g_r) x = rng.next_normal();
    for (double& x : g_f) x = rng.next_normal();
    const MatchingSolution sol =
        compute_foul_gradient(g_fl, g_r, g_f, config);
    ASSERT_FALSE(sol.degenerate);
    std::vector<double> diff(5);
    for (std::size_t i = 0; i < 5; ++i) diff[i] = sol.g_foul[i] - g_fl[i];
    EXPECT_NEAR(norm(diff), config.kappa * norm(g_fl), 1e-9);
  }
}

TEST(ApplyUnlearnUpdate, Arithmetic) {
  const std::vector<double> theta{1, 1};
  const std::vector<double> g{1, -1};
  const auto out = apply_unlearn_update(theta, g, 0.2);
  EXPECT_DOUBLE_EQ(out[0], 0.8);
  EXPECT_DOUBLE_EQ(out[1], 1.2);
  EXPECT_EQ(apply_unlearn_update(theta, g, 0.0), theta);
  const std::vector<double> zero{0, 0};
  EXPECT_EQ(apply_unlearn_update(theta, zero, 0.7), theta);
  EXPECT_THROW(apply_unlearn_update(theta, std::vector<double>{1}, 0.1),
               ShapeError);
}

TEST(GradientAngleStats, MatchingAndOpposingUpdates) {
  const std::vector<double> g{1, 0, 0};
  const std::vector<double> minus_g{-1, 0, 0};
  const std::vector<ClientUpdateView> updates{
      {0, ClientRole::retain, g},
      {1, ClientRole::retain, g},
      {2, ClientRole::forget, minus_g},
  };
  const AngleStats stats = gradient_angle_stats(g, updates);
  EXPECT_DOUBLE_EQ(stats.retain_mean, 1.0);
  EXPECT_DOUBLE_EQ(stats.forget_mean, -1.0);
}

TEST(GradientAngleStats, OrthogonalMixAveragesToZero) {
  const std::vector<double> g{1, 0, 0};
  const std::vector<double> up{0, 1, 0};
  const std::vector<double> down{0, -1, 0};
  const std::vector<ClientUpdateView> updates{
      {0, ClientRole::retain, up},
      {1, ClientRole::retain, down},
  };
  const AngleStats stats = gradient_angle_stats(g, updates);
  EXPECT_NEAR(stats.retain_mean, 0.0, 1e-12);
}

TEST(GradientAngleStats, ZeroUpdatesAreExcludedAndFlagged) {
  const std::vector<double> g{1, 0};
  const std::vector<double> zero{0, 0};
  const std::vector<ClientUpdateView> updates{
      {0, ClientRole::retain, zero},
      {1, ClientRole::forget, zero},
  };
  const AngleStats stats = gradient_angle_stats(g, updates);
  EXPECT_EQ(stats.excluded_zero, 2);
  EXPECT_TRUE(stats.degenerate);
}

}  // namespace
}  // namespace foul
