/*
 * Copyright 2026 The factoidlink Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "test_support.hpp"

namespace factoidlink {
namespace {

using testsupport::GradientInstance;
using testsupport::random_gradient_instance;

double cosine(std::span<const double> a, std::span<const double> b) { return dot(a, b) / (norm(a) * norm(b)); }

std::vector<double> gaussian(std::mt19937_64& rng, std::size_t n) {
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<double> v(n);
  for (double& x : v) x = g(rng);
  return v;
}

// A follows-only source network: user "u<i>" follows degrees[i] sinks.
UnifiedNetwork follows_network(const std::vector<int>& degrees) {
  SocialNetwork s{"s", {}, {}};
  SocialNetwork t{"t", {}, {}};
  int sinks = 0;
  for (int d : degrees) sinks = std::max(sinks, d);
  for (std::size_t i = 0; i < degrees.size(); ++i) s.users.push_back(UserRecord{"u" + std::to_string(i), {}});
  for (int k = 0; k < sinks; ++k) s.users.push_back(UserRecord{"sink" + std::to_string(k), {}});
  for (std::size_t i = 0; i < degrees.size(); ++i) {
    for (int k = 0; k < degrees[i]; ++k) s.edges.emplace_back("u" + std::to_string(i), "sink" + std::to_string(k));
  }
  return build_unified_network(s, t, parse_predicate_list("screen_name"));
}

std::vector<double> empirical(const NoiseDistribution& d, std::size_t draws, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> freq(d.size(), 0.0);
  for (std::size_t i = 0; i < draws; ++i) freq[sample_negative(d, rng)] += 1.0;
  for (double& f : freq) f /= static_cast<double>(draws);
  return freq;
}

TEST(Projection, IdentityAndConstantMaps) {
  const auto id = ProjectionParams::near_identity("p", 3, 3, 10.0);
  const std::vector<double> v = {0.5, -1.25, 2.0};
  EXPECT_EQ(project(id, v), v);

  ProjectionParams constant{"p", 3, 2, std::vector<double>(6, 0.0), {1.0, -2.0, 0.5}, 1.0};
  EXPECT_EQ(project(constant, std::vector<double>{7.0, -3.0}), (std::vector<double>{1.0, -2.0, 0.5}));
  EXPECT_THROW(project(constant, v), std::invalid_argument);
}

TEST(Projection, NearIdentityRespectsCap) {
  const auto p = ProjectionParams::near_identity("p", 4, 6, 1.0);
  EXPECT_NEAR(p.frobenius_norm(), 1.0, 1e-12);
  EXPECT_DOUBLE_EQ(p.weights[0], 0.5);  // 4 unit diagonals rescaled to total norm 1
  const auto loose = ProjectionParams::near_identity("p", 2, 2, 5.0);
  EXPECT_NEAR(loose.frobenius_norm(), std::sqrt(2.0), 1e-12);
}

TEST(Projection, LipschitzBoundHoldsOnRandomInputs) {
  std::mt19937_64 rng(11);
  for (int t = 0; t < 200; ++t) {
    ProjectionParams p{"p", 5, 3, gaussian(rng, 15), gaussian(rng, 5), 1.0};
    const auto x = gaussian(rng, 3), y = gaussian(rng, 3);
    const auto px = project(p, x), py = project(p, y);
    std::vector<double> dphi(5), dx(3);
    for (int k = 0; k < 5; ++k) dphi[k] = px[k] - py[k];
    for (int k = 0; k < 3; ++k) dx[k] = x[k] - y[k];
    EXPECT_LE(norm(dphi), p.frobenius_norm() * norm(dx) * (1 + 1e-12));
  }
}

TEST(Projection, NormCapRescalesWithoutChangingDirection) {
  ProjectionParams p{"p", 2, 2, {3.0, 0.0, 0.0, 4.0}, {0.0, 0.0}, 1.0};
  p.enforce_norm_cap();
  EXPECT_NEAR(p.frobenius_norm(), 1.0, 1e-12);
  EXPECT_NEAR(p.weights[0], 0.6, 1e-12);
  EXPECT_NEAR(p.weights[3], 0.8, 1e-12);
}

TEST(Projection, AccumulatedUpdateKeepsCap) {
  auto p = ProjectionParams::near_identity("p", 3, 3, 1.0);
  ProjectionAccumulator acc(p);
  const std::vector<double> big = {50.0, -20.0, 10.0};
  acc.add(big, big);
  acc.apply(p, 1.0);
  EXPECT_LE(p.frobenius_norm(), 1.0 + 1e-12);
  EXPECT_EQ(acc.count, 0u);
}

TEST(NoiseDistribution, UniformOverFourUsers) {
  const auto freq = empirical(NoiseDistribution::uniform(4), 100000, 1);
  for (double f : freq) EXPECT_NEAR(f, 0.25, 0.02);
}

TEST(NoiseDistribution, OutDegreePowerLaw) {
  // Out-degrees 8 and 1: P(a) = 8^0.75 / (8^0.75 + 1) = 4.7568 / 5.7568.
  const auto net = follows_network({8, 1});
  const auto p1 = NoiseDistribution::out_degree(net);
  EXPECT_NEAR(p1.probability(0), 0.8263, 1e-4);
  for (NodeId n = 2; n < net.node_count(); ++n) EXPECT_EQ(p1.probability(n), 0.0);
  const auto freq = empirical(p1, 100000, 2);
  EXPECT_NEAR(freq[0], 0.8263, 0.01);

  const auto even = NoiseDistribution::out_degree(follows_network({1, 1}));
  EXPECT_DOUBLE_EQ(even.probability(0), 0.5);
  EXPECT_DOUBLE_EQ(even.probability(1), 0.5);
}

TEST(NoiseDistribution, EdgelessNetworkHasNoOutDegreeMass) {
  EXPECT_THROW(NoiseDistribution::out_degree(follows_network({0, 0})), InputError);
}

TEST(NoiseDistribution, SamplingIsDeterministicGivenSeed) {
  const auto d = NoiseDistribution::uniform(50);
  EXPECT_EQ(empirical(d, 1000, 9), empirical(d, 1000, 9));
}

TEST(NoiseDistribution, SubjectIsNeverItsOwnNegative) {
  const auto net = follows_network({1, 1});
  const auto p1 = NoiseDistribution::out_degree(net);
  Rng rng(3);
  for (int i = 0; i < 1000; ++i) EXPECT_EQ(sample_negative_excluding(p1, rng, 0), 1u);
  const auto lonely = NoiseDistribution::out_degree(follows_network({2, 0}));
  EXPECT_THROW(sample_negative_excluding(lonely, rng, 0), InputError);
}

TEST(Objective, ZeroScoresGiveTwoLogHalf) {
  const auto p = ProjectionParams::near_identity("p", 2, 2, 1.0);
  const std::vector<double> zero = {0.0, 0.0}, obj = {0.3, 0.4};
  const double f = score_user_object(zero, p, obj, {std::span<const double>(zero)});
  EXPECT_NEAR(f, 2 * std::log(0.5), 1e-15);
  EXPECT_NEAR(f, -1.3863, 1e-4);
}

TEST(Objective, SaturatedScoresApproachZero) {
  auto p = ProjectionParams::near_identity("p", 1, 1, 1.0);
  const std::vector<double> obj = {1.0};
  double prev = -1e300;
  for (double z : {1.0, 10.0, 100.0, 800.0}) {
    const std::vector<double> v = {z}, neg = {-z};
    const double f = score_user_object(v, p, obj, {std::span<const double>(neg)});
    EXPECT_LT(f, 0.0 + 1e-300);
    EXPECT_GT(f, prev);
    prev = f;
  }
  EXPECT_GT(prev, -1e-300);
  // The opposite extreme stays finite: log s(-800) = -800.
  const std::vector<double> bad = {-800.0};
  EXPECT_NEAR(score_user_object(bad, p, obj, {}), -800.0, 1e-9);
}

TEST(Objective, MatchesIndependentTranscription) {
  std::mt19937_64 rng(21);
  for (int t = 0; t < 100; ++t) {
    for (bool user_user : {false, true}) {
      const GradientInstance g = random_gradient_instance(rng, user_user);
      const std::vector<double> ctx = [&] {
        if (!user_user) return g.object;
        auto r = g.users.row(g.followee);
        return std::vector<double>(r.begin(), r.end());
      }();
      const auto fg = factoid_gradient(g.users, g.subject, ctx, g.params, g.negatives, user_user);
      EXPECT_NEAR(fg.objective, testsupport::instance_objective(g, g.users, g.params, g.object), 1e-12);
      if (!user_user) {
        std::vector<std::span<const double>> negs;
        for (NodeId k : g.negatives) negs.push_back(g.users.row(k));
        EXPECT_NEAR(score_user_object(g.users.row(g.subject), g.params, g.object, negs), fg.objective, 1e-12);
      }
    }
  }
}

TEST(Gradient, UserObjectMatchesFiniteDifferences) {
  std::mt19937_64 rng(31);
  for (int t = 0; t < 50; ++t) {
    const auto g = random_gradient_instance(rng, false);
    EXPECT_LE(testsupport::max_gradient_error(g), 1e-4) << "instance " << t;
  }
}

TEST(Gradient, UserUserMatchesFiniteDifferencesIncludingFollowee) {
  std::mt19937_64 rng(37);
  for (int t = 0; t < 50; ++t) {
    const auto g = random_gradient_instance(rng, true);
    EXPECT_LE(testsupport::max_gradient_error(g), 1e-4) << "instance " << t;
  }
}

TEST(SgdStep, SubjectMovesAlongPhiAndNegativesAgainstIt) {
  std::mt19937_64 rng(41);
  EmbeddingTable users(4);
  for (int n = 0; n < 4; ++n) users.add_row("n" + std::to_string(n), gaussian(rng, 4));
  ProjectionParams p{"p", 4, 3, gaussian(rng, 12), gaussian(rng, 4), 100.0};
  const auto obj = gaussian(rng, 3);
  const auto phi = project(p, obj);
  const EmbeddingTable before = users;
  const std::vector<NodeId> negatives = {2, 3};
  sgd_step_user_object(users, 0, obj, negatives, p, 0.1);

  auto delta = [&](NodeId n) {
    std::vector<double> d(4);
    for (int k = 0; k < 4; ++k) d[k] = users.row(n)[k] - before.row(n)[k];
    return d;
  };
  EXPECT_NEAR(cosine(delta(0), phi), 1.0, 1e-12);
  EXPECT_NEAR(cosine(delta(2), phi), -1.0, 1e-12);
  EXPECT_NEAR(cosine(delta(3), phi), -1.0, 1e-12);
  EXPECT_EQ(delta(1), std::vector<double>(4, 0.0));
}

TEST(SgdStep, NonFiniteUpdateAborts) {
  EmbeddingTable users(1);
  users.add_row("a", std::vector<double>{std::numeric_limits<double>::infinity()});
  users.add_row("b", std::vector<double>{1.0});
  auto p = ProjectionParams::near_identity("p", 1, 1, 1.0);
  const std::vector<double> obj = {std::numeric_limits<double>::quiet_NaN()};
  const std::vector<NodeId> negatives = {1};
  EXPECT_THROW(sgd_step_user_object(users, 0, obj, negatives, p, 0.1), DivergenceError);
}

TEST(Train, SharedFolloweePullsFollowersTogether) {
  // a -> c and b -> c; c follows nobody.
  SocialNetwork s{"s", {UserRecord{"a", {}}, UserRecord{"b", {}}, UserRecord{"c", {}}}, {{"a", "c"}, {"b", "c"}}};
  const auto net = build_unified_network(s, SocialNetwork{"t", {}, {}}, parse_predicate_list("screen_name"));
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    FactoidTrainConfig cfg;
    cfg.dim = 8;
    cfg.seed = seed;
    cfg.epochs = 0;
    const auto init = train(net, {}, cfg);
    cfg.epochs = 50;
    const auto out = train(net, {}, cfg);
    const double before = cosine(init.users.row(0), init.users.row(1));
    const double after = cosine(out.users.row(0), out.users.row(1));
    EXPECT_GT(after, before) << "seed " << seed;
    EXPECT_GT(after, 0.9) << "seed " << seed;
  }
}

TEST(Train, ZeroEpochsReturnInitialization) {
  const auto net = follows_network({2, 1});
  FactoidTrainConfig cfg;
  cfg.epochs = 0;
  cfg.seed = 4;
  const auto out = train(net, {}, cfg);
  EXPECT_EQ(out.report.updates, 0u);
  EXPECT_TRUE(out.report.epoch_objective.empty());
  const double half_width = cfg.init_scale / std::sqrt(static_cast<double>(cfg.dim));
  for (NodeId n = 0; n < net.node_count(); ++n) {
    for (double x : out.users.row(n)) EXPECT_LE(std::abs(x), half_width);
  }
  EXPECT_NEAR(out.report.final_w_norm.at(std::string(kFollows)), cfg.norm_cap, 1e-12);
}

TEST(Train, DeterministicAndCapped) {
  const auto net = follows_network({3, 2, 1});
  FactoidTrainConfig cfg;
  cfg.dim = 6;
  cfg.epochs = 30;
  cfg.seed = 8;
  const auto a = train(net, {}, cfg);
  const auto b = train(net, {}, cfg);
  EXPECT_EQ(a.users, b.users);
  for (const auto& p : a.projections) EXPECT_LE(p.frobenius_norm(), cfg.norm_cap + 1e-12);
  EXPECT_EQ(a.report.predicates.back(), std::string(kFollows));
}

TEST(Train, RejectsMissingInputs) {
  SocialNetwork bare{"s", {UserRecord{"a", {}}}, {}};
  const auto empty = build_unified_network(bare, SocialNetwork{"t", {}, {}}, parse_predicate_list("screen_name"));
  EXPECT_THROW(train(empty, {}, FactoidTrainConfig{}), InputError);

  SocialNetwork named{"s", {testsupport::named_user("a", "Amy")}, {}};
  const auto net = build_unified_network(named, SocialNetwork{"t", {}, {}}, parse_predicate_list("screen_name"));
  EXPECT_THROW(train(net, {}, FactoidTrainConfig{}), InputError);
}

TEST(Train, ExactCopySyntheticPairLinksNearlyEveryone) {
  testsupport::TempDir in("exact-in"), out("exact-out");
  SyntheticParams sp;
  sp.n_users = 200;
  sp.overlap_frac = 1.0;
  sp.name_noise = 0.0;
  sp.feature_noise = 0.0;
  sp.seed = 3;
  write_synthetic(sp, in.path());
  auto cfg = testsupport::config_for_dir(in.path(), out.path(), 5);
  cfg.truth = (in.path() / "truth.csv").string();
  const auto result = run_pipeline(cfg);
  ASSERT_TRUE(result.metrics.has_value());
  EXPECT_GE(result.metrics->hr_at_k.at(1), 0.98);
}

}  // namespace
}  // namespace factoidlink
