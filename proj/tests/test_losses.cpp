#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "metairl/demos.hpp"
#include "metairl/losses.hpp"
#include "metairl/rng.hpp"
#include "metairl/terrain.hpp"
#include "metairl/vrfn.hpp"
#include "oracles.hpp"

namespace metairl {
namespace {

SharingKind kind_of(Divergence d) { return SharingKind{d, 1.0, SharingDomain::AllStates}; }

std::vector<double> random_vector(Rng& rng, std::size_t n, double lo = -2.0, double hi = 2.0) {
  std::vector<double> v(n);
  for (auto& x : v) x = uniform_real(rng, lo, hi);
  return v;
}

TEST(IrlNll, UniformRowCostsLogActions) {
  const std::vector<double> q = {0.3, 0.3, 0.3, 0.3};
  const std::vector<StateAction> one = {{0, 2}};
  EXPECT_NEAR(irl_nll_q(q, 4, one, 2.5).value, std::log(4.0), 1e-15);
  const std::vector<StateAction> two = {{0, 2}, {0, 2}};
  EXPECT_DOUBLE_EQ(irl_nll_q(q, 4, two, 2.5).value, 2.0 * irl_nll_q(q, 4, one, 2.5).value);
}

TEST(IrlNll, GrowsAsDemonstratedActionFalls) {
  const std::vector<StateAction> pair = {{0, 0}};
  double prev = -1.0;
  for (double q0 : {0.0, -5.0, -50.0}) {
    const std::vector<double> q = {q0, 0.0, 0.0, 0.0};
    const double loss = irl_nll_q(q, 4, pair, 1.0).value;
    EXPECT_GT(loss, prev);
    prev = loss;
  }
  EXPECT_NEAR(prev, 50.0 + std::log(3.0), 1e-9);
}

TEST(IrlNll, MatchesNegativeLogPolicyAndBounds) {
  Rng rng(31);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t ns = 5, na = 4;
    const auto q = random_vector(rng, ns * na);
    const double b = uniform_real(rng, 0.1, 5.0);
    std::vector<StateAction> pairs;
    for (int k = 0; k < 6; ++k) pairs.push_back({uniform_index(rng, ns), uniform_index(rng, na)});
    double expect = 0.0, gap = 0.0;
    for (const auto& [s, a] : pairs) {
      const std::vector<double> row(q.begin() + static_cast<std::ptrdiff_t>(s * na),
                                    q.begin() + static_cast<std::ptrdiff_t>((s + 1) * na));
      expect -= std::log(oracle::naive_softmax(row, b)[a]);
      gap = std::max(gap, *std::max_element(row.begin(), row.end()) - *std::min_element(row.begin(), row.end()));
    }
    const double loss = irl_nll_q(q, na, pairs, b).value;
    EXPECT_NEAR(loss, expect, 1e-10);
    EXPECT_GE(loss, 0.0);
    EXPECT_LE(loss, static_cast<double>(pairs.size()) * (b * gap + std::log(4.0)) + 1e-12);
  }
}

TEST(IrlNll, GradientIsScaledPolicyMinusIndicator) {
  const std::vector<double> q = {0.0, std::log(3.0)};
  const std::vector<StateAction> pair = {{0, 0}};
  const auto out = irl_nll_q(q, 2, pair, 1.0);
  EXPECT_NEAR(out.d_q[0], 0.25 - 1.0, 1e-15);
  EXPECT_NEAR(out.d_q[1], 0.75, 1e-15);
}

TEST(IrlNll, RejectsEmptyDemos) {
  const std::vector<double> q = {0.0, 0.0};
  EXPECT_THROW(irl_nll_q(q, 2, {}, 1.0), EmptyDemos);
}

TEST(SharingDivergence, ZeroForEqualRewards) {
  const std::vector<double> r = {1.0, -2.0, 3.5};
  for (auto d : {Divergence::L2, Divergence::Huber, Divergence::Stdev, Divergence::None})
    EXPECT_EQ(sharing_divergence(r, r, nullptr, kind_of(d)), 0.0);
}

TEST(SharingDivergence, HuberExamples) {
  const std::vector<double> zero = {0.0};
  EXPECT_DOUBLE_EQ(sharing_divergence(std::vector<double>{0.5}, zero, nullptr, kind_of(Divergence::Huber)), 0.125);
  EXPECT_DOUBLE_EQ(sharing_divergence(std::vector<double>{2.0}, zero, nullptr, kind_of(Divergence::Huber)), 1.5);
  EXPECT_DOUBLE_EQ(sharing_divergence(std::vector<double>{-2.0}, zero, nullptr, kind_of(Divergence::Huber)), 1.5);
  EXPECT_DOUBLE_EQ(huber(3.0, 2.0), 2.0 * (3.0 - 1.0));
}

TEST(SharingDivergence, EntropyOfConstantDifferenceIsLogN) {
  for (std::size_t n : {1u, 3u, 10u}) {
    const std::vector<double> ri(n, 4.0), rb(n, 1.5);
    EXPECT_NEAR(sharing_divergence(ri, rb, nullptr, kind_of(Divergence::Entropy)), std::log(static_cast<double>(n)),
                1e-12);
  }
}

TEST(SharingDivergence, PopulationStdev) {
  EXPECT_DOUBLE_EQ(sharing_divergence(std::vector<double>{0.0, 2.0}, std::vector<double>{0.0, 0.0}, nullptr,
                                      kind_of(Divergence::Stdev)),
                   1.0);
}

TEST(SharingDivergence, L2IsEuclideanNorm) {
  EXPECT_DOUBLE_EQ(sharing_divergence(std::vector<double>{3.0, 1.0}, std::vector<double>{0.0, 5.0}, nullptr,
                                      kind_of(Divergence::L2)),
                   5.0);
}

TEST(SharingDivergence, VisitedMaskRestrictsTheDomain) {
  const std::vector<double> ri = {1.0, 100.0, 3.0}, rb = {0.0, 0.0, 0.0};
  const std::vector<bool> mask = {true, false, true};
  SharingKind k{Divergence::L2, 1.0, SharingDomain::VisitedStates};
  EXPECT_DOUBLE_EQ(sharing_divergence(ri, rb, &mask, k), std::sqrt(10.0));
  const std::vector<bool> empty = {false, false, false};
  for (auto d : {Divergence::L2, Divergence::Huber, Divergence::Stdev, Divergence::Entropy})
    EXPECT_THROW(sharing_divergence(ri, rb, &empty, kind_of(d)), EmptyDomain);
  EXPECT_EQ(sharing_divergence(ri, rb, &empty, kind_of(Divergence::None)), 0.0);
}

TEST(SharingDivergence, SymmetryAndShiftInvariance) {
  Rng rng(55);
  for (int trial = 0; trial < 100; ++trial) {
    const auto ri = random_vector(rng, 9);
    const auto rb = random_vector(rng, 9);
    for (auto d : {Divergence::L2, Divergence::Huber}) {
      EXPECT_DOUBLE_EQ(sharing_divergence(ri, rb, nullptr, kind_of(d)), sharing_divergence(rb, ri, nullptr, kind_of(d)));
      EXPECT_GT(sharing_divergence(ri, rb, nullptr, kind_of(d)), 0.0);
    }
    const double c = uniform_real(rng, -10.0, 10.0);
    auto shifted = ri;
    for (auto& x : shifted) x += c;
    for (auto d : {Divergence::Stdev, Divergence::Entropy})
      EXPECT_NEAR(sharing_divergence(shifted, rb, nullptr, kind_of(d)), sharing_divergence(ri, rb, nullptr, kind_of(d)),
                  1e-10);
  }
}

TEST(SharingDivergence, GradientMatchesFiniteDifferences) {
  Rng rng(8);
  for (auto d : {Divergence::L2, Divergence::Huber, Divergence::Stdev, Divergence::Entropy}) {
    for (int trial = 0; trial < 20; ++trial) {
      const auto ri = random_vector(rng, 7);
      const auto rb = random_vector(rng, 7);
      const std::vector<bool> mask = {true, true, false, true, false, true, true};
      SharingKind k{d, 0.7, SharingDomain::VisitedStates};
      const auto out = sharing_divergence_grad(ri, rb, &mask, k);
      auto f = [&](const std::vector<double>& x) { return sharing_divergence(x, rb, &mask, k); };
      for (std::size_t s = 0; s < ri.size(); ++s)
        EXPECT_NEAR(out.grad[s], oracle::central_difference(f, ri, s), 1e-7) << to_string(d);
    }
  }
}

// Small fixture for the combined objective: a 3x3 world, two tasks, one
// demonstration each.
struct SmallProblem {
  Terrain terrain = generate_terrain(3, 3, 2, {1, 5}, {0.3, 1.0}, 0.1, 11);
  std::vector<Task> tasks = make_tasks(terrain, 2, 10.0, 12);
  std::vector<Mdp> mdps;
  DemoSet demos;
  StateFeatures features = coordinate_features(3, 3);
  Arch arch{2, {5, 4}, Activation::Tanh};

  SmallProblem() {
    for (const auto& t : tasks) mdps.push_back(ground_truth_mdp(terrain, t, 0.9));
    demos = generate_demos(terrain, tasks, 1, 10.0, 0, 0.9, 13);
  }
};

TEST(MetaObjective, ZeroWeightOrNoneDecouplesTasks) {
  SmallProblem p;
  const VrParams theta_b = init_params(p.arch, 1);
  const std::vector<VrParams> thetas = {init_params(p.arch, 2), init_params(p.arch, 3)};
  MetaObjectiveConfig cfg;
  cfg.lambda = 0.0;
  double sum = 0.0;
  for (std::size_t i = 0; i < 2; ++i) sum += irl_nll(thetas[i], p.mdps[i], p.features, std::span(p.demos.per_task[i]), cfg.b);
  const auto at_zero = meta_objective(theta_b, thetas, p.mdps, p.features, p.demos, cfg);
  EXPECT_EQ(at_zero.total, sum);
  EXPECT_EQ(at_zero.sharing, 0.0);
  cfg.lambda = 3.0;
  cfg.sharing.kind = Divergence::None;
  EXPECT_EQ(meta_objective(theta_b, thetas, p.mdps, p.features, p.demos, cfg).total, sum);
}

TEST(MetaObjective, MatchingBaselineContributesNothing) {
  SmallProblem p;
  const Arch linear{2, {}, Activation::Tanh};
  // A constant VR function c has reward c(1 - gamma) everywhere under HardMax.
  VrParams theta(linear);
  theta.bias(0)[0] = 2.0;
  VrParams theta_b(linear);
  theta_b.bias(0)[0] = 2.0 * (1.0 - 0.9);
  const std::vector<VrParams> thetas = {theta};
  const std::vector<Mdp> mdps = {p.mdps[0]};
  const DemoSet one = p.demos.prefix(1, 1);
  MetaObjectiveConfig cfg;
  cfg.sharing.kind = Divergence::L2;
  cfg.lambda = 5.0;
  cfg.backup = BackupOperator::hard_max();
  const auto obj = meta_objective(theta_b, thetas, mdps, p.features, one, cfg);
  EXPECT_NEAR(obj.sharing, 0.0, 1e-12);
  EXPECT_NEAR(obj.total, irl_nll(theta, mdps[0], p.features, std::span(one.per_task[0]), cfg.b), 1e-12);
}

TEST(MetaObjective, RejectsMismatchedLists) {
  SmallProblem p;
  const std::vector<VrParams> thetas = {init_params(p.arch, 2)};
  EXPECT_THROW(meta_objective(init_params(p.arch, 1), thetas, p.mdps, p.features, p.demos, MetaObjectiveConfig{}),
               ShapeMismatch);
}

class MetaObjectiveGradient : public ::testing::TestWithParam<Divergence> {};

TEST_P(MetaObjectiveGradient, MatchesFiniteDifferencesForEveryParameter) {
  SmallProblem p;
  for (auto domain : {SharingDomain::AllStates, SharingDomain::VisitedStates}) {
    for (auto op : {BackupOperator::log_sum_exp(), BackupOperator::hard_max()}) {
      MetaObjectiveConfig cfg;
      cfg.b = 2.0;
      cfg.lambda = 0.8;
      cfg.sharing = SharingKind{GetParam(), 0.5, domain};
      cfg.backup = op;
      VrParams theta_b = init_params(p.arch, 21);
      std::vector<VrParams> thetas = {init_params(p.arch, 22), init_params(p.arch, 23)};
      const auto tasks = prepare_tasks(p.demos, 9);
      const auto g = meta_objective_grad(theta_b, thetas, p.mdps, p.features, tasks, cfg);
      auto check = [&](VrParams& target, const VrParams& grad) {
        for (std::size_t k = 0; k < target.size(); ++k) {
          auto f = [&](const std::vector<double>& values) {
            const auto saved = target.values;
            target.values = values;
            const double out = meta_objective(theta_b, thetas, p.mdps, p.features, tasks, cfg).total;
            target.values = saved;
            return out;
          };
          const double numeric = oracle::central_difference(f, target.values, k);
          const double rel = std::abs(grad.values[k] - numeric) /
                             std::max({std::abs(grad.values[k]), std::abs(numeric), 1e-4});
          EXPECT_LT(rel, 1e-4) << to_string(GetParam()) << " coordinate " << k;
        }
      };
      check(theta_b, g.grad_b);
      for (std::size_t i = 0; i < thetas.size(); ++i) check(thetas[i], g.grads[i]);
    }
  }
}

INSTANTIATE_TEST_SUITE_P(AllKinds, MetaObjectiveGradient, ::testing::ValuesIn(kAllDivergences),
                         [](const auto& info) { return std::string(to_string(info.param)); });

}  // namespace
}  // namespace metairl
