#include <atomic>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "doctest.h"

#include "courtlearn/sim.hpp"

using namespace courtlearn;

namespace {

RunConfig constant_run(std::int64_t horizon, double mu, double sigma, double alpha, CostModel costs,
                       PolicyConfig policy, std::uint64_t seed = 1) {
  return RunConfig{.horizon = horizon,
                   .truth = GroundTruth::constant(mu, sigma, alpha),
                   .cases = CaseSpec{},
                   .costs = std::move(costs),
                   .learner = LearnerKind::empirical_mean(),
                   .policy = std::move(policy),
                   .seed = seed,
                   .config_digest = "test"};
}

RunConfig linear_run(std::int64_t horizon, PolicyConfig policy, std::uint64_t seed) {
  return RunConfig{.horizon = horizon,
                   .truth = GroundTruth::linear(Eigen::Vector3d(0.2, -0.1, 0.1), 0.5, 0.2, 1.0),
                   .cases = CaseSpec{CaseKind::Vector, 3},
                   .costs = CostModel::uniform(0.2, 0.6),
                   .learner = LearnerKind::ols(),
                   .policy = std::move(policy),
                   .seed = seed,
                   .config_digest = "test"};
}

bool same_ledger(const RunLedger& a, const RunLedger& b) {
  if (a.records.size() != b.records.size() || a.total_loss != b.total_loss || a.court_count != b.court_count ||
      a.total_subsidy_paid != b.total_subsidy_paid || a.seed != b.seed) {
    return false;
  }
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    const auto& x = a.records[i];
    const auto& y = b.records[i];
    if (!(x.features == y.features) || x.cost != y.cost || x.subsidy != y.subsidy || x.court != y.court ||
        x.applied_decision != y.applied_decision || x.settlement_decision != y.settlement_decision ||
        x.squared_error != y.squared_error) {
      return false;
    }
  }
  return true;
}

}  // namespace

TEST_CASE("noiseless run where every agent settles") {
  const auto ledger = run(constant_run(5, 1.0, 0.0, 1.0, CostModel::point_mass(3.0), NoSubsidyPolicy{}));
  CHECK(ledger.court_count == 0);
  CHECK(ledger.total_loss == 5.0);
  for (const auto& r : ledger.records) {
    CHECK(r.pre_step_err_bound == 1.0);
    CHECK_FALSE(r.court);
    CHECK(r.applied_decision == 0.0);
    CHECK(r.squared_error == 1.0);
  }
}

TEST_CASE("noiseless run where every case is compelled") {
  const auto ledger =
      run(constant_run(3, 1.0, 0.0, 1.0, CostModel::point_mass(0.5), ExploreThenCommitPolicy{3, 10.0, 0.5}));
  CHECK(ledger.court_count == 3);
  CHECK(ledger.total_loss == 1.5);
  CHECK(ledger.records[0].settlement_decision == 0.0);
  CHECK(ledger.records[0].applied_decision == 1.0);
}

TEST_CASE("ledger accounting identities") {
  const std::vector<PolicyConfig> policies = {NoSubsidyPolicy{}, ExploreThenCommitPolicy{400, 1.0, 0.6},
                                              DynamicCompellingPolicy{1.0, 0.6}, SubsidySamplingPolicy{0.4, 0.2, 0.6},
                                              KwikPolicy::with_defaults(0.25, 0.05, 3, 20.0)};
  for (const auto& policy : policies) {
    const RunConfig config = linear_run(400, policy, 17);
    const Environment env = draw_environment(config);
    const auto ledger = run(config, env);
    CHECK(recompute_total_loss(ledger) == ledger.total_loss);

    // Rebuild D_t from the environment and check every applied decision.
    SufficientStats stats(3);
    std::int64_t courts = 0;
    double subsidy = 0.0;
    for (std::size_t i = 0; i < ledger.records.size(); ++i) {
      const auto& r = ledger.records[i];
      CHECK(r.m_before == courts);
      CHECK(r.features == env.cases[i]);
      CHECK(r.cost == env.costs[i]);
      const double before = predict(fit(config.learner, stats), r.features, 1.0);
      CHECK(r.settlement_decision == before);
      if (r.court) {
        stats.add({env.cases[i], env.outcomes[i]});
        ++courts;
        subsidy += r.subsidy;
        CHECK(r.court_cost_incurred == r.cost);
        CHECK(r.applied_decision == predict(fit(config.learner, stats), r.features, 1.0));
      } else {
        CHECK(r.court_cost_incurred == 0.0);
        CHECK(r.applied_decision == before);
      }
      CHECK(r.squared_error == (r.applied_decision - r.true_value) * (r.applied_decision - r.true_value));
      CHECK(r.applied_decision >= 0.0);
      CHECK(r.applied_decision <= 1.0);
      CHECK(r.court == (r.compelled || agent_decision(r.cost, r.subsidy, r.pre_step_err_bound)));
    }
    CHECK(ledger.court_count == courts);
    CHECK(stats.count() == ledger.court_count);
    CHECK(ledger.total_subsidy_paid == subsidy);
  }
}

TEST_CASE("runs are deterministic in the seed") {
  const RunConfig config = linear_run(300, SubsidySamplingPolicy{0.4, 0.2, 0.6}, 5);
  CHECK(same_ledger(run(config), run(config)));
  RunConfig other = config;
  other.seed = 6;
  CHECK_FALSE(same_ledger(run(config), run(other)));
}

TEST_CASE("the environment does not depend on the policy or the horizon") {
  const Environment a = draw_environment(linear_run(200, NoSubsidyPolicy{}, 9));
  const Environment b = draw_environment(linear_run(500, DynamicCompellingPolicy{1.0, 0.6}, 9));
  for (std::size_t i = 0; i < a.cases.size(); ++i) {
    CHECK(a.cases[i] == b.cases[i]);
    CHECK(a.costs[i] == b.costs[i]);
    CHECK(a.outcomes[i] == b.outcomes[i]);
  }
}

TEST_CASE("litigation stops for good once the bound drops below half the cheapest cost") {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto ledger =
        run(constant_run(300, 0.5, 0.5, 1.0, CostModel::uniform(0.4, 1.0), NoSubsidyPolicy{}, seed));
    bool closed = false;
    for (const auto& r : ledger.records) {
      if (closed) CHECK_FALSE(r.court);
      if (2.0 * r.pre_step_err_bound < 0.4) closed = true;
    }
  }
}

TEST_CASE("offline baseline") {
  SUBCASE("noiseless fit is exact") {
    const RunConfig config = linear_run(200, NoSubsidyPolicy{}, 3);
    RunConfig noiseless = config;
    noiseless.truth = GroundTruth::linear(Eigen::Vector3d(0.2, -0.1, 0.1), 0.5, 0.0, 1.0);
    const Environment env = draw_environment(noiseless);
    CHECK(offline_baseline(env, noiseless.truth, noiseless.learner, 3) < 1e-20);
  }
  SUBCASE("constant rule: L* close to sigma^2") {
    const RunConfig config = constant_run(10000, 1.0, 1.0, 2.0, CostModel::point_mass(1.0), NoSubsidyPolicy{});
    RunningStats stats;
    for (std::uint64_t r = 0; r < 100; ++r) {
      RunConfig rc = config;
      rc.seed = replication_seed(4, r);
      stats.add(offline_baseline(draw_environment(rc), rc.truth, rc.learner, 0));
    }
    CHECK(stats.mean() > 0.5);
    CHECK(stats.mean() < 2.0);
  }
  SUBCASE("independent of the online policy") {
    const auto a = estimate_regret(linear_run(300, NoSubsidyPolicy{}, 8), 10);
    const auto b = estimate_regret(linear_run(300, DynamicCompellingPolicy{1.0, 0.6}, 8), 10);
    CHECK(a.mean_offline_loss == b.mean_offline_loss);
  }
}

TEST_CASE("regret estimates") {
  SUBCASE("noiseless compel-all at zero cost has zero regret") {
    const auto report =
        estimate_regret(constant_run(50, 0.7, 0.0, 1.0, CostModel::point_mass(0.0), ExploreThenCommitPolicy{50, 10.0, 1.0}), 20);
    // Zero up to rounding in the running mean of identical outcomes.
    CHECK(std::abs(report.mean_regret) < 1e-20);
    CHECK(report.std_error < 1e-20);
  }
  SUBCASE("report identity") {
    const auto report = estimate_regret(linear_run(200, DynamicCompellingPolicy{1.0, 0.6}, 2), 15);
    CHECK(report.replications == 15);
    CHECK(report.mean_regret ==
          doctest::Approx((report.mean_online_loss - report.mean_offline_loss) / 200.0).epsilon(1e-12));
  }
  SUBCASE("compel-all at zero cost: regret shrinks with T") {
    auto at = [](std::int64_t horizon) {
      return estimate_regret(constant_run(horizon, 0.5, 0.5, 1.0, CostModel::point_mass(0.0),
                                          ExploreThenCommitPolicy{horizon, 1e6, 1.0}, 3),
                             100)
          .mean_regret;
    };
    CHECK(at(10000) < at(1000));
  }
  SUBCASE("etc regret ratio follows 1/sqrt(T)") {
    auto at = [](std::int64_t horizon) {
      return estimate_regret(constant_run(horizon, 0.5, 0.5, 1.0, CostModel::point_mass(1.0),
                                          ExploreThenCommitPolicy{horizon, 1.0, 1.0}, 11),
                             200)
          .mean_regret;
    };
    const double ratio = at(10000) / at(1000);
    const double expected = std::sqrt(0.1);
    CHECK(ratio > expected * 0.65);
    CHECK(ratio < expected * 1.35);
  }
}

TEST_CASE("ledger sink sees every replication in order") {
  std::vector<std::int64_t> seen;
  estimate_regret(linear_run(50, NoSubsidyPolicy{}, 1), 12,
                  [&](std::int64_t r, const RunLedger& ledger) {
                    seen.push_back(r);
                    CHECK(ledger.records.size() == 50);
                    CHECK(ledger.seed == replication_seed(1, static_cast<std::uint64_t>(r)));
                  });
  REQUIRE(seen.size() == 12);
  for (std::int64_t i = 0; i < 12; ++i) CHECK(seen[static_cast<std::size_t>(i)] == i);
}

TEST_CASE("deterrent check without subsidies is trivially satisfied") {
  const auto report = check_deterrent(constant_run(200, 0.5, 0.5, 1.0, CostModel::uniform(0.5, 1.0), NoSubsidyPolicy{}), 30);
  CHECK(report.satisfied);
  CHECK(report.per_step.size() == 200);
  for (const auto& s : report.per_step) {
    CHECK(s.mean_payoff < 0.0);
    CHECK(s.mean_subsidy == 0.0);
  }
}

TEST_CASE("configuration validation") {
  CHECK_THROWS_AS(run(constant_run(0, 0.5, 0.1, 1.0, CostModel::point_mass(1.0), NoSubsidyPolicy{})), ConfigError);
  RunConfig bad = linear_run(10, NoSubsidyPolicy{}, 1);
  bad.cases = CaseSpec{};
  CHECK_THROWS_AS(run(bad), ConfigError);
  RunConfig mismatch = linear_run(10, NoSubsidyPolicy{}, 1);
  mismatch.cases.dimension = 2;
  CHECK_THROWS_AS(run(mismatch), ConfigError);
  RunConfig mean_on_linear = linear_run(10, NoSubsidyPolicy{}, 1);
  mean_on_linear.learner = LearnerKind::empirical_mean();
  CHECK_THROWS_AS(run(mean_on_linear), ConfigError);
  CHECK_THROWS_AS(estimate_regret(linear_run(10, NoSubsidyPolicy{}, 1), 0), ConfigError);
}

TEST_CASE("running stats merge matches a single pass") {
  Rng rng(1);
  std::normal_distribution<double> normal(3.0, 2.0);
  RunningStats all, left, right;
  for (int i = 0; i < 1000; ++i) {
    const double v = normal(rng);
    all.add(v);
    (i < 370 ? left : right).add(v);
  }
  left.merge(right);
  CHECK(left.count() == all.count());
  CHECK(left.mean() == doctest::Approx(all.mean()).epsilon(1e-12));
  CHECK(left.variance() == doctest::Approx(all.variance()).epsilon(1e-12));
}

TEST_CASE("parallel_for visits every index once and propagates failures") {
  std::vector<std::atomic<int>> hits(1000);
  parallel_for(1000, [&](std::int64_t i) { ++hits[static_cast<std::size_t>(i)]; });
  for (const auto& h : hits) CHECK(h.load() == 1);
  CHECK_THROWS_AS(parallel_for(100,
                               [](std::int64_t i) {
                                 if (i == 42) throw std::runtime_error("boom");
                               }),
                  std::runtime_error);
}
