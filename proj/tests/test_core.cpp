#include <cmath>
#include <set>

#include "doctest.h"

#include "courtlearn/core.hpp"

using namespace courtlearn;

TEST_CASE("singleton spec samples the singleton case") {
  Rng rng(1);
  const CaseFeatures x = sample_case(CaseSpec{}, rng);
  CHECK(x.is_singleton());
  CHECK(x.dimension() == 0);
  CHECK(x == CaseFeatures::singleton());
  CHECK(x.augmented().size() == 1);
  CHECK(x.augmented()(0) == 1.0);
}

TEST_CASE("vector cases stay in the unit ball for every seed") {
  for (const auto dist : {CaseDistribution::UniformBall, CaseDistribution::UnitSphere}) {
    const CaseSpec spec{CaseKind::Vector, 3, dist};
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
      Rng rng(seed);
      for (int i = 0; i < 50; ++i) {
        const CaseFeatures x = sample_case(spec, rng);
        REQUIRE(x.dimension() == 3);
        CHECK(x.coords().norm() <= 1.0 + 1e-12);
        if (dist == CaseDistribution::UnitSphere) CHECK(x.coords().norm() == doctest::Approx(1.0).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("uniform ball in one dimension is symmetric") {
  const CaseSpec spec{CaseKind::Vector, 1, CaseDistribution::UniformBall};
  Rng rng(7);
  double sum = 0.0, sum_sq = 0.0;
  const int draws = 100000;
  for (int i = 0; i < draws; ++i) {
    const double v = sample_case(spec, rng).coords()(0);
    sum += v;
    sum_sq += v * v;
  }
  CHECK(std::abs(sum / draws) < 0.02);
  // Uniform on [-1, 1] has second moment 1/3.
  CHECK(sum_sq / draws == doctest::Approx(1.0 / 3.0).epsilon(0.02));
}

TEST_CASE("uniform ball radius law: Pr[|x| <= r] = r^n") {
  const CaseSpec spec{CaseKind::Vector, 3, CaseDistribution::UniformBall};
  Rng rng(11);
  int inside = 0;
  const int draws = 100000;
  for (int i = 0; i < draws; ++i) inside += sample_case(spec, rng).coords().norm() <= 0.5 ? 1 : 0;
  const double p = 0.125;
  const double se = std::sqrt(p * (1 - p) / draws);
  CHECK(std::abs(static_cast<double>(inside) / draws - p) < 4 * se);
}

TEST_CASE("invalid case dimension is a configuration error") {
  const CaseSpec spec{CaseKind::Vector, 0, CaseDistribution::UniformBall};
  Rng rng(1);
  CHECK_THROWS_AS(sample_case(spec, rng), ConfigError);
  try {
    spec.validate();
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(e.path() == "cases.dimension");
  }
  CHECK_THROWS(CaseFeatures::vector(Eigen::Vector2d(1.0, 1.0)));
}

TEST_CASE("court outcome without noise equals the rule") {
  Rng rng(3);
  const auto constant = GroundTruth::constant(1.0, 0.0, 1.0);
  CHECK(court_outcome(constant, CaseFeatures::singleton(), rng).outcome == 1.0);

  const auto linear = GroundTruth::linear(Eigen::VectorXd::Zero(2), 0.5, 0.0, 1.0);
  for (int i = 0; i < 10; ++i) {
    const CaseFeatures x = sample_case(CaseSpec{CaseKind::Vector, 2}, rng);
    CHECK(court_outcome(linear, x, rng).outcome == 0.5);
  }
  const auto sloped = GroundTruth::linear(Eigen::Vector2d(0.3, -0.4), 0.5, 0.0, 1.0);
  const CaseFeatures x = CaseFeatures::vector(Eigen::Vector2d(0.6, 0.8));
  CHECK(sloped.value(x) == doctest::Approx(0.5 + 0.18 - 0.32));
}

TEST_CASE("court outcome moments match the Gaussian noise") {
  const auto truth = GroundTruth::constant(2.0, 1.0, 3.0);
  Rng rng(5);
  const int draws = 100000;
  double sum = 0.0, sum_sq = 0.0;
  for (int i = 0; i < draws; ++i) {
    const double y = court_outcome(truth, CaseFeatures::singleton(), rng).outcome;
    sum += y;
    sum_sq += y * y;
  }
  const double mean = sum / draws;
  const double var = (sum_sq - draws * mean * mean) / (draws - 1);
  CHECK(std::abs(mean - 2.0) < 0.02);
  CHECK(std::abs(var - 1.0) < 0.05);
}

TEST_CASE("court outcome rejects a dimension mismatch") {
  Rng rng(1);
  const auto truth = GroundTruth::linear(Eigen::VectorXd::Zero(3), 0.5, 0.1, 1.0);
  CHECK_THROWS_AS(court_outcome(truth, CaseFeatures::vector(Eigen::Vector2d(0.1, 0.1)), rng), ConfigError);
}

TEST_CASE("ground truth construction enforces its invariants") {
  auto path_of = [](auto&& make) {
    try {
      make();
    } catch (const ConfigError& e) {
      return e.path();
    }
    return std::string("<none>");
  };
  CHECK(path_of([] { GroundTruth::constant(0.5, 0.1, 0.0); }) == "truth.alpha");
  CHECK(path_of([] { GroundTruth::constant(0.5, -0.1, 1.0); }) == "truth.sigma");
  CHECK(path_of([] { GroundTruth::constant(0.5, 2.0, 1.0); }) == "truth.sigma");
  CHECK(path_of([] { GroundTruth::constant(1.5, 0.1, 1.0); }) == "truth.mu");
  CHECK(path_of([] { GroundTruth::constant(-0.1, 0.1, 1.0); }) == "truth.mu");
  CHECK(path_of([] { GroundTruth::linear(Eigen::Vector2d(0.6, 0.0), 0.5, 0.1, 2.0); }) == "truth.beta");
  CHECK(path_of([] { GroundTruth::linear(Eigen::Vector2d(0.3, 0.4), 0.6, 0.1, 1.0); }) == "truth.beta0");
  CHECK(path_of([] { GroundTruth::linear(Eigen::Vector2d(0.3, 0.4), 0.5, 0.1, 1.0); }) == "<none>");
}

TEST_CASE("linear truth maps the ball into [0, alpha]") {
  const auto truth = GroundTruth::linear(Eigen::Vector3d(0.2, -0.2, 0.1), 0.4, 0.0, 0.8);
  Rng rng(9);
  for (const auto dist : {CaseDistribution::UniformBall, CaseDistribution::UnitSphere}) {
    for (int i = 0; i < 2000; ++i) {
      const double v = truth.value(sample_case(CaseSpec{CaseKind::Vector, 3, dist}, rng));
      CHECK(v >= -1e-12);
      CHECK(v <= 0.8 + 1e-12);
    }
  }
}

TEST_CASE("dataset is append-only") {
  Dataset d;
  CHECK(d.empty());
  d.append({CaseFeatures::singleton(), 1.0});
  d.append({CaseFeatures::singleton(), 3.0});
  REQUIRE(d.size() == 2);
  CHECK(d.observations()[0].outcome == 1.0);
  CHECK(d.observations()[1].outcome == 3.0);
}

TEST_CASE("cost models") {
  Rng rng(1);
  SUBCASE("fixed sequence cycles") {
    const auto costs = CostModel::fixed({1.0, 2.0, 4.0});
    CHECK(costs.c_min() == 1.0);
    CHECK(costs.c_max() == 4.0);
    CHECK(costs.mean() == doctest::Approx(7.0 / 3.0));
    CHECK(costs.draw(1, rng) == 1.0);
    CHECK(costs.draw(3, rng) == 4.0);
    CHECK(costs.draw(4, rng) == 1.0);
    CHECK(costs.draw(8, rng) == 2.0);
  }
  SUBCASE("uniform draws stay in range") {
    const auto costs = CostModel::uniform(0.5, 1.0);
    CHECK(costs.mean() == doctest::Approx(0.75));
    double sum = 0.0;
    for (int t = 1; t <= 20000; ++t) {
      const double c = costs.draw(t, rng);
      REQUIRE(c >= 0.5);
      REQUIRE(c <= 1.0);
      sum += c;
    }
    CHECK(sum / 20000 == doctest::Approx(0.75).epsilon(0.01));
  }
  SUBCASE("point mass") {
    const auto costs = CostModel::point_mass(3.0);
    CHECK(costs.c_min() == 3.0);
    CHECK(costs.c_max() == 3.0);
    CHECK(costs.draw(17, rng) == 3.0);
  }
  SUBCASE("invalid ranges") {
    CHECK_THROWS_AS(CostModel::uniform(2.0, 1.0), ConfigError);
    CHECK_THROWS_AS(CostModel::point_mass(-1.0), ConfigError);
    CHECK_THROWS_AS(CostModel::fixed({}), ConfigError);
  }
}

TEST_CASE("seed derivation") {
  std::set<std::uint64_t> seeds;
  for (std::uint64_t r = 0; r < 1000; ++r) seeds.insert(replication_seed(42, r));
  CHECK(seeds.size() == 1000);
  CHECK(replication_seed(42, 3) == replication_seed(42, 3));
  CHECK(replication_seed(42, 3) != replication_seed(43, 3));

  Rng a = make_stream(5, Stream::Cases);
  Rng b = make_stream(5, Stream::Cases);
  Rng c = make_stream(5, Stream::Noise);
  Rng d = make_stream(5, Stream::Policy, fnv1a("etc"));
  Rng e = make_stream(5, Stream::Policy, fnv1a("dynamic"));
  const auto first = a();
  CHECK(first == b());
  CHECK(first != c());
  CHECK(d() != e());
}

TEST_CASE("fnv1a reference values") {
  // Published FNV-1a 64 test vectors.
  CHECK(fnv1a("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a("a") == 0xaf63dc4c8601ec8cULL);
  CHECK(fnv1a("foobar") == 0x85944171f73967e8ULL);
}

TEST_CASE("loss recomputation sums squared error and court cost") {
  RunLedger ledger;
  StepRecord a;
  a.squared_error = 0.25;
  a.court_cost_incurred = 1.0;
  StepRecord b;
  b.squared_error = 0.5;
  ledger.records = {a, b};
  CHECK(recompute_total_loss(ledger) == 1.75);
  CHECK(a.loss() == 1.25);
}

TEST_CASE("config error message carries the path") {
  const ConfigError e("cost.c_min", "must be > 0");
  CHECK(std::string(e.what()) == "cost.c_min: must be > 0");
  CHECK(e.message() == "must be > 0");
}
