#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <Eigen/Dense>

namespace courtlearn {

using Rng = std::mt19937_64;

// Raised for invalid run or experiment configuration. `path()` names the
// offending field, e.g. "cost.c_min".
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string path, const std::string& message)
      : std::runtime_error(path.empty() ? message : path + ": " + message),
        path_(std::move(path)),
        message_(message) {}

  const std::string& path() const noexcept { return path_; }
  const std::string& message() const noexcept { return message_; }

 private:
  std::string path_;
  std::string message_;
};

// ---------------------------------------------------------------------------
// Cases
// ---------------------------------------------------------------------------

enum class CaseKind { Singleton, Vector };

/// A point of the case feature space. Singleton spaces carry no coordinates;
/// vector cases live in the closed unit ball of R^n.
class CaseFeatures {
 public:
  static CaseFeatures singleton() { return CaseFeatures{}; }
  static CaseFeatures vector(Eigen::VectorXd coords);

  CaseKind kind() const noexcept { return kind_; }
  bool is_singleton() const noexcept { return kind_ == CaseKind::Singleton; }
  // 0 for the singleton space.
  Eigen::Index dimension() const noexcept { return coords_.size(); }
  const Eigen::VectorXd& coords() const noexcept { return coords_; }

  // [x, 1]; the constant coordinate carries the offset of a linear rule.
  Eigen::VectorXd augmented() const;

  bool operator==(const CaseFeatures& other) const {
    return kind_ == other.kind_ && coords_ == other.coords_;
  }

 private:
  CaseKind kind_ = CaseKind::Singleton;
  Eigen::VectorXd coords_;
};

enum class CaseDistribution { UniformBall, UnitSphere };

struct CaseSpec {
  CaseKind kind = CaseKind::Singleton;
  int dimension = 1;
  CaseDistribution distribution = CaseDistribution::UniformBall;

  // Feature dimension n as seen by the learners; 0 for singleton specs.
  int feature_dimension() const { return kind == CaseKind::Singleton ? 0 : dimension; }
  void validate() const;
};

CaseFeatures sample_case(const CaseSpec& spec, Rng& rng);

// ---------------------------------------------------------------------------
// Ground truth and court information
// ---------------------------------------------------------------------------

struct ConstantRule {
  double mu = 0.0;
};

struct LinearRule {
  Eigen::VectorXd beta;
  double beta0 = 0.0;
};

/// The hidden decision rule f together with the court noise level and the
/// decision cap alpha. Linear rules are constrained so that f maps the unit
/// ball into [0, alpha] without clipping.
class GroundTruth {
 public:
  static GroundTruth constant(double mu, double sigma, double alpha);
  static GroundTruth linear(Eigen::VectorXd beta, double beta0, double sigma, double alpha);

  const std::variant<ConstantRule, LinearRule>& family() const noexcept { return family_; }
  bool is_constant() const noexcept { return std::holds_alternative<ConstantRule>(family_); }
  double sigma() const noexcept { return sigma_; }
  double alpha() const noexcept { return alpha_; }
  // Required case dimension; 0 means any (constant rules ignore features).
  Eigen::Index dimension() const;

  // f(x), exact.
  double value(const CaseFeatures& x) const;

 private:
  GroundTruth(std::variant<ConstantRule, LinearRule> family, double sigma, double alpha)
      : family_(std::move(family)), sigma_(sigma), alpha_(alpha) {}

  std::variant<ConstantRule, LinearRule> family_;
  double sigma_ = 0.0;
  double alpha_ = 1.0;
};

struct Observation {
  CaseFeatures features;
  // f(x) + eta, never clipped.
  double outcome = 0.0;
};

Observation court_outcome(const GroundTruth& truth, const CaseFeatures& x, Rng& rng);

/// Court observations in arrival order. Append-only.
class Dataset {
 public:
  void append(Observation obs) { observations_.push_back(std::move(obs)); }
  const std::vector<Observation>& observations() const noexcept { return observations_; }
  std::size_t size() const noexcept { return observations_.size(); }
  bool empty() const noexcept { return observations_.empty(); }

 private:
  std::vector<Observation> observations_;
};

// ---------------------------------------------------------------------------
// Costs
// ---------------------------------------------------------------------------

struct FixedCosts {
  std::vector<double> costs;  // cost at step t is costs[(t - 1) % size]
};
struct UniformCosts {
  double lo = 0.0;
  double hi = 0.0;
};
struct PointMassCost {
  double c = 0.0;
};

class CostModel {
 public:
  using Mode = std::variant<FixedCosts, UniformCosts, PointMassCost>;

  explicit CostModel(Mode mode);

  static CostModel fixed(std::vector<double> costs) { return CostModel{FixedCosts{std::move(costs)}}; }
  static CostModel uniform(double lo, double hi) { return CostModel{UniformCosts{lo, hi}}; }
  static CostModel point_mass(double c) { return CostModel{PointMassCost{c}}; }

  const Mode& mode() const noexcept { return mode_; }
  double c_min() const noexcept { return c_min_; }
  double c_max() const noexcept { return c_max_; }
  double mean() const noexcept { return mean_; }

  // Cost of the case arriving at step t (1-based).
  double draw(std::int64_t t, Rng& rng) const;

 private:
  Mode mode_;
  double c_min_ = 0.0;
  double c_max_ = 0.0;
  double mean_ = 0.0;
};

// ---------------------------------------------------------------------------
// Per-step accounting
// ---------------------------------------------------------------------------

struct StepRecord {
  std::int64_t t = 0;
  CaseFeatures features;
  double cost = 0.0;
  double subsidy = 0.0;
  bool compelled = false;
  bool court = false;  // d_t
  // Decision applied to the case: L(D_t)(x_t) after a court visit,
  // L(D_{t-1})(x_t) otherwise.
  double applied_decision = 0.0;
  // L(D_{t-1})(x_t), the settlement the agent was offered.
  double settlement_decision = 0.0;
  double true_value = 0.0;
  double squared_error = 0.0;
  double court_cost_incurred = 0.0;
  double pre_step_err_bound = 0.0;
  std::int64_t m_before = 0;

  double loss() const { return squared_error + court_cost_incurred; }
};

struct RunLedger {
  std::vector<StepRecord> records;
  double total_loss = 0.0;
  std::int64_t court_count = 0;
  double total_subsidy_paid = 0.0;
  std::uint64_t seed = 0;
  std::string config_digest;
};

// Sum of squared error plus court costs over the records, in step order.
double recompute_total_loss(const RunLedger& ledger);

// ---------------------------------------------------------------------------
// Seeds
// ---------------------------------------------------------------------------

// splitmix64 finaliser; the basis of every derived seed.
std::uint64_t mix_seed(std::uint64_t x);
// Seed of replication r under a master seed: mix(master + (r + 1) * golden).
std::uint64_t replication_seed(std::uint64_t master, std::uint64_t replication);

enum class Stream : std::uint64_t { Cases = 1, Noise = 2, Costs = 3, Policy = 4 };

// Independent generator for one concern of a run; `salt` separates policies
// that share a run seed.
Rng make_stream(std::uint64_t run_seed, Stream stream, std::uint64_t salt = 0);

// FNV-1a, 64 bit. Used for config digests and policy salts.
std::uint64_t fnv1a(std::string_view text);

}  // namespace courtlearn
