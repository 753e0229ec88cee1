#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "courtlearn/core.hpp"
#include "courtlearn/learners.hpp"
#include "courtlearn/policies.hpp"

namespace courtlearn {

struct RunConfig {
  std::int64_t horizon = 1;
  GroundTruth truth;
  CaseSpec cases;
  CostModel costs;
  LearnerKind learner;
  PolicyConfig policy;
  std::uint64_t seed = 0;
  std::string config_digest;
};

// Throws ConfigError on the first violated invariant.
void validate(const RunConfig& config);

/// Everything the environment draws for a run: the case, its cost and its
/// court outcome for every step. Outcomes of settled cases are shadow draws
/// seen only by the offline baseline.
struct Environment {
  std::vector<CaseFeatures> cases;
  std::vector<double> costs;
  std::vector<double> outcomes;
};

Environment draw_environment(const RunConfig& config);

RunLedger run(const RunConfig& config);
RunLedger run(const RunConfig& config, const Environment& env);

// L*: the learner fitted once on all T observations, charged squared error only.
double offline_baseline(const Environment& env, const GroundTruth& truth, const LearnerKind& learner,
                        Eigen::Index feature_dimension);

/// Mean and variance accumulator (Welford), mergeable in a fixed order.
class RunningStats {
 public:
  void add(double x);
  void merge(const RunningStats& other);

  std::int64_t count() const noexcept { return n_; }
  double mean() const noexcept { return mean_; }
  double variance() const;  // unbiased; 0 for fewer than two samples
  double std_error() const;

 private:
  std::int64_t n_ = 0;
  double mean_ = 0.0;
  double m2_ = 0.0;
};

struct RegretReport {
  double mean_regret = 0.0;
  double std_error = 0.0;
  std::int64_t replications = 0;
  double mean_online_loss = 0.0;
  double mean_offline_loss = 0.0;
  double mean_court_count = 0.0;
  double mean_total_subsidy = 0.0;
};

struct ReplicationResult {
  std::uint64_t seed = 0;
  double online_loss = 0.0;
  double offline_loss = 0.0;
  std::int64_t court_count = 0;
  double total_subsidy = 0.0;
};

// Called with (replication index, ledger) for every replication, in index
// order after all replications have finished.
using LedgerSink = std::function<void(std::int64_t, const RunLedger&)>;

// R_T = mean over replications of (L_Pi - L*) / T. Replication r runs with
// seed replication_seed(config.seed, r).
RegretReport estimate_regret(const RunConfig& config, std::int64_t replications,
                             const LedgerSink& sink = nullptr);

struct DeterrentStep {
  std::int64_t t = 0;
  // Mean and standard error of s_t - c_t - L(D_{t-1})(x_t) across replications.
  double mean_payoff = 0.0;
  double se_payoff = 0.0;
  double mean_subsidy = 0.0;
  double se_subsidy = 0.0;
};

struct DeterrentReport {
  std::vector<DeterrentStep> per_step;
  std::int64_t replications = 0;
  double max_violation = 0.0;  // max_t of mean_payoff
  // max_t of mean_payoff - 3 se; the constraint holds when this is <= 0.
  double max_violation_margin = 0.0;
  bool satisfied = true;
};

DeterrentReport check_deterrent(const RunConfig& config, std::int64_t replications);

// Runs body(i) for i in [0, count) on a thread pool.
void parallel_for(std::int64_t count, const std::function<void(std::int64_t)>& body);

}  // namespace courtlearn
