#include "courtlearn/sim.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <thread>

namespace courtlearn {

namespace {

// Replications per deterministic aggregation block in check_deterrent.
constexpr std::int64_t kDeterrentBlock = 8;

std::uint64_t policy_salt(const PolicyConfig& policy) { return fnv1a(policy_kind_name(policy)); }

RunConfig with_seed(const RunConfig& base, std::uint64_t seed) {
  RunConfig out = base;
  out.seed = seed;
  return out;
}

}  // namespace

void validate(const RunConfig& config) {
  if (config.horizon < 1) throw ConfigError("horizons", "every horizon must be >= 1");
  config.cases.validate();
  const int n = config.cases.feature_dimension();
  if (!config.truth.is_constant()) {
    if (config.cases.kind != CaseKind::Vector) {
      throw ConfigError("truth.family", "linear truth needs vector cases");
    }
    if (config.truth.dimension() != n) {
      throw ConfigError("truth.beta", "length must equal cases.dimension");
    }
  }
  if (!(config.learner.err_constant > 0.0)) throw ConfigError("err_constant", "must be > 0");
  if (config.learner.is_linear()) {
    if (config.cases.kind != CaseKind::Vector) {
      throw ConfigError("learner", "linear learners need vector cases");
    }
    if (!(config.learner.radius > 0.0)) throw ConfigError("learner_radius", "must be > 0");
  } else if (!config.truth.is_constant()) {
    throw ConfigError("learner", "empirical_mean needs a constant truth or singleton cases");
  }
  validate(config.policy);
}

Environment draw_environment(const RunConfig& config) {
  Rng case_rng = make_stream(config.seed, Stream::Cases);
  Rng noise_rng = make_stream(config.seed, Stream::Noise);
  Rng cost_rng = make_stream(config.seed, Stream::Costs);
  const auto steps = static_cast<std::size_t>(config.horizon);
  Environment env;
  env.cases.reserve(steps);
  env.costs.reserve(steps);
  env.outcomes.reserve(steps);
  for (std::int64_t t = 1; t <= config.horizon; ++t) {
    CaseFeatures x = sample_case(config.cases, case_rng);
    env.costs.push_back(config.costs.draw(t, cost_rng));
    env.outcomes.push_back(court_outcome(config.truth, x, noise_rng).outcome);
    env.cases.push_back(std::move(x));
  }
  return env;
}

RunLedger run(const RunConfig& config) {
  validate(config);
  return run(config, draw_environment(config));
}

RunLedger run(const RunConfig& config, const Environment& env) {
  validate(config);
  if (env.cases.size() != static_cast<std::size_t>(config.horizon)) {
    throw std::invalid_argument("environment length does not match the horizon");
  }
  const Eigen::Index n = config.cases.feature_dimension();
  const double alpha = config.truth.alpha();
  const double sigma = config.truth.sigma();

  Policy policy(config.policy, n);
  Rng policy_rng = make_stream(config.seed, Stream::Policy, policy_salt(config.policy));
  SufficientStats stats(n);
  FittedRule rule = fit(config.learner, stats);

  RunLedger ledger;
  ledger.seed = config.seed;
  ledger.config_digest = config.config_digest;
  ledger.records.reserve(env.cases.size());

  for (std::int64_t t = 1; t <= config.horizon; ++t) {
    const auto i = static_cast<std::size_t>(t - 1);
    const CaseFeatures& x = env.cases[i];
    StepRecord rec;
    rec.t = t;
    rec.features = x;
    rec.cost = env.costs[i];
    rec.m_before = stats.count();
    rec.pre_step_err_bound = err_bound(config.learner, rec.m_before, sigma, alpha, n);
    rec.true_value = config.truth.value(x);

    const SelectionAction action = policy.select(t, x, rec.pre_step_err_bound, policy_rng);
    rec.compelled = action.kind == SelectionAction::Kind::Compel;
    rec.subsidy = action.kind == SelectionAction::Kind::Subsidy ? action.subsidy : 0.0;
    rec.court = rec.compelled || agent_decision(rec.cost, rec.subsidy, rec.pre_step_err_bound);
    rec.settlement_decision = predict(rule, x, alpha);

    if (rec.court) {
      stats.add(Observation{x, env.outcomes[i]});
      rule = fit(config.learner, stats);
      policy.observe_court(x);
      rec.applied_decision = predict(rule, x, alpha);
      rec.court_cost_incurred = rec.cost;
      ++ledger.court_count;
      ledger.total_subsidy_paid += rec.subsidy;
    } else {
      rec.applied_decision = rec.settlement_decision;
    }
    const double diff = rec.applied_decision - rec.true_value;
    rec.squared_error = diff * diff;
    ledger.total_loss += rec.squared_error + rec.court_cost_incurred;
    ledger.records.push_back(std::move(rec));
  }
  return ledger;
}

double offline_baseline(const Environment& env, const GroundTruth& truth, const LearnerKind& learner,
                        Eigen::Index feature_dimension) {
  SufficientStats stats(feature_dimension);
  for (std::size_t i = 0; i < env.cases.size(); ++i) stats.add(Observation{env.cases[i], env.outcomes[i]});
  const FittedRule rule = fit(learner, stats);
  double loss = 0.0;
  for (const auto& x : env.cases) {
    const double diff = predict(rule, x, truth.alpha()) - truth.value(x);
    loss += diff * diff;
  }
  return loss;
}

void RunningStats::add(double x) {
  ++n_;
  const double delta = x - mean_;
  mean_ += delta / static_cast<double>(n_);
  m2_ += delta * (x - mean_);
}

void RunningStats::merge(const RunningStats& other) {
  if (other.n_ == 0) return;
  if (n_ == 0) {
    *this = other;
    return;
  }
  const double total = static_cast<double>(n_ + other.n_);
  const double delta = other.mean_ - mean_;
  mean_ += delta * static_cast<double>(other.n_) / total;
  m2_ += other.m2_ + delta * delta * static_cast<double>(n_) * static_cast<double>(other.n_) / total;
  n_ += other.n_;
}

double RunningStats::variance() const { return n_ > 1 ? m2_ / static_cast<double>(n_ - 1) : 0.0; }

double RunningStats::std_error() const {
  return n_ > 1 ? std::sqrt(variance() / static_cast<double>(n_)) : 0.0;
}

void parallel_for(std::int64_t count, const std::function<void(std::int64_t)>& body) {
  if (count <= 0) return;
  const auto hw = static_cast<std::int64_t>(std::max(1u, std::thread::hardware_concurrency()));
  const std::int64_t workers = std::min(hw, count);
  if (workers == 1) {
    for (std::int64_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<std::int64_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::jthread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  for (std::int64_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::int64_t i = next++; i < count; i = next++) {
        try {
          body(i);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
          next = count;
        }
      }
    });
  }
  pool.clear();
  if (failure) std::rethrow_exception(failure);
}

RegretReport estimate_regret(const RunConfig& config, std::int64_t replications, const LedgerSink& sink) {
  if (replications < 1) throw ConfigError("replications", "must be >= 1");
  validate(config);
  const Eigen::Index n = config.cases.feature_dimension();
  std::vector<ReplicationResult> results(static_cast<std::size_t>(replications));
  std::vector<RunLedger> ledgers(sink ? results.size() : 0);

  parallel_for(replications, [&](std::int64_t r) {
    const RunConfig rc = with_seed(config, replication_seed(config.seed, static_cast<std::uint64_t>(r)));
    const Environment env = draw_environment(rc);
    RunLedger ledger = run(rc, env);
    auto& out = results[static_cast<std::size_t>(r)];
    out.seed = rc.seed;
    out.online_loss = ledger.total_loss;
    out.offline_loss = offline_baseline(env, rc.truth, rc.learner, n);
    out.court_count = ledger.court_count;
    out.total_subsidy = ledger.total_subsidy_paid;
    if (sink) ledgers[static_cast<std::size_t>(r)] = std::move(ledger);
  });

  const double horizon = static_cast<double>(config.horizon);
  RunningStats regret, online, offline, courts, subsidy;
  for (const auto& r : results) {
    regret.add((r.online_loss - r.offline_loss) / horizon);
    online.add(r.online_loss);
    offline.add(r.offline_loss);
    courts.add(static_cast<double>(r.court_count));
    subsidy.add(r.total_subsidy);
  }
  if (sink) {
    for (std::size_t r = 0; r < ledgers.size(); ++r) sink(static_cast<std::int64_t>(r), ledgers[r]);
  }

  RegretReport report;
  report.mean_regret = regret.mean();
  report.std_error = regret.std_error();
  report.replications = replications;
  report.mean_online_loss = online.mean();
  report.mean_offline_loss = offline.mean();
  report.mean_court_count = courts.mean();
  report.mean_total_subsidy = subsidy.mean();
  return report;
}

DeterrentReport check_deterrent(const RunConfig& config, std::int64_t replications) {
  if (replications < 1) throw ConfigError("replications", "must be >= 1");
  validate(config);
  const auto steps = static_cast<std::size_t>(config.horizon);
  const std::int64_t blocks = (replications + kDeterrentBlock - 1) / kDeterrentBlock;

  struct Block {
    std::vector<RunningStats> payoff;
    std::vector<RunningStats> subsidy;
  };
  std::vector<Block> partial(static_cast<std::size_t>(blocks));

  parallel_for(blocks, [&](std::int64_t b) {
    Block& block = partial[static_cast<std::size_t>(b)];
    block.payoff.resize(steps);
    block.subsidy.resize(steps);
    const std::int64_t end = std::min(replications, (b + 1) * kDeterrentBlock);
    for (std::int64_t r = b * kDeterrentBlock; r < end; ++r) {
      const RunConfig rc = with_seed(config, replication_seed(config.seed, static_cast<std::uint64_t>(r)));
      const RunLedger ledger = run(rc);
      for (std::size_t i = 0; i < steps; ++i) {
        const StepRecord& rec = ledger.records[i];
        block.payoff[i].add(rec.subsidy - rec.cost - rec.settlement_decision);
        block.subsidy[i].add(rec.subsidy);
      }
    }
  });

  DeterrentReport report;
  report.replications = replications;
  report.per_step.resize(steps);
  report.max_violation = -std::numeric_limits<double>::infinity();
  report.max_violation_margin = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < steps; ++i) {
    RunningStats payoff, subsidy;
    for (const auto& block : partial) {
      payoff.merge(block.payoff[i]);
      subsidy.merge(block.subsidy[i]);
    }
    DeterrentStep& step = report.per_step[i];
    step.t = static_cast<std::int64_t>(i) + 1;
    step.mean_payoff = payoff.mean();
    step.se_payoff = payoff.std_error();
    step.mean_subsidy = subsidy.mean();
    step.se_subsidy = subsidy.std_error();
    report.max_violation = std::max(report.max_violation, step.mean_payoff);
    report.max_violation_margin = std::max(report.max_violation_margin, step.mean_payoff - 3.0 * step.se_payoff);
  }
  report.satisfied = report.max_violation_margin <= 0.0;
  return report;
}

}  // namespace courtlearn
