#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <variant>

#include <Eigen/Dense>

#include "courtlearn/core.hpp"

namespace courtlearn {

// ---------------------------------------------------------------------------
// Actions and configurations
// ---------------------------------------------------------------------------

struct SelectionAction {
  enum class Kind { NoAction, Compel, Subsidy };

  Kind kind = Kind::NoAction;
  double subsidy = 0.0;  // Subsidy only

  static SelectionAction none() { return {}; }
  static SelectionAction compel() { return {Kind::Compel, 0.0}; }
  static SelectionAction offer(double s);
};

struct NoSubsidyPolicy {};

struct ExploreThenCommitPolicy {
  std::int64_t horizon = 1;
  double alpha = 1.0;
  double c_max = 1.0;
};

struct DynamicCompellingPolicy {
  double alpha = 1.0;
  double c_max = 1.0;
};

struct SubsidySamplingPolicy {
  double alpha = 1.0;
  double c_min = 1.0;
  double c_max = 1.0;
};

struct KwikPolicy {
  double alpha1 = 0.0;  // bound on ||q_bar||
  double alpha2 = 0.0;  // bound on ||u_bar||
  double epsilon = 0.0;
  double delta = 0.0;

  // alpha2 = eps / 4 and
  // alpha1 = scale * eps^2 / (n log(n + 1) sqrt(log(1 / (eps delta)))).
  static KwikPolicy with_defaults(double epsilon, double delta, int n, double alpha1_scale = 1.0);
};

using PolicyConfig = std::variant<NoSubsidyPolicy, ExploreThenCommitPolicy, DynamicCompellingPolicy,
                                  SubsidySamplingPolicy, KwikPolicy>;

// "no_subsidy", "etc", "dynamic", "subsidy" or "kwik".
std::string policy_kind_name(const PolicyConfig& config);

// Throws ConfigError naming the offending "policy.*" field.
void validate(const PolicyConfig& config);

// ---------------------------------------------------------------------------
// Agent response and closed-form schedules
// ---------------------------------------------------------------------------

// d = 1 iff cost - subsidy <= 2 err; the tie litigates.
bool agent_decision(double cost, double subsidy, double err_before);

// ceil(alpha sqrt(T / c_max)), capped at T.
std::int64_t etc_compel_count(std::int64_t horizon, double alpha, double c_max);

// min(1, alpha / sqrt(t c_max)).
double dynamic_compel_probability(std::int64_t t, double alpha, double c_max);

// alpha / sqrt(t c), times 1/alpha in the first phase. Throws ConfigError when
// the result exceeds 1.
double subsidy_tail_probability(std::int64_t t, double c, double alpha, bool phase1);

// Last step of the scaled first phase: max(floor(alpha^2), floor(alpha^2 / c_min))
// when alpha / sqrt(c_min) > 1, else 0.
std::int64_t subsidy_transition_step(double alpha, double c_min);

/// Subsidy law at step t given e_t = 2 err(L, D_{t-1}, x_t).
///
/// Before flooring, the subsidy has a point mass P_max = k/sqrt(t c_max) at
/// c_max - e_t, density h(s) = k / (2 sqrt(t) (s + e_t)^{3/2}) on
/// [c_min - e_t, c_max - e_t], and the remaining 1 - k/sqrt(t c_min) at 0,
/// where k = alpha in the second phase and k = 1 in the first. Negative
/// values are floored at 0. For every c in [c_min, c_max] the tail
/// Pr[s >= c - e_t] equals k / sqrt(t c).
class SubsidyDistribution {
 public:
  SubsidyDistribution(std::int64_t t, double e_t, double alpha, double c_min, double c_max, bool phase1);

  double point_mass() const noexcept { return p_max_; }
  double point_mass_location() const noexcept { return c_max_ - e_t_; }
  double continuous_mass() const noexcept { return p_min_ - p_max_; }
  double zero_mass() const noexcept { return 1.0 - p_min_; }
  double support_lo() const noexcept { return c_min_ - e_t_; }
  double support_hi() const noexcept { return c_max_ - e_t_; }
  // Density of the continuous part (before flooring); 0 outside the support.
  double density(double s) const;
  // Pr[s >= c - e_t] for c in [c_min, c_max].
  double tail(double c) const;

  // Inverse transform of a uniform draw u in [0, 1].
  double quantile(double u) const;
  double sample(Rng& rng) const;

 private:
  double sqrt_t_;
  double e_t_;
  double k_;
  double c_min_;
  double c_max_;
  double p_max_;
  double p_min_;
};

double sample_subsidy(std::int64_t t, double e_t, double alpha, double c_min, double c_max, bool phase1,
                      Rng& rng);

// ---------------------------------------------------------------------------
// KWIK gate
// ---------------------------------------------------------------------------

enum class GateDecision { Predict, Compel };

struct GateStatistics {
  double q_norm = 0.0;     // ||X U_r L_r^{-1} U_r^T x||
  double u_norm = 0.0;     // ||[u_{r+1}^T x, ...]||
  Eigen::Index rank = 0;   // r, the number of eigenvalues >= 1
};

/// Exploration gate over the courted history. Keeps X^T X of the augmented
/// courted cases; ||q_bar||^2 = sum_{lambda_i >= 1} (u_i^T x)^2 / lambda_i,
/// so the history matrix itself is never stored.
class KwikGate {
 public:
  explicit KwikGate(Eigen::Index feature_dimension);
  // From an explicit history; rows are augmented cases [x, 1].
  static KwikGate from_history(const Eigen::MatrixXd& courted);

  void add(const CaseFeatures& x);
  void add_augmented(const Eigen::VectorXd& z);

  GateStatistics statistics(const CaseFeatures& x) const;
  GateDecision decide(const CaseFeatures& x, double alpha1, double alpha2) const;

  const Eigen::MatrixXd& gram() const noexcept { return gram_; }

 private:
  void refresh() const;

  Eigen::MatrixXd gram_;
  mutable Eigen::VectorXd eigenvalues_;
  mutable Eigen::MatrixXd eigenvectors_;
  mutable bool stale_ = true;
};

GateDecision kwik_gate(const Eigen::MatrixXd& courted, const CaseFeatures& x, double alpha1, double alpha2);

// ---------------------------------------------------------------------------
// Selection algorithm state for one run
// ---------------------------------------------------------------------------

class Policy {
 public:
  // `feature_dimension` is n; required by the KWIK gate.
  Policy(PolicyConfig config, Eigen::Index feature_dimension);

  const PolicyConfig& config() const noexcept { return config_; }

  // `err_before` is err(L, D_{t-1}, x_t).
  SelectionAction select(std::int64_t t, const CaseFeatures& x, double err_before, Rng& rng);
  // Called once for each case that reaches the court.
  void observe_court(const CaseFeatures& x);

 private:
  PolicyConfig config_;
  std::int64_t etc_count_ = 0;
  std::int64_t transition_ = 0;
  std::optional<KwikGate> gate_;
};

}  // namespace courtlearn
