#include "courtlearn/policies.hpp"

#include <algorithm>
#include <cmath>

namespace courtlearn {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};

void require_positive(double v, const char* path) {
  if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError(path, "must be > 0");
}

}  // namespace

SelectionAction SelectionAction::offer(double s) {
  if (!(s >= 0.0) || !std::isfinite(s)) throw std::invalid_argument("subsidy must be finite and >= 0");
  return {Kind::Subsidy, s};
}

KwikPolicy KwikPolicy::with_defaults(double epsilon, double delta, int n, double alpha1_scale) {
  require_positive(epsilon, "policy.epsilon");
  require_positive(delta, "policy.delta");
  if (n < 1) throw ConfigError("cases.dimension", "kwik needs vector cases");
  if (epsilon * delta >= 1.0) throw ConfigError("policy.delta", "requires epsilon * delta < 1");
  const double nd = static_cast<double>(n);
  KwikPolicy p;
  p.epsilon = epsilon;
  p.delta = delta;
  p.alpha2 = epsilon / 4.0;
  p.alpha1 = alpha1_scale * epsilon * epsilon /
             (nd * std::log(nd + 1.0) * std::sqrt(std::log(1.0 / (epsilon * delta))));
  return p;
}

std::string policy_kind_name(const PolicyConfig& config) {
  return std::visit(Overloaded{
                        [](const NoSubsidyPolicy&) { return std::string("no_subsidy"); },
                        [](const ExploreThenCommitPolicy&) { return std::string("etc"); },
                        [](const DynamicCompellingPolicy&) { return std::string("dynamic"); },
                        [](const SubsidySamplingPolicy&) { return std::string("subsidy"); },
                        [](const KwikPolicy&) { return std::string("kwik"); },
                    },
                    config);
}

void validate(const PolicyConfig& config) {
  std::visit(Overloaded{
                 [](const NoSubsidyPolicy&) {},
                 [](const ExploreThenCommitPolicy& p) {
                   if (p.horizon < 1) throw ConfigError("policy.horizon", "must be >= 1");
                   require_positive(p.alpha, "policy.alpha");
                   require_positive(p.c_max, "policy.c_max");
                 },
                 [](const DynamicCompellingPolicy& p) {
                   require_positive(p.alpha, "policy.alpha");
                   require_positive(p.c_max, "policy.c_max");
                 },
                 [](const SubsidySamplingPolicy& p) {
                   require_positive(p.alpha, "policy.alpha");
                   require_positive(p.c_min, "policy.c_min");
                   if (!(p.c_max >= p.c_min)) throw ConfigError("policy.c_max", "must be >= c_min");
                   // Worst cases of the two phases: t = 1 in the scaled phase,
                   // t = t' + 1 afterwards.
                   const std::int64_t tp = subsidy_transition_step(p.alpha, p.c_min);
                   if (tp > 0 && 1.0 / std::sqrt(p.c_min) > 1.0) {
                     throw ConfigError("policy.c_min",
                                       "first-phase subsidy law needs c_min >= 1 (tail 1/sqrt(c_min) > 1)");
                   }
                   if (p.alpha / std::sqrt(static_cast<double>(tp + 1) * p.c_min) > 1.0) {
                     throw ConfigError("policy.c_min", "subsidy tail probability exceeds 1");
                   }
                 },
                 [](const KwikPolicy& p) {
                   require_positive(p.alpha1, "policy.alpha1");
                   require_positive(p.alpha2, "policy.alpha2");
                 },
             },
             config);
}

bool agent_decision(double cost, double subsidy, double err_before) {
  return cost - subsidy <= 2.0 * err_before;
}

std::int64_t etc_compel_count(std::int64_t horizon, double alpha, double c_max) {
  if (horizon < 1 || !(alpha > 0.0) || !(c_max > 0.0)) {
    throw std::invalid_argument("etc_compel_count: needs T >= 1, alpha > 0, c_max > 0");
  }
  const double m = std::ceil(alpha * std::sqrt(static_cast<double>(horizon) / c_max));
  if (m >= static_cast<double>(horizon)) return horizon;
  return static_cast<std::int64_t>(m);
}

double dynamic_compel_probability(std::int64_t t, double alpha, double c_max) {
  if (t < 1) throw std::invalid_argument("dynamic_compel_probability: t must be >= 1");
  return std::min(1.0, alpha / std::sqrt(static_cast<double>(t) * c_max));
}

double subsidy_tail_probability(std::int64_t t, double c, double alpha, bool phase1) {
  if (t < 1) throw std::invalid_argument("subsidy_tail_probability: t must be >= 1");
  double p = alpha / std::sqrt(static_cast<double>(t) * c);
  if (phase1) p /= alpha;
  if (p > 1.0) throw ConfigError("policy", "subsidy tail probability exceeds 1 at this step");
  return p;
}

std::int64_t subsidy_transition_step(double alpha, double c_min) {
  if (alpha / std::sqrt(c_min) <= 1.0) return 0;
  const double a2 = alpha * alpha;
  return static_cast<std::int64_t>(std::max(std::floor(a2), std::floor(a2 / c_min)));
}

SubsidyDistribution::SubsidyDistribution(std::int64_t t, double e_t, double alpha, double c_min,
                                         double c_max, bool phase1)
    : sqrt_t_(std::sqrt(static_cast<double>(t))),
      e_t_(e_t),
      k_(phase1 ? 1.0 : alpha),
      c_min_(c_min),
      c_max_(c_max) {
  if (!(c_min > 0.0) || !(c_max >= c_min)) throw ConfigError("policy.c_min", "needs 0 < c_min <= c_max");
  if (!(e_t >= 0.0)) throw std::invalid_argument("subsidy distribution: e_t must be >= 0");
  p_min_ = subsidy_tail_probability(t, c_min, alpha, phase1);
  p_max_ = subsidy_tail_probability(t, c_max, alpha, phase1);
}

double SubsidyDistribution::density(double s) const {
  if (s < support_lo() || s > support_hi()) return 0.0;
  const double c = s + e_t_;
  return k_ / (2.0 * sqrt_t_ * c * std::sqrt(c));
}

double SubsidyDistribution::tail(double c) const {
  if (c < c_min_ || c > c_max_) throw std::invalid_argument("tail: c outside [c_min, c_max]");
  return k_ / (sqrt_t_ * std::sqrt(c));
}

double SubsidyDistribution::quantile(double u) const {
  if (u <= p_max_) return std::max(0.0, c_max_ - e_t_);
  if (u <= p_min_) {
    // Pr[c >= c0] = k / (sqrt(t) sqrt(c0)) inverted at u.
    const double root = k_ / (u * sqrt_t_);
    const double c = std::clamp(root * root, c_min_, c_max_);
    return std::max(0.0, c - e_t_);
  }
  return 0.0;
}

double SubsidyDistribution::sample(Rng& rng) const {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  return quantile(unit(rng));
}

double sample_subsidy(std::int64_t t, double e_t, double alpha, double c_min, double c_max, bool phase1,
                      Rng& rng) {
  return SubsidyDistribution(t, e_t, alpha, c_min, c_max, phase1).sample(rng);
}

KwikGate::KwikGate(Eigen::Index feature_dimension)
    : gram_(Eigen::MatrixXd::Zero(feature_dimension + 1, feature_dimension + 1)) {}

KwikGate KwikGate::from_history(const Eigen::MatrixXd& courted) {
  KwikGate gate(courted.cols() - 1);
  gate.gram_ = courted.transpose() * courted;
  return gate;
}

void KwikGate::add(const CaseFeatures& x) { add_augmented(x.augmented()); }

void KwikGate::add_augmented(const Eigen::VectorXd& z) {
  if (z.size() != gram_.rows()) throw std::invalid_argument("kwik gate: dimension mismatch");
  gram_.noalias() += z * z.transpose();
  stale_ = true;
}

void KwikGate::refresh() const {
  if (!stale_) return;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram_);
  eigenvalues_ = eig.eigenvalues();
  eigenvectors_ = eig.eigenvectors();
  stale_ = false;
}

GateStatistics KwikGate::statistics(const CaseFeatures& x) const {
  const Eigen::VectorXd z = x.augmented();
  if (z.size() != gram_.rows()) throw std::invalid_argument("kwik gate: dimension mismatch");
  refresh();
  const Eigen::VectorXd proj = eigenvectors_.transpose() * z;
  GateStatistics out;
  double q2 = 0.0;
  double u2 = 0.0;
  for (Eigen::Index i = 0; i < proj.size(); ++i) {
    if (eigenvalues_(i) >= 1.0) {
      q2 += proj(i) * proj(i) / eigenvalues_(i);
      ++out.rank;
    } else {
      u2 += proj(i) * proj(i);
    }
  }
  out.q_norm = std::sqrt(q2);
  out.u_norm = std::sqrt(u2);
  return out;
}

GateDecision KwikGate::decide(const CaseFeatures& x, double alpha1, double alpha2) const {
  const GateStatistics s = statistics(x);
  return (s.q_norm <= alpha1 && s.u_norm <= alpha2) ? GateDecision::Predict : GateDecision::Compel;
}

GateDecision kwik_gate(const Eigen::MatrixXd& courted, const CaseFeatures& x, double alpha1, double alpha2) {
  if (courted.rows() == 0) {
    KwikGate gate(x.dimension());
    return gate.decide(x, alpha1, alpha2);
  }
  return KwikGate::from_history(courted).decide(x, alpha1, alpha2);
}

Policy::Policy(PolicyConfig config, Eigen::Index feature_dimension) : config_(std::move(config)) {
  validate(config_);
  if (const auto* etc = std::get_if<ExploreThenCommitPolicy>(&config_)) {
    etc_count_ = etc_compel_count(etc->horizon, etc->alpha, etc->c_max);
  } else if (const auto* sub = std::get_if<SubsidySamplingPolicy>(&config_)) {
    transition_ = subsidy_transition_step(sub->alpha, sub->c_min);
  } else if (std::holds_alternative<KwikPolicy>(config_)) {
    if (feature_dimension < 1) throw ConfigError("cases.kind", "kwik policy needs vector cases");
    gate_.emplace(feature_dimension);
  }
}

SelectionAction Policy::select(std::int64_t t, const CaseFeatures& x, double err_before, Rng& rng) {
  if (t < 1) throw std::invalid_argument("select: t must be >= 1");
  return std::visit(
      Overloaded{
          [](const NoSubsidyPolicy&) { return SelectionAction::none(); },
          [&](const ExploreThenCommitPolicy&) {
            return t <= etc_count_ ? SelectionAction::compel() : SelectionAction::none();
          },
          [&](const DynamicCompellingPolicy& p) {
            std::bernoulli_distribution coin(dynamic_compel_probability(t, p.alpha, p.c_max));
            return coin(rng) ? SelectionAction::compel() : SelectionAction::none();
          },
          [&](const SubsidySamplingPolicy& p) {
            const bool phase1 = t <= transition_;
            return SelectionAction::offer(sample_subsidy(t, 2.0 * err_before, p.alpha, p.c_min, p.c_max, phase1, rng));
          },
          [&](const KwikPolicy& p) {
            return gate_->decide(x, p.alpha1, p.alpha2) == GateDecision::Compel ? SelectionAction::compel()
                                                                                : SelectionAction::none();
          },
      },
      config_);
}

void Policy::observe_court(const CaseFeatures& x) {
  if (gate_) gate_->add(x);
}

}  // namespace courtlearn
