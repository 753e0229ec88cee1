#include "courtlearn/learners.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace courtlearn {

namespace {

constexpr double kBisectionRelTol = 1e-10;

// Eigenvalues at or below this are treated as zero.
double rank_tolerance(const Eigen::VectorXd& eigenvalues) {
  const double largest = eigenvalues.size() ? eigenvalues.cwiseAbs().maxCoeff() : 0.0;
  return std::max(largest, 1.0) * static_cast<double>(eigenvalues.size()) *
         std::numeric_limits<double>::epsilon() * 16.0;
}

}  // namespace

SufficientStats::SufficientStats(Eigen::Index feature_dimension)
    : gram_(Eigen::MatrixXd::Zero(feature_dimension + 1, feature_dimension + 1)),
      moment_(Eigen::VectorXd::Zero(feature_dimension + 1)) {}

SufficientStats::SufficientStats(const Dataset& data, Eigen::Index feature_dimension)
    : SufficientStats(feature_dimension) {
  for (const auto& obs : data.observations()) add(obs);
}

void SufficientStats::add(const Observation& obs) {
  ++count_;
  sum_y_ += obs.outcome;
  if (obs.features.dimension() != feature_dimension()) {
    throw std::invalid_argument("observation dimension does not match learner statistics");
  }
  const Eigen::VectorXd z = obs.features.augmented();
  gram_.noalias() += z * z.transpose();
  moment_ += obs.outcome * z;
}

Eigen::VectorXd min_norm_least_squares(const Eigen::MatrixXd& gram, const Eigen::VectorXd& moment) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram);
  const Eigen::VectorXd& lambda = eig.eigenvalues();
  const Eigen::MatrixXd& u = eig.eigenvectors();
  const double tol = rank_tolerance(lambda);
  const Eigen::VectorXd proj = u.transpose() * moment;
  Eigen::VectorXd scaled = Eigen::VectorXd::Zero(lambda.size());
  for (Eigen::Index i = 0; i < lambda.size(); ++i) {
    if (lambda(i) > tol) scaled(i) = proj(i) / lambda(i);
  }
  return u * scaled;
}

Eigen::VectorXd constrained_least_squares(const Eigen::MatrixXd& gram, const Eigen::VectorXd& moment,
                                          double radius) {
  if (!(radius > 0.0)) throw std::invalid_argument("norm constraint radius must be > 0");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram);
  const Eigen::VectorXd lambda = eig.eigenvalues().cwiseMax(0.0);
  const Eigen::MatrixXd& u = eig.eigenvectors();
  const double tol = rank_tolerance(lambda);
  const Eigen::VectorXd proj = u.transpose() * moment;

  auto ridge = [&](double mult) {
    Eigen::VectorXd scaled = Eigen::VectorXd::Zero(lambda.size());
    for (Eigen::Index i = 0; i < lambda.size(); ++i) {
      const double denom = lambda(i) + mult;
      if (denom > tol) scaled(i) = proj(i) / denom;
    }
    return scaled;  // coordinates in the eigenbasis; norm is basis-invariant
  };

  const Eigen::VectorXd unconstrained = ridge(0.0);
  if (unconstrained.norm() <= radius) return u * unconstrained;

  // ||(G + mult I)^{-1} g|| decreases monotonically in mult, and is at most
  // ||g|| / mult, so the root lies in (0, ||g|| / radius].
  double lo = 0.0;
  double hi = proj.norm() / radius;
  while (hi - lo > kBisectionRelTol * hi) {
    const double mid = 0.5 * (lo + hi);
    if (ridge(mid).norm() > radius) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return u * ridge(hi);
}

FittedRule fit(const LearnerKind& kind, const SufficientStats& stats) {
  FittedRule rule;
  rule.family = kind.family;
  rule.fitted_on_size = stats.count();
  switch (kind.family) {
    case LearnerFamily::EmpiricalMean:
      rule.mean = stats.count() > 0 ? stats.sum_outcomes() / static_cast<double>(stats.count()) : 0.0;
      break;
    case LearnerFamily::Ols:
      rule.coefficients = min_norm_least_squares(stats.gram(), stats.moment());
      break;
    case LearnerFamily::NormConstrainedLinear:
      rule.coefficients = constrained_least_squares(stats.gram(), stats.moment(), kind.radius);
      break;
  }
  return rule;
}

FittedRule fit(const LearnerKind& kind, const Dataset& data, Eigen::Index feature_dimension) {
  return fit(kind, SufficientStats(data, feature_dimension));
}

double raw_prediction(const FittedRule& rule, const CaseFeatures& x) {
  if (rule.family == LearnerFamily::EmpiricalMean) return rule.mean;
  if (rule.coefficients.size() != x.dimension() + 1) {
    throw std::invalid_argument("case dimension does not match fitted rule");
  }
  const Eigen::Index n = x.dimension();
  return rule.coefficients.head(n).dot(x.coords()) + rule.coefficients(n);
}

double predict(const FittedRule& rule, const CaseFeatures& x, double alpha) {
  return std::clamp(raw_prediction(rule, x), 0.0, alpha);
}

double err_bound(const LearnerKind& kind, std::int64_t m, double sigma, double alpha, Eigen::Index n) {
  if (m < 0) throw std::invalid_argument("err_bound: dataset size must be >= 0");
  if (m == 0) return alpha;
  double scale = kind.err_constant * sigma / std::sqrt(static_cast<double>(m));
  if (kind.is_linear()) scale *= std::sqrt(static_cast<double>(n + 1));
  return std::min(alpha, scale);
}

}  // namespace courtlearn
