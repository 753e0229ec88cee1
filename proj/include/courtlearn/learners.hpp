#pragma once

#include <cstdint>

#include <Eigen/Dense>

#include "courtlearn/core.hpp"

namespace courtlearn {

enum class LearnerFamily { EmpiricalMean, Ols, NormConstrainedLinear };

struct LearnerKind {
  LearnerFamily family = LearnerFamily::EmpiricalMean;
  // Norm bound on the (n+1)-dim coefficient vector; NormConstrainedLinear only.
  double radius = 1.0;
  // Constant of the O(sigma / sqrt(m)) error bound.
  double err_constant = 1.0;

  static LearnerKind empirical_mean(double err_constant = 1.0) {
    return {LearnerFamily::EmpiricalMean, 1.0, err_constant};
  }
  static LearnerKind ols(double err_constant = 1.0) { return {LearnerFamily::Ols, 1.0, err_constant}; }
  static LearnerKind norm_constrained(double radius = 1.0, double err_constant = 1.0) {
    return {LearnerFamily::NormConstrainedLinear, radius, err_constant};
  }

  bool is_linear() const { return family != LearnerFamily::EmpiricalMean; }
};

/// Running sums sufficient for every learner: count, sum of outcomes, and the
/// Gram matrix / moment vector of the augmented features [x, 1].
class SufficientStats {
 public:
  // `feature_dimension` is n (0 for singleton cases).
  explicit SufficientStats(Eigen::Index feature_dimension = 0);
  explicit SufficientStats(const Dataset& data, Eigen::Index feature_dimension);

  void add(const Observation& obs);

  std::int64_t count() const noexcept { return count_; }
  double sum_outcomes() const noexcept { return sum_y_; }
  Eigen::Index feature_dimension() const noexcept { return gram_.rows() - 1; }
  // X^T X over augmented rows.
  const Eigen::MatrixXd& gram() const noexcept { return gram_; }
  // X^T Y over augmented rows.
  const Eigen::VectorXd& moment() const noexcept { return moment_; }

 private:
  std::int64_t count_ = 0;
  double sum_y_ = 0.0;
  Eigen::MatrixXd gram_;
  Eigen::VectorXd moment_;
};

struct FittedRule {
  LearnerFamily family = LearnerFamily::EmpiricalMean;
  double mean = 0.0;                // EmpiricalMean
  Eigen::VectorXd coefficients;     // linear learners: [beta_hat, offset]
  std::int64_t fitted_on_size = 0;
};

FittedRule fit(const LearnerKind& kind, const SufficientStats& stats);
FittedRule fit(const LearnerKind& kind, const Dataset& data, Eigen::Index feature_dimension);

// Unclipped L(D)(x).
double raw_prediction(const FittedRule& rule, const CaseFeatures& x);
// L(D)(x) clipped into [0, alpha].
double predict(const FittedRule& rule, const CaseFeatures& x, double alpha);

// err(L, D, x) for |D| = m. alpha for the empty dataset, otherwise
// min(alpha, C sigma / sqrt(m)) for the mean and min(alpha, C sigma sqrt(n+1) / sqrt(m))
// for the linear learners. Independent of x.
double err_bound(const LearnerKind& kind, std::int64_t m, double sigma, double alpha, Eigen::Index n);

// Minimiser of ||X b - Y||^2 over ||b|| <= radius given the normal equations
// G = X^T X, g = X^T Y. Exposed for the KWIK tests.
Eigen::VectorXd constrained_least_squares(const Eigen::MatrixXd& gram, const Eigen::VectorXd& moment,
                                          double radius);
// Minimum-norm least-squares solution pinv(G) g.
Eigen::VectorXd min_norm_least_squares(const Eigen::MatrixXd& gram, const Eigen::VectorXd& moment);

}  // namespace courtlearn
