#include "courtlearn/core.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace courtlearn {

namespace {

// Slack for rounding in ||x|| <= 1 and the linear-rule range checks.
constexpr double kNormSlack = 1e-12;

}  // namespace

CaseFeatures CaseFeatures::vector(Eigen::VectorXd coords) {
  if (coords.size() < 1) throw ConfigError("cases.dimension", "vector cases need dimension >= 1");
  if (coords.norm() > 1.0 + kNormSlack) {
    throw std::invalid_argument("case features must lie in the unit ball");
  }
  CaseFeatures out;
  out.kind_ = CaseKind::Vector;
  out.coords_ = std::move(coords);
  return out;
}

Eigen::VectorXd CaseFeatures::augmented() const {
  Eigen::VectorXd out(coords_.size() + 1);
  out.head(coords_.size()) = coords_;
  out(coords_.size()) = 1.0;
  return out;
}

void CaseSpec::validate() const {
  if (kind == CaseKind::Vector && dimension < 1) {
    throw ConfigError("cases.dimension", "must be >= 1");
  }
}

CaseFeatures sample_case(const CaseSpec& spec, Rng& rng) {
  spec.validate();
  if (spec.kind == CaseKind::Singleton) return CaseFeatures::singleton();

  // Isotropic direction from Gaussian coordinates; radius U^{1/n} makes the
  // point uniform in the ball.
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd x(spec.dimension);
  double norm = 0.0;
  do {
    for (Eigen::Index i = 0; i < x.size(); ++i) x(i) = normal(rng);
    norm = x.norm();
  } while (norm == 0.0);
  x /= norm;
  if (spec.distribution == CaseDistribution::UniformBall) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    x *= std::pow(unit(rng), 1.0 / spec.dimension);
  }
  // Rounding can leave the norm a few ulps above 1.
  if (const double n = x.norm(); n > 1.0) x /= n;
  return CaseFeatures::vector(std::move(x));
}

GroundTruth GroundTruth::constant(double mu, double sigma, double alpha) {
  if (!(alpha > 0.0) || !std::isfinite(alpha)) throw ConfigError("truth.alpha", "must be > 0");
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw ConfigError("truth.sigma", "must be >= 0");
  if (sigma > alpha) throw ConfigError("truth.sigma", "must not exceed truth.alpha");
  if (!(mu >= 0.0 && mu <= alpha)) throw ConfigError("truth.mu", "must lie in [0, alpha]");
  return GroundTruth(ConstantRule{mu}, sigma, alpha);
}

GroundTruth GroundTruth::linear(Eigen::VectorXd beta, double beta0, double sigma, double alpha) {
  if (!(alpha > 0.0) || !std::isfinite(alpha)) throw ConfigError("truth.alpha", "must be > 0");
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw ConfigError("truth.sigma", "must be >= 0");
  if (sigma > alpha) throw ConfigError("truth.sigma", "must not exceed truth.alpha");
  if (beta.size() < 1) throw ConfigError("truth.beta", "needs at least one coefficient");
  if (!beta.allFinite() || !std::isfinite(beta0)) throw ConfigError("truth.beta", "must be finite");
  const double norm = beta.norm();
  // beta.x + beta0 in [beta0 - |beta|, beta0 + |beta|] over the unit ball.
  if (norm > beta0 + kNormSlack) throw ConfigError("truth.beta", "requires |beta| <= beta0");
  if (beta0 + norm > alpha + kNormSlack) throw ConfigError("truth.beta0", "requires beta0 + |beta| <= alpha");
  return GroundTruth(LinearRule{std::move(beta), beta0}, sigma, alpha);
}

Eigen::Index GroundTruth::dimension() const {
  if (const auto* lin = std::get_if<LinearRule>(&family_)) return lin->beta.size();
  return 0;
}

double GroundTruth::value(const CaseFeatures& x) const {
  if (const auto* c = std::get_if<ConstantRule>(&family_)) return c->mu;
  const auto& lin = std::get<LinearRule>(family_);
  if (x.dimension() != lin.beta.size()) {
    throw ConfigError("cases.dimension", "case dimension does not match truth.beta");
  }
  return lin.beta.dot(x.coords()) + lin.beta0;
}

Observation court_outcome(const GroundTruth& truth, const CaseFeatures& x, Rng& rng) {
  std::normal_distribution<double> noise(0.0, 1.0);
  const double f = truth.value(x);
  return Observation{x, f + truth.sigma() * noise(rng)};
}

CostModel::CostModel(Mode mode) : mode_(std::move(mode)) {
  std::visit(
      [this](const auto& m) {
        using M = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<M, FixedCosts>) {
          if (m.costs.empty()) throw ConfigError("cost.values", "must be non-empty");
          c_min_ = *std::min_element(m.costs.begin(), m.costs.end());
          c_max_ = *std::max_element(m.costs.begin(), m.costs.end());
          mean_ = std::accumulate(m.costs.begin(), m.costs.end(), 0.0) /
                  static_cast<double>(m.costs.size());
        } else if constexpr (std::is_same_v<M, UniformCosts>) {
          c_min_ = m.lo;
          c_max_ = m.hi;
          mean_ = 0.5 * (m.lo + m.hi);
        } else {
          c_min_ = c_max_ = mean_ = m.c;
        }
      },
      mode_);
  if (!std::isfinite(c_min_) || c_min_ < 0.0) throw ConfigError("cost.c_min", "must be >= 0");
  if (!std::isfinite(c_max_) || c_max_ < c_min_) throw ConfigError("cost.c_max", "must be >= cost.c_min");
}

double CostModel::draw(std::int64_t t, Rng& rng) const {
  return std::visit(
      [&](const auto& m) -> double {
        using M = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<M, FixedCosts>) {
          const auto len = static_cast<std::int64_t>(m.costs.size());
          return m.costs[static_cast<std::size_t>((t - 1) % len)];
        } else if constexpr (std::is_same_v<M, UniformCosts>) {
          if (m.lo == m.hi) return m.lo;
          std::uniform_real_distribution<double> u(m.lo, m.hi);
          return u(rng);
        } else {
          return m.c;
        }
      },
      mode_);
}

double recompute_total_loss(const RunLedger& ledger) {
  double total = 0.0;
  for (const auto& r : ledger.records) total += r.squared_error + r.court_cost_incurred;
  return total;
}

std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::uint64_t replication_seed(std::uint64_t master, std::uint64_t replication) {
  return mix_seed(master + (replication + 1) * 0x9E3779B97F4A7C15ULL);
}

Rng make_stream(std::uint64_t run_seed, Stream stream, std::uint64_t salt) {
  const std::uint64_t s = mix_seed(run_seed ^ mix_seed(static_cast<std::uint64_t>(stream) + salt));
  std::seed_seq seq{static_cast<std::uint32_t>(s), static_cast<std::uint32_t>(s >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(salt),
                    static_cast<std::uint32_t>(salt >> 32)};
  return Rng(seq);
}

std::uint64_t fnv1a(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace courtlearn
