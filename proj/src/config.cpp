#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <yaml-cpp/yaml.h>

#include "json.hpp"

#include "courtlearn/experiment.hpp"

namespace courtlearn {

namespace {

std::string join(const std::string& parent, const std::string& key) {
  return parent.empty() ? key : parent + "." + key;
}

// A YAML mapping that remembers its key path and which keys were read.
class Section {
 public:
  Section(YAML::Node node, std::string path) : node_(std::move(node)), path_(std::move(path)) {
    if (node_ && !node_.IsNull() && !node_.IsMap()) throw ConfigError(path_, "expected a mapping");
  }

  bool has(const std::string& key) {
    seen_.insert(key);
    return node_ && node_.IsMap() && node_[key] && !node_[key].IsNull();
  }

  template <class T>
  T get(const std::string& key) {
    if (!has(key)) throw ConfigError(join(path_, key), "missing required field");
    return as<T>(node_[key], join(path_, key));
  }

  template <class T>
  T get_or(const std::string& key, T fallback) {
    return has(key) ? as<T>(node_[key], join(path_, key)) : fallback;
  }

  std::vector<double> get_reals(const std::string& key) {
    if (!has(key)) throw ConfigError(join(path_, key), "missing required field");
    return list<double>(key);
  }

  template <class T>
  std::vector<T> list(const std::string& key) {
    const std::string path = join(path_, key);
    const YAML::Node seq = node_[key];
    if (!seq.IsSequence()) throw ConfigError(path, "expected a list");
    std::vector<T> out;
    for (std::size_t i = 0; i < seq.size(); ++i) {
      out.push_back(as<T>(seq[i], path + "[" + std::to_string(i) + "]"));
    }
    return out;
  }

  Section child(const std::string& key) {
    seen_.insert(key);
    return Section(node_ ? node_[key] : YAML::Node(), join(path_, key));
  }

  YAML::Node raw(const std::string& key) {
    seen_.insert(key);
    return node_[key];
  }

  const std::string& path() const { return path_; }

  // Rejects keys that were never read; catches typos like "c-min".
  void finish() const {
    if (!node_ || !node_.IsMap()) return;
    for (const auto& kv : node_) {
      const auto key = kv.first.as<std::string>();
      if (!seen_.count(key)) throw ConfigError(join(path_, key), "unknown field");
    }
  }

 private:
  template <class T>
  static T as(const YAML::Node& node, const std::string& path) {
    try {
      return node.as<T>();
    } catch (const YAML::Exception&) {
      throw ConfigError(path, "has the wrong type");
    }
  }

  YAML::Node node_;
  std::string path_;
  std::set<std::string> seen_;
};

void require_positive(double v, const std::string& path) {
  if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError(path, "must be > 0");
}

CaseSpec parse_cases(Section s) {
  CaseSpec spec;
  const auto kind = s.get_or<std::string>("kind", "singleton");
  if (kind == "singleton") {
    spec.kind = CaseKind::Singleton;
  } else if (kind == "vector") {
    spec.kind = CaseKind::Vector;
    spec.dimension = s.get<int>("dimension");
    if (spec.dimension < 1) throw ConfigError("cases.dimension", "must be >= 1");
  } else {
    throw ConfigError("cases.kind", "unknown case kind '" + kind + "'");
  }
  const auto dist = s.get_or<std::string>("distribution", "uniform_ball");
  if (dist == "uniform_ball") {
    spec.distribution = CaseDistribution::UniformBall;
  } else if (dist == "unit_sphere") {
    spec.distribution = CaseDistribution::UnitSphere;
  } else {
    throw ConfigError("cases.distribution", "unknown distribution '" + dist + "'");
  }
  s.finish();
  return spec;
}

GroundTruth parse_truth(Section s) {
  const double alpha = s.get<double>("alpha");
  const double sigma = s.get<double>("sigma");
  const auto family = s.get_or<std::string>("family", "constant");
  GroundTruth truth = GroundTruth::constant(0.0, 0.0, 1.0);
  if (family == "constant") {
    truth = GroundTruth::constant(s.get_or<double>("mu", alpha / 2.0), sigma, alpha);
  } else if (family == "linear") {
    const auto beta = s.get_reals("beta");
    truth = GroundTruth::linear(Eigen::Map<const Eigen::VectorXd>(beta.data(), static_cast<Eigen::Index>(beta.size())),
                                s.get<double>("beta0"), sigma, alpha);
  } else {
    throw ConfigError("truth.family", "unknown family '" + family + "'");
  }
  s.finish();
  return truth;
}

CostModel parse_cost(Section s) {
  const auto mode = s.get<std::string>("mode");
  std::optional<CostModel> out;
  if (mode == "point_mass") {
    const double c = s.get<double>("c");
    require_positive(c, "cost.c");
    out = CostModel::point_mass(c);
  } else if (mode == "uniform") {
    const double lo = s.get<double>("c_min");
    const double hi = s.get<double>("c_max");
    require_positive(lo, "cost.c_min");
    if (!(hi >= lo) || !std::isfinite(hi)) throw ConfigError("cost.c_max", "must be >= cost.c_min");
    out = CostModel::uniform(lo, hi);
  } else if (mode == "fixed") {
    const auto values = s.get_reals("values");
    if (values.empty()) throw ConfigError("cost.values", "must be non-empty");
    for (std::size_t i = 0; i < values.size(); ++i) {
      require_positive(values[i], "cost.values[" + std::to_string(i) + "]");
    }
    out = CostModel::fixed(values);
  } else {
    throw ConfigError("cost.mode", "unknown cost mode '" + mode + "'");
  }
  s.finish();
  return *out;
}

PolicyKind parse_policy_kind(const std::string& name, const std::string& path) {
  if (name == "no_subsidy") return PolicyKind::NoSubsidy;
  if (name == "etc") return PolicyKind::ExploreThenCommit;
  if (name == "dynamic") return PolicyKind::DynamicCompelling;
  if (name == "subsidy") return PolicyKind::SubsidySampling;
  if (name == "kwik") return PolicyKind::Kwik;
  throw ConfigError(path, "unknown policy '" + name + "'");
}

PolicySpec parse_policy(Section s) {
  PolicySpec p;
  const auto kind = s.get<std::string>("kind");
  p.kind = parse_policy_kind(kind, join(s.path(), "kind"));
  p.label = s.get_or<std::string>("label", kind);
  if (p.label.empty() || !std::all_of(p.label.begin(), p.label.end(), [](unsigned char c) {
        return std::isalnum(c) || c == '_' || c == '-' || c == '.';
      })) {
    throw ConfigError(join(s.path(), "label"), "must be non-empty and use only [A-Za-z0-9_.-]");
  }
  if (p.kind == PolicyKind::Kwik) {
    p.epsilon = s.get_or<double>("epsilon", p.epsilon);
    p.delta = s.get_or<double>("delta", p.delta);
    p.alpha1_scale = s.get_or<double>("alpha1_scale", p.alpha1_scale);
    require_positive(p.epsilon, join(s.path(), "epsilon"));
    require_positive(p.delta, join(s.path(), "delta"));
    require_positive(p.alpha1_scale, join(s.path(), "alpha1_scale"));
    if (p.epsilon * p.delta >= 1.0) throw ConfigError(join(s.path(), "delta"), "requires epsilon * delta < 1");
    if (s.has("alpha1")) {
      p.alpha1 = s.get<double>("alpha1");
      require_positive(*p.alpha1, join(s.path(), "alpha1"));
    }
    if (s.has("alpha2")) {
      p.alpha2 = s.get<double>("alpha2");
      require_positive(*p.alpha2, join(s.path(), "alpha2"));
    }
  }
  s.finish();
  return p;
}

LearnerKind parse_learner(Section& root, const CaseSpec& cases) {
  const std::string fallback = cases.kind == CaseKind::Vector ? "ols" : "empirical_mean";
  const auto name = root.get_or<std::string>("learner", fallback);
  LearnerKind kind;
  if (name == "empirical_mean") {
    kind.family = LearnerFamily::EmpiricalMean;
  } else if (name == "ols") {
    kind.family = LearnerFamily::Ols;
  } else if (name == "norm_constrained") {
    kind.family = LearnerFamily::NormConstrainedLinear;
  } else {
    throw ConfigError("learner", "unknown learner '" + name + "'");
  }
  kind.radius = root.get_or<double>("learner_radius", 1.0);
  kind.err_constant = root.get_or<double>("err_constant", 1.0);
  require_positive(kind.radius, "learner_radius");
  require_positive(kind.err_constant, "err_constant");
  return kind;
}

}  // namespace

ExperimentSpec parse_config(const std::string& text) {
  YAML::Node doc;
  try {
    doc = YAML::Load(text);
  } catch (const YAML::Exception& e) {
    throw ConfigError("", std::string("YAML parse error: ") + e.what());
  }
  if (!doc.IsMap()) throw ConfigError("", "config must be a mapping");
  Section root(doc, "");

  ExperimentSpec spec;
  spec.seed = root.get_or<std::uint64_t>("seed", 0);
  spec.replications = root.get_or<std::int64_t>("replications", 100);
  if (spec.replications < 1) throw ConfigError("replications", "must be >= 1");

  if (!root.has("horizons")) throw ConfigError("horizons", "missing required field");
  spec.horizons = root.list<std::int64_t>("horizons");

  if (root.has("output_dir")) spec.output_dir = root.get<std::string>("output_dir");
  if (root.has("formats")) {
    spec.emit_csv = spec.emit_json = false;
    const auto formats = root.list<std::string>("formats");
    for (std::size_t i = 0; i < formats.size(); ++i) {
      if (formats[i] == "csv") {
        spec.emit_csv = true;
      } else if (formats[i] == "json") {
        spec.emit_json = true;
      } else {
        throw ConfigError("formats[" + std::to_string(i) + "]", "expected csv or json");
      }
    }
  }
  spec.ledgers = root.get_or<bool>("ledgers", false);

  if (!root.has("truth")) throw ConfigError("truth", "missing required field");
  if (!root.has("cost")) throw ConfigError("cost", "missing required field");
  if (!root.has("policies")) throw ConfigError("policies", "missing required field");
  spec.cases = parse_cases(root.child("cases"));
  spec.truth = parse_truth(root.child("truth"));
  spec.costs = parse_cost(root.child("cost"));
  spec.learner = parse_learner(root, spec.cases);

  const YAML::Node policies = root.raw("policies");
  if (!policies.IsSequence()) throw ConfigError("policies", "expected a list");
  for (std::size_t i = 0; i < policies.size(); ++i) {
    spec.policies.push_back(parse_policy(Section(policies[i], "policies[" + std::to_string(i) + "]")));
  }
  root.finish();
  validate(spec);
  return spec;
}

ExperimentSpec load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("", "cannot read config file " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_config(buffer.str());
}

void validate(const ExperimentSpec& spec) {
  if (spec.horizons.empty()) throw ConfigError("horizons", "sweep must be non-empty");
  for (std::size_t i = 0; i < spec.horizons.size(); ++i) {
    if (spec.horizons[i] < 1) throw ConfigError("horizons[" + std::to_string(i) + "]", "must be >= 1");
    if (i > 0 && spec.horizons[i] <= spec.horizons[i - 1]) {
      throw ConfigError("horizons", "sweep must be increasing");
    }
  }
  if (spec.policies.empty()) throw ConfigError("policies", "must list at least one policy");
  std::set<std::string> labels;
  for (std::size_t i = 0; i < spec.policies.size(); ++i) {
    if (!labels.insert(spec.policies[i].label).second) {
      throw ConfigError("policies[" + std::to_string(i) + "].label", "duplicate label '" + spec.policies[i].label + "'");
    }
  }
  if (!(spec.costs.c_min() > 0.0)) throw ConfigError("cost.c_min", "must be > 0");
  if (spec.replications < 1) throw ConfigError("replications", "must be >= 1");
  // Builds and validates every run the sweep will execute.
  for (std::size_t p = 0; p < spec.policies.size(); ++p) {
    try {
      validate(make_run_config(spec, p, spec.horizons.front()));
    } catch (const ConfigError& e) {
      if (e.path().rfind("policy", 0) == 0) {
        throw ConfigError("policies[" + std::to_string(p) + "]" + e.path().substr(6), e.message());
      }
      throw;
    }
  }
}

PolicyConfig resolve_policy(const ExperimentSpec& spec, const PolicySpec& policy, std::int64_t horizon) {
  const double alpha = spec.truth.alpha();
  switch (policy.kind) {
    case PolicyKind::NoSubsidy:
      return NoSubsidyPolicy{};
    case PolicyKind::ExploreThenCommit:
      return ExploreThenCommitPolicy{horizon, alpha, spec.costs.c_max()};
    case PolicyKind::DynamicCompelling:
      return DynamicCompellingPolicy{alpha, spec.costs.c_max()};
    case PolicyKind::SubsidySampling:
      return SubsidySamplingPolicy{alpha, spec.costs.c_min(), spec.costs.c_max()};
    case PolicyKind::Kwik: {
      const int n = spec.cases.feature_dimension();
      if (n < 1) throw ConfigError("cases.kind", "kwik policy needs vector cases");
      KwikPolicy k = KwikPolicy::with_defaults(policy.epsilon, policy.delta, n, policy.alpha1_scale);
      if (policy.alpha1) k.alpha1 = *policy.alpha1;
      if (policy.alpha2) k.alpha2 = *policy.alpha2;
      return k;
    }
  }
  throw std::logic_error("unhandled policy kind");
}

RunConfig make_run_config(const ExperimentSpec& spec, std::size_t policy_index, std::int64_t horizon) {
  return RunConfig{
      .horizon = horizon,
      .truth = spec.truth,
      .cases = spec.cases,
      .costs = spec.costs,
      .learner = spec.learner,
      .policy = resolve_policy(spec, spec.policies.at(policy_index), horizon),
      .seed = spec.seed,
      .config_digest = config_digest(spec),
  };
}

std::string canonical_config(const ExperimentSpec& spec) {
  using nlohmann::json;
  json j;
  j["seed"] = spec.seed;
  j["replications"] = spec.replications;
  j["horizons"] = spec.horizons;

  json cases;
  cases["kind"] = spec.cases.kind == CaseKind::Vector ? "vector" : "singleton";
  cases["dimension"] = spec.cases.feature_dimension();
  cases["distribution"] = spec.cases.distribution == CaseDistribution::UniformBall ? "uniform_ball" : "unit_sphere";
  j["cases"] = cases;

  json truth;
  truth["alpha"] = spec.truth.alpha();
  truth["sigma"] = spec.truth.sigma();
  if (const auto* c = std::get_if<ConstantRule>(&spec.truth.family())) {
    truth["family"] = "constant";
    truth["mu"] = c->mu;
  } else {
    const auto& lin = std::get<LinearRule>(spec.truth.family());
    truth["family"] = "linear";
    truth["beta"] = std::vector<double>(lin.beta.data(), lin.beta.data() + lin.beta.size());
    truth["beta0"] = lin.beta0;
  }
  j["truth"] = truth;

  json cost;
  std::visit(
      [&](const auto& m) {
        using M = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<M, FixedCosts>) {
          cost["mode"] = "fixed";
          cost["values"] = m.costs;
        } else if constexpr (std::is_same_v<M, UniformCosts>) {
          cost["mode"] = "uniform";
          cost["c_min"] = m.lo;
          cost["c_max"] = m.hi;
        } else {
          cost["mode"] = "point_mass";
          cost["c"] = m.c;
        }
      },
      spec.costs.mode());
  j["cost"] = cost;

  static constexpr const char* kLearners[] = {"empirical_mean", "ols", "norm_constrained"};
  j["learner"] = kLearners[static_cast<int>(spec.learner.family)];
  j["learner_radius"] = spec.learner.radius;
  j["err_constant"] = spec.learner.err_constant;

  json policies = json::array();
  static constexpr const char* kPolicies[] = {"no_subsidy", "etc", "dynamic", "subsidy", "kwik"};
  for (const auto& p : spec.policies) {
    json pj;
    pj["kind"] = kPolicies[static_cast<int>(p.kind)];
    pj["label"] = p.label;
    if (p.kind == PolicyKind::Kwik) {
      pj["epsilon"] = p.epsilon;
      pj["delta"] = p.delta;
      pj["alpha1_scale"] = p.alpha1_scale;
      if (p.alpha1) pj["alpha1"] = *p.alpha1;
      if (p.alpha2) pj["alpha2"] = *p.alpha2;
    }
    policies.push_back(pj);
  }
  j["policies"] = policies;
  return j.dump();
}

std::string config_digest(const ExperimentSpec& spec) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(canonical_config(spec))));
  return buf;
}

}  // namespace courtlearn
