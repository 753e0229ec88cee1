#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "courtlearn/sim.hpp"

namespace courtlearn {

enum class PolicyKind { NoSubsidy, ExploreThenCommit, DynamicCompelling, SubsidySampling, Kwik };

// A policy as written in the config; alpha, the cost range and (for ETC)
// the horizon are filled in per sweep point.
struct PolicySpec {
  PolicyKind kind = PolicyKind::NoSubsidy;
  std::string label;
  // KWIK only.
  double epsilon = 0.25;
  double delta = 0.05;
  double alpha1_scale = 1.0;
  std::optional<double> alpha1;
  std::optional<double> alpha2;
};

struct ExperimentSpec {
  GroundTruth truth = GroundTruth::constant(0.5, 0.0, 1.0);
  CaseSpec cases;
  CostModel costs = CostModel::point_mass(1.0);
  LearnerKind learner;
  std::vector<std::int64_t> horizons;
  std::vector<PolicySpec> policies;
  std::int64_t replications = 100;
  std::uint64_t seed = 0;
  std::filesystem::path output_dir = "results";
  bool emit_csv = true;
  bool emit_json = false;
  bool ledgers = false;
};

// YAML config; see README for the schema. Every error is a ConfigError
// naming the offending key path.
ExperimentSpec parse_config(const std::string& text);
ExperimentSpec load_config(const std::filesystem::path& path);

// Re-checks the cross-field invariants (also run by parse_config).
void validate(const ExperimentSpec& spec);

PolicyConfig resolve_policy(const ExperimentSpec& spec, const PolicySpec& policy, std::int64_t horizon);
RunConfig make_run_config(const ExperimentSpec& spec, std::size_t policy_index, std::int64_t horizon);

// Sorted-key JSON of every field that affects results, and its FNV-1a hash
// as 16 hex digits.
std::string canonical_config(const ExperimentSpec& spec);
std::string config_digest(const ExperimentSpec& spec);

struct RegretRow {
  std::string policy;
  std::int64_t horizon = 0;
  RegretReport report;
};

struct SlopeRow {
  std::string policy;
  double slope = 0.0;
  double intercept = 0.0;
  std::int64_t points = 0;
};

struct LogLogFit {
  double slope = 0.0;
  double intercept = 0.0;
  std::int64_t points = 0;
};

// OLS of log(y) on log(x), equal weights; points with y <= 0 are skipped.
LogLogFit fit_log_log(const std::vector<double>& xs, const std::vector<double>& ys);

struct ExperimentResult {
  std::vector<RegretRow> regret;
  std::vector<SlopeRow> slopes;
  std::vector<std::filesystem::path> files;
};

// Sweeps every (policy, horizon) pair and writes regret.csv, slopes.csv
// (and regret.json / ledgers.jsonl when enabled) into spec.output_dir.
ExperimentResult run_experiment(const ExperimentSpec& spec);

std::vector<RegretRow> regret_sweep(const ExperimentSpec& spec, std::ostream* ledger_out = nullptr);
std::vector<SlopeRow> fit_slopes(const std::vector<RegretRow>& rows);

struct KwikRow {
  std::int64_t horizon = 0;
  int n = 0;
  double epsilon = 0.0;
  double delta = 0.0;
  double predicted_count = 0.0;  // mean over replications
  double compelled_count = 0.0;  // mean over replications
  // Pooled over replications; 1 when nothing was predicted.
  double fraction_within_eps = 1.0;
  double max_abs_prediction_error = 0.0;
};

// One row per (kwik policy, horizon); writes kwik.csv.
std::vector<KwikRow> kwik_report(const ExperimentSpec& spec);
std::vector<KwikRow> kwik_rows(const ExperimentSpec& spec);

void write_regret_csv(std::ostream& out, const std::vector<RegretRow>& rows);
void write_slopes_csv(std::ostream& out, const std::vector<SlopeRow>& rows);
void write_kwik_csv(std::ostream& out, const std::vector<KwikRow>& rows);
// One JSON object per line.
void write_ledger_line(std::ostream& out, const std::string& policy, std::int64_t horizon,
                       std::int64_t replication, const RunLedger& ledger);

// %.12g
std::string format_number(double v);

}  // namespace courtlearn
