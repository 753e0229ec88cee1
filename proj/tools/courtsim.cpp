// courtsim: regret sweeps and KWIK reports from a YAML experiment config.
//
//   courtsim run  <config> [--out DIR] [--seed N] [--replications N] [--ledgers]
//   courtsim kwik <config> [--out DIR] [--seed N] [--replications N]
//
// Exit codes: 0 success, 2 configuration error, 1 anything else.

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "courtlearn/experiment.hpp"

namespace {

struct Overrides {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<std::int64_t> replications;
  bool ledgers = false;
};

void add_common(CLI::App* cmd, Overrides& o) {
  cmd->add_option("config", o.config, "experiment config (YAML)")->required();
  cmd->add_option("--out", o.out, "output directory (overrides output_dir)");
  cmd->add_option("--seed", o.seed, "master seed (overrides seed)");
  cmd->add_option("--replications", o.replications, "replications per (policy, T)");
}

courtlearn::ExperimentSpec load(const Overrides& o) {
  courtlearn::ExperimentSpec spec = courtlearn::load_config(o.config);
  if (!o.out.empty()) spec.output_dir = o.out;
  if (o.seed) spec.seed = *o.seed;
  if (o.replications) {
    if (*o.replications < 1) throw courtlearn::ConfigError("--replications", "must be >= 1");
    spec.replications = *o.replications;
  }
  if (o.ledgers) spec.ledgers = true;
  courtlearn::validate(spec);
  return spec;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Online court-learning simulator"};
  app.require_subcommand(1);

  Overrides run_opts;
  CLI::App* run_cmd = app.add_subcommand("run", "regret sweep: regret.csv, slopes.csv");
  add_common(run_cmd, run_opts);
  run_cmd->add_flag("--ledgers", run_opts.ledgers, "write per-run ledgers.jsonl");

  Overrides kwik_opts;
  CLI::App* kwik_cmd = app.add_subcommand("kwik", "KWIK accuracy report: kwik.csv");
  add_common(kwik_cmd, kwik_opts);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (run_cmd->parsed()) {
      const auto spec = load(run_opts);
      const auto result = courtlearn::run_experiment(spec);
      for (const auto& row : result.regret) {
        std::cout << row.policy << " T=" << row.horizon
                  << " regret=" << courtlearn::format_number(row.report.mean_regret)
                  << " se=" << courtlearn::format_number(row.report.std_error) << '\n';
      }
      for (const auto& s : result.slopes) {
        std::cout << s.policy << " slope=" << courtlearn::format_number(s.slope) << '\n';
      }
      for (const auto& f : result.files) std::cout << "wrote " << f.string() << '\n';
    } else {
      const auto spec = load(kwik_opts);
      const auto rows = courtlearn::kwik_report(spec);
      for (const auto& r : rows) {
        std::cout << "T=" << r.horizon << " predicted=" << courtlearn::format_number(r.predicted_count)
                  << " compelled=" << courtlearn::format_number(r.compelled_count)
                  << " within_eps=" << courtlearn::format_number(r.fraction_within_eps) << '\n';
      }
      std::cout << "wrote " << (spec.output_dir / "kwik.csv").string() << '\n';
    }
  } catch (const courtlearn::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
