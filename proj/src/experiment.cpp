#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>

#include "json.hpp"

#include "courtlearn/experiment.hpp"

namespace courtlearn {

namespace {

std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

void ensure_directory(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir)) {
    throw std::runtime_error("cannot create output directory " + dir.string());
  }
}

double finite_or_throw(double v, const char* what) {
  if (!std::isfinite(v)) throw std::runtime_error(std::string("non-finite value in ") + what);
  return v;
}

}  // namespace

std::string format_number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

LogLogFit fit_log_log(const std::vector<double>& xs, const std::vector<double>& ys) {
  if (xs.size() != ys.size()) throw std::invalid_argument("fit_log_log: size mismatch");
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (xs[i] > 0.0 && ys[i] > 0.0) {
      lx.push_back(std::log(xs[i]));
      ly.push_back(std::log(ys[i]));
    }
  }
  LogLogFit fit;
  fit.points = static_cast<std::int64_t>(lx.size());
  if (lx.size() < 2) return fit;
  const double k = static_cast<double>(lx.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    mx += lx[i];
    my += ly[i];
  }
  mx /= k;
  my /= k;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    sxy += (lx[i] - mx) * (ly[i] - my);
    sxx += (lx[i] - mx) * (lx[i] - mx);
  }
  if (sxx == 0.0) {
    fit.points = 1;
    return fit;
  }
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  return fit;
}

std::vector<RegretRow> regret_sweep(const ExperimentSpec& spec, std::ostream* ledger_out) {
  validate(spec);
  std::vector<RegretRow> rows;
  for (std::size_t p = 0; p < spec.policies.size(); ++p) {
    for (const std::int64_t horizon : spec.horizons) {
      const RunConfig config = make_run_config(spec, p, horizon);
      const std::string& label = spec.policies[p].label;
      LedgerSink sink;
      if (ledger_out) {
        sink = [&](std::int64_t r, const RunLedger& ledger) {
          write_ledger_line(*ledger_out, label, horizon, r, ledger);
        };
      }
      rows.push_back(RegretRow{label, horizon, estimate_regret(config, spec.replications, sink)});
    }
  }
  return rows;
}

std::vector<SlopeRow> fit_slopes(const std::vector<RegretRow>& rows) {
  std::vector<SlopeRow> out;
  std::vector<std::string> order;
  for (const auto& r : rows) {
    if (std::find(order.begin(), order.end(), r.policy) == order.end()) order.push_back(r.policy);
  }
  for (const auto& policy : order) {
    std::vector<double> xs, ys;
    for (const auto& r : rows) {
      if (r.policy != policy) continue;
      xs.push_back(static_cast<double>(r.horizon));
      ys.push_back(r.report.mean_regret);
    }
    const LogLogFit fit = fit_log_log(xs, ys);
    // Fewer than two positive regrets leave the slope undefined.
    if (fit.points < 2) continue;
    out.push_back(SlopeRow{policy, fit.slope, fit.intercept, fit.points});
  }
  return out;
}

void write_regret_csv(std::ostream& out, const std::vector<RegretRow>& rows) {
  out << "policy,T,mean_regret,std_error,mean_court_count,mean_total_subsidy,mean_offline_loss\n";
  for (const auto& r : rows) {
    const RegretReport& rep = r.report;
    out << r.policy << ',' << r.horizon << ',' << format_number(finite_or_throw(rep.mean_regret, "regret")) << ','
        << format_number(finite_or_throw(rep.std_error, "regret")) << ','
        << format_number(finite_or_throw(rep.mean_court_count, "regret")) << ','
        << format_number(finite_or_throw(rep.mean_total_subsidy, "regret")) << ','
        << format_number(finite_or_throw(rep.mean_offline_loss, "regret")) << '\n';
  }
}

void write_slopes_csv(std::ostream& out, const std::vector<SlopeRow>& rows) {
  out << "policy,slope,intercept,points\n";
  for (const auto& r : rows) {
    out << r.policy << ',' << format_number(finite_or_throw(r.slope, "slopes")) << ','
        << format_number(finite_or_throw(r.intercept, "slopes")) << ',' << r.points << '\n';
  }
}

void write_kwik_csv(std::ostream& out, const std::vector<KwikRow>& rows) {
  out << "T,n,epsilon,delta,predicted_count,compelled_count,fraction_predictions_within_eps,"
         "max_abs_prediction_error\n";
  for (const auto& r : rows) {
    out << r.horizon << ',' << r.n << ',' << format_number(r.epsilon) << ',' << format_number(r.delta) << ','
        << format_number(finite_or_throw(r.predicted_count, "kwik")) << ','
        << format_number(finite_or_throw(r.compelled_count, "kwik")) << ','
        << format_number(finite_or_throw(r.fraction_within_eps, "kwik")) << ','
        << format_number(finite_or_throw(r.max_abs_prediction_error, "kwik")) << '\n';
  }
}

void write_ledger_line(std::ostream& out, const std::string& policy, std::int64_t horizon,
                       std::int64_t replication, const RunLedger& ledger) {
  using nlohmann::json;
  json records = json::array();
  for (const auto& r : ledger.records) {
    json x = nullptr;
    if (!r.features.is_singleton()) {
      const auto& c = r.features.coords();
      x = std::vector<double>(c.data(), c.data() + c.size());
    }
    records.push_back(json{{"t", r.t},
                           {"x", x},
                           {"cost", r.cost},
                           {"subsidy", r.subsidy},
                           {"compelled", r.compelled},
                           {"d", r.court ? 1 : 0},
                           {"applied_decision", r.applied_decision},
                           {"settlement_decision", r.settlement_decision},
                           {"true_value", r.true_value},
                           {"squared_error", r.squared_error},
                           {"court_cost_incurred", r.court_cost_incurred},
                           {"pre_step_err_bound", r.pre_step_err_bound},
                           {"m_before", r.m_before}});
  }
  json line{{"policy", policy},
            {"T", horizon},
            {"replication", replication},
            {"seed", ledger.seed},
            {"config_digest", ledger.config_digest},
            {"total_loss", ledger.total_loss},
            {"court_count", ledger.court_count},
            {"total_subsidy_paid", ledger.total_subsidy_paid},
            {"records", std::move(records)}};
  out << line.dump() << '\n';
}

ExperimentResult run_experiment(const ExperimentSpec& spec) {
  validate(spec);
  ensure_directory(spec.output_dir);
  ExperimentResult result;

  std::ofstream ledger_file;
  if (spec.ledgers) {
    const auto path = spec.output_dir / "ledgers.jsonl";
    ledger_file = open_output(path);
    result.files.push_back(path);
  }
  result.regret = regret_sweep(spec, spec.ledgers ? &ledger_file : nullptr);
  result.slopes = fit_slopes(result.regret);

  if (spec.emit_csv) {
    const auto regret_path = spec.output_dir / "regret.csv";
    const auto slopes_path = spec.output_dir / "slopes.csv";
    auto regret_out = open_output(regret_path);
    write_regret_csv(regret_out, result.regret);
    auto slopes_out = open_output(slopes_path);
    write_slopes_csv(slopes_out, result.slopes);
    result.files.push_back(regret_path);
    result.files.push_back(slopes_path);
  }
  if (spec.emit_json) {
    using nlohmann::json;
    json doc;
    doc["config_digest"] = config_digest(spec);
    doc["regret"] = json::array();
    for (const auto& r : result.regret) {
      doc["regret"].push_back(json{{"policy", r.policy},
                                   {"T", r.horizon},
                                   {"mean_regret", r.report.mean_regret},
                                   {"std_error", r.report.std_error},
                                   {"replications", r.report.replications},
                                   {"mean_online_loss", r.report.mean_online_loss},
                                   {"mean_offline_loss", r.report.mean_offline_loss},
                                   {"mean_court_count", r.report.mean_court_count},
                                   {"mean_total_subsidy", r.report.mean_total_subsidy}});
    }
    doc["slopes"] = json::array();
    for (const auto& s : result.slopes) {
      doc["slopes"].push_back(
          json{{"policy", s.policy}, {"slope", s.slope}, {"intercept", s.intercept}, {"points", s.points}});
    }
    const auto path = spec.output_dir / "regret.json";
    auto out = open_output(path);
    out << doc.dump(2) << '\n';
    result.files.push_back(path);
  }
  return result;
}

std::vector<KwikRow> kwik_rows(const ExperimentSpec& spec) {
  validate(spec);
  std::vector<KwikRow> rows;
  bool any = false;
  for (std::size_t p = 0; p < spec.policies.size(); ++p) {
    if (spec.policies[p].kind != PolicyKind::Kwik) continue;
    any = true;
    for (const std::int64_t horizon : spec.horizons) {
      const RunConfig config = make_run_config(spec, p, horizon);
      const auto& kwik = std::get<KwikPolicy>(config.policy);

      struct Tally {
        std::int64_t predicted = 0;
        std::int64_t compelled = 0;
        std::int64_t within = 0;
        double max_error = 0.0;
      };
      std::vector<Tally> tallies(static_cast<std::size_t>(spec.replications));
      parallel_for(spec.replications, [&](std::int64_t r) {
        RunConfig rc = config;
        rc.seed = replication_seed(config.seed, static_cast<std::uint64_t>(r));
        const RunLedger ledger = run(rc);
        Tally& tally = tallies[static_cast<std::size_t>(r)];
        for (const auto& rec : ledger.records) {
          if (rec.compelled) {
            ++tally.compelled;
            continue;
          }
          ++tally.predicted;
          const double err = std::abs(rec.settlement_decision - rec.true_value);
          if (err <= kwik.epsilon) ++tally.within;
          tally.max_error = std::max(tally.max_error, err);
        }
      });

      KwikRow row;
      row.horizon = horizon;
      row.n = spec.cases.feature_dimension();
      row.epsilon = kwik.epsilon;
      row.delta = kwik.delta;
      std::int64_t predicted = 0, compelled = 0, within = 0;
      for (const auto& t : tallies) {
        predicted += t.predicted;
        compelled += t.compelled;
        within += t.within;
        row.max_abs_prediction_error = std::max(row.max_abs_prediction_error, t.max_error);
      }
      const double reps = static_cast<double>(spec.replications);
      row.predicted_count = static_cast<double>(predicted) / reps;
      row.compelled_count = static_cast<double>(compelled) / reps;
      row.fraction_within_eps =
          predicted > 0 ? static_cast<double>(within) / static_cast<double>(predicted) : 1.0;
      rows.push_back(row);
    }
  }
  if (!any) throw ConfigError("policies", "kwik report needs at least one kwik policy");
  return rows;
}

std::vector<KwikRow> kwik_report(const ExperimentSpec& spec) {
  std::vector<KwikRow> rows = kwik_rows(spec);
  ensure_directory(spec.output_dir);
  auto out = open_output(spec.output_dir / "kwik.csv");
  write_kwik_csv(out, rows);
  return rows;
}

}  // namespace courtlearn
