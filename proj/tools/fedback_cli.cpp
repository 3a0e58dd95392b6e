#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "fedback/config.hpp"
#include "fedback/errors.hpp"
#include "fedback/experiment.hpp"
#include "fedback/metrics.hpp"
#include "fedback/trace.hpp"

namespace fs = std::filesystem;
using namespace fedback;

namespace {

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> algorithm;
  std::optional<double> target;
  std::optional<std::int64_t> rounds;
  std::optional<bool> per_client;
};

void add_overrides(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--seed", o.seed, "RNG seed");
  cmd->add_option("--algorithm", o.algorithm, "fedback | fedadmm | fedavg | fedprox");
  cmd->add_option("--target", o.target, "target load for every client");
  cmd->add_option("--rounds", o.rounds, "number of rounds");
  cmd->add_flag("--per-client,!--no-per-client", o.per_client, "per-client trace columns");
}

ExperimentConfig load_with(const std::string& path, const Overrides& o) {
  ExperimentConfig ec = path.empty() ? ExperimentConfig{} : load_config(path);
  if (o.seed) ec.run.seed = *o.seed;
  if (o.algorithm) ec.run.algorithm = parse_algorithm(*o.algorithm);
  if (o.target) ec.run.targets = {*o.target};
  if (o.rounds) ec.run.rounds = *o.rounds;
  if (o.per_client) ec.per_client_columns = *o.per_client;
  return ec;
}

void print_warnings(const RunConfig& cfg) {
  for (const auto& w : cfg.validate()) std::cerr << "warning: " << w << '\n';
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot open " + path.string() + " for writing", 0, "");
  out << text << '\n';
}

struct Outcome {
  RunConfig cfg;
  Trace trace;
  ExperimentReport rep;
};

Outcome execute(const ExperimentConfig& ec, const Federation& fed, const fs::path& dir,
                const std::string& stem) {
  Outcome out;
  out.cfg = resolve_rho(ec.run, fed);
  print_warnings(out.cfg);
  out.trace = run_experiment(out.cfg, fed);
  out.rep = report(out.trace, out.cfg, ec.report);
  fs::create_directories(dir);
  emit_trace(out.trace, dir / (stem + ".csv"), ec.per_client_columns);
  write_text(dir / (stem + ".report.json"), to_json(out.rep));
  return out;
}

std::string events_text(const ExperimentReport& r) {
  return r.events_to_target ? std::to_string(*r.events_to_target) : std::string("NA");
}

int cmd_run(const std::string& config, const Overrides& o, const std::string& out) {
  const ExperimentConfig ec = load_with(config, o);
  const Federation fed = build_federation(ec.run);
  const Outcome r = execute(ec, fed, out, "trace");
  write_text(fs::path(out) / "config.json", dump_config(ec));
  std::printf("algorithm=%s rounds=%lld rho=%.6g events=%lld events_to_target=%s network_rate=%.4f\n",
              std::string(to_string(r.cfg.algorithm)).c_str(), static_cast<long long>(r.rep.rounds),
              r.cfg.rho, static_cast<long long>(r.rep.total_events), events_text(r.rep).c_str(),
              r.rep.network_rate);
  return 0;
}

int cmd_sweep(const std::string& config, const Overrides& o, const std::vector<double>& targets,
              const std::string& out) {
  ExperimentConfig ec = load_with(config, o);
  const Federation fed = build_federation(ec.run);
  fs::create_directories(out);
  std::ofstream summary(fs::path(out) / "summary.csv");
  summary << "target,algorithm,rho,total_events,events_to_target,network_rate\n";
  std::printf("%8s %12s %16s %12s\n", "target", "events", "events_to_target", "rate");
  for (double t : targets) {
    ec.run.targets = {t};
    char stem[64];
    std::snprintf(stem, sizeof stem, "trace_L%.2f", t);
    const Outcome r = execute(ec, fed, out, stem);
    summary << t << ',' << to_string(r.cfg.algorithm) << ',' << r.cfg.rho << ',' << r.rep.total_events << ','
            << events_text(r.rep) << ',' << r.rep.network_rate << '\n';
    std::printf("%8.2f %12lld %16s %12.4f\n", t, static_cast<long long>(r.rep.total_events),
                events_text(r.rep).c_str(), r.rep.network_rate);
  }
  return 0;
}

int cmd_compare(const std::string& config, Overrides o, const std::string& out) {
  const std::string baseline = *o.algorithm;
  o.algorithm.reset();
  ExperimentConfig ec = load_with(config, o);
  const Federation fed = build_federation(ec.run);
  fs::create_directories(out);
  std::ofstream summary(fs::path(out) / "summary.csv");
  summary << "algorithm,rho,total_events,events_to_target,network_rate,final_f_omega\n";
  for (Algorithm alg : {Algorithm::fedback, parse_algorithm(baseline)}) {
    ec.run.algorithm = alg;
    const Outcome r = execute(ec, fed, out, std::string(to_string(alg)));
    summary << to_string(alg) << ',' << r.cfg.rho << ',' << r.rep.total_events << ',' << events_text(r.rep)
            << ',' << r.rep.network_rate << ',' << r.rep.final_residuals.f_at_omega << '\n';
    std::printf("%-8s events=%lld events_to_target=%s rate=%.4f f(omega)=%.10g\n",
                std::string(to_string(alg)).c_str(), static_cast<long long>(r.rep.total_events),
                events_text(r.rep).c_str(), r.rep.network_rate, r.rep.final_residuals.f_at_omega);
  }
  return 0;
}

int cmd_validate(const std::string& config, const Overrides& o, const std::string& trace_path) {
  const ExperimentConfig ec = load_with(config, o);
  const Trace trace = load_trace(fs::path(trace_path));
  bool ok = true;
  auto check = [&](bool pass, const std::string& what) {
    std::printf("[%s] %s\n", pass ? "PASS" : "FAIL", what.c_str());
    ok = ok && pass;
  };

  std::int64_t sum = 0, previous = 0;
  bool counts = true, monotone = true;
  for (const auto& r : trace) {
    sum += static_cast<std::int64_t>(r.selected_count);
    counts = counts && r.selected.size() == r.selected_count && r.cumulative_events == sum;
    if (!r.per_client.empty()) {
      std::size_t fired = 0;
      for (const auto& c : r.per_client) fired += c.event;
      counts = counts && fired == r.selected_count;
    }
    monotone = monotone && r.cumulative_events >= previous;
    previous = r.cumulative_events;
  }
  check(counts, "selected_count matches the selected set, the events, and the cumulative count");
  check(monotone, "cumulative events are nondecreasing");

  if (trace.empty() || trace.front().per_client.size() != ec.run.clients) {
    std::printf("[SKIP] controller checks need per-client columns for %zu clients\n", ec.run.clients);
    return ok ? 0 : 1;
  }
  const ExperimentReport rep = report(trace, ec.run, ec.report);
  if (rep.identity_max_residual) {
    char buf[128];
    std::snprintf(buf, sizeof buf, "participation identity residual %.3e <= 1e-9", *rep.identity_max_residual);
    check(*rep.identity_max_residual <= 1e-9, buf);
    check(rep.rate_bound_violations == 0,
          "rate envelope holds on every prefix (" + std::to_string(*rep.rate_bound_violations) + " misses)");
  }
  if (rep.delta_bound_violations) {
    check(*rep.delta_bound_violations == 0,
          "thresholds stay inside their bounds (" + std::to_string(*rep.delta_bound_violations) + " violations)");
    check(rep.load_range_violations == 0, "filtered loads stay in [0, 1]");
  }
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Event-triggered consensus ADMM simulator"};
  app.require_subcommand(1);

  std::string config;
  std::string out = "fedback_out";
  std::string trace_path;
  Overrides overrides;
  std::vector<double> targets{0.05, 0.1, 0.15, 0.2, 0.4, 0.6};

  auto* run = app.add_subcommand("run", "run one experiment");
  run->add_option("--config", config, "JSON config file")->check(CLI::ExistingFile);
  run->add_option("--out", out, "output directory");
  add_overrides(run, overrides);

  auto* sweep = app.add_subcommand("sweep", "run a grid over target loads");
  sweep->add_option("--config", config, "JSON config file")->check(CLI::ExistingFile);
  sweep->add_option("--out", out, "output directory");
  sweep->add_option("--targets", targets, "target loads")->delimiter(',');
  add_overrides(sweep, overrides);

  auto* compare = app.add_subcommand("compare", "matched-seed FedBack vs a baseline");
  compare->add_option("--config", config, "JSON config file")->check(CLI::ExistingFile);
  Overrides compare_overrides;
  compare->add_option("--seed", compare_overrides.seed, "RNG seed")->required();
  compare->add_option("--algorithm", compare_overrides.algorithm, "baseline to compare against")->required();
  compare->add_option("--out", out, "output directory")->required();
  compare->add_option("--target", compare_overrides.target, "target load for every client");
  compare->add_option("--rounds", compare_overrides.rounds, "number of rounds");
  compare->add_flag("--per-client,!--no-per-client", compare_overrides.per_client, "per-client trace columns");

  auto* validate = app.add_subcommand("validate", "check invariants on a finished trace");
  validate->add_option("--config", config, "JSON config of the run")->required()->check(CLI::ExistingFile);
  validate->add_option("--trace", trace_path, "trace CSV")->required()->check(CLI::ExistingFile);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) return cmd_run(config, overrides, out);
    if (*sweep) return cmd_sweep(config, overrides, targets, out);
    if (*compare) return cmd_compare(config, compare_overrides, out);
    if (*validate) return cmd_validate(config, overrides, trace_path);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
