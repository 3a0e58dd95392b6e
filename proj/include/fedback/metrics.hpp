#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fedback/engine.hpp"
#include "fedback/trace.hpp"

namespace fedback {

enum class TargetMetric { loss, grad_norm };

/// Cumulative participation events at the first round whose metric is at or
/// below `target`; nullopt if never reached. The loss metric reads the trace's
/// loss gap and throws ContractViolation when the gap is unknown.
std::optional<std::int64_t> events_to_target(const Trace& trace, TargetMetric metric, double target);

/// Fraction of rounds the client was selected in.
double realized_rate(const Trace& trace, std::size_t client);

/// Longest stretch of consecutive rounds, at or after `from_round`, in which
/// the client was not selected.
std::int64_t longest_quiet_stretch(const Trace& trace, std::size_t client, std::int64_t from_round = 0);

/// Sample standard deviation of f_omega^k - f_omega^{k-1} over the last
/// `window` rounds.
double loss_step_deviation(const Trace& trace, std::size_t window);

struct ReportOptions {
  TargetMetric metric = TargetMetric::loss;
  double target = 1e-3;
};

struct ExperimentReport {
  std::int64_t rounds = 0;
  std::int64_t total_events = 0;
  std::optional<std::int64_t> events_to_target;
  std::vector<double> realized_rates;
  double network_rate = 0.0;

  // Controller diagnostics; absent for runs without controller telemetry.
  std::optional<double> identity_max_residual;
  std::optional<std::int64_t> delta_bound_violations;
  std::optional<std::int64_t> rate_bound_violations;
  std::optional<std::int64_t> load_range_violations;
  /// Per-client maximum trigger distance over the run.
  std::vector<double> delta_plus;

  StationarityResiduals final_residuals;

  bool operator==(const ExperimentReport&) const = default;
};

/// Reduces a finished trace. Controller checks use the run's gains, targets
/// and initial (delta0, load0); every prefix T of the run is checked against
/// the closed-loop identity and the rate envelope.
ExperimentReport report(const Trace& trace, const RunConfig& cfg, const ReportOptions& options = {});

std::string to_json(const ExperimentReport& report, int indent = 2);

}  // namespace fedback
