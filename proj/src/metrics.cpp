#include "fedback/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <json.hpp>

#include "fedback/errors.hpp"

namespace fedback {

namespace {

// Identity residuals are exact up to rounding in the delta/load recursions.
constexpr double kIdentitySlack = 1e-9;
// Bounds are compared with a little room for accumulated rounding in delta.
constexpr double kBoundSlack = 1e-9;

}  // namespace

std::optional<std::int64_t> events_to_target(const Trace& trace, TargetMetric metric, double target) {
  require(!trace.empty(), "events_to_target needs a nonempty trace");
  for (const RoundTrace& r : trace) {
    double value = r.grad_norm_global;
    if (metric == TargetMetric::loss) {
      if (!r.loss_gap) throw ContractViolation("trace carries no loss gap (optimum unknown)");
      value = *r.loss_gap;
    }
    if (value <= target) return r.cumulative_events;
  }
  return std::nullopt;
}

double realized_rate(const Trace& trace, std::size_t client) {
  require(!trace.empty(), "realized_rate needs a nonempty trace");
  std::int64_t hits = 0;
  for (const RoundTrace& r : trace) {
    hits += std::binary_search(r.selected.begin(), r.selected.end(), client) ? 1 : 0;
  }
  return static_cast<double>(hits) / static_cast<double>(trace.size());
}

std::int64_t longest_quiet_stretch(const Trace& trace, std::size_t client, std::int64_t from_round) {
  std::int64_t longest = 0;
  std::int64_t current = 0;
  for (const RoundTrace& r : trace) {
    if (r.round < from_round) continue;
    if (std::binary_search(r.selected.begin(), r.selected.end(), client)) {
      current = 0;
    } else {
      longest = std::max(longest, ++current);
    }
  }
  return longest;
}

double loss_step_deviation(const Trace& trace, std::size_t window) {
  require(window >= 2, "loss_step_deviation needs a window of at least two rounds");
  require(trace.size() > window, "trace is shorter than the deviation window");
  std::vector<double> steps;
  for (std::size_t k = trace.size() - window; k < trace.size(); ++k) {
    steps.push_back(trace[k].f_omega - trace[k - 1].f_omega);
  }
  double mean = 0.0;
  for (double s : steps) mean += s;
  mean /= static_cast<double>(steps.size());
  double ss = 0.0;
  for (double s : steps) ss += (s - mean) * (s - mean);
  return std::sqrt(ss / static_cast<double>(steps.size() - 1));
}

ExperimentReport report(const Trace& trace, const RunConfig& cfg, const ReportOptions& options) {
  ExperimentReport out;
  out.rounds = static_cast<std::int64_t>(trace.size());
  if (trace.empty()) return out;

  const std::size_t clients = cfg.clients;
  out.total_events = trace.back().cumulative_events;
  if (trace.front().loss_gap || options.metric == TargetMetric::grad_norm) {
    out.events_to_target = events_to_target(trace, options.metric, options.target);
  }
  out.realized_rates.resize(clients);
  for (std::size_t i = 0; i < clients; ++i) out.realized_rates[i] = realized_rate(trace, i);
  double sum = 0.0;
  for (double r : out.realized_rates) sum += r;
  out.network_rate = sum / static_cast<double>(clients);

  const RoundTrace& last = trace.back();
  out.final_residuals = {last.grad_norm_global, last.lagrangian, last.F_theta, last.f_omega};

  const bool has_controller = cfg.algorithm == Algorithm::fedback &&
                              std::all_of(trace.begin(), trace.end(), [&](const RoundTrace& r) {
                                return r.per_client.size() == clients;
                              });
  if (!has_controller) return out;

  double worst_identity = 0.0;
  std::int64_t delta_violations = 0;
  std::int64_t rate_violations = 0;
  std::int64_t load_violations = 0;
  out.delta_plus.assign(clients, 0.0);
  for (std::size_t i = 0; i < clients; ++i) {
    for (const RoundTrace& r : trace) out.delta_plus[i] = std::max(out.delta_plus[i], r.per_client[i].distance);
    const double target = cfg.target_for(i);
    const ThresholdBounds bounds = threshold_bounds(cfg.delta0, cfg.gains, out.delta_plus[i]);
    const RateBounds rate = rate_bounds(cfg.delta0, cfg.gains, out.delta_plus[i]);
    if (!bounds.contains(cfg.delta0, kBoundSlack)) ++delta_violations;

    std::int64_t events = 0;
    for (std::size_t t = 0; t < trace.size(); ++t) {
      const ClientRecord& rec = trace[t].per_client[i];
      events += rec.event;
      const auto rounds = static_cast<std::int64_t>(t + 1);
      if (!cfg.freeze_thresholds) {
        worst_identity = std::max(worst_identity, identity_residual(events, rounds, target, cfg.delta0,
                                                                    rec.delta, cfg.load0, rec.load,
                                                                    cfg.gains));
        const double deviation = static_cast<double>(events) / static_cast<double>(rounds) - target;
        if (deviation < rate.c1 / static_cast<double>(rounds) - kBoundSlack ||
            deviation > rate.c2 / static_cast<double>(rounds) + kBoundSlack) {
          ++rate_violations;
        }
      }
      if (!bounds.contains(rec.delta, kBoundSlack)) ++delta_violations;
      if (!(rec.load >= 0.0 && rec.load <= 1.0)) ++load_violations;
    }
  }
  if (!cfg.freeze_thresholds) {
    out.identity_max_residual = worst_identity;
    out.rate_bound_violations = rate_violations;
  }
  out.delta_bound_violations = delta_violations;
  out.load_range_violations = load_violations;
  return out;
}

std::string to_json(const ExperimentReport& r, int indent) {
  using nlohmann::json;
  json j;
  j["rounds"] = r.rounds;
  j["total_events"] = r.total_events;
  j["events_to_target"] = r.events_to_target ? json(*r.events_to_target) : json(nullptr);
  j["network_rate"] = r.network_rate;
  j["realized_rates"] = r.realized_rates;
  j["identity_max_residual"] = r.identity_max_residual ? json(*r.identity_max_residual) : json(nullptr);
  j["delta_bound_violations"] = r.delta_bound_violations ? json(*r.delta_bound_violations) : json(nullptr);
  j["rate_bound_violations"] = r.rate_bound_violations ? json(*r.rate_bound_violations) : json(nullptr);
  j["load_range_violations"] = r.load_range_violations ? json(*r.load_range_violations) : json(nullptr);
  j["delta_plus"] = r.delta_plus;
  j["final_residuals"] = {{"grad_norm_global", r.final_residuals.grad_norm_global},
                          {"lagrangian", r.final_residuals.lagrangian},
                          {"F_theta", r.final_residuals.F},
                          {"f_omega", r.final_residuals.f_at_omega}};
  return j.dump(indent);
}

}  // namespace fedback
