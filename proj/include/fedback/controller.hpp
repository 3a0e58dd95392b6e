#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "fedback/types.hpp"

namespace fedback {

/// Shared integral-controller gains. K > 0 and 0 < alpha < 1.
struct ControllerGains {
  double gain = 2.0;
  double filter_constant = 0.9;

  void validate() const;
};

enum class DistanceMetric { euclidean, infinity };

/// Per-client participation controller state.
///
/// `delta` is the trigger threshold, `load` the low-pass filtered participation
/// indicator and `target` the desired long-run participation fraction. The
/// initial values are kept so the closed-loop identity can be checked later.
struct ClientController {
  double delta = 0.0;
  double load = 0.0;
  double target = 0.1;
  double delta0 = 0.0;
  double load0 = 0.0;
  std::int64_t cumulative_events = 0;
  std::int64_t rounds_elapsed = 0;
  std::optional<std::int64_t> last_event_round;

  static ClientController make(double target, double delta0 = 0.0, double load0 = 0.0);
};

double distance(const Vector& a, const Vector& b, DistanceMetric metric = DistanceMetric::euclidean);

/// 1 iff |omega - z_prev| >= delta. Always fires for delta <= 0.
bool trigger(const Vector& omega, const Vector& z_prev, double delta,
             DistanceMetric metric = DistanceMetric::euclidean);

/// (1 - alpha) load + alpha event
double filter_update(double load, bool event, double alpha);

/// delta + K (load - target), where load is the value entering the round.
double threshold_update(double delta, double load, double target, double gain);

struct SelectionOptions {
  DistanceMetric metric = DistanceMetric::euclidean;
  /// Keep every delta at its current value (controller bypass).
  bool freeze_thresholds = false;
};

struct Selection {
  std::vector<std::size_t> selected;
  std::vector<std::uint8_t> events;
  std::vector<double> distances;
};

/// Evaluates the trigger for every client in index order, then advances each
/// client's load filter and threshold. Mutates `controllers` in place.
Selection select_clients(std::span<ClientController> controllers, const Vector& omega,
                         std::span<const Vector> z_prev_cache, const ControllerGains& gains,
                         const SelectionOptions& options = {});

/// |(1/T) sum S - target - (delta_T - delta_0)/(K T) - (L_T - L_0)/(alpha T)|.
/// Zero in exact arithmetic for any trajectory of the closed loop.
double identity_residual(std::int64_t event_sum, std::int64_t rounds, double target, double delta0,
                         double delta_t, double load0, double load_t, const ControllerGains& gains);

/// identity_residual for a controller that has completed exactly `rounds` rounds.
double participation_identity_residual(const ClientController& controller,
                                       const ControllerGains& gains, std::int64_t rounds);

struct ThresholdBounds {
  double lower = 0.0;
  double upper = 0.0;

  bool contains(double delta, double slack = 0.0) const {
    return delta >= lower - slack && delta <= upper + slack;
  }
};

/// Range every threshold stays in, given a supremum `delta_plus` of the
/// trigger distances seen on the trajectory.
ThresholdBounds threshold_bounds(double delta0, const ControllerGains& gains, double delta_plus);

/// Constants (c1, c2) with c1/T <= rate - target <= c2/T.
struct RateBounds {
  double c1 = 0.0;
  double c2 = 0.0;

  double envelope() const;
};

RateBounds rate_bounds(double delta0, const ControllerGains& gains, double delta_plus);

/// 1 iff the client fired at least once in its last `window` rounds.
bool liveness_check(const ClientController& controller, std::int64_t window);

}  // namespace fedback
