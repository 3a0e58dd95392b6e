#include "fedback/controller.hpp"

#include <algorithm>
#include <cmath>

#include "fedback/errors.hpp"

namespace fedback {

void ControllerGains::validate() const {
  if (!(gain > 0.0)) throw ContractViolation("controller gain K must be positive");
  if (!(filter_constant > 0.0 && filter_constant < 1.0)) {
    throw ContractViolation("filter constant alpha must lie in (0, 1)");
  }
}

ClientController ClientController::make(double target, double delta0, double load0) {
  require(target >= 0.0 && target <= 1.0, "target load must lie in [0, 1]");
  require(load0 >= 0.0 && load0 <= 1.0, "initial load must lie in [0, 1]");
  ClientController c;
  c.target = target;
  c.delta = delta0;
  c.delta0 = delta0;
  c.load = load0;
  c.load0 = load0;
  return c;
}

double distance(const Vector& a, const Vector& b, DistanceMetric metric) {
  require(a.size() == b.size(), "distance between vectors of different dimension");
  if (a.size() == 0) return 0.0;
  return metric == DistanceMetric::euclidean ? (a - b).norm() : (a - b).lpNorm<Eigen::Infinity>();
}

bool trigger(const Vector& omega, const Vector& z_prev, double delta, DistanceMetric metric) {
  return distance(omega, z_prev, metric) >= delta;
}

double filter_update(double load, bool event, double alpha) {
  return (1.0 - alpha) * load + alpha * (event ? 1.0 : 0.0);
}

double threshold_update(double delta, double load, double target, double gain) {
  return delta + gain * (load - target);
}

Selection select_clients(std::span<ClientController> controllers, const Vector& omega,
                         std::span<const Vector> z_prev_cache, const ControllerGains& gains,
                         const SelectionOptions& options) {
  require(controllers.size() == z_prev_cache.size(), "controller and cache sizes differ");
  Selection out;
  out.events.resize(controllers.size());
  out.distances.resize(controllers.size());
  for (std::size_t i = 0; i < controllers.size(); ++i) {
    ClientController& c = controllers[i];
    const double dist = distance(omega, z_prev_cache[i], options.metric);
    const bool fired = dist >= c.delta;
    out.distances[i] = dist;
    out.events[i] = fired ? 1 : 0;
    if (fired) out.selected.push_back(i);

    const double load_in = c.load;
    c.load = filter_update(load_in, fired, gains.filter_constant);
    if (!options.freeze_thresholds) {
      c.delta = threshold_update(c.delta, load_in, c.target, gains.gain);
    }
    if (fired) {
      ++c.cumulative_events;
      c.last_event_round = c.rounds_elapsed;
    }
    ++c.rounds_elapsed;
  }
  return out;
}

double identity_residual(std::int64_t event_sum, std::int64_t rounds, double target, double delta0,
                         double delta_t, double load0, double load_t, const ControllerGains& gains) {
  require(rounds > 0, "identity residual needs at least one completed round");
  const double t = static_cast<double>(rounds);
  const double rate = static_cast<double>(event_sum) / t;
  const double predicted = target + (delta_t - delta0) / (gains.gain * t) +
                           (load_t - load0) / (gains.filter_constant * t);
  return std::abs(rate - predicted);
}

double participation_identity_residual(const ClientController& controller,
                                       const ControllerGains& gains, std::int64_t rounds) {
  require(rounds > 0, "identity residual needs T >= 1");
  require(rounds == controller.rounds_elapsed, "controller has not completed exactly T rounds");
  return identity_residual(controller.cumulative_events, rounds, controller.target,
                           controller.delta0, controller.delta, controller.load0, controller.load,
                           gains);
}

ThresholdBounds threshold_bounds(double delta0, const ControllerGains& gains, double delta_plus) {
  require(delta_plus >= 0.0, "delta_plus must be nonnegative");
  const double k = gains.gain;
  const double a = gains.filter_constant;
  const double swing = k * (1.0 + a) / a;
  return {std::min(delta0 - k / a, -swing), std::max(delta_plus + swing, delta0 + k / a)};
}

RateBounds rate_bounds(double delta0, const ControllerGains& gains, double delta_plus) {
  const double k = gains.gain;
  const double a = gains.filter_constant;
  const double tail = (2.0 + a) / a;
  return {std::min(-2.0 / a, -delta0 / k - tail), std::max((delta_plus - delta0) / k + tail, tail)};
}

double RateBounds::envelope() const { return std::max(std::abs(c1), c2); }

bool liveness_check(const ClientController& controller, std::int64_t window) {
  require(window >= 1, "liveness window must be at least one round");
  require(controller.rounds_elapsed >= window, "run is shorter than the liveness window");
  require(controller.target > 0.0, "liveness is only defined for a positive target load");
  if (!controller.last_event_round) return false;
  return *controller.last_event_round >= controller.rounds_elapsed - window;
}

}  // namespace fedback
