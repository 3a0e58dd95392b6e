#pragma once

#include <optional>
#include <span>
#include <vector>

#include "fedback/baselines.hpp"
#include "fedback/data.hpp"
#include "fedback/engine.hpp"

namespace fedback {

struct Federation {
  std::vector<Objective> objectives;
  Partition partition;
  /// Centralized minimizer of sum_i f_i, available for quadratic federations.
  std::optional<Vector> optimum;
  std::optional<double> optimal_loss;
};

/// argmin sum_i f_i by the normal equations; nullopt for non-quadratic or
/// singular federations.
std::optional<Vector> centralized_optimum(std::span<const Objective> objectives);

/// Objectives over the given client index lists. Regression data yields
/// quadratic objectives, classification data logistic ones.
Federation federate(const Dataset& data, Task task, const Partition& partition);

/// Generates (or loads) the dataset described by cfg.data and partitions it.
Federation build_federation(const RunConfig& cfg);

/// Owns every piece of run state and advances it one round at a time.
///
/// Initial state: theta_i = z0, lambda_i = 0, z_cache[i] = z0, omega = z0 and
/// each controller at (delta0, load0).
class Simulation {
 public:
  Simulation(RunConfig cfg, std::vector<Objective> objectives,
             std::optional<double> optimal_loss = std::nullopt);

  RoundTrace step();
  /// Runs the rounds remaining up to cfg.rounds.
  Trace run();

  const RunConfig& config() const noexcept { return cfg_; }
  const ServerState& server() const noexcept { return server_; }
  const std::vector<ClientState>& clients() const noexcept { return clients_; }
  const std::vector<ClientController>& controllers() const noexcept { return controllers_; }
  std::span<const Objective> objectives() const noexcept { return objectives_; }
  std::int64_t cumulative_events() const noexcept { return cumulative_events_; }

 private:
  RunConfig cfg_;
  std::vector<Objective> objectives_;
  std::optional<double> optimal_loss_;
  ServerState server_;
  std::vector<ClientState> clients_;
  std::vector<ClientController> controllers_;
  SamplerRng sampler_;
  std::int64_t cumulative_events_ = 0;
};

/// The convex reference workload: 100 clients holding least-squares losses on
/// 2000 ten-dimensional samples from 10 Gaussian clusters with cluster-specific
/// planted parameters, split by a Dirichlet(0.5) partition over cluster labels.
/// K = 2, alpha = 0.9 and rho at the smallest admissible value.
RunConfig quadratic_benchmark(std::uint64_t seed, double target, std::int64_t rounds);

/// cfg with rho resolved against the federation when cfg.auto_rho is set.
RunConfig resolve_rho(RunConfig cfg, const Federation& federation);

/// Validates cfg (including rho against the federation when cfg.validate_rho
/// is set), then runs cfg.rounds rounds. Throws ValidationError before any
/// round runs.
Trace run_experiment(const RunConfig& cfg);
Trace run_experiment(const RunConfig& cfg, const Federation& federation);

}  // namespace fedback
