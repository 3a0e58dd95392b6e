#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fedback/controller.hpp"
#include "fedback/data.hpp"
#include "fedback/objectives.hpp"
#include "fedback/trace.hpp"
#include "fedback/types.hpp"

namespace fedback {

enum class Algorithm { fedback, fedadmm, fedavg, fedprox };

/// How the client datasets are produced.
struct DataSpec {
  Task task = Task::regression;
  std::size_t samples = 2000;
  std::size_t features = 10;
  int classes = 10;
  SyntheticOptions synthetic;
  /// Derived from RunConfig::seed when absent.
  std::optional<std::uint64_t> seed;
  /// Load a delimited file instead of generating data.
  std::optional<std::string> csv_path;
};

struct RunConfig {
  std::size_t clients = 100;
  std::int64_t rounds = 2000;
  double rho = 1.0;
  /// Replace rho by the smallest value the federation admits (max_i 3 n_i r_i / n).
  bool auto_rho = false;
  ControllerGains gains;
  /// Target load per client; a single entry applies to every client.
  std::vector<double> targets{0.1};
  double epsilon0 = 1e-3;
  std::uint64_t seed = 0;
  Algorithm algorithm = Algorithm::fedback;
  PartitionSpec partition;
  /// Derived from RunConfig::seed when absent.
  std::optional<std::uint64_t> partition_seed;
  DataSpec data;

  double delta0 = 0.0;
  double load0 = 0.0;
  /// Initial consensus point; empty means the zero vector.
  std::vector<double> z0;
  DistanceMetric metric = DistanceMetric::euclidean;
  bool freeze_thresholds = false;
  bool validate_rho = true;

  int fedavg_steps = 10;
  /// Defaults to 1 / r_i per client.
  std::optional<double> fedavg_lr;
  /// Defaults to rho.
  std::optional<double> fedprox_mu;

  /// Worker threads for client updates; results are committed in index order.
  int threads = 1;

  double target_for(std::size_t client) const;
  std::uint64_t data_seed() const;
  std::uint64_t effective_partition_seed() const;
  std::uint64_t sampler_seed() const;

  /// Structural checks (sizes, ranges, gains). Returns warnings for legal but
  /// risky settings such as a zero target load. Throws ValidationError.
  std::vector<std::string> validate() const;
};

/// Local primal/dual pair and the last uploaded z = theta + lambda.
struct ClientState {
  Vector theta;
  Vector lambda;
  Vector z_prev_local;

  bool operator==(const ClientState& other) const;
};

/// Global parameter and the server's cache of each client's last upload.
struct ServerState {
  Vector omega;
  std::vector<Vector> z_cache;
  std::int64_t round = 0;
};

/// lambda' = lambda + theta - omega, theta' = prox(anchor = omega - lambda',
/// warm start omega), z' = lambda' + theta'.
ClientState client_update(const ClientState& state, const Objective& obj, const Vector& omega,
                          double rho, double eps_k, ProxMethod method = ProxMethod::automatic);

/// Mean of the cache, summed in index order.
Vector aggregate(std::span<const Vector> z_cache);

/// rho >= max_i 3 n_i r_i / n
bool validate_rho(double rho, std::span<const Objective> objectives);
double rho_lower_bound(std::span<const Objective> objectives);

struct StationarityResiduals {
  double grad_norm_global = 0.0;  ///< |sum_i grad f_i(omega)|
  double lagrangian = 0.0;        ///< augmented Lagrangian at (omega, Theta, Lambda)
  double F = 0.0;                 ///< sum_i f_i(theta_i)
  double f_at_omega = 0.0;        ///< sum_i f_i(omega)

  bool operator==(const StationarityResiduals&) const = default;
};

StationarityResiduals stationarity_residuals(const Vector& omega, std::span<const ClientState> clients,
                                             std::span<const Objective> objectives, double rho);

/// Runs the selected clients' updates (possibly on `threads` workers), commits
/// them in index order and refreshes their cache entries, then recomputes
/// omega from the full cache and advances the round counter.
void apply_consensus_updates(ServerState& server, std::vector<ClientState>& clients,
                             std::span<const Objective> objectives,
                             const std::vector<std::size_t>& selected, double rho, double eps_k,
                             int threads);

/// Trace record for the state after a round.
RoundTrace make_round_record(std::int64_t round, std::vector<std::size_t> selected,
                             std::int64_t cumulative_before, const Vector& omega,
                             std::span<const ClientState> clients,
                             std::span<const Objective> objectives, double rho);

/// One event-triggered round: select, update participants, freeze the rest,
/// aggregate the whole cache.
RoundTrace run_round(ServerState& server, std::vector<ClientState>& clients,
                     std::vector<ClientController>& controllers,
                     std::span<const Objective> objectives, const RunConfig& cfg,
                     std::int64_t cumulative_before = 0);

}  // namespace fedback
