#include "fedback/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "fedback/errors.hpp"

namespace fedback {

namespace {

template <typename LocalSolve>
RoundTrace participant_mean_round(ServerState& server, std::vector<ClientState>& clients,
                                  std::span<const Objective> objectives, const RunConfig& cfg,
                                  SamplerRng& rng, std::int64_t cumulative_before,
                                  LocalSolve&& solve) {
  const std::int64_t k = server.round;
  std::vector<std::size_t> selected = sample_uniform(clients.size(), sampling_rate(cfg), rng);

  Vector sum = Vector::Zero(server.omega.size());
  for (std::size_t i : selected) {
    ClientState& c = clients[i];
    c.theta = solve(objectives[i], server.omega, k);
    c.lambda.setZero();
    c.z_prev_local = c.theta;
    server.z_cache[i] = c.theta;
    sum += c.theta;
  }
  server.omega = sum / static_cast<double>(selected.size());
  ++server.round;
  return make_round_record(k, std::move(selected), cumulative_before, server.omega, clients,
                           objectives, cfg.rho);
}

}  // namespace

std::vector<std::size_t> sample_uniform(std::size_t clients, double rate, SamplerRng& rng) {
  require(clients >= 1, "sampling needs at least one client");
  require(rate > 0.0 && rate <= 1.0, "sampling rate must lie in (0, 1]");
  // The epsilon keeps products like 0.07 * 100 = 7.000000000000001 at 7.
  auto count = static_cast<std::size_t>(std::ceil(rate * static_cast<double>(clients) - 1e-9));
  count = std::clamp<std::size_t>(count, 1, clients);

  std::vector<std::size_t> pool(clients);
  std::iota(pool.begin(), pool.end(), 0);
  for (std::size_t j = 0; j < count; ++j) {
    std::uniform_int_distribution<std::size_t> pick(j, clients - 1);
    std::swap(pool[j], pool[pick(rng)]);
  }
  pool.resize(count);
  std::sort(pool.begin(), pool.end());
  return pool;
}

double sampling_rate(const RunConfig& cfg) {
  require(!cfg.targets.empty(), "no target load configured");
  return std::accumulate(cfg.targets.begin(), cfg.targets.end(), 0.0) /
         static_cast<double>(cfg.targets.size());
}

RoundTrace fedadmm_round(ServerState& server, std::vector<ClientState>& clients,
                         std::span<const Objective> objectives, const RunConfig& cfg,
                         SamplerRng& rng, std::int64_t cumulative_before) {
  require(clients.size() == objectives.size() && clients.size() == server.z_cache.size(),
          "round inputs have inconsistent client counts");
  const std::int64_t k = server.round;
  std::vector<std::size_t> selected = sample_uniform(clients.size(), sampling_rate(cfg), rng);
  apply_consensus_updates(server, clients, objectives, selected, cfg.rho,
                          tolerance_at_round(cfg.epsilon0, k), cfg.threads);
  return make_round_record(k, std::move(selected), cumulative_before, server.omega, clients,
                           objectives, cfg.rho);
}

Vector fedavg_local(const Objective& obj, const Vector& omega, int steps, double lr) {
  require(steps >= 1, "fedavg needs at least one local step");
  require(lr > 0.0, "fedavg learning rate must be positive");
  Vector theta = omega;
  for (int s = 0; s < steps; ++s) theta -= lr * gradient(obj, theta);
  return theta;
}

Vector fedprox_local(const Objective& obj, const Vector& omega, double mu, double eps) {
  require(mu > 0.0, "fedprox mu must be positive");
  ProxProblem prob;
  prob.anchor = omega;
  prob.rho = mu;
  prob.tolerance = eps;
  prob.warm_start = omega;
  return prox_solve(obj, prob);
}

RoundTrace fedavg_round(ServerState& server, std::vector<ClientState>& clients,
                        std::span<const Objective> objectives, const RunConfig& cfg,
                        SamplerRng& rng, std::int64_t cumulative_before) {
  return participant_mean_round(
      server, clients, objectives, cfg, rng, cumulative_before,
      [&](const Objective& obj, const Vector& omega, std::int64_t) {
        const double r = obj.smoothness();
        const double lr = cfg.fedavg_lr.value_or(r > 0.0 ? 1.0 / r : 1.0);
        return fedavg_local(obj, omega, cfg.fedavg_steps, lr);
      });
}

RoundTrace fedprox_round(ServerState& server, std::vector<ClientState>& clients,
                         std::span<const Objective> objectives, const RunConfig& cfg,
                         SamplerRng& rng, std::int64_t cumulative_before) {
  const double mu = cfg.fedprox_mu.value_or(cfg.rho);
  return participant_mean_round(
      server, clients, objectives, cfg, rng, cumulative_before,
      [&](const Objective& obj, const Vector& omega, std::int64_t k) {
        return fedprox_local(obj, omega, mu, tolerance_at_round(cfg.epsilon0, k));
      });
}

}  // namespace fedback
