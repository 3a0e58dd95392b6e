#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "fedback/engine.hpp"

namespace fedback {

using SamplerRng = std::mt19937_64;

/// ceil(rate * N) distinct client indices drawn uniformly without
/// replacement, returned in ascending order.
std::vector<std::size_t> sample_uniform(std::size_t clients, double rate, SamplerRng& rng);

/// Participation rate a random-sampling baseline uses: the mean target load.
double sampling_rate(const RunConfig& cfg);

/// Consensus-ADMM round with uniformly sampled participants. Same update,
/// freeze and full-cache aggregation rules as run_round.
RoundTrace fedadmm_round(ServerState& server, std::vector<ClientState>& clients,
                         std::span<const Objective> objectives, const RunConfig& cfg,
                         SamplerRng& rng, std::int64_t cumulative_before = 0);

/// `steps` full-gradient steps on f_i from omega.
Vector fedavg_local(const Objective& obj, const Vector& omega, int steps, double lr);

/// argmin f_i(theta) + mu/2 |theta - omega|^2 to gradient residual <= eps.
Vector fedprox_local(const Objective& obj, const Vector& omega, double mu, double eps);

/// FedAvg/FedProx round: sampled clients solve locally from omega, the
/// server takes the plain mean of the participants' parameters. Duals stay
/// zero.
RoundTrace fedavg_round(ServerState& server, std::vector<ClientState>& clients,
                        std::span<const Objective> objectives, const RunConfig& cfg,
                        SamplerRng& rng, std::int64_t cumulative_before = 0);
RoundTrace fedprox_round(ServerState& server, std::vector<ClientState>& clients,
                         std::span<const Objective> objectives, const RunConfig& cfg,
                         SamplerRng& rng, std::int64_t cumulative_before = 0);

}  // namespace fedback
