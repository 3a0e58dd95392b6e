#include "fedback/engine.hpp"

#include <algorithm>
#include <exception>
#include <thread>

#include "fedback/errors.hpp"

namespace fedback {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Runs fn(j) for j in [0, count) on up to `threads` workers.
template <typename Fn>
void parallel_for(std::size_t count, int threads, Fn&& fn) {
  const std::size_t workers = std::min<std::size_t>(count, static_cast<std::size_t>(std::max(threads, 1)));
  if (workers <= 1) {
    for (std::size_t j = 0; j < count; ++j) fn(j);
    return;
  }
  std::vector<std::exception_ptr> errors(workers);
  {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        try {
          for (std::size_t j = w; j < count; j += workers) fn(j);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace

double RunConfig::target_for(std::size_t client) const {
  return targets.size() == 1 ? targets.front() : targets.at(client);
}

std::uint64_t RunConfig::data_seed() const { return data.seed.value_or(splitmix64(seed ^ 0xda7aULL)); }

std::uint64_t RunConfig::effective_partition_seed() const {
  return partition_seed.value_or(splitmix64(seed ^ 0x9a27ULL));
}

std::uint64_t RunConfig::sampler_seed() const { return splitmix64(seed ^ 0x5a3bULL); }

std::vector<std::string> RunConfig::validate() const {
  std::vector<std::string> warnings;
  auto fail = [](const std::string& msg) { throw ValidationError(msg); };
  if (clients < 1) fail("clients must be at least 1");
  if (rounds < 0) fail("rounds must be nonnegative");
  if (!(rho > 0.0)) fail("rho must be positive");
  if (!(epsilon0 > 0.0)) fail("epsilon0 must be positive");
  try {
    gains.validate();
  } catch (const ContractViolation& e) {
    fail(e.what());
  }
  if (targets.empty() || (targets.size() != 1 && targets.size() != clients)) {
    fail("targets must hold one value or one value per client");
  }
  for (double t : targets) {
    if (!(t >= 0.0 && t <= 1.0)) fail("target loads must lie in [0, 1]");
  }
  if (algorithm == Algorithm::fedback) {
    for (std::size_t i = 0; i < targets.size(); ++i) {
      if (targets[i] == 0.0) {
        warnings.push_back("target load 0 for client " + std::to_string(i) +
                           ": the client may never participate");
      }
    }
  } else {
    for (double t : targets) {
      if (t == 0.0) fail("random sampling baselines need a positive participation rate");
    }
  }
  if (!(load0 >= 0.0 && load0 <= 1.0)) fail("load0 must lie in [0, 1]");
  if (data.samples < 1 && !data.csv_path) fail("data.samples must be at least 1");
  if (data.features < 1 && !data.csv_path) fail("data.features must be at least 1");
  if (!(partition.beta > 0.0)) fail("partition beta must be positive");
  if (partition.shards_per_client < 1) fail("shards_per_client must be positive");
  if (fedavg_steps < 1) fail("fedavg_steps must be at least 1");
  if (fedavg_lr && !(*fedavg_lr > 0.0)) fail("fedavg_lr must be positive");
  if (fedprox_mu && !(*fedprox_mu > 0.0)) fail("fedprox_mu must be positive");
  if (threads < 1) fail("threads must be at least 1");
  return warnings;
}

bool ClientState::operator==(const ClientState& other) const {
  return theta == other.theta && lambda == other.lambda && z_prev_local == other.z_prev_local;
}

ClientState client_update(const ClientState& state, const Objective& obj, const Vector& omega,
                          double rho, double eps_k, ProxMethod method) {
  require(state.theta.size() == omega.size() && state.lambda.size() == omega.size(),
          "client state and omega differ in dimension");
  require(rho > 0.0, "rho must be positive");
  require(eps_k > 0.0, "eps_k must be positive");
  ClientState next;
  next.lambda = state.lambda + state.theta - omega;
  ProxProblem prob;
  prob.anchor = omega - next.lambda;
  prob.rho = rho;
  prob.tolerance = eps_k;
  prob.warm_start = omega;
  next.theta = prox_solve(obj, prob, method);
  next.z_prev_local = next.lambda + next.theta;
  return next;
}

Vector aggregate(std::span<const Vector> z_cache) {
  require(!z_cache.empty(), "cannot aggregate an empty cache");
  Vector sum = z_cache.front();
  for (std::size_t i = 1; i < z_cache.size(); ++i) {
    require(z_cache[i].size() == sum.size(), "cache entries differ in dimension");
    sum += z_cache[i];
  }
  return sum / static_cast<double>(z_cache.size());
}

double rho_lower_bound(std::span<const Objective> objectives) {
  require(!objectives.empty(), "rho bound needs at least one objective");
  double n = 0.0;
  for (const auto& obj : objectives) n += static_cast<double>(obj.sample_count());
  double bound = 0.0;
  for (const auto& obj : objectives) {
    bound = std::max(bound, 3.0 * static_cast<double>(obj.sample_count()) * obj.smoothness() / n);
  }
  return bound;
}

bool validate_rho(double rho, std::span<const Objective> objectives) {
  return rho >= rho_lower_bound(objectives);
}

StationarityResiduals stationarity_residuals(const Vector& omega, std::span<const ClientState> clients,
                                             std::span<const Objective> objectives, double rho) {
  require(clients.size() == objectives.size(), "client and objective counts differ");
  StationarityResiduals out;
  Vector grad_sum = Vector::Zero(omega.size());
  for (std::size_t i = 0; i < clients.size(); ++i) {
    const ClientState& c = clients[i];
    const Vector gap = c.theta - omega;
    const double f_theta = loss(objectives[i], c.theta);
    out.F += f_theta;
    out.lagrangian += f_theta + c.lambda.dot(gap) + 0.5 * rho * gap.squaredNorm();
    out.f_at_omega += loss(objectives[i], omega);
    grad_sum += gradient(objectives[i], omega);
  }
  out.grad_norm_global = grad_sum.norm();
  return out;
}

void apply_consensus_updates(ServerState& server, std::vector<ClientState>& clients,
                             std::span<const Objective> objectives,
                             const std::vector<std::size_t>& selected, double rho, double eps_k,
                             int threads) {
  std::vector<ClientState> updated(selected.size());
  parallel_for(selected.size(), threads, [&](std::size_t j) {
    const std::size_t i = selected[j];
    updated[j] = client_update(clients[i], objectives[i], server.omega, rho, eps_k);
  });
  for (std::size_t j = 0; j < selected.size(); ++j) {
    const std::size_t i = selected[j];
    clients[i] = std::move(updated[j]);
    server.z_cache[i] = clients[i].z_prev_local;
  }
  server.omega = aggregate(server.z_cache);
  ++server.round;
}

RoundTrace make_round_record(std::int64_t round, std::vector<std::size_t> selected,
                             std::int64_t cumulative_before, const Vector& omega,
                             std::span<const ClientState> clients,
                             std::span<const Objective> objectives, double rho) {
  RoundTrace rec;
  rec.round = round;
  rec.selected_count = selected.size();
  rec.selected = std::move(selected);
  rec.cumulative_events = cumulative_before + static_cast<std::int64_t>(rec.selected_count);
  rec.omega_norm = omega.norm();
  const auto res = stationarity_residuals(omega, clients, objectives, rho);
  rec.grad_norm_global = res.grad_norm_global;
  rec.lagrangian = res.lagrangian;
  rec.F_theta = res.F;
  rec.f_omega = res.f_at_omega;
  return rec;
}

RoundTrace run_round(ServerState& server, std::vector<ClientState>& clients,
                     std::vector<ClientController>& controllers,
                     std::span<const Objective> objectives, const RunConfig& cfg,
                     std::int64_t cumulative_before) {
  require(clients.size() == controllers.size() && clients.size() == objectives.size() &&
              clients.size() == server.z_cache.size(),
          "round inputs have inconsistent client counts");
  const std::int64_t k = server.round;
  SelectionOptions options;
  options.metric = cfg.metric;
  options.freeze_thresholds = cfg.freeze_thresholds;
  Selection sel = select_clients(controllers, server.omega, server.z_cache, cfg.gains, options);

  apply_consensus_updates(server, clients, objectives, sel.selected, cfg.rho,
                          tolerance_at_round(cfg.epsilon0, k), cfg.threads);

  RoundTrace rec = make_round_record(k, std::move(sel.selected), cumulative_before, server.omega,
                                     clients, objectives, cfg.rho);
  rec.per_client.resize(controllers.size());
  for (std::size_t i = 0; i < controllers.size(); ++i) {
    rec.per_client[i] = {sel.events[i], controllers[i].load, controllers[i].delta, sel.distances[i]};
  }
  return rec;
}

}  // namespace fedback
