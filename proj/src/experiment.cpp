#include "fedback/experiment.hpp"

#include <algorithm>
#include <string>

#include "fedback/errors.hpp"

namespace fedback {

std::optional<Vector> centralized_optimum(std::span<const Objective> objectives) {
  if (objectives.empty()) return std::nullopt;
  const auto d = static_cast<Eigen::Index>(objectives.front().dimension());
  Matrix system = Matrix::Zero(d, d);
  Vector rhs = Vector::Zero(d);
  for (const auto& obj : objectives) {
    if (obj.kind() != ObjectiveKind::quadratic) return std::nullopt;
    system += obj.gram();
    rhs += obj.design_t_targets();
  }
  Eigen::LDLT<Matrix> ldlt(system);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive() ||
      ldlt.vectorD().minCoeff() <= 1e-12 * ldlt.vectorD().maxCoeff()) {
    return std::nullopt;
  }
  return Vector(ldlt.solve(rhs));
}

Federation federate(const Dataset& data, Task task, const Partition& partition) {
  Federation fed;
  fed.partition = partition;
  for (const auto& members : partition) {
    require(!members.empty(), "cannot build an objective for an empty client");
    Matrix rows(static_cast<Eigen::Index>(members.size()), data.features.cols());
    Vector response(static_cast<Eigen::Index>(members.size()));
    std::vector<int> labels(members.size());
    for (std::size_t j = 0; j < members.size(); ++j) {
      rows.row(static_cast<Eigen::Index>(j)) = data.features.row(static_cast<Eigen::Index>(members[j]));
      response(static_cast<Eigen::Index>(j)) = data.response(static_cast<Eigen::Index>(members[j]));
      labels[j] = data.labels[members[j]];
    }
    if (task == Task::regression) {
      fed.objectives.push_back(Objective::quadratic(std::move(rows), std::move(response)));
    } else {
      fed.objectives.push_back(Objective::logistic(std::move(rows), std::move(labels), data.classes));
    }
  }
  fed.optimum = centralized_optimum(fed.objectives);
  if (fed.optimum) {
    double total = 0.0;
    for (const auto& obj : fed.objectives) total += loss(obj, *fed.optimum);
    fed.optimal_loss = total;
  }
  return fed;
}

Federation build_federation(const RunConfig& cfg) {
  const Dataset data =
      cfg.data.csv_path
          ? load_delimited(*cfg.data.csv_path)
          : generate_synthetic(cfg.data.task, cfg.data.samples, cfg.data.features, cfg.data.classes,
                               cfg.data_seed(), cfg.data.synthetic);
  PartitionSpec spec = cfg.partition;
  spec.seed = cfg.effective_partition_seed();
  return federate(data, cfg.data.task, make_partition(data.labels, cfg.clients, spec));
}

Simulation::Simulation(RunConfig cfg, std::vector<Objective> objectives,
                       std::optional<double> optimal_loss)
    : cfg_(std::move(cfg)),
      objectives_(std::move(objectives)),
      optimal_loss_(optimal_loss),
      sampler_(cfg_.sampler_seed()) {
  cfg_.validate();
  if (objectives_.size() != cfg_.clients) {
    throw ValidationError("config names " + std::to_string(cfg_.clients) + " clients but " +
                          std::to_string(objectives_.size()) + " objectives were supplied");
  }
  const std::size_t d = objectives_.front().dimension();
  for (const auto& obj : objectives_) {
    if (obj.dimension() != d) throw ValidationError("objectives differ in parameter dimension");
  }
  Vector z0 = Vector::Zero(static_cast<Eigen::Index>(d));
  if (!cfg_.z0.empty()) {
    if (cfg_.z0.size() != d) throw ValidationError("z0 has the wrong dimension");
    z0 = Eigen::Map<const Vector>(cfg_.z0.data(), static_cast<Eigen::Index>(d));
  }

  server_.omega = z0;
  server_.z_cache.assign(cfg_.clients, z0);
  clients_.assign(cfg_.clients, ClientState{z0, Vector::Zero(z0.size()), z0});
  for (std::size_t i = 0; i < cfg_.clients; ++i) {
    controllers_.push_back(ClientController::make(cfg_.target_for(i), cfg_.delta0, cfg_.load0));
  }
}

RoundTrace Simulation::step() {
  RoundTrace rec;
  switch (cfg_.algorithm) {
    case Algorithm::fedback:
      rec = run_round(server_, clients_, controllers_, objectives_, cfg_, cumulative_events_);
      break;
    case Algorithm::fedadmm:
      rec = fedadmm_round(server_, clients_, objectives_, cfg_, sampler_, cumulative_events_);
      break;
    case Algorithm::fedavg:
      rec = fedavg_round(server_, clients_, objectives_, cfg_, sampler_, cumulative_events_);
      break;
    case Algorithm::fedprox:
      rec = fedprox_round(server_, clients_, objectives_, cfg_, sampler_, cumulative_events_);
      break;
  }
  cumulative_events_ = rec.cumulative_events;
  if (optimal_loss_) rec.loss_gap = rec.f_omega - *optimal_loss_;
  return rec;
}

Trace Simulation::run() {
  Trace trace;
  trace.reserve(static_cast<std::size_t>(std::max<std::int64_t>(cfg_.rounds - server_.round, 0)));
  while (server_.round < cfg_.rounds) trace.push_back(step());
  return trace;
}

RunConfig quadratic_benchmark(std::uint64_t seed, double target, std::int64_t rounds) {
  RunConfig cfg;
  cfg.clients = 100;
  cfg.rounds = rounds;
  cfg.seed = seed;
  cfg.targets = {target};
  cfg.gains = {2.0, 0.9};
  cfg.auto_rho = true;
  cfg.partition.scheme = PartitionScheme::dirichlet;
  cfg.partition.beta = 0.5;
  cfg.data.task = Task::regression;
  cfg.data.samples = 2000;
  cfg.data.features = 10;
  cfg.data.classes = 10;
  cfg.data.synthetic = {0.1, 1.0, 1.0};
  return cfg;
}

RunConfig resolve_rho(RunConfig cfg, const Federation& federation) {
  if (cfg.auto_rho) {
    cfg.rho = rho_lower_bound(federation.objectives);
    cfg.auto_rho = false;
  }
  return cfg;
}

Trace run_experiment(const RunConfig& raw, const Federation& federation) {
  const RunConfig cfg = resolve_rho(raw, federation);
  cfg.validate();
  if (cfg.validate_rho && !validate_rho(cfg.rho, federation.objectives)) {
    throw ValidationError("rho = " + std::to_string(cfg.rho) + " is below the required bound " +
                          std::to_string(rho_lower_bound(federation.objectives)));
  }
  Simulation sim(cfg, federation.objectives, federation.optimal_loss);
  return sim.run();
}

Trace run_experiment(const RunConfig& cfg) {
  cfg.validate();
  return run_experiment(cfg, build_federation(cfg));
}

}  // namespace fedback
