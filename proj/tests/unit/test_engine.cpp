#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "fedback/errors.hpp"
#include "fedback/experiment.hpp"
#include "test_support.hpp"

using namespace fedback;
using namespace fedback::testing;

namespace {

RunConfig small_config(std::int64_t rounds) {
  RunConfig cfg;
  cfg.clients = 10;
  cfg.rounds = rounds;
  cfg.seed = 4;
  cfg.auto_rho = true;
  cfg.targets = {0.3};
  cfg.data.samples = 200;
  cfg.data.features = 5;
  cfg.data.classes = 5;
  cfg.data.synthetic.heterogeneity = 0.5;
  return cfg;
}

ClientState state_at(double theta, double lambda) {
  return {Vector::Constant(1, theta), Vector::Constant(1, lambda), Vector::Constant(1, theta + lambda)};
}

// Neumaier-compensated mean, column by column.
Vector compensated_mean(const std::vector<Vector>& xs) {
  Vector out(xs.front().size());
  for (Eigen::Index j = 0; j < out.size(); ++j) {
    double sum = 0.0, carry = 0.0;
    for (const auto& x : xs) {
      const double v = x(j);
      const double t = sum + v;
      carry += std::abs(sum) >= std::abs(v) ? (sum - t) + v : (v - t) + sum;
      sum = t;
    }
    out(j) = (sum + carry) / static_cast<double>(xs.size());
  }
  return out;
}

}  // namespace

TEST_CASE("client update examples") {
  const Objective f = scalar_quadratic(1.0, 3.0);
  const ClientState a = client_update(state_at(0.0, 0.0), f, Vector::Zero(1), 1.0, 1e-9);
  CHECK(a.lambda(0) == 0.0);
  CHECK(a.theta(0) == doctest::Approx(1.5));
  CHECK(a.z_prev_local(0) == doctest::Approx(1.5));

  const ClientState b = client_update(state_at(1.0, 0.5), f, Vector::Zero(1), 1.0, 1e-9);
  CHECK(b.lambda(0) == doctest::Approx(1.5));
  CHECK(b.theta(0) == doctest::Approx(0.75));
  CHECK(b.z_prev_local(0) == doctest::Approx(2.25));

  CHECK_THROWS_AS(client_update(state_at(0, 0), f, Vector::Zero(2), 1.0, 1e-9), ContractViolation);
  CHECK_THROWS_AS(client_update(state_at(0, 0), f, Vector::Zero(1), 0.0, 1e-9), ContractViolation);
}

TEST_CASE("aggregate is the cache mean") {
  std::vector<Vector> cache{Vector::Constant(2, 1.0), Vector::Constant(2, 2.0), Vector::Constant(2, 6.0)};
  CHECK(aggregate(cache).isApprox(Vector::Constant(2, 3.0)));
  CHECK_THROWS_AS(aggregate(std::vector<Vector>{}), ContractViolation);

  std::mt19937_64 rng(8);
  std::vector<Vector> many;
  for (int i = 0; i < 100; ++i) many.push_back(random_vector(rng, 7, 1000.0));
  CHECK((aggregate(many) - compensated_mean(many)).lpNorm<Eigen::Infinity>() <= 1e-12 * 1000.0);
}

TEST_CASE("round zero with delta0 = 0 is a vanilla consensus ADMM step") {
  std::mt19937_64 rng(12);
  std::vector<Objective> objs;
  for (int i = 0; i < 6; ++i) objs.push_back(random_quadratic(rng, 5, 3));
  RunConfig cfg;
  cfg.clients = 6;
  cfg.rho = 4.0;
  cfg.targets = {0.2};

  Simulation sim(cfg, objs);
  const RoundTrace rec = sim.step();
  CHECK(rec.selected_count == 6);

  std::vector<ClientState> manual(6, ClientState{Vector::Zero(3), Vector::Zero(3), Vector::Zero(3)});
  std::vector<Vector> cache(6);
  for (std::size_t i = 0; i < 6; ++i) {
    manual[i] = client_update(manual[i], objs[i], Vector::Zero(3), cfg.rho, cfg.epsilon0);
    cache[i] = manual[i].z_prev_local;
  }
  CHECK(sim.server().omega == aggregate(cache));
  for (std::size_t i = 0; i < 6; ++i) CHECK(sim.clients()[i] == manual[i]);
}

TEST_CASE("empty selection leaves all state unchanged") {
  std::mt19937_64 rng(13);
  std::vector<Objective> objs;
  for (int i = 0; i < 4; ++i) objs.push_back(random_quadratic(rng, 5, 2));
  RunConfig cfg;
  cfg.clients = 4;
  cfg.delta0 = 1e9;
  cfg.z0 = {0.5, -0.5};
  Simulation sim(cfg, objs);
  const Vector before = sim.server().omega;
  const auto clients_before = sim.clients();
  const RoundTrace rec = sim.step();
  CHECK(rec.selected.empty());
  CHECK(rec.cumulative_events == 0);
  CHECK(sim.server().omega == before);
  CHECK(sim.clients() == clients_before);
  CHECK(sim.server().round == 1);
}

TEST_CASE("two scalar clients reach the consensus minimizer") {
  std::vector<Objective> objs{scalar_quadratic(1.0, 1.0), scalar_quadratic(1.0, 3.0)};
  RunConfig cfg;
  cfg.clients = 2;
  cfg.rho = 2.0;
  cfg.rounds = 200;
  cfg.targets = {1.0};
  Simulation sim(cfg, objs);
  sim.run();
  CHECK(sim.server().omega(0) == doctest::Approx(2.0).epsilon(1e-10));
  CHECK(sim.cumulative_events() == 400);
}

TEST_CASE("two scalar clients with delta frozen at zero") {
  std::vector<Objective> objs{scalar_quadratic(1.0, 1.0), scalar_quadratic(1.0, 3.0)};
  RunConfig cfg;
  cfg.clients = 2;
  cfg.rho = 1.0;
  cfg.rounds = 200;
  cfg.freeze_thresholds = true;
  Simulation sim(cfg, objs);
  sim.run();
  CHECK(std::abs(sim.server().omega(0) - 2.0) <= 1e-6);
}

TEST_CASE("rho bound") {
  std::vector<Objective> objs;
  for (int i = 0; i < 10; ++i) objs.push_back(scalar_quadratic(1.0, i));
  REQUIRE(objs.front().smoothness() == 1.0);
  CHECK(rho_lower_bound(objs) == doctest::Approx(0.3));
  CHECK(validate_rho(0.3, objs));
  CHECK_FALSE(validate_rho(0.29, objs));

  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<Objective> fed;
    double n = 0.0;
    for (int i = 0; i < 8; ++i) {
      fed.push_back(random_quadratic(rng, 3 + (trial * 7 + i) % 11, 4));
      n += static_cast<double>(fed.back().sample_count());
    }
    double oracle = 0.0;
    for (const auto& obj : fed) {
      const Eigen::SelfAdjointEigenSolver<Matrix> es(obj.design().transpose() * obj.design());
      oracle = std::max(oracle, 3.0 * static_cast<double>(obj.sample_count()) * es.eigenvalues().maxCoeff() / n);
    }
    CHECK(validate_rho(oracle * (1.0 + 1e-6), fed));
    CHECK_FALSE(validate_rho(oracle * (1.0 - 1e-6), fed));
  }
}

TEST_CASE("stationarity residual examples") {
  std::vector<Objective> one{scalar_quadratic(1.0, 3.0)};
  std::vector<ClientState> st{state_at(1.0, 0.5)};
  const auto r = stationarity_residuals(Vector::Zero(1), st, one, 2.0);
  CHECK(r.F == doctest::Approx(2.0));
  CHECK(r.lagrangian == doctest::Approx(3.5));
  CHECK(r.f_at_omega == doctest::Approx(4.5));
  CHECK(r.grad_norm_global == doctest::Approx(3.0));

  std::vector<Objective> pair{scalar_quadratic(1.0, 1.0), scalar_quadratic(1.0, 3.0)};
  std::vector<ClientState> at_opt{state_at(2.0, -1.0), state_at(2.0, 1.0)};
  CHECK(stationarity_residuals(Vector::Constant(1, 2.0), at_opt, pair, 1.0).grad_norm_global <= 1e-8);

  std::mt19937_64 rng(21);
  std::vector<Objective> objs;
  std::vector<ClientState> clients;
  for (int i = 0; i < 7; ++i) {
    objs.push_back(random_quadratic(rng, 6, 3));
    clients.push_back({random_vector(rng, 3), random_vector(rng, 3), Vector::Zero(3)});
  }
  const Vector omega = random_vector(rng, 3);
  double lag = 0.0;
  for (std::size_t i = 0; i < 7; ++i) {
    const Vector resid = objs[i].design() * clients[i].theta - objs[i].targets();
    lag += 0.5 * resid.squaredNorm();
    for (int j = 0; j < 3; ++j) {
      const double gap = clients[i].theta(j) - omega(j);
      lag += clients[i].lambda(j) * gap + 0.5 * 1.7 * gap * gap;
    }
  }
  CHECK(stationarity_residuals(omega, clients, objs, 1.7).lagrangian == doctest::Approx(lag).epsilon(1e-12));
}

TEST_CASE("non-participants are frozen and the cache stays consistent") {
  const RunConfig cfg = small_config(60);
  const Federation fed = build_federation(cfg);
  Simulation sim(resolve_rho(cfg, fed), fed.objectives);
  int partial_rounds = 0;
  for (int k = 0; k < 60; ++k) {
    const auto before = sim.clients();
    const RoundTrace rec = sim.step();
    if (rec.selected_count < cfg.clients) ++partial_rounds;
    std::vector<bool> chosen(cfg.clients, false);
    for (auto i : rec.selected) chosen[i] = true;
    for (std::size_t i = 0; i < cfg.clients; ++i) {
      if (!chosen[i]) REQUIRE(sim.clients()[i] == before[i]);
      REQUIRE(sim.server().z_cache[i] == sim.clients()[i].z_prev_local);
    }
    REQUIRE(sim.server().omega == aggregate(sim.server().z_cache));
  }
  CHECK(partial_rounds > 0);
}

TEST_CASE("duals sum to zero under full participation") {
  RunConfig cfg = small_config(40);
  cfg.targets = {1.0};
  const Federation fed = build_federation(cfg);
  Simulation sim(resolve_rho(cfg, fed), fed.objectives);
  for (int k = 0; k < 40; ++k) {
    sim.step();
    Vector sum = Vector::Zero(5);
    for (const auto& c : sim.clients()) sum += c.lambda;
    REQUIRE(sum.norm() <= 1e-9);
  }
}

TEST_CASE("run_experiment basics") {
  CHECK(run_experiment(small_config(0)).empty());

  const Trace a = run_experiment(small_config(30));
  const Trace b = run_experiment(small_config(30));
  CHECK(a.size() == 30);
  CHECK(a == b);
  CHECK(a.back().loss_gap.has_value());

  RunConfig low = small_config(5);
  low.auto_rho = false;
  low.rho = 1e-6;
  CHECK_THROWS_AS(run_experiment(low), ValidationError);
  low.validate_rho = false;
  CHECK(run_experiment(low).size() == 5);

  RunConfig bad = small_config(5);
  bad.targets = {1.5};
  CHECK_THROWS_AS(run_experiment(bad), ValidationError);

  RunConfig zero = small_config(5);
  zero.targets = {0.0};
  CHECK(zero.validate().size() == 1);
}

TEST_CASE("target one matches the frozen-threshold run") {
  RunConfig adaptive = small_config(40);
  adaptive.targets = {1.0};
  RunConfig frozen = adaptive;
  frozen.freeze_thresholds = true;
  const Trace a = run_experiment(adaptive);
  const Trace b = run_experiment(frozen);
  REQUIRE(a.size() == b.size());
  for (std::size_t k = 0; k < a.size(); ++k) {
    CHECK(a[k].selected == b[k].selected);
    CHECK(a[k].omega_norm == b[k].omega_norm);
    CHECK(a[k].f_omega == b[k].f_omega);
    CHECK(a[k].lagrangian == b[k].lagrangian);
  }
}

TEST_CASE("worker threads do not change results") {
  RunConfig one = small_config(40);
  RunConfig many = one;
  many.threads = 4;
  CHECK(run_experiment(one) == run_experiment(many));

  one.data.task = many.data.task = Task::classification;
  one.data.features = many.data.features = 3;
  one.rounds = many.rounds = 10;
  CHECK(run_experiment(one) == run_experiment(many));
}
