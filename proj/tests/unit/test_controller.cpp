#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "fedback/controller.hpp"
#include "fedback/errors.hpp"

using namespace fedback;

namespace {

Vector scalar(double v) { return Vector::Constant(1, v); }

// Drives one scalar controller with a given distance sequence, returning the
// events. omega is held at 0 and the cache entry is set to the distance.
struct ScalarLoop {
  ClientController ctl;
  ControllerGains gains;
  std::vector<int> events;
  std::vector<double> deltas{ctl.delta};
  std::vector<double> loads{ctl.load};

  void step(double dist) {
    std::vector<ClientController> one{ctl};
    const std::vector<Vector> cache{scalar(dist)};
    const Selection sel = select_clients(one, scalar(0.0), cache, gains);
    ctl = one.front();
    events.push_back(sel.events.front());
    deltas.push_back(ctl.delta);
    loads.push_back(ctl.load);
  }
};

}  // namespace

TEST_CASE("trigger examples") {
  CHECK(trigger(scalar(0.0), scalar(0.0), 0.0));
  CHECK(trigger(scalar(1.0), scalar(0.0), 1.0));
  CHECK_FALSE(trigger(scalar(1.0), scalar(0.0), 1.0 + 1e-12));
  CHECK(trigger(scalar(5.0), scalar(5.0), -0.3));
  Vector a(2), b(2);
  a << 3, 4;
  b << 0, 0;
  CHECK(distance(a, b) == 5.0);
  CHECK(distance(a, b, DistanceMetric::infinity) == 4.0);
  CHECK_FALSE(trigger(a, b, 4.5, DistanceMetric::infinity));
  CHECK_THROWS_AS(distance(a, scalar(0.0)), ContractViolation);
}

TEST_CASE("filter and threshold examples") {
  CHECK(filter_update(0.0, true, 0.9) == doctest::Approx(0.9));
  CHECK(filter_update(0.9, false, 0.9) == doctest::Approx(0.09));
  CHECK(filter_update(0.5, true, 0.5) == doctest::Approx(0.75));
  CHECK(threshold_update(0.0, 0.9, 0.1, 2.0) == doctest::Approx(1.6));
  CHECK(threshold_update(1.0, 0.0, 0.1, 2.0) == doctest::Approx(0.8));
}

TEST_CASE("gain validation") {
  CHECK_NOTHROW(ControllerGains{}.validate());
  CHECK_THROWS_AS((ControllerGains{0.0, 0.5}.validate()), ContractViolation);
  CHECK_THROWS_AS((ControllerGains{1.0, 1.0}.validate()), ContractViolation);
  CHECK_THROWS_AS((ControllerGains{1.0, 0.0}.validate()), ContractViolation);
  CHECK_THROWS_AS(ClientController::make(1.5), ContractViolation);
}

TEST_CASE("every client fires in round zero with delta0 = 0") {
  std::vector<ClientController> ctls(5, ClientController::make(0.2));
  std::vector<Vector> cache(5, Vector::Zero(3));
  const Selection sel = select_clients(ctls, Vector::Zero(3), cache, ControllerGains{});
  CHECK(sel.selected == std::vector<std::size_t>{0, 1, 2, 3, 4});
  for (const auto& c : ctls) {
    CHECK(c.load == doctest::Approx(0.9));
    CHECK(c.delta == doctest::Approx(-0.4));  // uses the load entering the round
    CHECK(c.last_event_round == 0);
    CHECK(c.rounds_elapsed == 1);
  }
}

TEST_CASE("empty selection when every distance is below threshold") {
  std::vector<ClientController> ctls(3, ClientController::make(0.1, 10.0));
  std::vector<Vector> cache(3, Vector::Ones(2));
  const Selection sel = select_clients(ctls, Vector::Zero(2), cache, ControllerGains{});
  CHECK(sel.selected.empty());
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(sel.events[i] == 0);
    CHECK(sel.distances[i] == doctest::Approx(std::sqrt(2.0)));
    CHECK(ctls[i].delta == doctest::Approx(9.8));
    CHECK_FALSE(ctls[i].last_event_round.has_value());
  }
}

TEST_CASE("frozen thresholds keep delta but still filter the load") {
  std::vector<ClientController> ctls(2, ClientController::make(0.1, 0.0));
  std::vector<Vector> cache(2, Vector::Zero(1));
  SelectionOptions opts;
  opts.freeze_thresholds = true;
  for (int k = 0; k < 10; ++k) select_clients(ctls, scalar(0.0), cache, ControllerGains{}, opts);
  CHECK(ctls[0].delta == 0.0);
  CHECK(ctls[0].cumulative_events == 10);
  CHECK(ctls[0].load == doctest::Approx(1.0 - std::pow(0.1, 10)));
}

TEST_CASE("identity residual examples") {
  const ControllerGains gains{};
  ScalarLoop loop{ClientController::make(0.1), gains};
  loop.step(0.0);
  CHECK(loop.ctl.delta == doctest::Approx(-0.2));
  CHECK(participation_identity_residual(loop.ctl, gains, 1) <= 1e-15);

  // A client that stays quiet: rate 0, delta drifts down by K * target a round.
  ScalarLoop quiet{ClientController::make(0.1, 5.0), gains};
  for (int k = 0; k < 10; ++k) quiet.step(0.0);
  CHECK(quiet.ctl.cumulative_events == 0);
  CHECK(quiet.ctl.delta == doctest::Approx(3.0));
  CHECK(participation_identity_residual(quiet.ctl, gains, 10) <= 1e-15);

  CHECK_THROWS_AS(participation_identity_residual(quiet.ctl, gains, 9), ContractViolation);
  CHECK_THROWS_AS(identity_residual(0, 0, 0.1, 0, 0, 0, 0, gains), ContractViolation);
}

TEST_CASE("identity holds on every prefix of random trajectories") {
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> dist(0.0, 3.0);
  for (double target : {0.05, 0.1, 0.3, 0.9}) {
    const ControllerGains gains{1.5, 0.7};
    ScalarLoop loop{ClientController::make(target, 0.4, 0.2), gains};
    double worst = 0.0;
    for (int k = 1; k <= 3000; ++k) {
      loop.step(dist(rng));
      worst = std::max(worst, participation_identity_residual(loop.ctl, gains, k));
    }
    CHECK(worst <= 1e-9);
  }
}

TEST_CASE("threshold bounds and rate envelope examples") {
  const ControllerGains gains{2.0, 0.9};
  const ThresholdBounds b = threshold_bounds(0.0, gains, 5.0);
  CHECK(b.lower == doctest::Approx(-2.0 * 1.9 / 0.9));
  CHECK(b.upper == doctest::Approx(5.0 + 2.0 * 1.9 / 0.9));
  CHECK(b.lower == doctest::Approx(-4.2222222222));
  CHECK(b.upper == doctest::Approx(9.2222222222));
  CHECK(b.contains(0.0));
  CHECK_FALSE(b.contains(9.3));
  CHECK(b.contains(9.3, 0.1));

  const RateBounds r = rate_bounds(0.0, gains, 5.0);
  CHECK(r.c1 == doctest::Approx(-2.9 / 0.9));
  CHECK(r.c2 == doctest::Approx(2.5 + 2.9 / 0.9));
  CHECK(r.envelope() == doctest::Approx(r.c2));

  // Large delta0 moves the upper threshold bound and the lower rate constant.
  const ThresholdBounds high = threshold_bounds(20.0, gains, 1.0);
  CHECK(high.upper == doctest::Approx(20.0 + 2.0 / 0.9));
  CHECK(rate_bounds(20.0, gains, 1.0).c1 == doctest::Approx(-10.0 - 2.9 / 0.9));
}

TEST_CASE("closed-loop scalar simulation stays inside the proven bounds") {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 20; ++trial) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const ControllerGains gains{0.5 + 3.0 * unit(rng), 0.1 + 0.8 * unit(rng)};
    const double target = 0.05 + 0.9 * unit(rng);
    const double delta0 = 4.0 * unit(rng) - 2.0;
    ScalarLoop loop{ClientController::make(target, delta0), gains};
    std::exponential_distribution<double> dist(1.0 + 2.0 * unit(rng));
    std::vector<double> seen;
    for (int k = 0; k < 2000; ++k) {
      seen.push_back(dist(rng));
      loop.step(seen.back());
    }
    double delta_plus = 0.0;
    for (double d : seen) delta_plus = std::max(delta_plus, d);

    const ThresholdBounds b = threshold_bounds(delta0, gains, delta_plus);
    const RateBounds r = rate_bounds(delta0, gains, delta_plus);
    int delta_violations = 0, rate_violations = 0, load_violations = 0;
    long events = 0;
    for (std::size_t k = 0; k < loop.events.size(); ++k) {
      events += loop.events[k];
      const double t = static_cast<double>(k + 1);
      const double gap = static_cast<double>(events) / t - target;
      if (gap < r.c1 / t - 1e-12 || gap > r.c2 / t + 1e-12) ++rate_violations;
      if (!b.contains(loop.deltas[k + 1], 1e-9)) ++delta_violations;
      if (loop.loads[k + 1] < 0.0 || loop.loads[k + 1] > 1.0) ++load_violations;
    }
    CHECK(delta_violations == 0);
    CHECK(rate_violations == 0);
    CHECK(load_violations == 0);
    CHECK(std::abs(static_cast<double>(events) / 2000.0 - target) <= r.envelope() / 2000.0 + 1e-12);
  }
}

TEST_CASE("constant unit distance at target one half") {
  const ControllerGains gains{};
  ScalarLoop loop{ClientController::make(0.5), gains};
  for (int k = 0; k < 1000; ++k) loop.step(1.0);
  const RateBounds r = rate_bounds(0.0, gains, 1.0);
  const double rate = static_cast<double>(loop.ctl.cumulative_events) / 1000.0;
  CHECK(rate >= 0.5 + r.c1 / 1000.0);
  CHECK(rate <= 0.5 + r.c2 / 1000.0);
}

TEST_CASE("load stays in [0, 1] for any event sequence") {
  std::mt19937_64 rng(1);
  std::bernoulli_distribution coin(0.37);
  for (double alpha : {0.01, 0.5, 0.99}) {
    double load = 0.3;
    for (int k = 0; k < 5000; ++k) {
      load = filter_update(load, coin(rng), alpha);
      REQUIRE(load >= 0.0);
      REQUIRE(load <= 1.0);
    }
  }
}

TEST_CASE("liveness check") {
  ClientController c = ClientController::make(0.1);
  c.rounds_elapsed = 10;
  CHECK_FALSE(liveness_check(c, 5));
  c.last_event_round = 7;
  CHECK(liveness_check(c, 3));
  CHECK_FALSE(liveness_check(c, 2));
  c.last_event_round = 9;
  CHECK(liveness_check(c, 1));
  CHECK_THROWS_AS(liveness_check(c, 11), ContractViolation);
  CHECK_THROWS_AS(liveness_check(c, 0), ContractViolation);
  c.target = 0.0;
  CHECK_THROWS_AS(liveness_check(c, 3), ContractViolation);
}

TEST_CASE("selection is deterministic") {
  std::mt19937_64 rng(77);
  std::normal_distribution<double> normal;
  std::vector<Vector> cache(20, Vector::Zero(4));
  for (auto& v : cache)
    for (int j = 0; j < 4; ++j) v(j) = normal(rng);
  std::vector<ClientController> a(20, ClientController::make(0.3, 1.0)), b = a;
  for (int k = 0; k < 50; ++k) {
    const Vector omega = Vector::Constant(4, 0.01 * k);
    const Selection sa = select_clients(a, omega, cache, ControllerGains{});
    const Selection sb = select_clients(b, omega, cache, ControllerGains{});
    REQUIRE(sa.selected == sb.selected);
    REQUIRE(sa.distances == sb.distances);
  }
  for (std::size_t i = 0; i < 20; ++i) CHECK(a[i].delta == b[i].delta);
}
