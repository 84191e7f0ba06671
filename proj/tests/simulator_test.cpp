#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "dpsched/simulate.hpp"
#include "dpsched/threshold.hpp"
#include "test_helpers.hpp"

using namespace dpsched;
using dpsched::testing::random_instance;
using dpsched::testing::random_policy;

namespace {

SystemInstance paper_instance(double alpha, double p_max, int Q = 100) {
  SystemInstance inst;
  inst.channel.M = 3;
  inst.channel.eta = {0.25, 0.5, 0.25};
  inst.channel.P = {1.0, 2.0, 3.0};
  inst.traffic = TrafficModel::from_alpha(alpha);
  inst.Q = Q;
  inst.p_max = p_max;
  return inst;
}

}  // namespace

TEST_CASE("config validation") {
  SimConfig cfg;
  cfg.n_slots = 100;
  cfg.warmup_slots = 100;
  CHECK_THROWS_AS(cfg.validate(), invalid_instance);
  cfg.warmup_slots = 99;
  CHECK_NOTHROW(cfg.validate());
}

TEST_CASE("identical inputs give bit-identical reports") {
  auto inst = paper_instance(0.5, 0.8, 20);
  std::mt19937_64 rng(11001);
  auto pol = random_policy(rng, inst.Q, inst.channel.M);
  SimConfig cfg;
  cfg.n_slots = 200000;
  cfg.warmup_slots = 5000;
  cfg.seed = 7;

  auto a = simulate(pol, inst, cfg);
  auto b = simulate(pol, inst, cfg);
  CHECK(a.mean_queue == b.mean_queue);
  CHECK(a.empirical_delay == b.empirical_delay);
  CHECK(a.empirical_power == b.empirical_power);
  CHECK(a.drop_count == b.drop_count);
  CHECK(a.transmit_count == b.transmit_count);
  CHECK(a.arrivals_accepted == b.arrivals_accepted);
  CHECK(a.departures == b.departures);
  CHECK(a.final_queue == b.final_queue);
  CHECK(a.per_state_occupancy == b.per_state_occupancy);

  cfg.seed = 8;
  auto c = simulate(pol, inst, cfg);
  CHECK(a.mean_queue != c.mean_queue);
}

TEST_CASE("accepted arrivals are conserved") {
  std::mt19937_64 rng(11002);
  for (int trial = 0; trial < 10; ++trial) {
    auto inst = random_instance(rng, 2, 3, 3, 15, 0.2, 0.8);
    auto pol = random_policy(rng, inst.Q, inst.channel.M);
    SimConfig cfg;
    cfg.n_slots = 50000;
    cfg.warmup_slots = 1000;
    cfg.seed = rng();
    auto rep = simulate(pol, inst, cfg);
    CHECK(rep.arrivals_accepted == rep.departures + rep.final_queue);
  }
}

TEST_CASE("always-transmitting keeps the queue empty at threshold power") {
  auto inst = paper_instance(0.5, 1.0, 50);
  SimConfig cfg;
  cfg.n_slots = 1000000;
  cfg.warmup_slots = 10000;
  cfg.seed = 3;
  auto rep = simulate(Policy::all_on(inst.Q, inst.channel.M), inst, cfg);
  CHECK(rep.mean_queue < 0.01);
  CHECK(rep.empirical_power == doctest::Approx(1.0).epsilon(0.01));
  CHECK(rep.drop_count == 0);
}

TEST_CASE("never-transmitting saturates the buffer and drops at the arrival rate") {
  auto inst = paper_instance(0.3, 0.8, 10);
  SimConfig cfg;
  cfg.n_slots = 200000;
  cfg.warmup_slots = 10000;
  cfg.seed = 4;
  auto rep = simulate(Policy::all_off(inst.Q, inst.channel.M), inst, cfg);
  double n_measured = (double)(cfg.n_slots - cfg.warmup_slots);
  CHECK((double)rep.drop_count / n_measured == doctest::Approx(0.3).epsilon(0.02));
  CHECK(rep.empirical_power == 0.0);
  CHECK(rep.transmit_count == 0);
  CHECK(rep.mean_queue == doctest::Approx(10.0).epsilon(0.001));
}

TEST_CASE("optimal policy simulation matches the analytic metrics within 2%") {
  auto inst = paper_instance(0.5, 0.8);
  auto sol = solve(inst);
  SimConfig cfg;
  cfg.n_slots = 1000000;
  cfg.warmup_slots = 10000;
  cfg.seed = 42;
  auto rep = simulate(sol.policy, inst, cfg);
  CHECK(std::abs(rep.empirical_delay - sol.delay) <= std::max(0.02 * sol.delay, 0.01));
  CHECK(std::abs(rep.empirical_power - sol.power) <= std::max(0.02 * sol.power, 1e-4));
  CHECK(rep.drop_count == 0);  // mass never reaches the top of a Q=100 buffer
}

TEST_CASE("analytic metrics describe arbitrary-policy runs, top-of-buffer included") {
  std::mt19937_64 rng(11004);
  for (int trial = 0; trial < 5; ++trial) {
    auto inst = random_instance(rng, 2, 3, 5, 5, 0.3, 0.7);
    auto pol = random_policy(rng, inst.Q, inst.channel.M);
    auto metrics = evaluate_policy(pol, inst);

    SimConfig cfg;
    cfg.n_slots = 1000000;
    cfg.warmup_slots = 10000;
    cfg.seed = 100 + trial;
    auto rep = simulate(pol, inst, cfg);
    double n_measured = (double)(cfg.n_slots - cfg.warmup_slots);

    CHECK(std::abs(rep.empirical_delay - metrics.avg_delay) <=
          0.01 * metrics.avg_delay + 0.01);
    CHECK(std::abs(rep.empirical_power - metrics.avg_power) <=
          0.01 * metrics.avg_power + 1e-3);
    double drop_rate = (double)rep.drop_count / n_measured;
    CHECK(std::abs(drop_rate - metrics.loss_prob) <= 0.05 * metrics.loss_prob + 1e-3);
  }
}

TEST_CASE("occupancy histogram tracks the stationary distribution") {
  std::mt19937_64 rng(11003);
  auto inst = random_instance(rng, 2, 3, 10, 10, 0.3, 0.7);
  auto pol = random_policy(rng, inst.Q, inst.channel.M);
  auto ss = steady_state(derive_rates(pol, inst.traffic, inst.channel));

  SimConfig cfg;
  cfg.n_slots = 1000000;
  cfg.warmup_slots = 20000;
  cfg.seed = 5;
  auto emp = empirical_distribution(simulate(pol, inst, cfg));

  double tv = 0.0;
  for (int i = 0; i <= inst.Q; ++i) tv += std::abs(emp.pi[i] - ss.pi[i]);
  CHECK(tv / 2.0 < 0.01);
}

TEST_CASE("sampling error shrinks with the slot count") {
  auto inst = paper_instance(0.5, 0.8, 40);
  auto sol = solve(inst);
  auto error_at = [&](std::uint64_t n) {
    SimConfig cfg;
    cfg.n_slots = n;
    cfg.warmup_slots = n / 10;
    cfg.seed = 6;
    auto rep = simulate(sol.policy, inst, cfg);
    return std::abs(rep.empirical_delay - sol.delay);
  };
  double e4 = error_at(10000);
  double e6 = error_at(1000000);
  CHECK(e6 < e4);
  CHECK(e6 <= 0.02 * std::max(sol.delay, 0.5));
}

TEST_CASE("empirical_distribution") {
  SimReport rep;
  rep.per_state_occupancy = {3, 1, 0, 0};
  auto ss = empirical_distribution(rep);
  CHECK(ss.pi[0] == doctest::Approx(0.75));
  CHECK(ss.pi[1] == doctest::Approx(0.25));
  CHECK(ss.pi[2] == 0.0);

  SimReport empty;
  empty.per_state_occupancy = {0, 0};
  CHECK_THROWS_AS(empirical_distribution(empty), invalid_instance);
}
