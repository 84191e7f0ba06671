#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "dpsched/model.hpp"
#include "test_helpers.hpp"

using namespace dpsched;
using dpsched::testing::power_iteration;
using dpsched::testing::random_instance;
using dpsched::testing::random_policy;

namespace {

ChannelModel paper_channel() {
  ChannelModel c;
  c.M = 3;
  c.eta = {0.25, 0.5, 0.25};
  c.P = {1.0, 2.0, 3.0};
  c.validate();
  return c;
}

}  // namespace

TEST_CASE("type invariants are enforced") {
  ChannelModel bad = paper_channel();
  bad.eta = {0.5, 0.6, 0.1};
  CHECK_THROWS_AS(bad.validate(), invalid_instance);

  bad = paper_channel();
  bad.P = {3.0, 1.0, 2.0};
  CHECK_THROWS_AS(bad.validate(), invalid_instance);

  CHECK_THROWS_AS(TrafficModel::from_alpha(0.0), invalid_instance);
  CHECK_THROWS_AS(TrafficModel::from_alpha(1.0), invalid_instance);

  TrafficModel t = TrafficModel::from_alpha(0.4);
  CHECK(t.xi == doctest::Approx(1.5).epsilon(1e-15));
}

TEST_CASE("derive_rates matches the closed-form transition probabilities") {
  auto channel = paper_channel();

  SUBCASE("full transmission zeroes all up-rates") {
    auto traffic = TrafficModel::from_alpha(0.5);
    auto rates = derive_rates(Policy::all_on(6, 3), traffic, channel);
    for (double l : rates.lambda) CHECK(l == 0.0);
    for (double m : rates.mu) CHECK(m == doctest::Approx(0.5).epsilon(1e-15));
  }

  SUBCASE("never transmitting pushes everything upward") {
    auto traffic = TrafficModel::from_alpha(0.3);
    auto rates = derive_rates(Policy::all_off(6, 3), traffic, channel);
    for (double l : rates.lambda) CHECK(l == doctest::Approx(0.3).epsilon(1e-15));
    for (double m : rates.mu) CHECK(m == 0.0);
  }

  SUBCASE("two-state hand example") {
    ChannelModel two;
    two.M = 2;
    two.eta = {0.5, 0.5};
    two.P = {1.0, 2.0};
    auto traffic = TrafficModel::from_alpha(0.5);
    Policy pol = Policy::constant(5, 2, 0.0, 0.0);
    for (int i = 0; i <= 5; ++i) {
      pol.g[i] = {1.0, 0.0};
      pol.f[i] = {1.0, 0.0};
    }
    auto rates = derive_rates(pol, traffic, two);
    for (double l : rates.lambda) CHECK(l == doctest::Approx(0.25).epsilon(1e-15));
    for (double m : rates.mu) CHECK(m == doctest::Approx(0.25).epsilon(1e-15));
  }

  SUBCASE("dimension mismatch is rejected") {
    auto traffic = TrafficModel::from_alpha(0.5);
    CHECK_THROWS_AS(derive_rates(Policy::all_on(6, 2), traffic, channel), invalid_instance);
  }
}

TEST_CASE("steady_state handles clean and degenerate chains") {
  SUBCASE("no up-transitions leaves the queue empty") {
    BirthDeathRates r;
    r.lambda.assign(5, 0.0);
    r.mu.assign(5, 0.3);
    auto ss = steady_state(r);
    CHECK(ss.pi[0] == doctest::Approx(1.0));
    for (int i = 1; i <= 5; ++i) CHECK(ss.pi[i] == 0.0);
  }

  SUBCASE("unit rate ratios give the uniform distribution") {
    BirthDeathRates r;
    r.lambda.assign(4, 0.2);
    r.mu.assign(4, 0.2);
    auto ss = steady_state(r);
    for (int i = 0; i <= 4; ++i) CHECK(ss.pi[i] == doctest::Approx(0.2).epsilon(1e-12));
  }

  SUBCASE("absorbing top when the queue can never drain") {
    BirthDeathRates r;
    r.lambda.assign(5, 0.3);
    r.mu.assign(5, 0.0);
    auto ss = steady_state(r);
    CHECK(ss.pi[5] == doctest::Approx(1.0));
  }

  SUBCASE("matches power iteration on random irreducible chains") {
    std::mt19937_64 rng(7001);
    std::uniform_real_distribution<double> unit(0.01, 0.45);
    for (int trial = 0; trial < 40; ++trial) {
      BirthDeathRates r;
      int Q = 3 + (int)(rng() % 18);
      for (int i = 0; i < Q; ++i) {
        r.lambda.push_back(unit(rng));
        r.mu.push_back(unit(rng));
      }
      auto ss = steady_state(r);
      auto oracle = power_iteration(r);
      for (int i = 0; i <= Q; ++i) CHECK(std::abs(ss.pi[i] - oracle.pi[i]) < 1e-9);
    }
  }

  SUBCASE("matches power iteration on chains with zero rates inside") {
    std::mt19937_64 rng(7002);
    std::uniform_real_distribution<double> unit(0.01, 0.45);
    for (int trial = 0; trial < 40; ++trial) {
      BirthDeathRates r;
      int Q = 6 + (int)(rng() % 10);
      for (int i = 0; i < Q; ++i) {
        r.lambda.push_back(rng() % 5 == 0 ? 0.0 : unit(rng));
        r.mu.push_back(rng() % 5 == 0 ? 0.0 : unit(rng));
      }
      auto ss = steady_state(r);
      auto oracle = power_iteration(r);
      double total = 0.0;
      for (int i = 0; i <= Q; ++i) {
        CHECK(std::abs(ss.pi[i] - oracle.pi[i]) < 1e-8);
        total += ss.pi[i];
      }
      CHECK(total == doctest::Approx(1.0).epsilon(1e-10));
    }
  }
}

TEST_CASE("steady states of policies satisfy normalization and local balance") {
  std::mt19937_64 rng(7003);
  for (int trial = 0; trial < 50; ++trial) {
    auto inst = random_instance(rng, 1, 4, 2, 20, 0.15, 0.85);
    auto pol = random_policy(rng, inst.Q, inst.channel.M);
    auto rates = derive_rates(pol, inst.traffic, inst.channel);
    auto ss = steady_state(rates);

    double total = 0.0;
    for (double p : ss.pi) {
      CHECK(p >= -1e-12);
      total += p;
    }
    CHECK(std::abs(total - 1.0) < 1e-10);
    for (int i = 0; i < inst.Q; ++i) {
      if (rates.mu[i] > 0.0 || rates.lambda[i] == 0.0)
        CHECK(std::abs(ss.pi[i] * rates.lambda[i] - ss.pi[i + 1] * rates.mu[i]) < 1e-10);
    }
  }
}

TEST_CASE("average_delay") {
  auto traffic = TrafficModel::from_alpha(0.5);
  SteadyState empty;
  empty.pi = {1.0, 0.0, 0.0};
  CHECK(average_delay(empty, traffic) == 0.0);

  SteadyState uniform;
  uniform.pi.assign(11, 1.0 / 11.0);
  CHECK(average_delay(uniform, traffic) == doctest::Approx(10.0).epsilon(1e-12));
}

TEST_CASE("average_power") {
  auto channel = paper_channel();
  auto traffic = TrafficModel::from_alpha(0.5);

  SUBCASE("all-on policy pays exactly the power threshold") {
    Policy pol = Policy::all_on(8, 3);
    auto ss = steady_state(derive_rates(pol, traffic, channel));
    CHECK(ss.pi[0] == doctest::Approx(1.0));
    double p = average_power(pol, ss, traffic, channel);
    CHECK(p == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(p == doctest::Approx(power_threshold(traffic, channel)).epsilon(1e-14));
  }

  SUBCASE("all-off policy consumes nothing") {
    Policy pol = Policy::all_off(8, 3);
    auto ss = steady_state(derive_rates(pol, traffic, channel));
    CHECK(average_power(pol, ss, traffic, channel) == 0.0);
  }
}

TEST_CASE("packet_loss") {
  auto traffic = TrafficModel::from_alpha(0.3);

  SteadyState no_mass_at_top;
  no_mass_at_top.pi = {0.5, 0.5, 0.0};
  CHECK(packet_loss(no_mass_at_top, traffic) == 0.0);

  // Never-transmit policy: the chain absorbs at Q and every arrival there drops.
  ChannelModel channel = paper_channel();
  Policy pol = Policy::all_off(5, 3);
  auto ss = steady_state(derive_rates(pol, traffic, channel));
  CHECK(packet_loss(ss, traffic) == doctest::Approx(0.3).epsilon(1e-12));
}

TEST_CASE("packet_loss vanishes whenever the top up-rate is zero") {
  std::mt19937_64 rng(7004);
  for (int trial = 0; trial < 30; ++trial) {
    auto inst = random_instance(rng, 2, 3, 2, 12, 0.2, 0.8);
    auto pol = random_policy(rng, inst.Q, inst.channel.M);
    for (int m = 0; m < inst.channel.M; ++m) pol.g[inst.Q - 1][m] = 1.0;  // lambda_{Q-1} = 0
    auto ss = steady_state(derive_rates(pol, inst.traffic, inst.channel));
    CHECK(packet_loss(ss, inst.traffic) == 0.0);
  }
}

TEST_CASE("power_threshold") {
  auto channel = paper_channel();
  CHECK(power_threshold(TrafficModel::from_alpha(0.5), channel) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(power_threshold(TrafficModel::from_alpha(0.3), channel) == doctest::Approx(0.6).epsilon(1e-14));

  ChannelModel single;
  single.M = 1;
  single.eta = {1.0};
  single.P = {2.0};
  CHECK(power_threshold(TrafficModel::from_alpha(0.5), single) == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("raising a single f entry never increases delay") {
  std::mt19937_64 rng(7005);
  for (int trial = 0; trial < 25; ++trial) {
    auto inst = random_instance(rng, 2, 3, 3, 10, 0.2, 0.8);
    auto pol = random_policy(rng, inst.Q, inst.channel.M);
    auto base = evaluate_policy(pol, inst);

    int i = 1 + (int)(rng() % inst.Q);
    int m = (int)(rng() % inst.channel.M);
    Policy bumped = pol;
    bumped.f[i][m] = std::min(1.0, bumped.f[i][m] + 0.3);
    if (i == inst.Q) bumped.g[i][m] = bumped.f[i][m];  // keep the boundary row tied
    auto after = evaluate_policy(bumped, inst);
    CHECK(after.avg_delay <= base.avg_delay + 1e-9);
  }
}
