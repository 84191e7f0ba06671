#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "dpsched/model.hpp"

// Seeded slot-level Monte Carlo of the queue/channel/policy dynamics.
// Three independent mt19937_64 substreams (arrivals, channel, decisions) are
// derived from one seed via splitmix64, and one variate is drawn from each
// stream every slot, so reports are bit-identical for identical inputs and a
// test can reseed one randomness source without disturbing the others.

namespace dpsched {

struct SimConfig {
  std::uint64_t n_slots = 1000000;
  std::uint64_t seed = 0;
  std::uint64_t warmup_slots = 10000;

  void validate() const {
    if (n_slots < 1) throw invalid_instance("sim: n_slots must be >= 1");
    if (warmup_slots >= n_slots)
      throw invalid_instance("sim: warmup_slots must be < n_slots");
  }
};

struct SimReport {
  // Statistics over the post-warmup window.
  double mean_queue = 0.0;
  double empirical_delay = 0.0;  // mean_queue / alpha
  double empirical_power = 0.0;
  std::uint64_t drop_count = 0;
  std::uint64_t transmit_count = 0;
  std::vector<std::uint64_t> per_state_occupancy;  // queue length histogram

  // Full-run integer counters; arrivals_accepted == departures + final_queue.
  std::uint64_t arrivals_accepted = 0;
  std::uint64_t departures = 0;
  std::uint64_t final_queue = 0;
};

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9e3779b97f4a7c15ull;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

// Uniform in [0,1) from the high 53 bits; avoids the implementation-defined
// std::uniform_real_distribution so runs match across platforms.
inline double uniform01(std::mt19937_64& rng) {
  return (double)(rng() >> 11) * 0x1.0p-53;
}

}  // namespace detail

inline SimReport simulate(const Policy& policy, const SystemInstance& inst,
                          const SimConfig& cfg) {
  inst.validate();
  policy.validate(inst.channel.M);
  cfg.validate();
  if (policy.Q != inst.Q)
    throw invalid_instance("simulate: policy buffer size differs from instance");

  const int Q = inst.Q;
  const int M = inst.channel.M;
  const double alpha = inst.traffic.alpha;

  std::uint64_t s = cfg.seed;
  std::mt19937_64 rng_arrival(detail::splitmix64(s));
  std::mt19937_64 rng_channel(detail::splitmix64(s));
  std::mt19937_64 rng_decision(detail::splitmix64(s));

  std::vector<double> eta_cdf(M);
  double acc = 0.0;
  for (int m = 0; m < M; ++m) {
    acc += inst.channel.eta[m];
    eta_cdf[m] = acc;
  }
  eta_cdf[M - 1] = 1.0;

  SimReport rep;
  rep.per_state_occupancy.assign(Q + 1, 0);
  std::vector<std::uint64_t> transmit_per_state(M, 0);
  std::uint64_t queue_sum = 0;

  int q = 0;
  for (std::uint64_t t = 0; t < cfg.n_slots; ++t) {
    const bool measured = t >= cfg.warmup_slots;
    const bool arrival = detail::uniform01(rng_arrival) < alpha;
    const double uc = detail::uniform01(rng_channel);
    int m = 0;
    while (m < M - 1 && uc >= eta_cdf[m]) ++m;
    const double ud = detail::uniform01(rng_decision);

    const bool dropped = arrival && q == Q;
    const int q_after_arrival = dropped ? Q : q + (arrival ? 1 : 0);
    if (dropped && measured) ++rep.drop_count;
    if (arrival && !dropped) ++rep.arrivals_accepted;

    // Arrival slots use the g rule, no-arrival slots the f rule, both read at
    // the pre-arrival queue length. When the arrival overflows the buffer the
    // scheduler still follows the g rule and radiates, but that transmission
    // carries the packet that was just lost: power is spent, yet the queue
    // does not move. This is the one convention under which the simulated
    // chain, the analytic power expression, and the loss probability all
    // agree exactly for every policy, including at the full-buffer boundary.
    double p_tx = 0.0;
    if (arrival)
      p_tx = policy.g[q][m];
    else if (q > 0)
      p_tx = policy.f[q][m];

    const bool radiate = q_after_arrival > 0 && ud < p_tx;
    const bool transmit = radiate && !dropped;
    q = q_after_arrival - (transmit ? 1 : 0);
    if (radiate && measured) ++transmit_per_state[m];
    if (transmit) {
      ++rep.departures;
      if (measured) ++rep.transmit_count;
    }
    if (measured) {
      ++rep.per_state_occupancy[q];
      queue_sum += (std::uint64_t)q;
    }
  }
  rep.final_queue = (std::uint64_t)q;

  const double n_measured = (double)(cfg.n_slots - cfg.warmup_slots);
  rep.mean_queue = (double)queue_sum / n_measured;
  rep.empirical_delay = rep.mean_queue / alpha;
  double power = 0.0;
  for (int m = 0; m < M; ++m) power += (double)transmit_per_state[m] * inst.channel.P[m];
  rep.empirical_power = power / n_measured;
  return rep;
}

inline SteadyState empirical_distribution(const SimReport& report) {
  std::uint64_t total = 0;
  for (auto c : report.per_state_occupancy) total += c;
  if (total == 0) throw invalid_instance("empirical_distribution: empty histogram");
  SteadyState ss;
  ss.pi.reserve(report.per_state_occupancy.size());
  for (auto c : report.per_state_occupancy) ss.pi.push_back((double)c / (double)total);
  return ss;
}

}  // namespace dpsched
