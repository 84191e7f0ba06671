#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

// Core domain types and closed-form queueing metrics for a single wireless
// link with Bernoulli arrivals, an M-state i.i.d. block-fading channel, and a
// probabilistic transmit policy. Everything here is a pure function of its
// inputs; values are immutable once built and safe to share across threads.

namespace dpsched {

using Matrix = std::vector<std::vector<double>>;  // (Q+1) x M tables

struct invalid_instance : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct structure_violation : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct inconsistent_solution : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct iteration_limit : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct infeasible_budget : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct wrong_arity : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline constexpr double kBalanceTol = 1e-10;   // normalization / local balance
inline constexpr double kOracleTol = 1e-9;     // cross-route equivalence
inline constexpr double kClampTol = 1e-12;     // negative-probability clamp

// M-state fading channel: state m occurs with probability eta[m] and requires
// transmit power P[m] for one packet. Power levels are sorted ascending
// (better channels need less power).
struct ChannelModel {
  int M = 0;
  std::vector<double> eta;
  std::vector<double> P;

  void validate() const {
    if (M < 1 || (int)eta.size() != M || (int)P.size() != M)
      throw invalid_instance("channel: M/eta/P sizes inconsistent");
    double s = 0.0;
    for (double e : eta) {
      if (!(e > 0.0)) throw invalid_instance("channel: eta entries must be > 0");
      s += e;
    }
    if (std::abs(s - 1.0) > 1e-12)
      throw invalid_instance("channel: eta must sum to 1, got " + std::to_string(s));
    for (int m = 0; m < M; ++m) {
      if (!(P[m] > 0.0)) throw invalid_instance("channel: power levels must be > 0");
      if (m > 0 && P[m] < P[m - 1])
        throw invalid_instance("channel: power levels must be non-decreasing");
    }
  }

  // sum of eta[0..k-1]
  double eta_prefix(int k) const {
    double s = 0.0;
    for (int m = 0; m < k; ++m) s += eta[m];
    return s;
  }
};

// Bernoulli arrivals with rate alpha; xi = (1-alpha)/alpha shows up throughout
// the balance equations, so it is stored once.
struct TrafficModel {
  double alpha = 0.0;
  double xi = 0.0;

  static TrafficModel from_alpha(double a) {
    TrafficModel t;
    t.alpha = a;
    t.xi = (1.0 - a) / a;
    t.validate();
    return t;
  }

  void validate() const {
    if (!(alpha > 0.0 && alpha < 1.0))
      throw invalid_instance("traffic: alpha must lie in (0,1)");
    if (!(xi > 0.0) || std::abs(xi - (1.0 - alpha) / alpha) > 1e-15 * std::max(1.0, xi))
      throw invalid_instance("traffic: xi must equal (1-alpha)/alpha");
  }
};

// Transmission-probability tables over (queue length, channel state).
// g applies on slots with a new arrival, f on slots without one.
// Row 0 of f is stored but never read: an empty queue with no arrival has
// nothing to send.
struct Policy {
  int Q = 0;
  Matrix g;  // (Q+1) x M
  Matrix f;  // (Q+1) x M, row 0 unused

  static Policy constant(int Q, int M, double gv, double fv) {
    Policy p;
    p.Q = Q;
    p.g.assign(Q + 1, std::vector<double>(M, gv));
    p.f.assign(Q + 1, std::vector<double>(M, fv));
    return p;
  }
  static Policy all_on(int Q, int M) { return constant(Q, M, 1.0, 1.0); }
  static Policy all_off(int Q, int M) { return constant(Q, M, 0.0, 0.0); }

  void validate(int M) const {
    if ((int)g.size() != Q + 1 || (int)f.size() != Q + 1)
      throw invalid_instance("policy: tables must have Q+1 rows");
    for (const auto* tab : {&g, &f})
      for (const auto& row : *tab) {
        if ((int)row.size() != M)
          throw invalid_instance("policy: tables must have M columns");
        for (double v : row)
          if (!(v >= 0.0 && v <= 1.0))
            throw invalid_instance("policy: probabilities must lie in [0,1]");
      }
  }
};

// Up/down transition probabilities of the induced birth-death chain.
// lambda[i] is the probability of i -> i+1 (0 <= i <= Q-1);
// mu[i] is the probability of i+1 -> i, i.e. mu[i] stores mu_{i+1}.
struct BirthDeathRates {
  std::vector<double> lambda;
  std::vector<double> mu;

  int buffer_size() const { return (int)lambda.size(); }
};

struct SteadyState {
  std::vector<double> pi;  // Q+1 entries

  int buffer_size() const { return (int)pi.size() - 1; }
};

struct Metrics {
  double avg_delay = 0.0;  // slots
  double avg_power = 0.0;  // watts
  double loss_prob = 0.0;
};

// A full problem instance: channel, traffic, buffer, and power budget.
struct SystemInstance {
  ChannelModel channel;
  TrafficModel traffic;
  int Q = 0;
  double p_max = 0.0;

  void validate() const {
    channel.validate();
    traffic.validate();
    if (Q < 1) throw invalid_instance("instance: Q must be >= 1");
    if (!(p_max > 0.0)) throw invalid_instance("instance: p_max must be > 0");
  }
};

// Birth-death rates of the chain induced by a policy:
//   lambda_i = alpha * sum_m eta_m (1 - g[i][m])
//   mu_i     = (1-alpha) * sum_m eta_m f[i][m]
inline BirthDeathRates derive_rates(const Policy& policy, const TrafficModel& traffic,
                                    const ChannelModel& channel) {
  const int Q = policy.Q;
  const int M = channel.M;
  if ((int)policy.g.size() != Q + 1 || (int)policy.f.size() != Q + 1 ||
      (Q >= 0 && ((int)policy.g[0].size() != M || (int)policy.f[0].size() != M)))
    throw invalid_instance("derive_rates: policy/channel dimension mismatch");

  BirthDeathRates r;
  r.lambda.resize(Q);
  r.mu.resize(Q);
  for (int i = 0; i < Q; ++i) {
    double hold = 0.0;
    for (int m = 0; m < M; ++m) hold += channel.eta[m] * (1.0 - policy.g[i][m]);
    r.lambda[i] = traffic.alpha * hold;
  }
  for (int i = 1; i <= Q; ++i) {
    double serve = 0.0;
    for (int m = 0; m < M; ++m) serve += channel.eta[m] * policy.f[i][m];
    r.mu[i - 1] = (1.0 - traffic.alpha) * serve;
  }
  return r;
}

// Stationary distribution of the birth-death chain. When every mu is positive
// the textbook product form applies. Otherwise the chain is reducible and the
// product formula divides by zero; we then take the limiting distribution of
// the chain started from an empty queue: the recurrent window [K, R] where
// R is the first level with lambda = 0 (top of the reachable set) and K the
// highest level at or below R whose down-rate vanishes. Within the window all
// interior rates are positive and local balance gives the product form again;
// everything outside the window is transient and carries zero mass.
inline SteadyState steady_state(const BirthDeathRates& rates) {
  const int Q = rates.buffer_size();
  std::vector<double> pi(Q + 1, 0.0);

  int R = Q;
  for (int i = 0; i < Q; ++i)
    if (rates.lambda[i] == 0.0) {
      R = i;
      break;
    }
  int K = 0;
  for (int k = 1; k <= R; ++k)
    if (rates.mu[k - 1] == 0.0) K = k;

  // Unnormalized products over the window; log-free since Q is modest.
  pi[K] = 1.0;
  double total = 1.0;
  double prod = 1.0;
  for (int i = K; i < R; ++i) {
    prod *= rates.lambda[i] / rates.mu[i];
    pi[i + 1] = prod;
    total += prod;
  }
  for (int i = K; i <= R; ++i) pi[i] /= total;

  SteadyState ss;
  ss.pi = std::move(pi);
  return ss;
}

// Little's law: mean queue length over arrival rate.
inline double average_delay(const SteadyState& ss, const TrafficModel& traffic) {
  double mean_q = 0.0;
  for (size_t i = 0; i < ss.pi.size(); ++i) mean_q += (double)i * ss.pi[i];
  return mean_q / traffic.alpha;
}

// Expected transmit power under (policy, stationary distribution):
//   sum_m (alpha * sum_i pi_i eta_m g[i][m] + (1-alpha) * sum_{i>=1} pi_i eta_m f[i][m]) P_m
inline double average_power(const Policy& policy, const SteadyState& ss,
                            const TrafficModel& traffic, const ChannelModel& channel) {
  const int Q = policy.Q;
  if (ss.buffer_size() != Q)
    throw invalid_instance("average_power: steady state / policy dimension mismatch");
  double total = 0.0;
  for (int m = 0; m < channel.M; ++m) {
    double on_arrival = 0.0, no_arrival = 0.0;
    for (int i = 0; i <= Q; ++i) on_arrival += ss.pi[i] * policy.g[i][m];
    for (int i = 1; i <= Q; ++i) no_arrival += ss.pi[i] * policy.f[i][m];
    total += channel.eta[m] *
             (traffic.alpha * on_arrival + (1.0 - traffic.alpha) * no_arrival) *
             channel.P[m];
  }
  return total;
}

// Overflow probability: an arrival while the buffer is full is dropped.
inline double packet_loss(const SteadyState& ss, const TrafficModel& traffic) {
  return traffic.alpha * ss.pi.back();
}

// Minimum average budget that admits zero queueing delay (transmit every
// arrival immediately regardless of channel state).
inline double power_threshold(const TrafficModel& traffic, const ChannelModel& channel) {
  double s = 0.0;
  for (int m = 0; m < channel.M; ++m) s += channel.eta[m] * channel.P[m];
  return traffic.alpha * s;
}

inline Metrics evaluate_policy(const Policy& policy, const SystemInstance& inst) {
  auto rates = derive_rates(policy, inst.traffic, inst.channel);
  auto ss = steady_state(rates);
  Metrics m;
  m.avg_delay = average_delay(ss, inst.traffic);
  m.avg_power = average_power(policy, ss, inst.traffic, inst.channel);
  m.loss_prob = packet_loss(ss, inst.traffic);
  return m;
}

}  // namespace dpsched
