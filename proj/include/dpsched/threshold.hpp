#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include "dpsched/model.hpp"

// Closed-form solver for the delay-optimal policy. The optimum is a
// double-threshold rule: channel state m transmits once the queue reaches
// i_star[m] (thresholds ascending in m, best channel always at 0), with at
// most one channel allowed a probabilistic decision one level below its
// threshold to burn exactly the power budget. Candidate threshold profiles
// are scored through the phi/theta tables below and the best feasible one is
// returned; the LP oracle is the independent check on all of this.
//
// Channel indices are 0-based throughout (m_tilde in [1, M)).

namespace dpsched {

struct profile_infeasible : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ThresholdProfile {
  std::vector<int> i_star;       // size M, ascending, i_star[0] == 0
  std::optional<int> m_tilde;    // fractional channel, 0-based, never 0

  int top() const { return i_star.back(); }

  void validate(int Q) const {
    if (i_star.empty() || i_star.front() != 0)
      throw invalid_instance("profile: i_star[0] must be 0");
    for (size_t m = 1; m < i_star.size(); ++m)
      if (i_star[m] < i_star[m - 1])
        throw invalid_instance("profile: thresholds must be ascending");
    if (i_star.back() > Q)
      throw invalid_instance("profile: top threshold exceeds buffer size");
    if (m_tilde) {
      if (*m_tilde < 1 || *m_tilde >= (int)i_star.size())
        throw invalid_instance("profile: m_tilde out of range");
      if (i_star[*m_tilde] < 1)
        throw invalid_instance("profile: fractional channel needs threshold >= 1");
    }
  }
};

// Coefficient tables of the closed form. The stationary distribution of any
// candidate is an affine family
//   pi_i = pi0 * phi1[i] + w * phi2[i]
// where w is the occupancy mass of the fractional cell; normalization gives
// nu1, nu2 and the average power is alpha * (pi0 * theta1 + w * theta2).
struct ClosedFormTables {
  int support_top = 0;          // i_star[M-1]; pi vanishes above it
  std::vector<double> phi1;     // size support_top + 1
  std::vector<double> phi2;
  std::vector<int> gamma_of_i;  // active channel count per queue length
  std::vector<double> chi_of_k; // chi_of_k[k], k in 1..M
  double theta1 = 0.0;
  double theta2 = 0.0;
  double nu1 = 0.0;
  double nu2 = 0.0;
};

// Number of channel states whose threshold is <= i (always >= 1 since the
// best channel's threshold is pinned at 0).
inline int eval_gamma(const ThresholdProfile& profile, int i) {
  int k = 0;
  for (int t : profile.i_star)
    if (t <= i)
      ++k;
    else
      break;
  return k;
}

// chi(k) = (1 - sum_{m<k} eta_m) / (xi * sum_{m<k} eta_m): the up/down rate
// ratio of the chain when exactly the k best channel states transmit.
inline double eval_chi(const ChannelModel& channel, const TrafficModel& traffic, int k) {
  double s = channel.eta_prefix(k);
  return (1.0 - s) / (traffic.xi * s);
}

inline ClosedFormTables eval_tables(const SystemInstance& inst,
                                    const ThresholdProfile& profile) {
  profile.validate(inst.Q);
  const int M = inst.channel.M;
  const double xi = inst.traffic.xi;
  const int top = profile.top();

  ClosedFormTables t;
  t.support_top = top;
  t.chi_of_k.assign(M + 1, 0.0);
  for (int k = 1; k <= M; ++k) t.chi_of_k[k] = eval_chi(inst.channel, inst.traffic, k);
  t.gamma_of_i.resize(top + 1);
  for (int i = 0; i <= top; ++i) t.gamma_of_i[i] = eval_gamma(profile, i);

  // phi1: product of chi(gamma(n)) below each level, empty product = 1.
  t.phi1.assign(top + 1, 0.0);
  t.phi1[0] = 1.0;
  for (int i = 0; i < top; ++i) t.phi1[i + 1] = t.phi1[i] * t.chi_of_k[t.gamma_of_i[i]];

  // phi2: response of the tail to one unit of fractional mass at
  // (i_star[m_tilde]-1, m_tilde); zero at and below that level.
  t.phi2.assign(top + 1, 0.0);
  if (profile.m_tilde) {
    const int mt = *profile.m_tilde;
    const int j = profile.i_star[mt] - 1;
    const double s_active = inst.channel.eta_prefix(t.gamma_of_i[j]);
    t.phi2[j + 1] = -inst.channel.eta[mt] / (xi * s_active);
    for (int i = j + 1; i < top; ++i)
      t.phi2[i + 1] = t.phi2[i] * t.chi_of_k[t.gamma_of_i[i]];
  }

  for (int i = 0; i <= top; ++i) {
    t.nu1 += t.phi1[i];
    t.nu2 += t.phi2[i];
  }

  // theta: per-channel occupancy of the transmit region, weighted by P_m.
  // Levels strictly above the threshold are visited on both arrival and
  // no-arrival slots, hence the (1 + xi) weight.
  for (int m = 0; m < M; ++m) {
    double acc1 = t.phi1[profile.i_star[m]];
    double acc2 = t.phi2[profile.i_star[m]];
    for (int i = profile.i_star[m] + 1; i <= top; ++i) {
      acc1 += (1.0 + xi) * t.phi1[i];
      acc2 += (1.0 + xi) * t.phi2[i];
    }
    t.theta1 += inst.channel.eta[m] * acc1 * inst.channel.P[m];
    t.theta2 += inst.channel.eta[m] * acc2 * inst.channel.P[m];
  }
  if (profile.m_tilde)
    t.theta2 += inst.channel.eta[*profile.m_tilde] * inst.channel.P[*profile.m_tilde];

  return t;
}

namespace detail {

struct CandidateEval {
  double pi0 = 0.0;
  double w = 0.0;          // fractional cell occupancy y[j][m_tilde]
  double delay = 0.0;
  double power = 0.0;
  std::vector<double> pi;  // support_top + 1 entries
};

// Scores one (profile, m_tilde) candidate; nullopt when it cannot meet the
// budget with a valid distribution.
inline std::optional<CandidateEval> evaluate_candidate(const SystemInstance& inst,
                                                       const ThresholdProfile& profile,
                                                       const ClosedFormTables& t) {
  constexpr double tol = 1e-10;
  const double alpha = inst.traffic.alpha;
  const int top = t.support_top;

  CandidateEval ev;
  if (profile.m_tilde) {
    if (t.nu2 == 0.0) return std::nullopt;
    const double den = t.theta1 - t.nu1 * t.theta2 / t.nu2;
    if (std::abs(den) < 1e-14) return std::nullopt;
    ev.pi0 = (inst.p_max / alpha - t.theta2 / t.nu2) / den;
    if (!(ev.pi0 > 0.0 && ev.pi0 <= 1.0 + 1e-12)) return std::nullopt;
    ev.w = (1.0 - ev.pi0 * t.nu1) / t.nu2;
    if (ev.w < -tol) return std::nullopt;
  } else {
    ev.pi0 = 1.0 / t.nu1;
    ev.w = 0.0;
  }

  ev.pi.resize(top + 1);
  for (int i = 0; i <= top; ++i) {
    double p = ev.pi0 * t.phi1[i] + ev.w * t.phi2[i];
    if (p < -tol) return std::nullopt;
    ev.pi[i] = std::max(p, 0.0);
  }

  if (profile.m_tilde) {
    const int j = profile.i_star[*profile.m_tilde] - 1;
    const double next = (j + 1 <= top) ? ev.pi[j + 1] : 0.0;
    const double cap = ev.pi[j] + inst.traffic.xi * next;
    if (ev.w > cap + tol) return std::nullopt;
  }

  ev.power = alpha * (ev.pi0 * t.theta1 + ev.w * t.theta2);
  if (ev.power > inst.p_max + tol) return std::nullopt;

  double mean_q = 0.0;
  for (int i = 0; i <= top; ++i) mean_q += (double)i * ev.pi[i];
  ev.delay = mean_q / alpha;
  return ev;
}

}  // namespace detail

// pi0 of a candidate profile from the budget-tightness equation (fractional
// case) or from normalization alone (no fractional channel, nu2 == 0).
inline double solve_pi0(const SystemInstance& inst, const ClosedFormTables& t) {
  if (t.nu2 == 0.0) return 1.0 / t.nu1;
  const double den = t.theta1 - t.nu1 * t.theta2 / t.nu2;
  if (std::abs(den) < 1e-14)
    throw profile_infeasible("solve_pi0: degenerate power map for this profile");
  double pi0 = (inst.p_max / inst.traffic.alpha - t.theta2 / t.nu2) / den;
  if (!(pi0 > 0.0 && pi0 <= 1.0 + 1e-12))
    throw profile_infeasible("solve_pi0: pi0 outside (0,1], profile cannot meet budget");
  return std::min(pi0, 1.0);
}

// Occupancy matrix of a threshold solution: zero below the thresholds,
// pi_i + xi pi_{i+1} at and above them, and the eta-weighted boundary value
// at the fractional cell.
inline Matrix assemble_y(const SystemInstance& inst, const ThresholdProfile& profile,
                         const SteadyState& pi_star) {
  profile.validate(inst.Q);
  const int Q = inst.Q;
  const int M = inst.channel.M;
  const double xi = inst.traffic.xi;
  const auto& pi = pi_star.pi;
  if ((int)pi.size() != Q + 1)
    throw invalid_instance("assemble_y: pi has wrong length");

  Matrix y(Q + 1, std::vector<double>(M, 0.0));
  for (int m = 0; m < M; ++m) {
    for (int i = profile.i_star[m]; i <= Q; ++i) {
      double next = (i < Q) ? pi[i + 1] : 0.0;
      y[i][m] = pi[i] + xi * next;
    }
    const int j = profile.i_star[m] - 1;
    if (j >= 0 && profile.m_tilde && *profile.m_tilde == m) {
      double hi = 0.0, lo = 0.0;
      for (int n = m; n < M; ++n) hi += inst.channel.eta[n];
      for (int n = 0; n < m; ++n) lo += inst.channel.eta[n];
      double v = (hi * pi[j] - lo * xi * pi[j + 1]) / inst.channel.eta[m];
      if (v < -1e-10)
        throw structure_violation("assemble_y: negative boundary occupancy");
      y[j][m] = std::max(v, 0.0);
    }
  }

  // The rows must reproduce pi under the eta weighting.
  for (int i = 0; i <= Q; ++i) {
    double p = 0.0;
    for (int m = 0; m < M; ++m) p += inst.channel.eta[m] * y[i][m];
    if (std::abs(p - pi[i]) > 1e-8)
      throw structure_violation("assemble_y: y rows inconsistent with pi");
  }
  return y;
}

// Transmission tables of the threshold rule: off below threshold-1, on at and
// above the threshold, fractional only at the m_tilde boundary cell (split
// with the same backlog-first convention as the LP policy recovery).
inline Policy derive_policy(const SystemInstance& inst, const ThresholdProfile& profile,
                            const SteadyState& pi_star, const Matrix& y_star) {
  profile.validate(inst.Q);
  const int Q = inst.Q;
  const int M = inst.channel.M;
  const double xi = inst.traffic.xi;
  const auto& pi = pi_star.pi;

  Policy pol;
  pol.Q = Q;
  pol.g.assign(Q + 1, std::vector<double>(M, 0.0));
  pol.f.assign(Q + 1, std::vector<double>(M, 0.0));

  for (int m = 0; m < M; ++m) {
    for (int i = 0; i <= Q; ++i) {
      double v;
      if (i >= profile.i_star[m])
        v = 1.0;
      else if (i == profile.i_star[m] - 1 && profile.m_tilde && *profile.m_tilde == m)
        v = -1.0;  // fractional cell, split below
      else
        v = 0.0;

      if (v >= 0.0) {
        pol.g[i][m] = v;
        if (i < Q) pol.f[i + 1][m] = v;
        continue;
      }

      const double w = y_star[i][m];
      const double next_mass = (i < Q) ? xi * pi[i + 1] : 0.0;
      double f = 0.0, rem = w;
      if (next_mass > 0.0) {
        f = std::min(1.0, w / next_mass);
        rem = w - next_mass * f;
      }
      double g = 0.0;
      if (pi[i] > 0.0)
        g = rem / pi[i];
      else if (rem > 1e-9)
        throw structure_violation("derive_policy: fractional mass with pi_i = 0");
      if (g > 1.0 + 1e-9)
        throw structure_violation("derive_policy: fractional cell overflows");
      pol.g[i][m] = std::clamp(g, 0.0, 1.0);
      if (i < Q) pol.f[i + 1][m] = std::clamp(f, 0.0, 1.0);
    }
  }
  return pol;
}

struct ThresholdSolution {
  ThresholdProfile profile;
  SteadyState pi_star;
  Matrix y_star;
  Policy policy;
  double delay = 0.0;
  double power = 0.0;
};

namespace detail {

inline ThresholdSolution finish_solution(const SystemInstance& inst,
                                         const ThresholdProfile& profile,
                                         const CandidateEval& ev) {
  ThresholdSolution sol;
  sol.profile = profile;
  sol.pi_star.pi.assign(inst.Q + 1, 0.0);
  for (size_t i = 0; i < ev.pi.size(); ++i) sol.pi_star.pi[i] = ev.pi[i];
  sol.y_star = assemble_y(inst, profile, sol.pi_star);
  sol.policy = derive_policy(inst, profile, sol.pi_star, sol.y_star);
  sol.delay = ev.delay;
  sol.power = ev.power;
  return sol;
}

// Enumerates monotone threshold vectors (i_star[0] fixed at 0) in
// lexicographic order and calls visit(profile) for each.
template <typename Visit>
void for_each_profile(int M, int Q, Visit&& visit) {
  std::vector<int> th(M, 0);
  while (true) {
    ThresholdProfile p;
    p.i_star = th;
    visit(p);
    int k = M - 1;
    while (k >= 1) {
      if (th[k] < Q) {
        ++th[k];
        for (int t = k + 1; t < M; ++t) th[t] = th[k];
        break;
      }
      --k;
    }
    if (k < 1) break;
  }
}

}  // namespace detail

// Optimal threshold solution for an instance. Exhaustive search over monotone
// profiles and fractional-channel choices; candidate counts stay in the tens
// of thousands for the buffer sizes this targets, so no bisection shortcut is
// taken. Ties in delay resolve to the lexicographically smallest profile
// (profiles are visited in that order and only strict improvements win).
inline ThresholdSolution solve(const SystemInstance& inst) {
  inst.validate();
  const int M = inst.channel.M;
  const int Q = inst.Q;

  if (inst.p_max >= power_threshold(inst.traffic, inst.channel) - 1e-12) {
    ThresholdProfile zero;
    zero.i_star.assign(M, 0);
    auto tables = eval_tables(inst, zero);
    auto ev = detail::evaluate_candidate(inst, zero, tables);
    if (!ev) throw inconsistent_solution("solve: zero-delay candidate rejected");
    return detail::finish_solution(inst, zero, *ev);
  }

  std::optional<ThresholdProfile> best_profile;
  detail::CandidateEval best_ev;
  double best_delay = std::numeric_limits<double>::infinity();

  detail::for_each_profile(M, Q, [&](ThresholdProfile& profile) {
    auto consider = [&](const ThresholdProfile& p) {
      auto tables = eval_tables(inst, p);
      auto ev = detail::evaluate_candidate(inst, p, tables);
      if (ev && ev->delay < best_delay - 1e-12) {
        best_delay = ev->delay;
        best_profile = p;
        best_ev = std::move(*ev);
      }
    };
    consider(profile);
    for (int mt = 1; mt < M; ++mt) {
      if (profile.i_star[mt] < 1) continue;
      profile.m_tilde = mt;
      consider(profile);
    }
    profile.m_tilde.reset();
  });

  if (!best_profile)
    throw infeasible_budget("solve: p_max below the feasible power frontier");
  return detail::finish_solution(inst, *best_profile, best_ev);
}

// Closed-form threshold for the two-state channel, given the optimal pi0.
inline int two_state_threshold(const SystemInstance& inst, double pi0) {
  if (inst.channel.M != 2)
    throw wrong_arity("two_state_threshold: requires M = 2");
  if (!(pi0 > 0.0 && pi0 <= 1.0))
    throw invalid_instance("two_state_threshold: pi0 must lie in (0,1]");
  if (inst.p_max >= power_threshold(inst.traffic, inst.channel) - 1e-12) return 0;

  const double ratio = (1.0 - inst.channel.eta[0]) / (inst.channel.eta[0] * inst.traffic.xi);
  if (std::abs(ratio - 1.0) < 1e-12) return (int)std::floor(1.0 / pi0 + 1e-9);
  const double arg = 1.0 - (1.0 - ratio) / pi0;
  if (!(arg > 0.0))
    throw inconsistent_solution("two_state_threshold: pi0 inconsistent with a finite threshold");
  return (int)std::floor(std::log(arg) / std::log(ratio) + 1e-9);
}

}  // namespace dpsched
