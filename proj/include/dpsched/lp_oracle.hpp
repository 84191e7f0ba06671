#pragma once

#include <cmath>
#include <vector>

#include "dpsched/model.hpp"
#include "dpsched/simplex.hpp"

// Delay-minimization LP over the occupancy variables y[i][m] (the chance that
// the queue sits at length i when a packet goes out on channel state m, up to
// the eta weighting). Serves as the ground-truth oracle for the closed-form
// threshold solver: both must land on the same optimum.
//
// Variables are ordered i-major, m-minor: idx = i*M + m.

namespace dpsched {

struct LpProblem {
  LinearProgram lp;
  int Q = 0;
  int M = 0;
  bool has_power_row = false;  // first a_ub row is the budget constraint
};

enum class LpSolveStatus { optimal, infeasible };

struct LpSolution {
  LpSolveStatus status = LpSolveStatus::infeasible;
  Matrix y;  // (Q+1) x M
  double objective = 0.0;
};

namespace detail {

inline LpProblem build_lp_impl(const SystemInstance& inst, bool include_power_row,
                               bool power_objective) {
  inst.validate();
  const int Q = inst.Q;
  const int M = inst.channel.M;
  const double alpha = inst.traffic.alpha;
  const double xi = inst.traffic.xi;
  const auto& eta = inst.channel.eta;

  LpProblem prob;
  prob.Q = Q;
  prob.M = M;
  prob.has_power_row = include_power_row;

  auto idx = [M](int i, int m) { return i * M + m; };
  const int n = (Q + 1) * M;
  prob.lp.n = n;

  prob.lp.c.assign(n, 0.0);
  for (int i = 0; i <= Q; ++i)
    for (int m = 0; m < M; ++m)
      prob.lp.c[idx(i, m)] = power_objective
                                 ? alpha * eta[m] * inst.channel.P[m]
                                 : (double)i * eta[m] / alpha;

  // Normalization: sum_{i,m} eta_m y_{i,m} = 1.
  std::vector<double> norm(n, 0.0);
  for (int i = 0; i <= Q; ++i)
    for (int m = 0; m < M; ++m) norm[idx(i, m)] = eta[m];
  prob.lp.a_eq.push_back(std::move(norm));
  prob.lp.b_eq.push_back(1.0);

  if (include_power_row) {
    std::vector<double> power(n, 0.0);
    for (int i = 0; i <= Q; ++i)
      for (int m = 0; m < M; ++m) power[idx(i, m)] = alpha * eta[m] * inst.channel.P[m];
    prob.lp.a_ub.push_back(std::move(power));
    prob.lp.b_ub.push_back(inst.p_max);
  }

  // Structural bounds: y_{i,m} <= sum_n eta_n y_{i,n} + xi sum_n eta_n y_{i+1,n},
  // with the i = Q row keeping only the first sum (there is no level Q+1).
  for (int i = 0; i <= Q; ++i)
    for (int m = 0; m < M; ++m) {
      std::vector<double> row(n, 0.0);
      row[idx(i, m)] += 1.0;
      for (int nn = 0; nn < M; ++nn) {
        row[idx(i, nn)] -= eta[nn];
        if (i < Q) row[idx(i + 1, nn)] -= xi * eta[nn];
      }
      prob.lp.a_ub.push_back(std::move(row));
      prob.lp.b_ub.push_back(0.0);
    }

  return prob;
}

}  // namespace detail

inline LpProblem build_lp(const SystemInstance& inst) {
  return detail::build_lp_impl(inst, /*include_power_row=*/true,
                               /*power_objective=*/false);
}

inline LpSolution solve_lp(const LpProblem& prob) {
  SimplexResult res = simplex_solve(prob.lp);
  LpSolution sol;
  if (res.status == SimplexStatus::infeasible) return sol;
  sol.status = LpSolveStatus::optimal;
  sol.objective = res.objective;
  sol.y.assign(prob.Q + 1, std::vector<double>(prob.M, 0.0));
  for (int i = 0; i <= prob.Q; ++i)
    for (int m = 0; m < prob.M; ++m) sol.y[i][m] = res.x[i * prob.M + m];
  return sol;
}

// Least average power attainable under the occupancy constraints alone; the
// budget LP is infeasible exactly when p_max falls below this frontier.
inline double min_feasible_power(const SystemInstance& inst) {
  LpProblem prob = detail::build_lp_impl(inst, /*include_power_row=*/false,
                                         /*power_objective=*/true);
  SimplexResult res = simplex_solve(prob.lp);
  if (res.status != SimplexStatus::optimal)
    throw inconsistent_solution("min_feasible_power: frontier LP did not solve");
  return res.objective;
}

// pi_i = sum_m eta_m y_{i,m}.
inline SteadyState recover_pi(const Matrix& y, const ChannelModel& channel) {
  SteadyState ss;
  ss.pi.reserve(y.size());
  double total = 0.0;
  for (const auto& row : y) {
    double p = 0.0;
    for (int m = 0; m < channel.M; ++m) p += channel.eta[m] * row[m];
    ss.pi.push_back(std::max(p, 0.0));
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-8)
    throw inconsistent_solution("recover_pi: y rows do not normalize to 1");
  for (double& p : ss.pi) p /= total;
  return ss;
}

// Splits each y cell back into transmission probabilities via
// y_{i,m} = pi_i g_{i,m} + xi pi_{i+1} f_{i+1,m}. The split is not unique;
// the canonical convention serves from backlog first: f takes as much of the
// cell as it can, g absorbs the remainder.
inline Policy recover_policy(const Matrix& y, const SteadyState& pi,
                             const TrafficModel& traffic) {
  const int Q = (int)y.size() - 1;
  const int M = (int)y[0].size();
  const double xi = traffic.xi;
  constexpr double tol = 1e-7;

  Policy pol;
  pol.Q = Q;
  pol.g.assign(Q + 1, std::vector<double>(M, 0.0));
  pol.f.assign(Q + 1, std::vector<double>(M, 0.0));

  for (int i = 0; i <= Q; ++i) {
    double next_mass = (i < Q) ? xi * pi.pi[i + 1] : 0.0;
    double cap = pi.pi[i] + next_mass;
    for (int m = 0; m < M; ++m) {
      double yv = y[i][m];
      if (yv < -tol || yv > cap + tol)
        throw structure_violation("recover_policy: y cell outside [0, pi_i + xi pi_{i+1}]");
      yv = std::clamp(yv, 0.0, cap);

      double f = 0.0;
      double rem = yv;
      if (next_mass > 0.0) {
        f = std::min(1.0, yv / next_mass);
        rem = yv - next_mass * f;
      }
      double g = 0.0;
      if (pi.pi[i] > 0.0) {
        g = rem / pi.pi[i];
      } else if (rem > tol) {
        throw structure_violation("recover_policy: residual mass with pi_i = 0");
      }
      if (g > 1.0 + tol)
        throw structure_violation("recover_policy: g out of range");
      // Saturated and empty cells must come out exactly 1 / exactly 0: the
      // windowed chain solver keys reducibility off rates that are exactly
      // zero, and division noise here would otherwise leak mass above the
      // support of the recovered distribution.
      auto snap = [](double v) {
        if (v > 1.0 - tol) return 1.0;
        if (v < tol) return 0.0;
        return v;
      };
      pol.g[i][m] = snap(std::clamp(g, 0.0, 1.0));
      if (i < Q) pol.f[i + 1][m] = snap(f);
    }
  }
  return pol;
}

}  // namespace dpsched
