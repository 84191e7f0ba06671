#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

#include "dpsched/model.hpp"

// Self-contained dense two-phase simplex for the small LPs this project
// builds ((Q+1)*M <= a few hundred variables). These LPs are extremely
// degenerate (hundreds of zero right-hand sides), so three safeguards are
// layered on top of the textbook method:
//   1. a deterministic tiny perturbation of the right-hand side breaks the
//      degenerate ties that otherwise cause stalling and cycling;
//   2. after the final iteration the vertex is recomputed from the original
//      unperturbed data by LU-factoring the basis columns, discarding any
//      drift the rank-1 tableau updates accumulated;
//   3. the recomputed vertex is validated against the original constraints,
//      so a numerically corrupted run cannot report an infeasible point as
//      optimal.

namespace dpsched {

struct LinearProgram {
  int n = 0;                 // variables, all constrained to x >= 0
  std::vector<double> c;     // minimize c . x
  Matrix a_eq;
  std::vector<double> b_eq;
  Matrix a_ub;               // a_ub . x <= b_ub
  std::vector<double> b_ub;
};

enum class SimplexStatus { optimal, infeasible };

struct SimplexResult {
  SimplexStatus status = SimplexStatus::infeasible;
  std::vector<double> x;
  double objective = 0.0;
};

namespace detail {

inline constexpr double kPivotTol = 1e-10;
inline constexpr double kGoodPivot = 1e-7;
inline constexpr double kCostTol = 1e-9;
inline constexpr double kPerturb = 1e-11;
inline constexpr double kResidualTol = 1e-6;
inline constexpr int kStallLimit = 100;

class Tableau {
 public:
  // Layout: columns [0, n) structural, [n, n + n_slack) slacks,
  // [n + n_slack, total) artificials; last column is the RHS.
  Tableau(const LinearProgram& lp, int max_iter, double perturb)
      : max_iter_(max_iter), perturb_(perturb) {
    n_ = lp.n;
    const int m_eq = (int)lp.a_eq.size();
    const int m_ub = (int)lp.a_ub.size();
    m_ = m_eq + m_ub;
    n_slack_ = m_ub;
    n_total_ = n_ + n_slack_;  // artificials appended below as needed

    rows_.assign(m_, std::vector<double>(n_total_ + 1, 0.0));
    basis_.assign(m_, -1);

    for (int r = 0; r < m_eq; ++r) {
      for (int j = 0; j < n_; ++j) rows_[r][j] = lp.a_eq[r][j];
      rows_[r][n_total_] = lp.b_eq[r];
    }
    for (int r = 0; r < m_ub; ++r) {
      auto& row = rows_[m_eq + r];
      for (int j = 0; j < n_; ++j) row[j] = lp.a_ub[r][j];
      row[n_ + r] = 1.0;
      row[n_total_] = lp.b_ub[r];
    }
    for (int r = 0; r < m_; ++r)
      if (rows_[r][n_total_] < 0.0)
        for (double& v : rows_[r]) v = -v;

    // Snapshot the exact system before perturbing; the final vertex is
    // recomputed against this copy.
    orig_rows_ = rows_;
    row_ids_.resize(m_);
    for (int r = 0; r < m_; ++r) row_ids_[r] = r;

    // Deterministic perturbation: strictly increasing with the row index so
    // no two right-hand sides tie. The equality rows (first) get the
    // smallest nudge.
    for (int r = 0; r < m_; ++r)
      rows_[r][n_total_] += perturb_ * (1.0 + 0.618 * r);

    // Slack columns with coefficient +1 seed the basis; remaining rows get
    // an artificial variable each.
    std::vector<int> needs_artificial;
    for (int r = 0; r < m_; ++r) {
      int slack = -1;
      if (r >= m_eq) {
        int j = n_ + (r - m_eq);
        if (rows_[r][j] > 0.0) slack = j;
      }
      if (slack >= 0)
        basis_[r] = slack;
      else
        needs_artificial.push_back(r);
    }
    n_artificial_ = (int)needs_artificial.size();
    if (n_artificial_ > 0) {
      auto widen = [&](Matrix& mat) {
        for (auto& row : mat) {
          double rhs = row.back();
          row.back() = 0.0;
          row.insert(row.end() - 1, n_artificial_, 0.0);
          row.back() = rhs;
        }
      };
      widen(rows_);
      widen(orig_rows_);
      for (int k = 0; k < n_artificial_; ++k) {
        int r = needs_artificial[k];
        rows_[r][n_total_ + k] = 1.0;
        orig_rows_[r][n_total_ + k] = 1.0;
        basis_[r] = n_total_ + k;
      }
    }
    total_cols_ = n_total_ + n_artificial_;
  }

  SimplexResult solve(const LinearProgram& lp) {
    SimplexResult res;
    if (n_artificial_ > 0) {
      std::vector<double> phase1_cost(total_cols_, 0.0);
      for (int j = n_total_; j < total_cols_; ++j) phase1_cost[j] = 1.0;
      set_objective(phase1_cost);
      run();
      if (objective_value() > 1e-8) return res;  // status infeasible
      purge_artificials();
    }
    phase1_done_ = true;

    std::vector<double> cost(total_cols_, 0.0);
    for (int j = 0; j < n_; ++j) cost[j] = lp.c[j];
    set_objective(cost);
    run();

    // The perturbed run can finish on a basis whose exact (unperturbed)
    // basic solution has negative components: perturbed-feasible but not
    // feasible for the original data. Reduced costs are nonnegative at this
    // point, so a few dual simplex steps on the unperturbed right-hand side
    // walk to a neighbouring basis that is feasible both ways.
    for (int attempt = 0; attempt < 4; ++attempt) {
      std::vector<double> xb = refactored_basics();
      double worst = 0.0;
      for (double v : xb) worst = std::min(worst, v);
      if (worst >= -1e-9) break;
      for (int r = 0; r < m_; ++r) rows_[r][total_cols_] = xb[r];
      if (!dual_cleanup()) break;  // validation below rejects the leftovers
    }

    std::vector<double> x = refactored_solution();
    if (!validate(lp, x)) return res;  // status infeasible

    res.status = SimplexStatus::optimal;
    res.x.assign(x.begin(), x.begin() + n_);
    res.objective = 0.0;
    for (int j = 0; j < n_; ++j) res.objective += lp.c[j] * res.x[j];
    return res;
  }

 private:
  void set_objective(const std::vector<double>& cost) {
    obj_.assign(total_cols_ + 1, 0.0);
    for (int j = 0; j < total_cols_; ++j) obj_[j] = cost[j];
    for (int r = 0; r < m_; ++r) {
      double cb = cost[basis_[r]];
      if (cb == 0.0) continue;
      for (int j = 0; j <= total_cols_; ++j) obj_[j] -= cb * rows_[r][j];
    }
  }

  double objective_value() const { return -obj_.back(); }

  // Returns the entering column, or -1 at optimality.
  int price(bool bland) const {
    int best = -1;
    double best_cost = -kCostTol;
    for (int j = 0; j < total_cols_; ++j) {
      if (barred_[j]) continue;
      double rc = obj_[j];
      if (bland) {
        if (rc < -kCostTol) return j;
      } else if (rc < best_cost) {
        best_cost = rc;
        best = j;
      }
    }
    return best;
  }

  void run() {
    barred_.assign(total_cols_, false);
    // Artificials never re-enter once phase 1 is done.
    if (phase1_done_)
      for (int j = n_total_; j < total_cols_; ++j) barred_[j] = true;

    bool bland = false;
    int stall = 0;
    double last_obj = objective_value();
    for (int iter = 0; iter < max_iter_; ++iter) {
      // During phase 1 the objective is the total artificial mass; once it
      // is far below the feasibility acceptance threshold, grinding on for
      // exact reduced-cost optimality only accumulates roundoff on a
      // degenerate vertex, so stop here.
      if (!phase1_done_ && objective_value() <= 1e-10) return;
      int enter = price(bland);
      if (enter < 0) return;
      // Ratio test. Negative RHS entries are roundoff from degenerate
      // pivots; treating them as zero keeps the basis from drifting
      // infeasible. Small pivot elements amplify that noise, so candidates
      // below kGoodPivot are used only when nothing better exists.
      auto select_leaving = [&](double min_pivot) {
        int leave = -1;
        double best_ratio = std::numeric_limits<double>::infinity();
        for (int r = 0; r < m_; ++r) {
          double a = rows_[r][enter];
          if (a <= min_pivot) continue;
          double ratio = std::max(rows_[r].back(), 0.0) / a;
          bool tie = leave >= 0 && ratio < best_ratio + 1e-12 && ratio > best_ratio - 1e-12;
          bool better = tie ? (bland ? basis_[r] < basis_[leave]
                                     : a > rows_[leave][enter])
                            : ratio < best_ratio - 1e-12;
          if (leave < 0 || better) {
            best_ratio = ratio;
            leave = r;
          }
        }
        return leave;
      };
      int leave = select_leaving(kGoodPivot);
      if (leave < 0) leave = select_leaving(kPivotTol);
      if (leave < 0)
        throw iteration_limit("simplex: unbounded direction (model bug)");
      pivot(leave, enter);

      double now = objective_value();
      if (last_obj - now < 1e-13) {
        if (++stall >= kStallLimit) bland = true;  // permanent: Bland cannot cycle
      } else {
        stall = 0;
      }
      last_obj = now;
    }
    throw iteration_limit("simplex: iteration limit exceeded");
  }

  void pivot(int r, int j) {
    auto& prow = rows_[r];
    double inv = 1.0 / prow[j];
    for (double& v : prow) v *= inv;
    prow[j] = 1.0;
    for (int k = 0; k < m_; ++k) {
      if (k == r) continue;
      double factor = rows_[k][j];
      if (factor == 0.0) continue;
      auto& row = rows_[k];
      for (int t = 0; t <= total_cols_; ++t) row[t] -= factor * prow[t];
      row[j] = 0.0;
    }
    double factor = obj_[j];
    if (factor != 0.0) {
      for (int t = 0; t <= total_cols_; ++t) obj_[t] -= factor * prow[t];
      obj_[j] = 0.0;
    }
    basis_[r] = j;
  }

  // After phase 1: pivot basic artificials out where possible; a row whose
  // artificial cannot leave is redundant and is blanked.
  void purge_artificials() {
    phase1_done_ = true;
    for (int r = 0; r < m_; ++r) {
      if (basis_[r] < n_total_) continue;
      int enter = -1;
      for (int j = 0; j < n_total_; ++j)
        if (std::abs(rows_[r][j]) > kPivotTol) {
          enter = j;
          break;
        }
      if (enter >= 0) {
        pivot(r, enter);
      } else {
        for (double& v : rows_[r]) v = 0.0;
        basis_[r] = -1;
      }
    }
    // Drop blanked rows entirely.
    int w = 0;
    for (int r = 0; r < m_; ++r)
      if (basis_[r] >= 0) {
        if (w != r) {
          rows_[w] = std::move(rows_[r]);
          basis_[w] = basis_[r];
          row_ids_[w] = row_ids_[r];
        }
        ++w;
      }
    rows_.resize(w);
    basis_.resize(w);
    row_ids_.resize(w);
    m_ = w;
  }

  // Recompute the basic solution from the unperturbed snapshot: solve
  // B x_B = b for the columns currently in the basis, via dense LU with
  // partial pivoting plus two rounds of iterative refinement (the optimal
  // bases here can be ill-conditioned enough, ~1e10, that a plain solve
  // leaves residuals near the validation tolerance). Falls back to the
  // tableau values if the basis matrix is numerically singular in the
  // original data.
  std::vector<double> refactored_solution() const {
    std::vector<double> full(total_cols_, 0.0);
    std::vector<double> xb = refactored_basics();
    for (int r = 0; r < m_; ++r) full[basis_[r]] = std::max(xb[r], 0.0);
    return full;
  }

  // Exact basic values in the unperturbed data, aligned with the tableau
  // rows; may contain negative entries when the basis is only
  // perturbed-feasible.
  std::vector<double> refactored_basics() const {
    // LU = P·B with L's multipliers stored below the diagonal.
    Matrix LU(m_, std::vector<double>(m_, 0.0));
    for (int r = 0; r < m_; ++r) {
      const auto& orig = orig_rows_[row_ids_[r]];
      for (int k = 0; k < m_; ++k) LU[r][k] = orig[basis_[k]];
    }
    std::vector<int> perm(m_);
    for (int r = 0; r < m_; ++r) perm[r] = r;
    for (int col = 0; col < m_; ++col) {
      int piv = col;
      for (int r = col + 1; r < m_; ++r)
        if (std::abs(LU[r][col]) > std::abs(LU[piv][col])) piv = r;
      if (std::abs(LU[piv][col]) < 1e-13) {
        std::vector<double> fallback(m_);
        for (int r = 0; r < m_; ++r) fallback[r] = rows_[r].back();
        return fallback;
      }
      std::swap(LU[col], LU[piv]);
      std::swap(perm[col], perm[piv]);
      for (int r = col + 1; r < m_; ++r) {
        double f = LU[r][col] / LU[col][col];
        LU[r][col] = f;
        if (f == 0.0) continue;
        for (int k = col + 1; k < m_; ++k) LU[r][k] -= f * LU[col][k];
      }
    }
    auto lu_solve = [&](const std::vector<double>& rhs) {
      std::vector<double> v(m_);
      for (int r = 0; r < m_; ++r) {
        double s = rhs[perm[r]];
        for (int k = 0; k < r; ++k) s -= LU[r][k] * v[k];
        v[r] = s;
      }
      for (int r = m_ - 1; r >= 0; --r) {
        double s = v[r];
        for (int k = r + 1; k < m_; ++k) s -= LU[r][k] * v[k];
        v[r] = s / LU[r][r];
      }
      return v;
    };
    std::vector<double> b(m_);
    for (int r = 0; r < m_; ++r) b[r] = orig_rows_[row_ids_[r]][total_cols_];
    std::vector<double> xb = lu_solve(b);
    for (int pass = 0; pass < 2; ++pass) {
      std::vector<double> resid(m_);
      for (int r = 0; r < m_; ++r) {
        const auto& orig = orig_rows_[row_ids_[r]];
        double s = b[r];
        for (int k = 0; k < m_; ++k) s -= orig[basis_[k]] * xb[k];
        resid[r] = s;
      }
      std::vector<double> delta = lu_solve(resid);
      for (int r = 0; r < m_; ++r) xb[r] += delta[r];
    }
    return xb;
  }

  // Dual simplex on the current tableau (whose RHS holds the exact
  // unperturbed basic values): repeatedly drives the most negative basic
  // variable out, entering the column that keeps reduced costs nonnegative.
  // Returns false when no entering column exists for some negative row.
  bool dual_cleanup() {
    for (int iter = 0; iter < max_iter_; ++iter) {
      int leave = -1;
      double most = -1e-9;
      for (int r = 0; r < m_; ++r)
        if (rows_[r][total_cols_] < most) {
          most = rows_[r][total_cols_];
          leave = r;
        }
      if (leave < 0) return true;
      int enter = -1;
      double best = std::numeric_limits<double>::infinity();
      for (int j = 0; j < total_cols_; ++j) {
        if (barred_[j]) continue;
        double a = rows_[leave][j];
        if (a >= -kPivotTol) continue;
        double ratio = std::max(obj_[j], 0.0) / -a;
        if (ratio < best - 1e-12 ||
            (ratio < best + 1e-12 && (enter < 0 || -a > -rows_[leave][enter]))) {
          best = ratio;
          enter = j;
        }
      }
      if (enter < 0) return false;
      pivot(leave, enter);
    }
    return false;
  }

  // Accept the vertex only if it satisfies the original constraints; a
  // corrupted run must surface as infeasible, never as a bogus optimum.
  static bool validate(const LinearProgram& lp, const std::vector<double>& x) {
    for (size_t r = 0; r < lp.a_eq.size(); ++r) {
      double act = 0.0;
      for (int j = 0; j < lp.n; ++j) act += lp.a_eq[r][j] * x[j];
      if (std::abs(act - lp.b_eq[r]) > kResidualTol * std::max(1.0, std::abs(lp.b_eq[r])))
        return false;
    }
    for (size_t r = 0; r < lp.a_ub.size(); ++r) {
      double act = 0.0;
      for (int j = 0; j < lp.n; ++j) act += lp.a_ub[r][j] * x[j];
      if (act > lp.b_ub[r] + kResidualTol * std::max(1.0, std::abs(lp.b_ub[r])))
        return false;
    }
    return true;
  }

  int n_ = 0, m_ = 0, n_slack_ = 0, n_artificial_ = 0;
  int n_total_ = 0, total_cols_ = 0;
  int max_iter_ = 0;
  double perturb_ = kPerturb;
  bool phase1_done_ = false;
  Matrix rows_;
  Matrix orig_rows_;
  std::vector<int> row_ids_;
  std::vector<double> obj_;
  std::vector<int> basis_;
  std::vector<bool> barred_;
};

}  // namespace detail

inline SimplexResult simplex_solve(const LinearProgram& lp, int max_iter = 200000) {
  // The perturbed run occasionally terminates on a basis that is infeasible
  // in the unperturbed data; the validated refactorization rejects such a
  // vertex, and the solve is retried with a coarser perturbation, which
  // breaks the degenerate ties in a different direction. A genuinely
  // infeasible program fails every retry the same way.
  SimplexResult res;
  for (double scale : {1.0, 1e2, 1e4}) {
    detail::Tableau tab(lp, max_iter, detail::kPerturb * scale);
    try {
      res = tab.solve(lp);
    } catch (const iteration_limit&) {
      if (scale == 1e4) throw;
      continue;
    }
    if (res.status == SimplexStatus::optimal) return res;
  }
  return res;
}

}  // namespace dpsched
