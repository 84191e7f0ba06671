#pragma once

#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "dpsched/lp_oracle.hpp"
#include "dpsched/model.hpp"
#include "dpsched/simulate.hpp"
#include "dpsched/threshold.hpp"

// Config loading, sweep/verify workflows, and CSV emission for the command
// line front end. Configs are JSON documents; the canonical example lives in
// configs/ at the repository root.

namespace dpsched {

struct config_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct io_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct verification_failure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class Command { solve, sweep, simulate, verify };

struct RunSpec {
  SystemInstance instance;
  Command command = Command::solve;
  std::optional<std::vector<double>> sweep_grid;  // strictly increasing budgets
  SimConfig sim;
  std::string output_path;  // empty means stdout
};

struct TradeoffRow {
  double p_max = 0.0;
  double delay = 0.0;
  std::vector<int> thresholds;  // -1 entries when infeasible
  double power_used = 0.0;
  bool feasible = false;
};

namespace detail {

inline const nlohmann::json& require(const nlohmann::json& obj, const char* key,
                                     const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end())
    throw config_error("config: missing \"" + std::string(key) + "\" in " + where);
  return *it;
}

inline std::vector<double> grid_values(double start, double stop, int steps) {
  if (steps < 1 || !(stop > start))
    throw config_error("config: sweep grid needs stop > start and steps >= 1");
  std::vector<double> v;
  v.reserve(steps);
  if (steps == 1) {
    v.push_back(start);
    return v;
  }
  for (int k = 0; k < steps; ++k)
    v.push_back(start + (stop - start) * (double)k / (double)(steps - 1));
  return v;
}

}  // namespace detail

inline SystemInstance parse_instance(const nlohmann::json& j) {
  SystemInstance inst;
  try {
    inst.traffic = TrafficModel::from_alpha(detail::require(j, "alpha", "instance").get<double>());
    inst.channel.eta = detail::require(j, "eta", "instance").get<std::vector<double>>();
    inst.channel.P = detail::require(j, "power_levels", "instance").get<std::vector<double>>();
    inst.channel.M = (int)inst.channel.eta.size();
    inst.Q = detail::require(j, "buffer_size", "instance").get<int>();
    inst.p_max = detail::require(j, "p_max", "instance").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw config_error(std::string("config: malformed instance section: ") + e.what());
  }
  try {
    inst.validate();
  } catch (const invalid_instance& e) {
    throw config_error(std::string("config: ") + e.what());
  }
  return inst;
}

inline RunSpec load_config(const std::string& path, Command command) {
  std::ifstream in(path);
  if (!in) throw config_error("config: cannot open " + path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw config_error("config: " + path + ": " + e.what());  // carries line/byte position
  }

  RunSpec spec;
  spec.command = command;
  spec.instance = parse_instance(detail::require(j, "instance", "top level"));

  if (auto it = j.find("sim"); it != j.end()) {
    try {
      spec.sim.n_slots = it->value("slots", spec.sim.n_slots);
      spec.sim.seed = it->value("seed", spec.sim.seed);
      spec.sim.warmup_slots = it->value("warmup", spec.sim.warmup_slots);
    } catch (const nlohmann::json::exception& e) {
      throw config_error(std::string("config: malformed sim section: ") + e.what());
    }
    try {
      spec.sim.validate();
    } catch (const invalid_instance& e) {
      throw config_error(std::string("config: ") + e.what());
    }
  }

  if (auto it = j.find("sweep"); it != j.end()) {
    const auto& grid = detail::require(*it, "grid", "sweep");
    std::vector<double> values;
    try {
      if (grid.is_array())
        values = grid.get<std::vector<double>>();
      else
        values = detail::grid_values(detail::require(grid, "start", "sweep.grid").get<double>(),
                                     detail::require(grid, "stop", "sweep.grid").get<double>(),
                                     detail::require(grid, "steps", "sweep.grid").get<int>());
    } catch (const nlohmann::json::exception& e) {
      throw config_error(std::string("config: malformed sweep section: ") + e.what());
    }
    for (size_t k = 1; k < values.size(); ++k)
      if (!(values[k] > values[k - 1]))
        throw config_error("config: sweep grid must be strictly increasing");
    spec.sweep_grid = std::move(values);
  }

  if (command == Command::sweep && !spec.sweep_grid)
    throw config_error("config: sweep command requires a sweep.grid section (or --grid)");
  return spec;
}

// One budget point: solve, or flag as infeasible without aborting the sweep.
inline TradeoffRow solve_budget(SystemInstance inst, double p_max) {
  inst.p_max = p_max;
  TradeoffRow row;
  row.p_max = p_max;
  try {
    ThresholdSolution sol = solve(inst);
    row.delay = sol.delay;
    row.power_used = sol.power;
    row.thresholds = sol.profile.i_star;
    row.feasible = true;
  } catch (const infeasible_budget&) {
    row.delay = std::numeric_limits<double>::quiet_NaN();
    row.power_used = std::numeric_limits<double>::quiet_NaN();
    row.thresholds.assign(inst.channel.M, -1);
    row.feasible = false;
  }
  return row;
}

inline std::vector<TradeoffRow> run_sweep(const RunSpec& spec) {
  if (!spec.sweep_grid) throw config_error("run_sweep: no grid");
  std::vector<TradeoffRow> rows;
  rows.reserve(spec.sweep_grid->size());
  for (double p : *spec.sweep_grid) rows.push_back(solve_budget(spec.instance, p));

  // The tradeoff frontier must be monotone; anything else is a solver bug and
  // the run aborts rather than emit a bogus table.
  const TradeoffRow* prev = nullptr;
  for (const auto& row : rows) {
    if (!row.feasible) {
      if (prev)
        throw verification_failure("run_sweep: infeasible budget above a feasible one");
      continue;
    }
    if (prev) {
      if (row.delay > prev->delay + 1e-9)
        throw verification_failure("run_sweep: delay not non-increasing in p_max");
      for (size_t m = 0; m < row.thresholds.size(); ++m)
        if (row.thresholds[m] > prev->thresholds[m])
          throw verification_failure("run_sweep: threshold not non-increasing in p_max");
    }
    prev = &row;
  }
  return rows;
}

struct VerifyReport {
  bool feasible = false;
  bool consistent_infeasible = false;
  double lp_delay = 0.0;
  double analytic_delay = 0.0;
  double analytic_power = 0.0;
  double sim_delay = 0.0;
  double sim_power = 0.0;
  double lp_gap = 0.0;       // |analytic - lp| / max(1, lp)
  double sim_delay_gap = 0.0;
  double sim_power_gap = 0.0;
  bool pass = false;
  std::string failure;
};

// Three-way cross-validation: LP oracle vs closed-form solver (<= 1e-6
// relative) and closed form vs slot-level simulation (<= 2% relative, with a
// 0.01-slot floor so the zero-delay regime is checkable).
inline VerifyReport run_verify(const RunSpec& spec) {
  VerifyReport rep;

  LpSolution lp = solve_lp(build_lp(spec.instance));
  std::optional<ThresholdSolution> th;
  try {
    th = solve(spec.instance);
  } catch (const infeasible_budget&) {
  }

  if (lp.status == LpSolveStatus::infeasible && !th) {
    rep.consistent_infeasible = true;
    rep.pass = true;
    return rep;
  }
  if (lp.status == LpSolveStatus::infeasible || !th) {
    rep.failure = "feasibility disagreement between lp-oracle and threshold-solver";
    return rep;
  }

  rep.feasible = true;
  rep.lp_delay = lp.objective;
  rep.analytic_delay = th->delay;
  rep.analytic_power = th->power;
  rep.lp_gap = std::abs(th->delay - lp.objective) / std::max(1.0, lp.objective);
  if (rep.lp_gap > 1e-6) {
    rep.failure = "threshold-solver delay disagrees with lp-oracle objective";
    return rep;
  }

  SimReport sim = simulate(th->policy, spec.instance, spec.sim);
  rep.sim_delay = sim.empirical_delay;
  rep.sim_power = sim.empirical_power;
  rep.sim_delay_gap = std::abs(sim.empirical_delay - th->delay);
  rep.sim_power_gap = std::abs(sim.empirical_power - th->power);
  if (rep.sim_delay_gap > std::max(0.02 * th->delay, 0.01)) {
    rep.failure = "simulated delay disagrees with analytic delay";
    return rep;
  }
  if (rep.sim_power_gap > std::max(0.02 * th->power, 1e-4)) {
    rep.failure = "simulated power disagrees with analytic power";
    return rep;
  }
  rep.pass = true;
  return rep;
}

inline std::string format_value(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

inline std::string render_table(const std::vector<TradeoffRow>& rows) {
  if (rows.empty()) throw io_error("emit_table: no rows");
  std::ostringstream out;
  out << "p_max,delay,power_used,feasible";
  for (size_t m = 0; m < rows.front().thresholds.size(); ++m)
    out << ",i_star_" << (m + 1);
  out << "\n";
  for (const auto& row : rows) {
    out << format_value(row.p_max) << ',' << format_value(row.delay) << ','
        << format_value(row.power_used) << ',' << (row.feasible ? "true" : "false");
    for (int t : row.thresholds) out << ',' << t;
    out << "\n";
  }
  return out.str();
}

inline void emit_table(const std::vector<TradeoffRow>& rows, const std::string& path) {
  std::string text = render_table(rows);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw io_error("emit_table: cannot open " + path);
  out << text;
  if (!out) throw io_error("emit_table: write failed for " + path);
}

}  // namespace dpsched
