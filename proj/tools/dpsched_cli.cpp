// Command line front end: solve one budget, sweep a budget grid, simulate the
// optimal policy, or cross-validate LP / closed form / simulation.
//
// Exit codes: 0 success, 2 config error, 3 infeasible instance (solve mode),
// 4 verification failure, 5 I/O error.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "dpsched/dpsched.hpp"

namespace {

using nlohmann::json;

struct GridFlag {
  double start = 0.0, stop = 0.0;
  int steps = 0;
};

GridFlag parse_grid_flag(const std::string& text) {
  GridFlag g;
  char colon1 = 0, colon2 = 0;
  std::istringstream in(text);
  if (!(in >> g.start >> colon1 >> g.stop >> colon2 >> g.steps) || colon1 != ':' ||
      colon2 != ':' || !in.eof())
    throw dpsched::config_error("--grid expects start:stop:steps, got \"" + text + "\"");
  return g;
}

void write_output(const std::string& out_path, const std::string& text) {
  if (out_path.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream out(out_path, std::ios::binary);
  if (!out) throw dpsched::io_error("cannot open " + out_path);
  out << text;
  if (!out) throw dpsched::io_error("write failed for " + out_path);
}

json solution_json(const dpsched::ThresholdSolution& sol, const dpsched::SystemInstance& inst) {
  json thresholds = json::array();
  for (int t : sol.profile.i_star) thresholds.push_back(t);
  json j = {
      {"feasible", true},
      {"p_max", inst.p_max},
      {"delay", sol.delay},
      {"power", sol.power},
      {"thresholds", thresholds},
      {"pi0", sol.pi_star.pi[0]},
  };
  if (sol.profile.m_tilde)
    j["fractional_channel"] = *sol.profile.m_tilde + 1;  // report 1-based
  return j;
}

int run(dpsched::Command command, const std::string& config_path, const std::string& out_path,
        std::optional<std::uint64_t> seed, std::optional<std::uint64_t> slots,
        const std::string& grid_flag) {
  dpsched::RunSpec spec = dpsched::load_config(config_path, command);
  if (seed) spec.sim.seed = *seed;
  if (slots) {
    spec.sim.n_slots = *slots;
    if (spec.sim.warmup_slots >= spec.sim.n_slots)
      spec.sim.warmup_slots = spec.sim.n_slots / 10;
  }
  if (!grid_flag.empty()) {
    GridFlag g = parse_grid_flag(grid_flag);
    spec.sweep_grid = dpsched::detail::grid_values(g.start, g.stop, g.steps);
  }
  if (command == dpsched::Command::sweep && !spec.sweep_grid)
    throw dpsched::config_error("sweep requires a grid (config sweep.grid or --grid)");

  switch (command) {
    case dpsched::Command::solve: {
      dpsched::ThresholdSolution sol;
      try {
        sol = dpsched::solve(spec.instance);
      } catch (const dpsched::infeasible_budget& e) {
        std::cerr << "infeasible: " << e.what() << "\n";
        return 3;
      }
      write_output(out_path, solution_json(sol, spec.instance).dump(2) + "\n");
      return 0;
    }
    case dpsched::Command::sweep: {
      auto rows = dpsched::run_sweep(spec);
      if (out_path.empty())
        std::cout << dpsched::render_table(rows);
      else
        dpsched::emit_table(rows, out_path);
      return 0;
    }
    case dpsched::Command::simulate: {
      dpsched::ThresholdSolution sol;
      try {
        sol = dpsched::solve(spec.instance);
      } catch (const dpsched::infeasible_budget& e) {
        std::cerr << "infeasible: " << e.what() << "\n";
        return 3;
      }
      dpsched::SimReport rep = dpsched::simulate(sol.policy, spec.instance, spec.sim);
      json j = {
          {"analytic", solution_json(sol, spec.instance)},
          {"simulation",
           {{"slots", spec.sim.n_slots},
            {"warmup", spec.sim.warmup_slots},
            {"seed", spec.sim.seed},
            {"mean_queue", rep.mean_queue},
            {"empirical_delay", rep.empirical_delay},
            {"empirical_power", rep.empirical_power},
            {"drop_count", rep.drop_count},
            {"transmit_count", rep.transmit_count}}},
      };
      write_output(out_path, j.dump(2) + "\n");
      return 0;
    }
    case dpsched::Command::verify: {
      dpsched::VerifyReport rep = dpsched::run_verify(spec);
      std::ostringstream out;
      if (rep.consistent_infeasible) {
        out << "verify: both solvers report infeasible; simulation skipped\n";
      } else if (rep.feasible) {
        out << "lp_delay        " << dpsched::format_value(rep.lp_delay) << "\n"
            << "analytic_delay  " << dpsched::format_value(rep.analytic_delay) << "\n"
            << "analytic_power  " << dpsched::format_value(rep.analytic_power) << "\n"
            << "sim_delay       " << dpsched::format_value(rep.sim_delay) << "\n"
            << "sim_power       " << dpsched::format_value(rep.sim_power) << "\n"
            << "lp_gap          " << dpsched::format_value(rep.lp_gap) << "\n"
            << "sim_delay_gap   " << dpsched::format_value(rep.sim_delay_gap) << "\n"
            << "sim_power_gap   " << dpsched::format_value(rep.sim_power_gap) << "\n";
      }
      out << (rep.pass ? "verify: PASS\n" : "verify: FAIL (" + rep.failure + ")\n");
      write_output(out_path, out.str());
      return rep.pass ? 0 : 4;
    }
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Delay-optimal transmission scheduling for a fading wireless link"};
  app.require_subcommand(1);

  std::string config_path, out_path, grid_flag;
  std::optional<std::uint64_t> seed, slots;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON config file")->required();
    sub->add_option("--out", out_path, "output file (default: stdout)");
    sub->add_option("--seed", seed, "simulation seed override");
    sub->add_option("--slots", slots, "simulation slot count override");
    sub->add_option("--grid", grid_flag, "sweep grid as start:stop:steps");
  };
  auto* c_solve = app.add_subcommand("solve", "solve one budget");
  auto* c_sweep = app.add_subcommand("sweep", "sweep a budget grid to CSV");
  auto* c_sim = app.add_subcommand("simulate", "simulate the optimal policy");
  auto* c_verify = app.add_subcommand("verify", "cross-validate LP, closed form, simulation");
  for (auto* sub : {c_solve, c_sweep, c_sim, c_verify}) add_common(sub);

  CLI11_PARSE(app, argc, argv);

  dpsched::Command command = dpsched::Command::solve;
  if (c_sweep->parsed()) command = dpsched::Command::sweep;
  if (c_sim->parsed()) command = dpsched::Command::simulate;
  if (c_verify->parsed()) command = dpsched::Command::verify;

  try {
    return run(command, config_path, out_path, seed, slots, grid_flag);
  } catch (const dpsched::config_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const dpsched::io_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 5;
  } catch (const dpsched::verification_failure& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
