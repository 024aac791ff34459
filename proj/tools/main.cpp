// Command-line front end: run a scenario, compare two result directories, or
// solve a small instance centrally. Exit codes: 0 success, 1 validation
// error, 2 solver or infeasibility error.

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include "evcoord/oracle.hpp"
#include "evcoord/scenario.hpp"

using namespace evcoord;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

struct RunFlags {
  std::string scenario;
  bool benchmark = false;
  std::optional<int> iters;
  std::optional<double> stepsize;
  std::optional<double> gamma;
  std::optional<double> epsilon;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::string out_dir;
};

int cmd_run(const RunFlags& flags) {
  Scenario sc = parse_scenario(flags.scenario);
  if (flags.iters) sc.algo.iters = *flags.iters;
  if (flags.stepsize) sc.algo.c = *flags.stepsize;
  if (flags.gamma) sc.algo.policy.gamma = *flags.gamma;
  if (flags.epsilon) sc.algo.policy.epsilon = *flags.epsilon;
  if (flags.seed) sc.seed = *flags.seed;
  if (flags.threads) sc.algo.threads = *flags.threads;
  if (!flags.out_dir.empty()) sc.output_dir = flags.out_dir;
  if (sc.algo.policy.enabled) sc.algo.policy.validate();

  const SimInputs inputs = materialize(sc);
  const RunMode mode = flags.benchmark ? RunMode::benchmark : RunMode::censored;
  const RunResult result = run(inputs, mode);

  emit_results(result, inputs, sc.output_dir);
  {
    std::ofstream echo(std::filesystem::path(sc.output_dir) / "scenario_echo.json");
    echo << sc.to_json().dump(2) << "\n";
  }

  const SolutionReport report = reconstruct_solution(inputs, result);
  std::printf("%s: %d agents, %d iterations, %ld/%ld transmissions\n",
              mode == RunMode::benchmark ? "benchmark" : "censored", result.N, result.S,
              result.total_transmissions, static_cast<long>(result.S) * result.N);
  std::printf("objective %.6g, voltage range [%.4f, %.4f] p.u., band violation %.3g\n",
              report.objective, std::sqrt(report.voltage.minCoeff()),
              std::sqrt(report.voltage.maxCoeff()), report.max_coupling_violation);
  std::printf("results written to %s\n", sc.output_dir.c_str());
  if (result.non_converged_solves > 0) {
    std::printf("warning: %d local solves hit the iteration cap\n", result.non_converged_solves);
  }
  return 0;
}

json load_metrics(const std::string& dir) {
  std::ifstream in(std::filesystem::path(dir) / "metrics.json");
  if (!in) throw ValidationError("no metrics.json under '" + dir + "'");
  json j;
  in >> j;
  return j;
}

int cmd_compare(const std::string& dir_a, const std::string& dir_b) {
  const json a = load_metrics(dir_a);
  const json b = load_metrics(dir_b);
  if (a.at("agents") != b.at("agents") || a.at("iterations") != b.at("iterations")) {
    throw ValidationError("result directories come from different scenario shapes");
  }
  const double tx_a = a.at("total_transmissions").get<double>();
  const double tx_b = b.at("total_transmissions").get<double>();
  if (tx_b <= 0) throw ValidationError("reference run transmitted nothing");

  ordered_json out;
  out["communication_fraction"] = tx_a / tx_b;
  out["objective_a"] = a.at("objective");
  out["objective_b"] = b.at("objective");
  const double ob = std::abs(b.at("objective").get<double>());
  out["objective_rel_diff"] =
      std::abs(a.at("objective").get<double>() - b.at("objective").get<double>()) /
      std::max(ob, 1e-12);
  std::cout << out.dump(2) << "\n";
  return 0;
}

int cmd_oracle(const std::string& scenario_path, const std::string& out_dir, double tol) {
  const Scenario sc = parse_scenario(scenario_path);
  const SimInputs inputs = materialize(sc);
  if (inputs.evs.size() > 24) {
    throw ValidationError("the centralized solver is intended for small fleets (N <= 24)");
  }
  qp::Settings settings;
  settings.eps_primal = tol;
  settings.eps_dual = tol;
  settings.max_iters = 400000;
  const CentralSolution sol = solve_centralized(inputs, settings);

  ordered_json out;
  out["objective"] = sol.objective;
  out["converged"] = sol.converged;
  out["iterations"] = sol.iters;
  out["primal_residual"] = sol.primal_res;
  out["dual_residual"] = sol.dual_res;
  std::cout << out.dump(2) << "\n";
  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    std::ofstream f(std::filesystem::path(out_dir) / "oracle.json");
    f << out.dump(2) << "\n";
  }
  return sol.converged ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"EV charge coordination over an unbalanced feeder with censored consensus"};
  app.require_subcommand(1);

  RunFlags flags;
  auto* run_cmd = app.add_subcommand("run", "run a scenario and write result artifacts");
  run_cmd->add_option("--scenario", flags.scenario, "scenario file (JSON)")->required();
  run_cmd->add_flag("--benchmark", flags.benchmark, "disable censoring (benchmark consensus)");
  run_cmd->add_option("--iters", flags.iters, "override iteration count S");
  run_cmd->add_option("--stepsize", flags.stepsize, "override step size c");
  run_cmd->add_option("--gamma", flags.gamma, "override censor gamma");
  run_cmd->add_option("--epsilon", flags.epsilon, "override censor epsilon");
  run_cmd->add_option("--seed", flags.seed, "override scenario seed");
  run_cmd->add_option("--threads", flags.threads, "worker threads (0 = auto)");
  run_cmd->add_option("--out", flags.out_dir, "output directory (default from scenario)");

  std::string dir_a, dir_b;
  auto* compare_cmd = app.add_subcommand("compare", "compare two result directories");
  compare_cmd->add_option("--a", dir_a, "candidate run directory")->required();
  compare_cmd->add_option("--b", dir_b, "reference run directory")->required();

  std::string oracle_scenario, oracle_out;
  double oracle_tol = 1e-8;
  auto* oracle_cmd = app.add_subcommand("oracle", "centralized reference solve (small N)");
  oracle_cmd->add_option("--scenario", oracle_scenario, "scenario file (JSON)")->required();
  oracle_cmd->add_option("--out", oracle_out, "directory for oracle.json");
  oracle_cmd->add_option("--tol", oracle_tol, "KKT tolerance");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run_cmd->parsed()) return cmd_run(flags);
    if (compare_cmd->parsed()) return cmd_compare(dir_a, dir_b);
    if (oracle_cmd->parsed()) return cmd_oracle(oracle_scenario, oracle_out, oracle_tol);
  } catch (const ValidationError& err) {
    std::cerr << "validation error: " << err.what() << "\n";
    return 1;
  } catch (const InvalidQueryError& err) {
    std::cerr << "validation error: " << err.what() << "\n";
    return 1;
  } catch (const DimensionError& err) {
    std::cerr << "validation error: " << err.what() << "\n";
    return 1;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 2;
  }
  return 0;
}
