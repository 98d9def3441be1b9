// sgame: command-line driver for the defender/attacker signaling game.
//
//   sgame validate    --config <path>
//   sgame equilibrium --config <path> --belief <pi> --state <label>
//   sgame simulate    --config <path> --seed <u64> [--steps N] [--out file]
//   sgame batch       --config <path> --episodes N --seed <u64> --out-dir dir
//   sgame diagnose    --in <csv>... [--window 20] [--tol 0.05]
//   sgame appendix-a  --p <p> --k <k> --prior <pi0>

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "sgame/sgame.hpp"

namespace fs = std::filesystem;
using namespace sgame;

namespace {

LoadedScenario load_or_report(const std::string& path) {
  auto loaded = load_scenario(path);
  for (const auto& w : loaded.warnings) std::cerr << "warning: " << w << '\n';
  return loaded;
}

int cmd_validate(const std::string& config) {
  try {
    const auto loaded = load_scenario(config);
    std::cout << "kernel: ok\n";
    if (loaded.warnings.empty()) {
      std::cout << "distinguishability: ok\n";
    } else {
      std::cout << "distinguishability: violated\n";
      for (const auto& w : loaded.warnings) std::cout << "  " << w << '\n';
    }
    return 0;
  } catch (const ScenarioError& e) {
    std::cout << "invalid: " << e.what() << '\n';
    return 1;
  }
}

int cmd_equilibrium(const std::string& config, double belief,
                    const std::string& state) {
  const auto loaded = load_or_report(config);
  const Scenario& s = loaded.scenario;
  if (!s.alphabets.states.contains(state))
    throw std::invalid_argument("unknown state '" + state + "'");
  const auto x = s.alphabets.states.index_of(state);
  const auto eq = solve_bne(s, BeliefState(belief), x);
  const auto& ab = s.alphabets;
  std::cout << std::setprecision(12);
  std::cout << "concept: " << to_string(eq.solution_concept) << '\n'
            << "belief_m: " << belief << '\n'
            << "state: " << state << '\n'
            << "action_b: " << ab.actions[eq.root_action(SenderType::kBenign)]
            << '\n'
            << "action_m: "
            << ab.actions[eq.root_action(SenderType::kMalicious)] << '\n'
            << "reaction: " << ab.reactions[eq.root_reaction()] << '\n'
            << "sender_value_b: " << eq.sender_value_b << '\n'
            << "sender_value_m: " << eq.sender_value_m << '\n'
            << "receiver_value: " << eq.receiver_value << '\n'
            << "multiplicity: " << eq.multiplicity << '\n'
            << "tie_broken: " << (eq.tie_broken ? "true" : "false") << '\n';
  return 0;
}

int cmd_simulate(const std::string& config, std::uint64_t seed,
                 std::optional<int> steps, const std::string& out) {
  const auto loaded = load_or_report(config);
  const RecedingHorizonPolicy policy(loaded.scenario);
  const auto traj = run_episode(policy, seed, steps);
  if (out.empty() || out == "-") {
    write_trajectory_csv(std::cout, traj, loaded.scenario.alphabets);
  } else {
    std::ofstream os(out, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write '" + out + "'");
    write_trajectory_csv(os, traj, loaded.scenario.alphabets);
  }
  return 0;
}

int cmd_batch(const std::string& config, std::size_t episodes,
              std::uint64_t seed, const std::string& out_dir,
              BatchOptions opts) {
  const auto loaded = load_or_report(config);
  const auto result = run_batch(loaded.scenario, episodes, seed, opts);
  fs::create_directories(out_dir);
  for (std::size_t i = 0; i < result.trajectories.size(); ++i) {
    if (!result.trajectories[i]) continue;
    char name[32];
    std::snprintf(name, sizeof name, "episode_%05zu.csv", i);
    std::ofstream os(fs::path(out_dir) / name, std::ios::binary);
    write_trajectory_csv(os, *result.trajectories[i],
                         loaded.scenario.alphabets);
  }
  std::ofstream os(fs::path(out_dir) / "summary.json", std::ios::binary);
  os << to_json(result.summary).dump(2) << '\n';
  const auto& t = result.summary.tallies;
  std::cout << "episodes: " << episodes << " F_TO_ONE: " << t.f_to_one
            << " PI_TO_ZERO: " << t.pi_to_zero << " UNDECIDED: " << t.undecided
            << " FAILED: " << t.failed << '\n';
  return t.failed == 0 ? 0 : 1;
}

int cmd_diagnose(const std::vector<std::string>& inputs, std::size_t window,
                 double tol, double averse_tol, const std::string& true_type) {
  const SenderType fallback = parse_sender_type(true_type);
  json report;
  report["window"] = window;
  report["tol"] = tol;
  report["files"] = json::array();
  BatchSummary malicious;
  malicious.true_type = SenderType::kMalicious;
  malicious.window = window;
  malicious.tol = tol;
  for (const auto& path : inputs) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open '" + path + "'");
    const auto imported = read_trajectory_csv(is, fallback);
    const auto& traj = imported.trajectory;
    json entry;
    entry["file"] = path;
    entry["true_type"] = std::string(to_string(traj.true_type));
    entry["true_type_inferred"] = imported.true_type_inferred;
    entry["steps"] = traj.size();
    entry["terminal_belief_m"] = traj.final_belief_m;
    auto diag = diagnose_episode(traj, window, tol);
    if (diag.ok)
      entry["convergence"] = to_json(convergence_report(traj, window, tol));
    else
      entry["convergence_error"] = diag.error;
    const auto agreement = agreement_series(traj);
    std::size_t disagreements = 0;
    for (int d : agreement.distance) disagreements += d;
    entry["agreement"] = {{"disagreement_steps", disagreements}};
    if (agreement.sustained_from)
      entry["agreement"]["sustained_agreement_step"] = *agreement.sustained_from;
    else
      entry["agreement"]["sustained_agreement_step"] = "none";
    report["files"].push_back(entry);
    if (traj.true_type == SenderType::kMalicious) {
      diag.episode = malicious.episodes.size();
      malicious.episodes.push_back(diag);
    }
  }
  malicious.n_episodes = malicious.episodes.size();
  malicious.tallies = tally(malicious.episodes);
  if (malicious.n_episodes > 0) {
    const auto verdict = detection_averse_check(malicious, averse_tol);
    json v;
    v["tol"] = averse_tol;
    v["detection_averse"] = verdict.detection_averse;
    v["violations"] = json::array();
    for (auto i : verdict.violating_episodes)
      v["violations"].push_back(inputs.at(i));
    report["detection_averse"] = v;
  }
  std::cout << report.dump(2) << '\n';
  return 0;
}

int cmd_appendix_a(double p, int k, double prior) {
  std::cout << std::fixed << std::setprecision(7)
            << random_walk_belief(p, k, prior) << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dynamic signaling game between a model-based incident handler "
               "and a potential attacker"};
  app.require_subcommand(1);

  std::string config;
  double belief = 0.0;
  std::string state;
  std::uint64_t seed = 0;
  int steps = 0;
  std::string out;
  std::size_t episodes = 0;
  unsigned threads = 1;
  std::size_t window = 20;
  double tol = 0.05;
  double averse_tol = 0.01;
  std::vector<std::string> inputs;
  std::string true_type = "malicious";
  double p = 0.5;
  int k = 1;
  double prior = 0.1;

  auto* validate = app.add_subcommand("validate", "Check kernel and action distinguishability");
  validate->add_option("--config", config, "Scenario JSON")->required()->check(CLI::ExistingFile);

  auto* equilibrium = app.add_subcommand("equilibrium", "Solve the window equilibrium at one belief and state");
  equilibrium->add_option("--config", config, "Scenario JSON")->required()->check(CLI::ExistingFile);
  equilibrium->add_option("--belief", belief, "pi(theta_m)")->required()->check(CLI::Range(0.0, 1.0));
  equilibrium->add_option("--state", state, "Current state label")->required();

  auto* simulate = app.add_subcommand("simulate", "Run one seeded episode and write its trajectory CSV");
  simulate->add_option("--config", config, "Scenario JSON")->required()->check(CLI::ExistingFile);
  simulate->add_option("--seed", seed, "Episode seed")->required();
  auto* steps_opt = simulate->add_option("--steps", steps, "Episode length (default: scenario steps)")->check(CLI::PositiveNumber);
  simulate->add_option("--out", out, "Output CSV (default: stdout)");

  auto* batch = app.add_subcommand("batch", "Run seeded episodes and write trajectories plus summary.json");
  batch->add_option("--config", config, "Scenario JSON")->required()->check(CLI::ExistingFile);
  batch->add_option("--episodes", episodes, "Number of episodes")->required()->check(CLI::PositiveNumber);
  batch->add_option("--seed", seed, "Base seed")->required();
  auto* batch_steps = batch->add_option("--steps", steps, "Episode length (default: scenario steps)")->check(CLI::PositiveNumber);
  batch->add_option("--threads", threads, "Worker threads")->check(CLI::PositiveNumber);
  batch->add_option("--window", window, "Trailing window")->check(CLI::PositiveNumber);
  auto* batch_tol = batch->add_option("--tol", tol, "Classification tolerance");
  batch->add_option("--out-dir", out, "Output directory")->required();

  auto* diagnose = app.add_subcommand("diagnose", "Convergence, agreement and detection-averse diagnostics");
  diagnose->add_option("--in", inputs, "Trajectory CSV file(s)")->required()->check(CLI::ExistingFile);
  diagnose->add_option("--window", window, "Trailing window")->check(CLI::PositiveNumber);
  diagnose->add_option("--tol", tol, "Classification tolerance");
  diagnose->add_option("--averse-tol", averse_tol, "Detection-averse margin below 1");
  diagnose->add_option("--true-type", true_type, "True type when it cannot be inferred")
      ->check(CLI::IsMember({"benign", "malicious"}));

  auto* appendix = app.add_subcommand("appendix-a", "Closed-form random-walk belief");
  appendix->add_option("--p", p, "Benign switching probability")->required()->check(CLI::Range(0.0, 1.0));
  appendix->add_option("--k", k, "Half the number of steps")->required()->check(CLI::PositiveNumber);
  appendix->add_option("--prior", prior, "pi_0(theta_m)")->required()->check(CLI::Range(0.0, 1.0));

  CLI11_PARSE(app, argc, argv);

  try {
    if (*validate) return cmd_validate(config);
    if (*equilibrium) return cmd_equilibrium(config, belief, state);
    if (*simulate)
      return cmd_simulate(config, seed,
                          *steps_opt ? std::optional<int>(steps) : std::nullopt,
                          out);
    if (*batch) {
      BatchOptions opts;
      opts.threads = threads;
      opts.window = window;
      opts.tol = *batch_tol ? tol : 0.01;
      if (*batch_steps) opts.steps = steps;
      return cmd_batch(config, episodes, seed, out, opts);
    }
    if (*diagnose) return cmd_diagnose(inputs, window, tol, averse_tol, true_type);
    if (*appendix) return cmd_appendix_a(p, k, prior);
  } catch (const NoPureEquilibrium& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
