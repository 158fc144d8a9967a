#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "pacfl/errors.hpp"
#include "pacfl/experiment.hpp"

namespace {

struct CommonFlags {
  std::string config;
  pacfl::Overrides o;
};

// Registers the flags every subcommand accepts. Unset flags leave the config
// value in place.
void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("-c,--config", f.config, "JSON config file (defaults used when omitted)");
  cmd->add_option("--mech,--mechanism", f.o.mechanism, "protection mechanism: none, rand, he");
  cmd->add_option("--sigma", f.o.sigma, "noise scale for rand");
  cmd->add_flag("--shared-noise{true},--independent-noise{false}", f.o.shared_noise,
                "draw one perturbation per round for all clients");
  cmd->add_option("--fixed-norm", f.o.fixed_norm, "rescale rand perturbations to this norm");
  cmd->add_option("--seed", f.o.seed, "master seed");
  cmd->add_option("--rounds", f.o.rounds, "protocol rounds");
  cmd->add_option("--trials", f.o.trials, "Monte-Carlo trials");
  cmd->add_option("--threads", f.o.threads, "worker threads (default: PACFL_THREADS or all cores)");
  cmd->add_option("--attack-iters", f.o.attack_T, "attacker iterations T");
  cmd->add_option("--pac-eps", f.o.pac_eps, "Phase-2 PAC accuracy");
  cmd->add_option("--pac-delta", f.o.pac_delta, "Phase-2 PAC confidence");
  cmd->add_option("-o,--out", f.o.output_dir, "output directory");
  cmd->add_flag("--timing{true}", f.o.timing, "record wall time per trial");
}

pacfl::ExperimentConfig resolve(const CommonFlags& f) {
  pacfl::ExperimentConfig cfg = f.config.empty() ? pacfl::ExperimentConfig{}
                                                 : pacfl::load_config(f.config);
  pacfl::apply_overrides(cfg, f.o);
  cfg.scenario.validate();
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Privacy/utility/efficiency experiments for federated learning"};
  app.require_subcommand(1);

  CommonFlags train_f, attack_f, verify_f, sweep_f, const_f;
  auto* train = app.add_subcommand("train", "run the protocol and write the round log");
  add_common(train, train_f);

  auto* attack = app.add_subcommand("attack", "invert a recorded run and evaluate Phase 2");
  add_common(attack, attack_f);
  std::string run_dir;
  bool dump_trajectory = false;
  attack->add_option("--run", run_dir, "directory written by train")->required();
  attack->add_flag("--dump-trajectory", dump_trajectory, "write every kept attack iterate");

  auto* verify = app.add_subcommand("verify", "Monte-Carlo check of one bound");
  add_common(verify, verify_f);
  std::string bound = "privacy";
  verify->add_option("--bound", bound,
                     "privacy, utility, utility-he, tradeoff-general, tradeoff-randomization")
      ->capture_default_str();

  auto* sweep = app.add_subcommand("sweep", "repeat trials across values of one axis");
  add_common(sweep, sweep_f);
  std::string axis = "sigma";
  std::vector<double> values;
  sweep->add_option("--axis", axis, "sigma, m, T or delta_up")->capture_default_str();
  sweep->add_option("--values", values, "axis values (at least two)")->delimiter(',');

  auto* est = app.add_subcommand("estimate-constants", "estimate the bound constants");
  add_common(est, const_f);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : static_cast<int>(pacfl::ExitCode::kConfig);
  }

  try {
    if (*train) return pacfl::cmd_train(resolve(train_f), std::cout);
    if (*attack) return pacfl::cmd_attack(resolve(attack_f), run_dir, dump_trajectory, std::cout);
    if (*verify) return pacfl::cmd_verify(resolve(verify_f), bound, std::cout);
    if (*sweep) return pacfl::cmd_sweep(resolve(sweep_f), axis, values, std::cout);
    if (*est) return pacfl::cmd_estimate_constants(resolve(const_f), std::cout);
  } catch (const pacfl::Error& e) {
    std::cerr << "pacfl: " << e.what() << "\n";
    return static_cast<int>(e.code());
  } catch (const std::exception& e) {
    std::cerr << "pacfl: internal error: " << e.what() << "\n";
    return static_cast<int>(pacfl::ExitCode::kNumeric);
  }
  return static_cast<int>(pacfl::ExitCode::kConfig);
}
