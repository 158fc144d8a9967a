#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "pacfl/attacker.hpp"
#include "pacfl/bounds.hpp"
#include "pacfl/datagen.hpp"
#include "pacfl/protocol.hpp"

namespace pacfl {

enum class MechanismKind { none, randomization, he };

std::string to_string(MechanismKind kind);
// Accepts "none", "rand" and "he".
MechanismKind mechanism_kind_from_string(const std::string& name);

// Mechanism description that is independent of the model dimension; the
// concrete mechanism is built per trial.
struct MechanismConfig {
  MechanismKind kind = MechanismKind::none;
  double sigma = 0.0;
  bool shared_across_clients = false;
  double fixed_norm = 0.0;
  double he_offset_scale = 1.0;

  void validate() const;
};

ProtectionMechanism build_mechanism(const MechanismConfig& cfg, std::size_t dim,
                                    std::uint64_t seed);

// One end-to-end experiment: generate data, train, attack one client, measure.
struct Scenario {
  DatasetSpec data;
  ModelSpec model = ModelSpec::linear(2);
  int rounds = 1;
  double learning_rate = 1.0;
  LearningRateSchedule schedule = LearningRateSchedule::constant;
  double init_scale = 0.0;
  MechanismConfig mechanism;
  AttackConfig attack;
  int target_client = 0;
  int attack_round = 0;

  double gamma = 0.1;           // privacy confidence parameter
  double confidence_eta = 0.1;  // utility confidence parameter
  double lambda = 0.0;          // <= 0: chosen per trial by the minimiser
  double rho = 1.0;
  double L = 1.0;
  double slack_sigmas = 2.0;
  int n_eval = 1000;

  ConstantsOptions constants;
  int calibration_examples = 64;
  // Skip calibration and use these constants.
  std::optional<ConstantsEstimate> fixed_constants;

  void validate() const;
};

std::uint64_t trial_seed(std::uint64_t master_seed, std::uint64_t trial);

struct TrialResult {
  int trial = 0;
  std::uint64_t seed = 0;
  bool aborted = false;
  std::string diagnostic;
  int eps_e = 0;  // target client's training-set size
  double eps_p = 0.0;
  double eps_p_final = 0.0;
  double eps_u = 0.0;
  double eps_u_halfwidth = 0.0;
  double delta_up_grad = 0.0;
  double delta_up_param = 0.0;
  double delta_two = 0.0;        // final decoded vs final shadow model
  double delta_two_round = 0.0;  // same-round value at the attack round
  double privacy_rhs = 0.0;
  bool privacy_pre = false;
  double lambda = 0.0;
  double utility_rhs = 0.0;
  bool utility_pre = false;
  double utility_he_rhs = 0.0;
  double tradeoff_general_rhs = 0.0;
  bool tradeoff_general_pre = false;
  double tradeoff_randomization_rhs = 0.0;
  bool tradeoff_randomization_pre = false;
  std::vector<double> eps_p_clients;
  std::vector<double> attack_mismatch;  // target client, for regret fits
};

// Constants from a dedicated calibration draw of the scenario: the Lipschitz
// bracket and regret envelope at the attacked model, C and M at the final
// shadow model.
ConstantsEstimate calibrate(const Scenario& scenario, std::uint64_t master_seed);

// Data and protocol configuration of a scenario under a given trial seed.
DatasetSpec scenario_data(const Scenario& scenario, std::uint64_t seed);
FLRunConfig scenario_fl_config(const Scenario& scenario, std::uint64_t seed);

// Everything the measurement step needs from a finished protocol run.
struct RunArtifacts {
  DatasetSpec data;
  std::vector<ClientDataset> datasets;
  std::vector<RoundRecord> records;
  ParamVector final_decoded;
  ParamVector final_shadow;
};

// Attacks every client at the attack round, measures the utility loss and
// evaluates every bound. `target_trace` receives the target client's trace.
TrialResult evaluate_run(const Scenario& scenario, const ConstantsEstimate& constants,
                         int trial, std::uint64_t seed, const RunArtifacts& run,
                         AttackTrace* target_trace = nullptr);

TrialResult run_trial(const Scenario& scenario, const ConstantsEstimate& constants,
                      int trial, std::uint64_t seed);

const std::vector<std::string>& bound_names();

struct BoundReport {
  std::string bound_name;
  double confidence = 0.0;
  double slack = 0.0;
  int trials = 0;
  int evaluated = 0;
  int precondition_failed = 0;
  int aborted = 0;
  int holding = 0;
  double fraction_holding = 0.0;
  // Over every completed trial, counting excluded ones too.
  double fraction_holding_all = 0.0;
  bool precondition_ok = false;
  bool holds = false;
  bool vacuous = false;
  double probability_budget = 1.0;
  double rhs_median = 0.0;
  double measured_median = 0.0;
  ConstantsEstimate constants;
  Scenario scenario;
  std::vector<std::string> notes;
  std::vector<TrialResult> per_trial;
};

// Monte-Carlo check of one bound. Trials run in parallel; results are
// collated by trial index.
BoundReport verify_bound(const std::string& bound_name, const Scenario& scenario,
                         int trials, std::uint64_t master_seed, int threads = 1);

// Builds the report from already-run trials.
BoundReport summarize_bound(const std::string& bound_name, const Scenario& scenario,
                            const ConstantsEstimate& constants,
                            std::vector<TrialResult> trials);

}  // namespace pacfl
