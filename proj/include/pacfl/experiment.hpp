#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "pacfl/serialize.hpp"
#include "pacfl/stats.hpp"
#include "pacfl/verify.hpp"

namespace pacfl {

struct Phase2Config {
  int epochs = 200;
  double lr = 0.5;
  double init_scale = 0.01;
  double pac_eps = 0.1;
  double pac_delta = 0.9;
  // AdvRisk budget; < 0 uses c_a * delta_up.
  double budget = -1.0;
  int test_size = 200;
  AdvSearch search;
};

struct ExperimentConfig {
  std::string id = "experiment";
  Scenario scenario;
  Phase2Config phase2;
  int trials = 100;
  std::uint64_t master_seed = 0;
  std::string output_dir = "out";
  int threads = 0;  // 0: PACFL_THREADS or hardware concurrency
  bool record_timing = false;

  int effective_threads() const;
};

void to_json(Json& j, const Phase2Config& v);
void from_json(const Json& j, Phase2Config& v);
void to_json(Json& j, const ExperimentConfig& v);
void from_json(const Json& j, ExperimentConfig& v);

ExperimentConfig load_config(const std::string& path);

// Flag values that take precedence over the config file.
struct Overrides {
  std::optional<std::string> mechanism;
  std::optional<double> sigma;
  std::optional<bool> shared_noise;
  std::optional<double> fixed_norm;
  std::optional<std::uint64_t> seed;
  std::optional<int> rounds;
  std::optional<int> trials;
  std::optional<int> threads;
  std::optional<int> attack_T;
  std::optional<double> pac_eps;
  std::optional<double> pac_delta;
  std::optional<std::string> output_dir;
  std::optional<bool> timing;
};

void apply_overrides(ExperimentConfig& cfg, const Overrides& o);

inline constexpr int kResultSchemaVersion = 1;

// One row per (sweep point, trial).
struct ResultRow {
  std::string experiment_id;
  std::string axis = "none";
  double axis_value = 0.0;
  int trial = 0;
  std::uint64_t seed = 0;
  std::string mechanism;
  double sigma = 0.0;
  bool aborted = false;
  double eps_p = 0.0;
  double eps_p_final = 0.0;
  double eps_u = 0.0;
  int eps_e = 0;
  double delta_up_grad = 0.0;
  double delta_up_param = 0.0;
  double delta_two = 0.0;
  double privacy_rhs = 0.0;
  bool privacy_pre = false;
  bool privacy_holds = false;
  double lambda = 0.0;
  double utility_rhs = 0.0;
  bool utility_holds = false;
  double utility_he_rhs = 0.0;
  double tradeoff_general_rhs = 0.0;
  double tradeoff_randomization_rhs = 0.0;
  double wall_time_s = 0.0;

  friend bool operator==(const ResultRow&, const ResultRow&) = default;
};

ResultRow make_row(const ExperimentConfig& cfg, const TrialResult& t,
                   const std::string& axis = "none", double axis_value = 0.0,
                   double wall_time_s = 0.0);

const std::vector<std::string>& result_columns();
void write_rows_csv(std::ostream& out, const std::vector<ResultRow>& rows,
                    bool header = true);
std::vector<ResultRow> read_rows_csv(std::istream& in);

enum class SweepAxis { sigma, m, T, delta_up };
std::string to_string(SweepAxis axis);
SweepAxis sweep_axis_from_string(const std::string& name);

// Scenario at one sweep point.
Scenario apply_axis(const Scenario& base, SweepAxis axis, double value);

struct SweepPoint {
  double value = 0.0;
  int trials = 0;
  double median_eps_p = 0.0;
  double median_eps_p_final = 0.0;
  double median_eps_u = 0.0;
  double median_privacy_rhs = 0.0;
  double median_delta_up = 0.0;
};

struct SweepResult {
  SweepAxis axis = SweepAxis::sigma;
  std::vector<ResultRow> rows;
  std::vector<SweepPoint> points;
  Correlation eps_p_trend;  // Spearman of eps_p against the axis value
  bool medians_non_increasing = false;
};

SweepResult run_sweep(const ExperimentConfig& cfg, SweepAxis axis,
                      const std::vector<double>& values);

// Subcommands. Each writes into cfg.output_dir and returns the process exit
// code; errors propagate as pacfl::Error.
int cmd_train(const ExperimentConfig& cfg, std::ostream& log);
int cmd_attack(const ExperimentConfig& cfg, const std::string& run_dir, bool dump_trajectory,
               std::ostream& log);
int cmd_verify(const ExperimentConfig& cfg, const std::string& bound_name, std::ostream& log);
int cmd_sweep(const ExperimentConfig& cfg, const std::string& axis,
              const std::vector<double>& values, std::ostream& log);
int cmd_estimate_constants(const ExperimentConfig& cfg, std::ostream& log);

}  // namespace pacfl
