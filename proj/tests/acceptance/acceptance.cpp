// Acceptance run: one PASS/FAIL line per criterion. Tolerances below are fixed;
// the process exits non-zero when any criterion fails.

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>

#include "pacfl/csv.hpp"
#include "pacfl/experiment.hpp"

using namespace pacfl;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

int failures = 0;

void report(int id, bool pass, const std::string& detail) {
  std::printf("criterion %d: %s  %s\n", id, pass ? "PASS" : "FAIL", detail.c_str());
  std::fflush(stdout);
  if (!pass) ++failures;
}

// Runs one criterion; an escaped exception counts as a failure.
void check(int id, const std::function<void()>& body) {
  try {
    body();
  } catch (const std::exception& e) {
    report(id, false, std::string("exception: ") + e.what());
  }
}

std::string fmt(double v) { return format_double(v); }

ExperimentConfig base_config() {
  return load_config(std::string(PACFL_CONFIG_DIR) + "/single_sample_linear.json");
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

ParamVector random_params(int d, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 0.7);
  ParamVector t(d);
  for (auto& v : t) v = n(rng);
  return t;
}

std::vector<LabeledExample> random_batch(const ModelSpec& spec, int m, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<LabeledExample> b(m);
  for (auto& ex : b) {
    ex.x.resize(spec.input_dim);
    for (auto& v : ex.x) v = n(rng);
    ex.y = spec.is_classifier() ? static_cast<double>(rng() % spec.num_classes) : n(rng);
  }
  return b;
}

void gradient_check() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(101);
  double worst = 0.0;
  for (const auto& spec : {ModelSpec::linear(4), ModelSpec::logistic(4, 3),
                           ModelSpec::mlp1(4, 6, 3)}) {
    for (int draw = 0; draw < 20; ++draw) {
      const auto theta = random_params(spec.param_dim(), rng);
      const auto batch = random_batch(spec, 8, rng);
      worst = std::max(worst, finite_diff_check(spec, theta, batch, 1e-5));
    }
  }
  const double secs = seconds_since(t0);
  report(1, worst <= 1e-5 && secs < 10,
         "max relative error " + fmt(worst) + " (<= 1e-5), " + fmt(secs) + " s (< 10 s)");
}

void determinism() {
  const auto t0 = Clock::now();
  auto cfg = base_config();
  cfg.scenario.data.num_clients = 4;
  cfg.scenario.data.client_sizes = {8};
  cfg.scenario.rounds = 20;
  cfg.scenario.learning_rate = 0.5;
  cfg.scenario.mechanism.kind = MechanismKind::randomization;
  cfg.scenario.mechanism.sigma = 0.1;
  const int n_threads = std::max(4, default_thread_count());
  const auto root = fs::temp_directory_path() / "pacfl_accept_det";
  fs::remove_all(root);
  std::vector<std::string> digests;
  std::ostringstream log;
  for (int threads : {1, 1, n_threads, n_threads}) {
    cfg.threads = threads;
    cfg.output_dir = (root / std::to_string(digests.size())).string();
    if (cmd_train(cfg, log) != 0) throw std::runtime_error("train failed");
    std::string all;
    for (const char* f : {"rounds.jsonl", "datasets.csv", "final_model.csv", "final_server.csv",
                          "shadow_model.csv", "run_meta.json"})
      all += slurp(fs::path(cfg.output_dir) / f);
    digests.push_back(std::to_string(std::hash<std::string>{}(all)));
  }
  const bool same = std::all_of(digests.begin(), digests.end(),
                                [&](const std::string& d) { return d == digests[0]; });
  const double secs = seconds_since(t0);
  report(2, same && secs < 30,
         "4 runs at 1 and " + std::to_string(n_threads) + " threads, hashes " +
             (same ? "identical" : "differ") + ", " + fmt(secs) + " s (< 30 s)");
}

std::vector<ClientDataset> protocol_data(std::uint64_t seed) {
  DatasetSpec s;
  s.num_clients = 3;
  s.client_sizes = {4, 6, 8};
  s.input_dim = 3;
  s.seed = seed;
  return generate(s);
}

void he_fidelity() {
  const auto t0 = Clock::now();
  int bad_two = 0, bad_traj = 0, bad_up = 0, rounds = 0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    FLRunConfig c;
    c.rounds = 10;
    c.learning_rate = 0.5;
    c.model = ModelSpec::mlp1(3, 4, 2);
    c.init_scale = 0.1;
    c.seed = seed;
    c.mechanism = HeCodec::random(c.model.param_dim(), 1.0, derive_seed(seed, {7}));
    const auto r = run(c, protocol_data(seed));
    if (r.aborted) throw std::runtime_error("HE run aborted: " + r.diagnostic);
    for (const auto& rec : r.records) {
      ++rounds;
      if (rec.delta_two != 0.0 || rec.delta_two_shadow != 0.0) ++bad_two;
      if (!(rec.next_theta == rec.shadow_next) || !(rec.theta.values().size() > 0)) ++bad_traj;
      for (const auto& cl : rec.clients)
        if (!(cl.delta_up_grad > 0)) ++bad_up;
    }
    if (!(r.final_decoded == r.final_shadow)) ++bad_traj;
  }
  const double secs = seconds_since(t0);
  report(3, bad_two == 0 && bad_traj == 0 && bad_up == 0 && secs < 120,
         std::to_string(rounds) + " rounds over 50 runs: nonzero delta_two " +
             std::to_string(bad_two) + ", trajectory mismatches " + std::to_string(bad_traj) +
             ", zero delta_up " + std::to_string(bad_up) + ", " + fmt(secs) + " s (< 120 s)");
}

void shared_noise_equality() {
  double worst = 0.0;
  int rounds = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    FLRunConfig c;
    c.rounds = 10;
    c.learning_rate = 1.0;
    c.model = ModelSpec::logistic(3);
    c.seed = seed;
    c.mechanism = Randomization{0.1, true};
    const auto r = run(c, protocol_data(seed));
    if (r.aborted) throw std::runtime_error("run aborted: " + r.diagnostic);
    for (const auto& rec : r.records) {
      ++rounds;
      for (const auto& cl : rec.clients) {
        worst = std::max(worst, std::abs(rec.delta_two - cl.delta_up_param));
        worst = std::max(worst, std::abs(rec.delta_two - cl.delta_up_grad));
      }
    }
  }
  report(4, worst <= 1e-12,
         std::to_string(rounds) + " rounds, max |delta_two - delta_up| " + fmt(worst) +
             " (<= 1e-12)");
}

ExperimentConfig validity_config() {
  auto cfg = base_config();
  cfg.scenario.mechanism.kind = MechanismKind::randomization;
  cfg.scenario.mechanism.sigma = 0.25;
  cfg.trials = 200;
  return cfg;
}

void privacy_validity() {
  const auto t0 = Clock::now();
  const auto cfg = validity_config();
  const auto rep = verify_bound("privacy", cfg.scenario, 200, cfg.master_seed,
                                cfg.effective_threads());
  const double required = 0.9 - 2 * std::sqrt(0.09 / 200);
  const double secs = seconds_since(t0);
  const bool pass = rep.precondition_ok && rep.evaluated > 0 &&
                    rep.fraction_holding >= required && secs < 1200;
  report(5, pass,
         "holding " + std::to_string(rep.holding) + "/" + std::to_string(rep.evaluated) +
             " = " + fmt(rep.fraction_holding) + " (>= " + fmt(required) + "), excluded " +
             std::to_string(rep.precondition_failed) + ", aborted " +
             std::to_string(rep.aborted) + ", " + fmt(secs) + " s");
}

void utility_validity() {
  const auto t0 = Clock::now();
  auto cfg = validity_config();
  cfg.scenario.confidence_eta = 0.1;
  cfg.scenario.lambda = 0.0;  // per-trial minimiser
  const auto rep = verify_bound("utility", cfg.scenario, 200, cfg.master_seed,
                                cfg.effective_threads());
  const double n = std::max(1, rep.evaluated);
  const double violation = 1.0 - rep.fraction_holding;
  const double allowed = 0.1 + 2 * std::sqrt(0.09 / n);
  const double secs = seconds_since(t0);
  const bool pass = rep.precondition_ok && rep.evaluated > 0 && violation <= allowed &&
                    secs < 1200;
  report(6, pass,
         "violation fraction " + fmt(violation) + " over " + std::to_string(rep.evaluated) +
             " trials (<= " + fmt(allowed) + "), " + fmt(secs) + " s");
}

void attack_floor() {
  const auto t0 = Clock::now();
  const auto cfg = base_config();
  const auto constants = calibrate(cfg.scenario, cfg.master_seed);
  int good = 0, n = 0;
  for (int t = 0; t < 30; ++t) {
    const auto r = run_trial(cfg.scenario, constants, t, trial_seed(cfg.master_seed, t));
    if (r.aborted) continue;
    ++n;
    good += r.eps_p_final >= 0.95;
  }
  const double frac = static_cast<double>(good) / 30;
  const double secs = seconds_since(t0);
  report(7, n == 30 && frac >= 0.9 && secs < 300,
         std::to_string(good) + "/30 seeds with final leakage >= 0.95 (>= 90%), " + fmt(secs) +
             " s (< 300 s)");
}

void monotonicity() {
  auto cfg = base_config();
  cfg.trials = 30;
  const auto res = run_sweep(cfg, SweepAxis::sigma, {0.0, 0.05, 0.1, 0.2, 0.5});
  std::string medians;
  for (const auto& p : res.points) medians += (medians.empty() ? "" : ", ") + fmt(p.median_eps_p);
  const auto& c = res.eps_p_trend;
  report(8, res.medians_non_increasing && c.rho <= 0 && c.p_value < 0.05,
         "medians [" + medians + "], spearman rho " + fmt(c.rho) + ", p " + fmt(c.p_value));
}

void formula_suite() {
  const auto t0 = Clock::now();
  const std::string filter =
      "CoveringNumber.*:PrivacyBound.*:SampleLowerBound.*:NotPac.*:PrivatePac.*:Aggregate.*:"
      "Leakage.*:AdvRisk.ZeroBudgetEqualsRisk:UtilityBound.*:TradeoffGeneral.*:"
      "TradeoffRandomization.*:Diameter.*:ModelLoss.*:ModelGrad.LinearClosedForm:"
      "ModelGrad.LogisticAtZeroIsMinusHalfX:ModelInputGrad.LinearIsResidualTimesTheta:"
      "ModelInputGrad.LogisticZeroThetaGivesZero:FiniteDiffCheck.*:Protect.*:Decode.*:Risk.*:"
      "LocalUpdate.SingleExampleEqualsExampleGradient:LocalUpdate.DuplicatedDatasetGivesSameGradient:"
      "Phase2.ZeroEpochsKeepsInitialization:Phase2.SameSeedSameClassifier:"
      "Invert.StartingAtTruthIsStationary:EstimateConstants.IdenticalPointsHaveNoUsablePair:"
      "EstimateConstants.MinMaxQuantilesBracketEveryRatio:Generate.SameSeedIsBitIdentical:"
      "Generate.EveryClientLiesWithinDiameterCap";
  const std::string cmd = std::string(PACFL_UNIT_PATH) + " --gtest_brief=1 --gtest_filter='" +
                          filter + "' > /dev/null 2>&1";
  const int st = std::system(cmd.c_str());
  const bool ok = WIFEXITED(st) && WEXITSTATUS(st) == 0;
  const double secs = seconds_since(t0);
  report(9, ok && secs < 5, std::string("formula unit tests ") + (ok ? "all passed" : "failed") +
                                ", " + fmt(secs) + " s (< 5 s)");
}

void cross_checks() {
  std::mt19937_64 rng(2718);
  std::uniform_real_distribution<double> u(0.01, 4.0);
  int bit_mismatch = 0;
  for (int i = 0; i < 1000; ++i) {
    const double C = u(rng), lam = u(rng), M = u(rng), D = u(rng);
    const double eta = std::min(1.0, u(rng) / 4.0);
    const int d = 1 + static_cast<int>(rng() % 8);
    const double m = 1 + static_cast<double>(rng() % 500);
    if (utility_upper_bound(C, lam, 0.0, M, d, D, eta, m) !=
        utility_upper_bound_he(C, lam, M, d, D, eta, m))
      ++bit_mismatch;
  }
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    BoundInputs in;
    in.K = 1 + static_cast<int>(rng() % 4);
    in.constants.c_a = u(rng);
    in.constants.C = u(rng);
    in.constants.M = u(rng);
    in.constants.D = u(rng);
    for (int k = 0; k < in.K; ++k) {
      in.gamma.push_back(std::min(1.0, u(rng) / 4.0));
      in.eps_p.push_back(u(rng) / 4.0);
      in.eps_u.push_back(0.0);
      in.eps_e.push_back(1 + static_cast<double>(rng() % 100));
      in.delta_up.push_back(u(rng));
    }
    in.eta = std::min(1.0, u(rng) / 4.0);
    in.lambda = u(rng);
    in.d = 1 + static_cast<int>(rng() % 8);
    in.client = static_cast<int>(rng() % in.K);
    in.rho = 1e-12;
    const double r = tradeoff_randomization(in);
    in.L = 2.0;
    const double g = tradeoff_general(in);
    worst = std::max(worst, std::abs(r - g) / std::abs(g));
  }
  report(10, bit_mismatch == 0 && worst <= 1e-9,
         "HE form bit mismatches " + std::to_string(bit_mismatch) +
             "/1000, small-rho max relative gap " + fmt(worst) + " (<= 1e-9)");
}

}  // namespace

int main() {
  check(1, gradient_check);
  check(2, determinism);
  check(3, he_fidelity);
  check(4, shared_noise_equality);
  check(5, privacy_validity);
  check(6, utility_validity);
  check(7, attack_floor);
  check(8, monotonicity);
  check(9, formula_suite);
  check(10, cross_checks);
  std::printf("%d of 10 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
