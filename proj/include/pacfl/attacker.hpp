#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pacfl/datagen.hpp"
#include "pacfl/model.hpp"

namespace pacfl {

enum class Optimizer { sgd, adam };
enum class AttackInit { zeros, gaussian };

std::string to_string(Optimizer opt);
Optimizer optimizer_from_string(const std::string& name);
std::string to_string(AttackInit init);
AttackInit attack_init_from_string(const std::string& name);

struct AttackConfig {
  int T = 200;
  Optimizer optimizer = Optimizer::sgd;
  double step_size = 0.25;
  AttackInit init = AttackInit::zeros;
  double init_scale = 0.1;
  std::uint64_t seed = 0;
  // sgd only: halve the step until the objective does not increase.
  bool backtracking = true;
  // Keep every s-th iterate (plus the first and the last) in the trace.
  int keep_every = 1;
  // Central-difference step for the input gradient of the matching objective.
  double fd_step = 1e-6;

  void validate() const;
};

// Samples x features; one row per reconstructed example.
using Reconstruction = std::vector<std::vector<double>>;

struct AttackTrace {
  int m = 0;
  int p = 0;
  int iterations = 0;  // completed updates; equals T unless truncated
  // F(X_t) and s_t = ||G(X_t) - g_tilde|| for t = 0..iterations.
  std::vector<double> objective;
  std::vector<double> mismatch;
  std::vector<int> kept;                 // iteration index of each snapshot
  std::vector<Reconstruction> snapshots;  // X_t for t in kept
  Reconstruction final;                   // X_{iterations}
  bool truncated = false;
  std::string diagnostic;
  // Trajectory-averaged leakage, present when originals were supplied.
  std::optional<double> leakage;

  bool complete() const;  // every iterate t = 0..iterations is stored
};

// Streaming form of the privacy leakage over iterates t = 1..T.
class LeakageAccumulator {
 public:
  LeakageAccumulator(Reconstruction originals, double D);
  void add(const Reconstruction& iterate);
  int count() const { return count_; }
  double value() const;

 private:
  Reconstruction originals_;
  double D_;
  double sum_ = 0.0;
  int count_ = 0;
};

// mean over samples of min(||x_hat - x||, D) / D.
double clamped_distance(const Reconstruction& iterate, const Reconstruction& originals,
                        double D);

// Gradient-matching reconstruction of m examples with known targets from one
// observed gradient at theta.
AttackTrace invert_gradient(const ModelSpec& spec, const ParamVector& theta,
                            const GradVector& g_tilde, std::span<const double> labels,
                            const AttackConfig& cfg,
                            const Reconstruction* originals = nullptr, double D = 0.0);

// F(X) for a candidate reconstruction.
double matching_objective(const ModelSpec& spec, const ParamVector& theta,
                          const GradVector& g_tilde, std::span<const double> labels,
                          const Reconstruction& X);

// 1 - (1/m) sum_i (1/T) sum_{t=1..T} min(||X_{t,i} - X_i||, D) / D.
double privacy_leakage(std::span<const Reconstruction> iterates,
                       const Reconstruction& originals, double D);
// Same over the iterates held by a complete trace.
double privacy_leakage(const AttackTrace& trace, const Reconstruction& originals,
                       double D);
// Final-iterate diagnostic.
double final_leakage(const AttackTrace& trace, const Reconstruction& originals, double D);

struct Classifier {
  ModelSpec spec;
  ParamVector theta;
  bool diverged = false;

  int predict(std::span<const double> x) const;
};

// Class a target stands for: the index for classifiers, y > 0 for regression.
int target_class(const ModelSpec& spec, double y);

Classifier train_phase2(const ClientDataset& recovered, const ModelSpec& spec, int epochs,
                        double lr, std::uint64_t seed, double init_scale = 0.01);

double risk(const Classifier& h, Batch test_set);

enum class AdvSearchKind { random_ball, gradient_ascent };

struct AdvSearch {
  AdvSearchKind kind = AdvSearchKind::random_ball;
  int n_probe = 64;
  // Probe radii are drawn in a ball of this radius and kept when within the
  // budget; 0 uses the budget itself. Fixing it makes the estimate monotone in
  // the budget as well as in n_probe.
  double max_radius = 0.0;
  int steps = 20;
  double step_fraction = 0.25;  // ascent step as a fraction of the budget
  std::uint64_t seed = 0;
};

std::string to_string(AdvSearchKind kind);
AdvSearchKind adv_search_from_string(const std::string& name);

// Lower estimate of the adversarial risk: the fraction of points for which the
// search finds a point within `budget` that h labels differently.
double adv_risk(const Classifier& h, Batch test_set, double budget,
                const AdvSearch& search = {});

double sample_lower_bound(double eps, double delta, double c_a, double delta_up);
double log_sample_lower_bound(double eps, double delta, double c_a, double delta_up);

bool not_pac_condition(double delta_up, double m_prot, double eps);

struct Phase2Report {
  double risk = 0.0;
  double adv_risk = 0.0;
  double budget = 0.0;
  double pac_eps = 0.0;
  double pac_delta = 0.0;
  double sample_lower_bound = 0.0;
  double log_sample_lower_bound = 0.0;
  bool not_pac_learnable = false;
  AdvSearch search;
  bool classifier_diverged = false;
  std::vector<double> theta;
};

}  // namespace pacfl
