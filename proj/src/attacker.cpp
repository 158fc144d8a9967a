#include "pacfl/attacker.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "pacfl/errors.hpp"
#include "pacfl/rng.hpp"

namespace pacfl {
namespace {

struct Matching {
  double F = 0.0;
  std::vector<GradVector> per_example;
  GradVector G;  // (1/m) sum of per-example gradients
};

Matching evaluate(const ModelSpec& spec, const ParamVector& theta, const GradVector& g_tilde,
                  std::span<const double> labels, const Reconstruction& X) {
  Matching out;
  const std::size_t m = X.size();
  out.per_example.reserve(m);
  out.G = GradVector(theta.size());
  for (std::size_t i = 0; i < m; ++i) {
    out.per_example.push_back(example_grad_params(spec, theta, X[i], labels[i]));
    for (std::size_t j = 0; j < theta.size(); ++j) out.G[j] += out.per_example[i][j];
  }
  const double inv = 1.0 / static_cast<double>(m);
  for (auto& v : out.G) v *= inv;
  out.F = 0.0;
  for (std::size_t j = 0; j < theta.size(); ++j) {
    const double e = out.G[j] - g_tilde[j];
    out.F += e * e;
  }
  return out;
}

// dF/dX for the linear model: (2/m) (theta (x_i . e) + r_i e).
Reconstruction linear_gradient(const ParamVector& theta, const GradVector& g_tilde,
                               std::span<const double> labels, const Reconstruction& X,
                               const Matching& at) {
  const std::size_t m = X.size(), p = theta.size();
  std::vector<double> e(p);
  for (std::size_t j = 0; j < p; ++j) e[j] = at.G[j] - g_tilde[j];
  Reconstruction grad(m, std::vector<double>(p));
  for (std::size_t i = 0; i < m; ++i) {
    const double r = dot(theta.view(), X[i]) - labels[i];
    const double xe = dot(X[i], e);
    for (std::size_t j = 0; j < p; ++j)
      grad[i][j] = 2.0 / static_cast<double>(m) * (theta[j] * xe + r * e[j]);
  }
  return grad;
}

// Central differences over input coordinates. Perturbing x_i only changes its
// own term of G, so each probe costs a single example gradient.
Reconstruction fd_gradient(const ModelSpec& spec, const ParamVector& theta,
                           const GradVector& g_tilde, std::span<const double> labels,
                           const Reconstruction& X, const Matching& at, double h) {
  const std::size_t m = X.size(), d = theta.size();
  const double inv = 1.0 / static_cast<double>(m);
  Reconstruction grad(m, std::vector<double>(X.empty() ? 0 : X[0].size()));
  std::vector<double> probe;
  auto F_with = [&](std::size_t i, const std::vector<double>& xi) {
    const auto gi = example_grad_params(spec, theta, xi, labels[i]);
    double F = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      const double e = at.G[j] + (gi[j] - at.per_example[i][j]) * inv - g_tilde[j];
      F += e * e;
    }
    return F;
  };
  for (std::size_t i = 0; i < m; ++i) {
    probe = X[i];
    for (std::size_t c = 0; c < probe.size(); ++c) {
      const double x0 = probe[c];
      probe[c] = x0 + h;
      const double up = F_with(i, probe);
      probe[c] = x0 - h;
      const double down = F_with(i, probe);
      probe[c] = x0;
      grad[i][c] = (up - down) / (2.0 * h);
    }
  }
  return grad;
}

Reconstruction step(const Reconstruction& X, const Reconstruction& dir, double a) {
  Reconstruction out = X;
  for (std::size_t i = 0; i < X.size(); ++i)
    for (std::size_t c = 0; c < X[i].size(); ++c) out[i][c] -= a * dir[i][c];
  return out;
}

bool finite(const Reconstruction& X) {
  for (const auto& row : X)
    for (double v : row)
      if (!std::isfinite(v)) return false;
  return true;
}

// Margin of the labelled class; negative once h disagrees with the label.
double margin(const Classifier& h, std::span<const double> x, int label) {
  const auto z = forward(h.spec, h.theta, x);
  if (z.size() == 1) {
    // predict() returns 1 iff z > 0.
    return label == 1 ? z[0] : -z[0];
  }
  double best_other = -std::numeric_limits<double>::infinity();
  for (int k = 0; k < static_cast<int>(z.size()); ++k)
    if (k != label) best_other = std::max(best_other, z[k]);
  return z[label] - best_other;
}

bool search_random_ball(const Classifier& h, const LabeledExample& ex, int label,
                        double budget, const AdvSearch& s, std::uint64_t point) {
  const double R = s.max_radius > 0 ? s.max_radius : budget;
  Rng rng = make_rng(s.seed, {stream_key("adv.ball"), point});
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const std::size_t p = ex.x.size();
  std::vector<double> dir(p), probe(p);
  for (int n = 0; n < s.n_probe; ++n) {
    for (auto& v : dir) v = normal(rng);
    const double u = unif(rng);
    const double nrm = l2_norm(dir);
    if (nrm == 0) continue;
    const double r = R * std::pow(u, 1.0 / static_cast<double>(p));
    if (r > budget) continue;
    for (std::size_t c = 0; c < p; ++c) probe[c] = ex.x[c] + r * dir[c] / nrm;
    if (h.predict(probe) != label) return true;
  }
  return false;
}

bool search_gradient_ascent(const Classifier& h, const LabeledExample& ex, int label,
                            double budget, const AdvSearch& s) {
  const std::size_t p = ex.x.size();
  std::vector<double> x = ex.x, g(p), probe;
  for (int it = 0; it < s.steps; ++it) {
    double scale = 1.0;
    for (double v : x) scale = std::max(scale, std::abs(v));
    const double fd = 1e-6 * scale;
    probe = x;
    for (std::size_t c = 0; c < p; ++c) {
      probe[c] = x[c] + fd;
      const double up = margin(h, probe, label);
      probe[c] = x[c] - fd;
      const double down = margin(h, probe, label);
      probe[c] = x[c];
      g[c] = (up - down) / (2.0 * fd);
    }
    const double gn = l2_norm(g);
    if (!(gn > 0)) return false;
    const double a = s.step_fraction * budget;
    for (std::size_t c = 0; c < p; ++c) x[c] -= a * g[c] / gn;
    // project onto the budget ball around the clean point
    const double dist = l2_distance(x, ex.x);
    if (dist > budget)
      for (std::size_t c = 0; c < p; ++c) x[c] = ex.x[c] + (x[c] - ex.x[c]) * budget / dist;
    if (h.predict(x) != label) return true;
  }
  return false;
}

}  // namespace

std::string to_string(Optimizer opt) { return opt == Optimizer::adam ? "adam" : "sgd"; }

Optimizer optimizer_from_string(const std::string& name) {
  if (name == "sgd") return Optimizer::sgd;
  if (name == "adam") return Optimizer::adam;
  throw ConfigError("unknown optimizer '" + name + "'");
}

std::string to_string(AttackInit init) {
  return init == AttackInit::gaussian ? "gaussian" : "zeros";
}

AttackInit attack_init_from_string(const std::string& name) {
  if (name == "zeros") return AttackInit::zeros;
  if (name == "gaussian") return AttackInit::gaussian;
  throw ConfigError("unknown attack init '" + name + "'");
}

std::string to_string(AdvSearchKind kind) {
  return kind == AdvSearchKind::gradient_ascent ? "gradient-ascent" : "random-ball";
}

AdvSearchKind adv_search_from_string(const std::string& name) {
  if (name == "random-ball") return AdvSearchKind::random_ball;
  if (name == "gradient-ascent") return AdvSearchKind::gradient_ascent;
  throw ConfigError("unknown adversarial search '" + name + "'");
}

void AttackConfig::validate() const {
  if (T < 1) throw ConfigError("attack T must be >= 1");
  if (!(step_size > 0)) throw ConfigError("attack step_size must be > 0");
  if (!(init_scale >= 0)) throw ConfigError("attack init_scale must be >= 0");
  if (keep_every < 1) throw ConfigError("attack keep_every must be >= 1");
  if (!(fd_step > 0)) throw ConfigError("attack fd_step must be > 0");
}

bool AttackTrace::complete() const {
  return static_cast<int>(kept.size()) == iterations + 1;
}

LeakageAccumulator::LeakageAccumulator(Reconstruction originals, double D)
    : originals_(std::move(originals)), D_(D) {
  require(D > 0, "privacy leakage: D must be > 0");
}

void LeakageAccumulator::add(const Reconstruction& iterate) {
  sum_ += clamped_distance(iterate, originals_, D_);
  ++count_;
}

double LeakageAccumulator::value() const {
  require(count_ > 0, "privacy leakage: no iterates recorded");
  return 1.0 - sum_ / count_;
}

double clamped_distance(const Reconstruction& iterate, const Reconstruction& originals,
                        double D) {
  require(D > 0, "privacy leakage: D must be > 0");
  require(!originals.empty(), "privacy leakage: no originals");
  require(iterate.size() == originals.size(),
          "privacy leakage: reconstruction and originals differ in sample count");
  double s = 0.0;
  for (std::size_t i = 0; i < originals.size(); ++i) {
    require(iterate[i].size() == originals[i].size(),
            "privacy leakage: feature dimension mismatch");
    s += std::min(l2_distance(iterate[i], originals[i]), D) / D;
  }
  return s / static_cast<double>(originals.size());
}

double matching_objective(const ModelSpec& spec, const ParamVector& theta,
                          const GradVector& g_tilde, std::span<const double> labels,
                          const Reconstruction& X) {
  require(X.size() == labels.size() && !X.empty(),
          "matching objective: need one label per reconstructed example");
  return evaluate(spec, theta, g_tilde, labels, X).F;
}

AttackTrace invert_gradient(const ModelSpec& spec, const ParamVector& theta,
                            const GradVector& g_tilde, std::span<const double> labels,
                            const AttackConfig& cfg, const Reconstruction* originals,
                            double D) {
  cfg.validate();
  spec.validate();
  require(!labels.empty(), "invert_gradient: m must be >= 1");
  if (static_cast<int>(theta.size()) != spec.param_dim() ||
      g_tilde.size() != theta.size())
    throw ConfigError("invert_gradient: theta / gradient dimension mismatch");
  const std::size_t m = labels.size();
  const std::size_t p = static_cast<std::size_t>(spec.input_dim);

  AttackTrace trace;
  trace.m = static_cast<int>(m);
  trace.p = static_cast<int>(p);

  Reconstruction X(m, std::vector<double>(p, 0.0));
  if (cfg.init == AttackInit::gaussian && cfg.init_scale > 0) {
    Rng rng = make_rng(cfg.seed, {stream_key("attack.init")});
    std::normal_distribution<double> normal(0.0, cfg.init_scale);
    for (auto& row : X)
      for (auto& v : row) v = normal(rng);
  }

  std::optional<LeakageAccumulator> acc;
  if (originals != nullptr) acc.emplace(*originals, D);

  auto keep = [&](int t, const Reconstruction& Xt) {
    trace.kept.push_back(t);
    trace.snapshots.push_back(Xt);
  };

  Matching at;
  try {
    at = evaluate(spec, theta, g_tilde, labels, X);
  } catch (const NumericError& e) {
    trace.truncated = true;
    trace.diagnostic = std::string("iteration 0: ") + e.what();
    trace.final = X;
    return trace;
  }
  trace.objective.push_back(at.F);
  trace.mismatch.push_back(std::sqrt(at.F));
  keep(0, X);

  // adam state
  Reconstruction m1(m, std::vector<double>(p, 0.0)), m2 = m1;
  constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;

  for (int t = 1; t <= cfg.T; ++t) {
    Reconstruction next;
    Matching next_at;
    try {
      const auto grad = spec.kind == ModelKind::linear
                            ? linear_gradient(theta, g_tilde, labels, X, at)
                            : fd_gradient(spec, theta, g_tilde, labels, X, at, cfg.fd_step);
      if (cfg.optimizer == Optimizer::adam) {
        Reconstruction dir(m, std::vector<double>(p));
        const double c1 = 1.0 - std::pow(b1, t), c2 = 1.0 - std::pow(b2, t);
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t c = 0; c < p; ++c) {
            m1[i][c] = b1 * m1[i][c] + (1 - b1) * grad[i][c];
            m2[i][c] = b2 * m2[i][c] + (1 - b2) * grad[i][c] * grad[i][c];
            dir[i][c] = (m1[i][c] / c1) / (std::sqrt(m2[i][c] / c2) + eps);
          }
        next = step(X, dir, cfg.step_size);
        next_at = evaluate(spec, theta, g_tilde, labels, next);
      } else {
        double a = cfg.step_size;
        next = step(X, grad, a);
        next_at = evaluate(spec, theta, g_tilde, labels, next);
        if (cfg.backtracking) {
          int halvings = 0;
          while (!(next_at.F <= at.F) && halvings < 50) {
            a *= 0.5;
            ++halvings;
            next = step(X, grad, a);
            next_at = evaluate(spec, theta, g_tilde, labels, next);
          }
          if (!(next_at.F <= at.F)) {
            next = X;
            next_at = at;
          }
        }
      }
      if (!finite(next) || !std::isfinite(next_at.F))
        throw NumericError("matching objective is not finite");
    } catch (const NumericError& e) {
      trace.truncated = true;
      trace.diagnostic = "iteration " + std::to_string(t) + ": " + e.what();
      break;
    }
    X = std::move(next);
    at = std::move(next_at);
    trace.iterations = t;
    trace.objective.push_back(at.F);
    trace.mismatch.push_back(std::sqrt(at.F));
    if (acc) acc->add(X);
    if (t % cfg.keep_every == 0 || t == cfg.T) keep(t, X);
  }
  if (trace.kept.back() != trace.iterations) keep(trace.iterations, X);
  trace.final = X;
  if (acc && acc->count() > 0) trace.leakage = acc->value();
  return trace;
}

double privacy_leakage(std::span<const Reconstruction> iterates,
                       const Reconstruction& originals, double D) {
  require(D > 0, "privacy leakage: D must be > 0");
  require(!iterates.empty(), "privacy leakage: trajectory must have T >= 1 iterates");
  double s = 0.0;
  for (const auto& X : iterates) s += clamped_distance(X, originals, D);
  return 1.0 - s / static_cast<double>(iterates.size());
}

double privacy_leakage(const AttackTrace& trace, const Reconstruction& originals,
                       double D) {
  require(trace.complete(),
          "privacy leakage: trace is strided; use the streamed value instead");
  require(trace.iterations >= 1, "privacy leakage: trace has no updates");
  return privacy_leakage(std::span(trace.snapshots).subspan(1), originals, D);
}

double final_leakage(const AttackTrace& trace, const Reconstruction& originals, double D) {
  return 1.0 - clamped_distance(trace.final, originals, D);
}

int Classifier::predict(std::span<const double> x) const {
  return pacfl::predict(spec, theta, x);
}

int target_class(const ModelSpec& spec, double y) {
  if (spec.is_classifier()) return static_cast<int>(y);
  return y > 0 ? 1 : 0;
}

Classifier train_phase2(const ClientDataset& recovered, const ModelSpec& spec, int epochs,
                        double lr, std::uint64_t seed, double init_scale) {
  spec.validate();
  require(!recovered.examples.empty(), "train_phase2: recovered dataset must be non-empty");
  require(epochs >= 0, "train_phase2: epochs must be >= 0");
  require(lr > 0, "train_phase2: lr must be > 0");
  Classifier h;
  h.spec = spec;
  h.theta = ParamVector(static_cast<std::size_t>(spec.param_dim()));
  if (init_scale > 0) {
    Rng rng = make_rng(seed, {stream_key("phase2.init")});
    std::normal_distribution<double> normal(0.0, init_scale);
    for (auto& v : h.theta) v = normal(rng);
  }
  for (int e = 0; e < epochs; ++e) {
    try {
      const auto g = grad_params(spec, h.theta, recovered.batch());
      ParamVector next = h.theta;
      for (std::size_t j = 0; j < next.size(); ++j) next[j] -= lr * g[j];
      if (!next.all_finite()) throw NumericError("phase-2 parameters are not finite");
      h.theta = std::move(next);
    } catch (const NumericError&) {
      h.diverged = true;
      break;
    }
  }
  return h;
}

double risk(const Classifier& h, Batch test_set) {
  require(!test_set.empty(), "risk: test set must be non-empty");
  std::size_t wrong = 0;
  for (const auto& ex : test_set)
    if (h.predict(ex.x) != target_class(h.spec, ex.y)) ++wrong;
  return static_cast<double>(wrong) / static_cast<double>(test_set.size());
}

double adv_risk(const Classifier& h, Batch test_set, double budget, const AdvSearch& search) {
  require(budget >= 0, "adv_risk: budget must be >= 0");
  require(!test_set.empty(), "adv_risk: test set must be non-empty");
  require(search.n_probe >= 0 && search.steps >= 0, "adv_risk: negative search budget");
  std::size_t hit = 0;
  for (std::size_t n = 0; n < test_set.size(); ++n) {
    const auto& ex = test_set[n];
    const int label = target_class(h.spec, ex.y);
    if (h.predict(ex.x) != label) {
      ++hit;
      continue;
    }
    if (budget == 0) continue;
    const bool found =
        search.kind == AdvSearchKind::random_ball
            ? search_random_ball(h, ex, label, budget, search, n)
            : search_gradient_ascent(h, ex, label, budget, search);
    if (found) ++hit;
  }
  return static_cast<double>(hit) / static_cast<double>(test_set.size());
}

namespace {
void check_pac_inputs(double eps, double delta, double c_a, double delta_up) {
  require(delta > 0.5 && delta < 1, "sample lower bound requires 0.5 < delta < 1");
  require(eps > 0 && eps < 1, "sample lower bound requires 0 < eps < 1");
  require(c_a > 0, "sample lower bound requires c_a > 0");
  require(delta_up >= 0, "sample lower bound requires delta_up >= 0");
}
}  // namespace

double sample_lower_bound(double eps, double delta, double c_a, double delta_up) {
  check_pac_inputs(eps, delta, c_a, delta_up);
  return std::min(2 * delta - 1, 1 - eps) * std::exp2(c_a * c_a * delta_up * delta_up);
}

double log_sample_lower_bound(double eps, double delta, double c_a, double delta_up) {
  check_pac_inputs(eps, delta, c_a, delta_up);
  return std::log(std::min(2 * delta - 1, 1 - eps)) +
         c_a * c_a * delta_up * delta_up * std::log(2.0);
}

bool not_pac_condition(double delta_up, double m_prot, double eps) {
  require(eps > 0 && eps < 1, "not-PAC condition requires 0 < eps < 1");
  require(m_prot >= 1, "not-PAC condition requires m >= 1");
  return delta_up > std::log(m_prot / (1 - eps));
}

}  // namespace pacfl
