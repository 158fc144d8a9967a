#include "pacfl/verify.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "pacfl/errors.hpp"
#include "pacfl/rng.hpp"
#include "pacfl/stats.hpp"

namespace pacfl {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

}  // namespace

FLRunConfig scenario_fl_config(const Scenario& s, std::uint64_t seed) {
  FLRunConfig fl;
  fl.rounds = s.rounds;
  fl.learning_rate = s.learning_rate;
  fl.schedule = s.schedule;
  fl.model = s.model;
  fl.init_scale = s.init_scale;
  fl.seed = derive_seed(seed, {stream_key("fl")});
  fl.mechanism = build_mechanism(s.mechanism, static_cast<std::size_t>(s.model.param_dim()),
                                 derive_seed(seed, {stream_key("he")}));
  fl.threads = 1;
  return fl;
}

DatasetSpec scenario_data(const Scenario& s, std::uint64_t seed) {
  DatasetSpec ds = s.data;
  ds.seed = derive_seed(seed, {stream_key("data")});
  return ds;
}

namespace {

Reconstruction features(const ClientDataset& ds) {
  Reconstruction out;
  out.reserve(ds.size());
  for (const auto& ex : ds.examples) out.push_back(ex.x);
  return out;
}

std::vector<double> targets(const ClientDataset& ds) {
  std::vector<double> out;
  out.reserve(ds.size());
  for (const auto& ex : ds.examples) out.push_back(ex.y);
  return out;
}

struct Measured {
  double value;
  double rhs;
  bool pre;
};

Measured pick(const std::string& name, const TrialResult& t, const Scenario& s) {
  if (name == "privacy") return {t.eps_p, t.privacy_rhs, t.privacy_pre};
  if (name == "utility") return {t.eps_u, t.utility_rhs, t.utility_pre};
  if (name == "utility-he")
    return {t.eps_u, t.utility_he_rhs,
            s.mechanism.kind == MechanismKind::he && t.delta_two == 0.0};
  if (name == "tradeoff-general")
    return {t.eps_u, t.tradeoff_general_rhs, t.tradeoff_general_pre};
  return {t.eps_u, t.tradeoff_randomization_rhs, t.tradeoff_randomization_pre};
}

void check_bound_name(const std::string& name) {
  const auto& names = bound_names();
  if (std::find(names.begin(), names.end(), name) == names.end())
    throw ConfigError("unknown bound '" + name + "'");
}

}  // namespace

std::string to_string(MechanismKind kind) {
  switch (kind) {
    case MechanismKind::none: return "none";
    case MechanismKind::randomization: return "rand";
    case MechanismKind::he: return "he";
  }
  return "none";
}

MechanismKind mechanism_kind_from_string(const std::string& name) {
  if (name == "none") return MechanismKind::none;
  if (name == "rand" || name == "randomization") return MechanismKind::randomization;
  if (name == "he" || name == "he_codec") return MechanismKind::he;
  throw ConfigError("unknown mechanism '" + name + "'");
}

void MechanismConfig::validate() const {
  if (!(sigma >= 0) || !std::isfinite(sigma)) throw ConfigError("sigma must be >= 0");
  if (!(fixed_norm >= 0)) throw ConfigError("fixed_norm must be >= 0");
  if (!(he_offset_scale >= 0)) throw ConfigError("he_offset_scale must be >= 0");
}

ProtectionMechanism build_mechanism(const MechanismConfig& cfg, std::size_t dim,
                                    std::uint64_t seed) {
  cfg.validate();
  switch (cfg.kind) {
    case MechanismKind::none: return NoProtection{};
    case MechanismKind::randomization:
      return Randomization{cfg.sigma, cfg.shared_across_clients, cfg.fixed_norm};
    case MechanismKind::he: return HeCodec::random(dim, cfg.he_offset_scale, seed);
  }
  return NoProtection{};
}

void Scenario::validate() const {
  data.validate();
  model.validate();
  mechanism.validate();
  attack.validate();
  if (model.input_dim != data.input_dim)
    throw ConfigError("model input_dim does not match the dataset input_dim");
  if (model.is_classifier() && data.targets != TargetKind::class_index)
    throw ConfigError("classifier models need class_index targets");
  if (model.is_classifier() && model.num_classes != data.num_classes)
    throw ConfigError("model num_classes does not match the dataset");
  if (rounds < 1) throw ConfigError("rounds must be >= 1");
  if (!(learning_rate > 0)) throw ConfigError("learning_rate must be > 0");
  if (target_client < 0 || target_client >= data.num_clients)
    throw ConfigError("target_client out of range");
  if (attack_round < 0 || attack_round >= rounds)
    throw ConfigError("attack_round must lie in [0, rounds)");
  if (!(gamma > 0 && gamma <= 1)) throw ConfigError("gamma must lie in (0, 1]");
  if (!(confidence_eta > 0 && confidence_eta <= 1))
    throw ConfigError("confidence_eta must lie in (0, 1]");
  if (!(rho > 0)) throw ConfigError("rho must be > 0");
  if (!(L > 0)) throw ConfigError("L must be > 0");
  if (!(slack_sigmas >= 0)) throw ConfigError("slack_sigmas must be >= 0");
  if (n_eval < 100) throw ConfigError("n_eval must be >= 100");
  if (calibration_examples < 2) throw ConfigError("calibration_examples must be >= 2");
}

std::uint64_t trial_seed(std::uint64_t master_seed, std::uint64_t trial) {
  return derive_seed(master_seed, {stream_key("trial"), trial});
}

ConstantsEstimate calibrate(const Scenario& s, std::uint64_t master_seed) {
  s.validate();
  const std::uint64_t cs = derive_seed(master_seed, {stream_key("calibration")});
  const auto datasets = generate(scenario_data(s, cs));
  const RunResult rr = run(scenario_fl_config(s, cs), datasets);
  if (rr.aborted) throw NumericError("calibration run diverged: " + rr.diagnostic);
  const auto& rec = rr.records[s.attack_round];
  const auto& target = datasets[s.target_client];

  AttackConfig acfg = s.attack;
  acfg.seed = derive_seed(cs, {stream_key("attack")});
  const auto labels = targets(target);
  const AttackTrace pilot = invert_gradient(s.model, rec.server_state,
                                            rec.clients[s.target_client].g_tilde, labels, acfg);
  const std::span<const double> mismatch =
      std::span(pilot.mismatch).subspan(pilot.mismatch.empty() ? 0 : 1);

  DatasetSpec pool_spec = s.data;
  pool_spec.num_clients = 1;
  pool_spec.client_sizes = {s.calibration_examples};
  pool_spec.seed = derive_seed(cs, {stream_key("pool")});
  const auto pool = generate(pool_spec);

  ConstantsOptions opts = s.constants;
  opts.seed = derive_seed(cs, {stream_key("estimate")});
  ConstantsEstimate est = estimate_constants(s.model, rec.server_state, pool, opts, mismatch);

  // C and M are needed around the final model, where the utility loss is
  // measured; widen the perturbation radius to cover the observed distortion.
  const double dtwo = l2_distance(rr.final_decoded.view(), rr.final_shadow.view());
  ConstantsOptions final_opts = opts;
  final_opts.delta_budget = std::max(opts.delta_budget, 2 * dtwo);
  const ConstantsEstimate at_final =
      estimate_constants(s.model, rr.final_shadow, pool, final_opts);
  est.C = at_final.C;
  est.C_theta = at_final.C_theta;
  est.C_data = at_final.C_data;
  est.M = at_final.M;
  est.delta_budget = final_opts.delta_budget;
  est.D = s.data.diameter_cap;
  return est;
}

TrialResult run_trial(const Scenario& s, const ConstantsEstimate& c, int trial,
                      std::uint64_t seed) {
  RunArtifacts art;
  art.data = scenario_data(s, seed);
  art.datasets = generate(art.data);
  RunResult rr = run(scenario_fl_config(s, seed), art.datasets);
  if (rr.aborted) {
    TrialResult tr;
    tr.trial = trial;
    tr.seed = seed;
    tr.aborted = true;
    tr.diagnostic = rr.diagnostic;
    return tr;
  }
  art.records = std::move(rr.records);
  art.final_decoded = std::move(rr.final_decoded);
  art.final_shadow = std::move(rr.final_shadow);
  return evaluate_run(s, c, trial, seed, art);
}

TrialResult evaluate_run(const Scenario& s, const ConstantsEstimate& c, int trial,
                         std::uint64_t seed, const RunArtifacts& art,
                         AttackTrace* target_trace) {
  TrialResult tr;
  tr.trial = trial;
  tr.seed = seed;
  const DatasetSpec& ds = art.data;
  const auto& datasets = art.datasets;
  require(static_cast<int>(art.records.size()) > s.attack_round,
          "run artifacts do not contain the attack round");
  require(static_cast<int>(datasets.size()) == s.data.num_clients,
          "run artifacts have a different number of clients than the scenario");
  const int K = static_cast<int>(datasets.size());
  const auto& rec = art.records[s.attack_round];
  require(static_cast<int>(rec.clients.size()) == K,
          "round record has a different number of clients than the datasets");
  const double D = s.data.diameter_cap;

  tr.eps_p_clients.resize(K);
  for (int k = 0; k < K; ++k) {
    AttackConfig acfg = s.attack;
    acfg.seed = derive_seed(seed, {stream_key("attack"), static_cast<std::uint64_t>(k)});
    const auto originals = features(datasets[k]);
    const auto labels = targets(datasets[k]);
    const AttackTrace trace = invert_gradient(s.model, rec.server_state,
                                              rec.clients[k].g_tilde, labels, acfg,
                                              &originals, D);
    if (!trace.leakage) {
      tr.aborted = true;
      tr.diagnostic = "attack on client " + std::to_string(k) + " made no progress: " +
                      trace.diagnostic;
      return tr;
    }
    tr.eps_p_clients[k] = *trace.leakage;
    if (k == s.target_client) {
      tr.eps_p = *trace.leakage;
      tr.eps_p_final = final_leakage(trace, originals, D);
      tr.attack_mismatch = trace.mismatch;
      if (target_trace != nullptr) *target_trace = trace;
    }
  }

  const auto& target = datasets[s.target_client];
  tr.eps_e = static_cast<int>(target.size());
  const auto& cr = rec.clients[s.target_client];
  tr.delta_up_grad = cr.delta_up_grad;
  tr.delta_up_param = cr.delta_up_param;
  tr.delta_two_round = rec.delta_two;

  std::vector<double> delta(art.final_shadow.size());
  for (std::size_t j = 0; j < delta.size(); ++j)
    delta[j] = art.final_decoded[j] - art.final_shadow[j];
  tr.delta_two = l2_norm(delta);
  DistributionSampler sampler(DataDistribution(ds), derive_seed(seed, {stream_key("eval")}));
  const UtilityLoss ul =
      measure_utility_loss(s.model, art.final_shadow, delta, target.batch(), sampler, s.n_eval);
  tr.eps_u = ul.eps_u;
  tr.eps_u_halfwidth = ul.halfwidth;

  const double m = static_cast<double>(tr.eps_e);
  const int d = s.model.param_dim();
  const auto pb = privacy_upper_bound(s.gamma, m, c.c_a, D, tr.delta_up_grad, c.c2, c.c_b,
                                      s.attack.T);
  tr.privacy_rhs = pb.rhs;
  tr.privacy_pre = pb.precondition_ok;

  if (s.lambda > 0) {
    tr.lambda = s.lambda;
    tr.utility_pre = s.lambda > tr.delta_two;
    tr.utility_rhs = tr.utility_pre ? utility_upper_bound(c.C, s.lambda, tr.delta_two, c.M, d,
                                                          D, s.confidence_eta, m)
                                    : kNaN;
  } else {
    const auto best =
        minimize_utility_lambda(c.C, tr.delta_two, c.M, d, D, s.confidence_eta, m);
    tr.lambda = best.lambda;
    tr.utility_pre = true;
    tr.utility_rhs = best.rhs;
  }
  const double lambda_he =
      s.lambda > 0 ? s.lambda
                   : minimize_utility_lambda(c.C, 0.0, c.M, d, D, s.confidence_eta, m).lambda;
  tr.utility_he_rhs = utility_upper_bound_he(c.C, lambda_he, c.M, d, D, s.confidence_eta, m);

  BoundInputs in;
  in.constants = c;
  in.constants.D = D;
  in.gamma.assign(K, s.gamma);
  in.eta = s.confidence_eta;
  in.lambda = tr.lambda;
  in.rho = s.rho;
  in.L = s.L;
  in.eps_p = tr.eps_p_clients;
  for (int k = 0; k < K; ++k) {
    in.eps_e.push_back(static_cast<double>(datasets[k].size()));
    in.eps_u.push_back(k == s.target_client ? tr.eps_u : kNaN);
    in.delta_up.push_back(rec.clients[k].delta_up_grad);
  }
  in.delta_two = tr.delta_two;
  in.K = K;
  in.d = d;
  in.T = s.attack.T;
  in.client = s.target_client;
  const bool budget_ok = probability_budget(in.eta, in.gamma) > 0;
  tr.tradeoff_general_rhs = tradeoff_general(in);
  tr.tradeoff_general_pre = budget_ok && tr.delta_two <= s.L * tr.delta_up_grad;
  tr.tradeoff_randomization_rhs = tradeoff_randomization(in);
  tr.tradeoff_randomization_pre =
      budget_ok && s.mechanism.kind == MechanismKind::randomization;
  return tr;
}

const std::vector<std::string>& bound_names() {
  static const std::vector<std::string> names = {
      "privacy", "utility", "utility-he", "tradeoff-general", "tradeoff-randomization"};
  return names;
}

BoundReport summarize_bound(const std::string& name, const Scenario& s,
                            const ConstantsEstimate& constants,
                            std::vector<TrialResult> trials) {
  check_bound_name(name);
  BoundReport r;
  r.bound_name = name;
  r.scenario = s;
  r.constants = constants;
  r.trials = static_cast<int>(trials.size());
  const bool tradeoff = name.rfind("tradeoff", 0) == 0;
  if (name == "privacy") {
    r.confidence = 1 - s.gamma;
  } else if (tradeoff) {
    const std::vector<double> gammas(s.data.num_clients, s.gamma);
    r.probability_budget = probability_budget(s.confidence_eta, gammas);
    r.confidence = r.probability_budget;
    r.vacuous = r.probability_budget <= 0;
  } else {
    r.confidence = 1 - s.confidence_eta;
  }

  int completed = 0, holding_all = 0;
  std::vector<double> rhs, measured;
  for (const auto& t : trials) {
    if (t.aborted) {
      ++r.aborted;
      continue;
    }
    ++completed;
    const auto m = pick(name, t, s);
    const bool ok = m.value <= m.rhs;
    if (ok) ++holding_all;
    if (!m.pre) {
      ++r.precondition_failed;
      continue;
    }
    ++r.evaluated;
    if (ok) ++r.holding;
    rhs.push_back(m.rhs);
    measured.push_back(m.value);
  }
  r.fraction_holding = r.evaluated > 0 ? static_cast<double>(r.holding) / r.evaluated : 0.0;
  r.fraction_holding_all =
      completed > 0 ? static_cast<double>(holding_all) / completed : 0.0;
  if (r.evaluated > 0 && !r.vacuous) {
    const double conf = r.confidence;
    r.slack = s.slack_sigmas * std::sqrt(conf * (1 - conf) / r.evaluated);
    r.precondition_ok = true;
    r.holds = r.fraction_holding >= conf - r.slack;
    r.rhs_median = median(rhs);
    r.measured_median = median(measured);
  }

  r.notes.push_back(
      "delta_up is measured in gradient space (||g_tilde - g||); the parameter-space value "
      "eta * ||g_tilde - g|| is recorded as delta_up_param");
  if (name == "privacy" || tradeoff)
    r.notes.push_back(
        "the privacy bound uses ln(2/gamma) while the trade-off bounds use ln(1/gamma); "
        "each is evaluated as stated");
  if (tradeoff)
    r.notes.push_back("the generalization term uses M and eps_e of client " +
                      std::to_string(s.target_client) +
                      "; the leakage term averages over all clients");
  if (r.vacuous)
    r.notes.push_back("probability budget 1 - eta - sum gamma is not positive; the bound "
                      "makes no claim for this configuration");
  if (r.evaluated == 0 && !r.vacuous)
    r.notes.push_back("no trial satisfied the bound's precondition");
  if (constants.pairs_skipped > 0)
    r.notes.push_back("constant estimation skipped " + std::to_string(constants.pairs_skipped) +
                      " degenerate pairs");
  r.per_trial = std::move(trials);
  return r;
}

BoundReport verify_bound(const std::string& name, const Scenario& s, int trials,
                         std::uint64_t master_seed, int threads) {
  check_bound_name(name);
  require(trials >= 100, "verify_bound: trials must be >= 100");
  s.validate();
  const ConstantsEstimate constants =
      s.fixed_constants ? *s.fixed_constants : calibrate(s, master_seed);
  std::vector<TrialResult> results(trials);
  parallel_for(trials, threads, [&](int i) {
    const std::uint64_t seed = trial_seed(master_seed, static_cast<std::uint64_t>(i));
    try {
      results[i] = run_trial(s, constants, i, seed);
    } catch (const NumericError& e) {
      results[i] = TrialResult{};
      results[i].trial = i;
      results[i].seed = seed;
      results[i].aborted = true;
      results[i].diagnostic = e.what();
    }
  });
  return summarize_bound(name, s, constants, std::move(results));
}

}  // namespace pacfl
