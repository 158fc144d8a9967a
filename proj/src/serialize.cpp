#include "pacfl/serialize.hpp"

#include "json_reader.hpp"
#include "pacfl/errors.hpp"

namespace pacfl {
using detail::Reader;

std::string to_string(LearningRateSchedule s) {
  return s == LearningRateSchedule::inv_sqrt ? "inv_sqrt" : "constant";
}

LearningRateSchedule schedule_from_string(const std::string& name) {
  if (name == "constant") return LearningRateSchedule::constant;
  if (name == "inv_sqrt") return LearningRateSchedule::inv_sqrt;
  throw ConfigError("unknown learning-rate schedule '" + name + "'");
}

void to_json(Json& j, const ModelSpec& v) {
  j = {{"kind", to_string(v.kind)},
       {"input_dim", v.input_dim},
       {"hidden_dim", v.hidden_dim},
       {"num_classes", v.num_classes},
       {"param_dim", v.param_dim()}};
}

void from_json(const Json& j, ModelSpec& v) {
  Reader r(j, "model");
  r.get_enum("kind", v.kind, model_kind_from_string);
  r.get("input_dim", v.input_dim);
  r.get("hidden_dim", v.hidden_dim);
  r.get("num_classes", v.num_classes);
  int ignored = 0;
  r.get("param_dim", ignored);  // derived; accepted for round trips
  r.finish();
}

void to_json(Json& j, const DatasetSpec& v) {
  j = {{"num_clients", v.num_clients},
       {"client_sizes", v.client_sizes},
       {"input_dim", v.input_dim},
       {"num_classes", v.num_classes},
       {"class_separation", v.class_separation},
       {"diameter_cap", v.diameter_cap},
       {"seed", v.seed},
       {"targets", to_string(v.targets)},
       {"teacher_noise", v.teacher_noise}};
}

void from_json(const Json& j, DatasetSpec& v) {
  Reader r(j, "data");
  r.get("num_clients", v.num_clients);
  r.get("client_sizes", v.client_sizes);
  r.get("input_dim", v.input_dim);
  r.get("num_classes", v.num_classes);
  r.get("class_separation", v.class_separation);
  r.get("diameter_cap", v.diameter_cap);
  r.get("seed", v.seed);
  r.get_enum("targets", v.targets, target_kind_from_string);
  r.get("teacher_noise", v.teacher_noise);
  r.finish();
}

void to_json(Json& j, const AttackConfig& v) {
  j = {{"T", v.T},
       {"optimizer", to_string(v.optimizer)},
       {"step_size", v.step_size},
       {"init", to_string(v.init)},
       {"init_scale", v.init_scale},
       {"seed", v.seed},
       {"backtracking", v.backtracking},
       {"keep_every", v.keep_every},
       {"fd_step", v.fd_step}};
}

void from_json(const Json& j, AttackConfig& v) {
  Reader r(j, "attack");
  r.get("T", v.T);
  r.get_enum("optimizer", v.optimizer, optimizer_from_string);
  r.get("step_size", v.step_size);
  r.get_enum("init", v.init, attack_init_from_string);
  r.get("init_scale", v.init_scale);
  r.get("seed", v.seed);
  r.get("backtracking", v.backtracking);
  r.get("keep_every", v.keep_every);
  r.get("fd_step", v.fd_step);
  r.finish();
}

void to_json(Json& j, const MechanismConfig& v) {
  j = {{"kind", to_string(v.kind)},
       {"sigma", v.sigma},
       {"shared_across_clients", v.shared_across_clients},
       {"fixed_norm", v.fixed_norm},
       {"he_offset_scale", v.he_offset_scale}};
}

void from_json(const Json& j, MechanismConfig& v) {
  Reader r(j, "mechanism");
  r.get_enum("kind", v.kind, mechanism_kind_from_string);
  r.get("sigma", v.sigma);
  r.get("shared_across_clients", v.shared_across_clients);
  r.get("fixed_norm", v.fixed_norm);
  r.get("he_offset_scale", v.he_offset_scale);
  r.finish();
}

void to_json(Json& j, const ConstantsOptions& v) {
  j = {{"num_pairs", v.num_pairs},
       {"quantile", v.quantile},
       {"delta_budget", v.delta_budget},
       {"num_perturbations", v.num_perturbations},
       {"seed", v.seed}};
}

void from_json(const Json& j, ConstantsOptions& v) {
  Reader r(j, "constants");
  r.get("num_pairs", v.num_pairs);
  r.get("quantile", v.quantile);
  r.get("delta_budget", v.delta_budget);
  r.get("num_perturbations", v.num_perturbations);
  r.get("seed", v.seed);
  r.finish();
}

void to_json(Json& j, const AdvSearch& v) {
  j = {{"kind", to_string(v.kind)},
       {"n_probe", v.n_probe},
       {"max_radius", v.max_radius},
       {"steps", v.steps},
       {"step_fraction", v.step_fraction},
       {"seed", v.seed}};
}

void from_json(const Json& j, AdvSearch& v) {
  Reader r(j, "adv_search");
  r.get_enum("kind", v.kind, adv_search_from_string);
  r.get("n_probe", v.n_probe);
  r.get("max_radius", v.max_radius);
  r.get("steps", v.steps);
  r.get("step_fraction", v.step_fraction);
  r.get("seed", v.seed);
  r.finish();
}

void to_json(Json& j, const Scenario& v) {
  j = {{"data", v.data},
       {"model", v.model},
       {"rounds", v.rounds},
       {"learning_rate", v.learning_rate},
       {"schedule", to_string(v.schedule)},
       {"init_scale", v.init_scale},
       {"mechanism", v.mechanism},
       {"attack", v.attack},
       {"target_client", v.target_client},
       {"attack_round", v.attack_round},
       {"gamma", v.gamma},
       {"confidence_eta", v.confidence_eta},
       {"lambda", v.lambda},
       {"rho", v.rho},
       {"L", v.L},
       {"slack_sigmas", v.slack_sigmas},
       {"n_eval", v.n_eval},
       {"constants", v.constants},
       {"calibration_examples", v.calibration_examples}};
  if (v.fixed_constants) j["fixed_constants"] = *v.fixed_constants;
  else j["fixed_constants"] = nullptr;
}

void from_json(const Json& j, Scenario& v) {
  Reader r(j, "scenario");
  r.get("data", v.data);
  // The model input dimension follows the data unless given explicitly.
  if (j.contains("data") && !j.contains("model")) v.model.input_dim = v.data.input_dim;
  r.get("model", v.model);
  r.get("rounds", v.rounds);
  r.get("learning_rate", v.learning_rate);
  r.get_enum("schedule", v.schedule, schedule_from_string);
  r.get("init_scale", v.init_scale);
  r.get("mechanism", v.mechanism);
  r.get("attack", v.attack);
  r.get("target_client", v.target_client);
  r.get("attack_round", v.attack_round);
  r.get("gamma", v.gamma);
  r.get("confidence_eta", v.confidence_eta);
  r.get("lambda", v.lambda);
  r.get("rho", v.rho);
  r.get("L", v.L);
  r.get("slack_sigmas", v.slack_sigmas);
  r.get("n_eval", v.n_eval);
  r.get("constants", v.constants);
  r.get("calibration_examples", v.calibration_examples);
  if (j.contains("fixed_constants") && !j.at("fixed_constants").is_null()) {
    ConstantsEstimate c;
    r.get("fixed_constants", c);
    v.fixed_constants = c;
  } else {
    Json ignored;
    r.get("fixed_constants", ignored);
    v.fixed_constants.reset();
  }
  r.finish();
}

void to_json(Json& j, const ConstantsEstimate& v) {
  j = {{"c_a", v.c_a},
       {"c_b", v.c_b},
       {"C", v.C},
       {"C_theta", v.C_theta},
       {"C_data", v.C_data},
       {"M", v.M},
       {"D", v.D},
       {"c0", v.c0},
       {"c2", v.c2},
       {"c_ls", v.c_ls},
       {"pairs_requested", v.pairs_requested},
       {"pairs_used", v.pairs_used},
       {"pairs_skipped", v.pairs_skipped},
       {"skip_rate", v.skip_rate()},
       {"quantile", v.quantile},
       {"delta_budget", v.delta_budget},
       {"perturbations", v.perturbations},
       {"pilot_length", v.pilot_length}};
}

void from_json(const Json& j, ConstantsEstimate& v) {
  Reader r(j, "fixed_constants");
  r.get("c_a", v.c_a);
  r.get("c_b", v.c_b);
  r.get("C", v.C);
  r.get("C_theta", v.C_theta);
  r.get("C_data", v.C_data);
  r.get("M", v.M);
  r.get("D", v.D);
  r.get("c0", v.c0);
  r.get("c2", v.c2);
  r.get("c_ls", v.c_ls);
  r.get("pairs_requested", v.pairs_requested);
  r.get("pairs_used", v.pairs_used);
  r.get("pairs_skipped", v.pairs_skipped);
  double skip = 0;
  r.get("skip_rate", skip);  // derived
  r.get("quantile", v.quantile);
  r.get("delta_budget", v.delta_budget);
  r.get("perturbations", v.perturbations);
  r.get("pilot_length", v.pilot_length);
  r.finish();
}

void to_json(Json& j, const TrialResult& v) {
  j = {{"trial", v.trial},
       {"seed", v.seed},
       {"aborted", v.aborted},
       {"diagnostic", v.diagnostic},
       {"eps_e", v.eps_e},
       {"eps_p", v.eps_p},
       {"eps_p_final", v.eps_p_final},
       {"eps_u", v.eps_u},
       {"eps_u_halfwidth", v.eps_u_halfwidth},
       {"delta_up_grad", v.delta_up_grad},
       {"delta_up_param", v.delta_up_param},
       {"delta_two", v.delta_two},
       {"delta_two_round", v.delta_two_round},
       {"privacy_rhs", v.privacy_rhs},
       {"privacy_pre", v.privacy_pre},
       {"lambda", v.lambda},
       {"utility_rhs", v.utility_rhs},
       {"utility_pre", v.utility_pre},
       {"utility_he_rhs", v.utility_he_rhs},
       {"tradeoff_general_rhs", v.tradeoff_general_rhs},
       {"tradeoff_general_pre", v.tradeoff_general_pre},
       {"tradeoff_randomization_rhs", v.tradeoff_randomization_rhs},
       {"tradeoff_randomization_pre", v.tradeoff_randomization_pre},
       {"eps_p_clients", v.eps_p_clients}};
}

void to_json(Json& j, const BoundReport& v) {
  j = {{"schema", "pacfl.bound_report/1"},
       {"bound_name", v.bound_name},
       {"rhs", v.rhs_median},
       {"measured", v.measured_median},
       {"confidence", v.confidence},
       {"slack", v.slack},
       {"fraction_holding", v.fraction_holding},
       {"fraction_holding_all", v.fraction_holding_all},
       {"trials", v.trials},
       {"preconditions",
        {{"ok", v.precondition_ok},
         {"evaluated", v.evaluated},
         {"failed", v.precondition_failed},
         {"aborted", v.aborted},
         {"vacuous", v.vacuous},
         {"probability_budget", v.probability_budget}}},
       {"holding", v.holding},
       {"holds", v.holds},
       {"constants", v.constants},
       {"scenario", v.scenario},
       {"notes", v.notes}};
  Json per = Json::array();
  for (const auto& t : v.per_trial) per.push_back(t);
  j["per_trial"] = std::move(per);
}

void to_json(Json& j, const Phase2Report& v) {
  j = {{"schema", "pacfl.phase2/1"},
       {"risk", v.risk},
       {"adv_risk", v.adv_risk},
       {"budget", v.budget},
       {"pac_params", {{"eps", v.pac_eps}, {"delta", v.pac_delta}}},
       {"sample_lower_bound", v.sample_lower_bound},
       {"log_sample_lower_bound", v.log_sample_lower_bound},
       {"not_pac_learnable", v.not_pac_learnable},
       {"adv_search", v.search},
       {"adv_risk_is_lower_estimate", true},
       {"classifier_diverged", v.classifier_diverged},
       {"theta", v.theta}};
}

Json trace_summary(const AttackTrace& trace) {
  Json rows = Json::array();
  for (std::size_t t = 0; t < trace.objective.size(); ++t)
    rows.push_back({{"t", t}, {"objective", trace.objective[t]}, {"mismatch", trace.mismatch[t]}});
  return rows;
}

Json parse_config_text(const std::string& text) {
  try {
    return Json::parse(text);
  } catch (const Json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
}

}  // namespace pacfl
