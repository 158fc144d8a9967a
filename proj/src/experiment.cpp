#include "pacfl/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>

#include "json_reader.hpp"
#include "pacfl/csv.hpp"
#include "pacfl/errors.hpp"
#include "pacfl/rng.hpp"

namespace pacfl {
namespace fs = std::filesystem;
using detail::Reader;

namespace {

constexpr const char* kRunMetaSchema = "pacfl.run_meta/1";

fs::path prepare_output(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory '" + dir + "': " + ec.message());
  return fs::path(dir);
}

std::ofstream open_out(const fs::path& path, std::ios::openmode mode = std::ios::trunc) {
  std::ofstream out(path, std::ios::out | mode);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  return out;
}

std::ifstream open_artifact(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("missing run artifact '" + path.string() + "'");
  return in;
}

void write_text(const fs::path& path, const std::string& text) {
  auto out = open_out(path);
  out << text;
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

std::uint64_t parse_u64(std::string_view text) {
  std::uint64_t v = 0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size())
    throw IoError("malformed unsigned integer '" + std::string(text) + "'");
  return v;
}

bool parse_bool(std::string_view text) {
  if (text == "1") return true;
  if (text == "0") return false;
  throw IoError("malformed boolean '" + std::string(text) + "'");
}

void check_csv_text(const std::string& value, const char* what) {
  if (value.find_first_of(",\n\r\"") != std::string::npos)
    throw ConfigError(std::string(what) + " must not contain commas, quotes or newlines");
}

std::vector<LabeledExample> draw(const DatasetSpec& spec, std::uint64_t seed, int n) {
  DistributionSampler sampler(DataDistribution(spec), seed);
  std::vector<LabeledExample> out;
  out.reserve(n);
  for (int i = 0; i < n; ++i) out.push_back(*sampler.next());
  return out;
}

ConstantsEstimate constants_for(const Scenario& s, std::uint64_t master_seed) {
  return s.fixed_constants ? *s.fixed_constants : calibrate(s, master_seed);
}

}  // namespace

int ExperimentConfig::effective_threads() const {
  return threads > 0 ? threads : default_thread_count();
}

void to_json(Json& j, const Phase2Config& v) {
  j = {{"epochs", v.epochs},     {"lr", v.lr},           {"init_scale", v.init_scale},
       {"pac_eps", v.pac_eps},   {"pac_delta", v.pac_delta}, {"budget", v.budget},
       {"test_size", v.test_size}, {"adv_search", v.search}};
}

void from_json(const Json& j, Phase2Config& v) {
  Reader r(j, "phase2");
  r.get("epochs", v.epochs);
  r.get("lr", v.lr);
  r.get("init_scale", v.init_scale);
  r.get("pac_eps", v.pac_eps);
  r.get("pac_delta", v.pac_delta);
  r.get("budget", v.budget);
  r.get("test_size", v.test_size);
  r.get("adv_search", v.search);
  r.finish();
}

void to_json(Json& j, const ExperimentConfig& v) {
  j = {{"id", v.id},
       {"scenario", v.scenario},
       {"phase2", v.phase2},
       {"trials", v.trials},
       {"master_seed", v.master_seed},
       {"output_dir", v.output_dir},
       {"threads", v.threads},
       {"record_timing", v.record_timing}};
}

void from_json(const Json& j, ExperimentConfig& v) {
  Reader r(j, "config");
  r.get("id", v.id);
  r.get("scenario", v.scenario);
  r.get("phase2", v.phase2);
  r.get("trials", v.trials);
  r.get("master_seed", v.master_seed);
  r.get("output_dir", v.output_dir);
  r.get("threads", v.threads);
  r.get("record_timing", v.record_timing);
  r.finish();
  check_csv_text(v.id, "id");
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str()).get<ExperimentConfig>();
}

void apply_overrides(ExperimentConfig& cfg, const Overrides& o) {
  auto& s = cfg.scenario;
  if (o.mechanism) s.mechanism.kind = mechanism_kind_from_string(*o.mechanism);
  if (o.sigma) s.mechanism.sigma = *o.sigma;
  if (o.shared_noise) s.mechanism.shared_across_clients = *o.shared_noise;
  if (o.fixed_norm) s.mechanism.fixed_norm = *o.fixed_norm;
  if (o.seed) cfg.master_seed = *o.seed;
  if (o.rounds) s.rounds = *o.rounds;
  if (o.trials) cfg.trials = *o.trials;
  if (o.threads) cfg.threads = *o.threads;
  if (o.attack_T) s.attack.T = *o.attack_T;
  if (o.pac_eps) cfg.phase2.pac_eps = *o.pac_eps;
  if (o.pac_delta) cfg.phase2.pac_delta = *o.pac_delta;
  if (o.output_dir) cfg.output_dir = *o.output_dir;
  if (o.timing) cfg.record_timing = *o.timing;
}

ResultRow make_row(const ExperimentConfig& cfg, const TrialResult& t, const std::string& axis,
                   double axis_value, double wall_time_s) {
  ResultRow r;
  r.experiment_id = cfg.id;
  r.axis = axis;
  r.axis_value = axis_value;
  r.trial = t.trial;
  r.seed = t.seed;
  r.mechanism = to_string(cfg.scenario.mechanism.kind);
  r.sigma = cfg.scenario.mechanism.kind == MechanismKind::randomization
                ? cfg.scenario.mechanism.sigma
                : 0.0;
  r.aborted = t.aborted;
  r.eps_p = t.eps_p;
  r.eps_p_final = t.eps_p_final;
  r.eps_u = t.eps_u;
  r.eps_e = t.eps_e;
  r.delta_up_grad = t.delta_up_grad;
  r.delta_up_param = t.delta_up_param;
  r.delta_two = t.delta_two;
  r.privacy_rhs = t.privacy_rhs;
  r.privacy_pre = t.privacy_pre;
  r.privacy_holds = !t.aborted && t.eps_p <= t.privacy_rhs;
  r.lambda = t.lambda;
  r.utility_rhs = t.utility_rhs;
  r.utility_holds = !t.aborted && t.utility_pre && t.eps_u <= t.utility_rhs;
  r.utility_he_rhs = t.utility_he_rhs;
  r.tradeoff_general_rhs = t.tradeoff_general_rhs;
  r.tradeoff_randomization_rhs = t.tradeoff_randomization_rhs;
  r.wall_time_s = wall_time_s;
  return r;
}

const std::vector<std::string>& result_columns() {
  static const std::vector<std::string> cols = {
      "schema_version", "experiment_id", "axis", "axis_value", "trial", "seed",
      "mechanism", "sigma", "aborted", "eps_p", "eps_p_final", "eps_u", "eps_e",
      "delta_up_grad", "delta_up_param", "delta_two", "privacy_rhs", "privacy_pre",
      "privacy_holds", "lambda", "utility_rhs", "utility_holds", "utility_he_rhs",
      "tradeoff_general_rhs", "tradeoff_randomization_rhs", "wall_time_s"};
  return cols;
}

void write_rows_csv(std::ostream& out, const std::vector<ResultRow>& rows, bool header) {
  if (header) out << join_csv(result_columns()) << '\n';
  auto b = [](bool v) { return std::string(v ? "1" : "0"); };
  auto f = [](double v) { return format_double(v); };
  for (const auto& r : rows) {
    const std::vector<std::string> fields = {
        std::to_string(kResultSchemaVersion), r.experiment_id, r.axis, f(r.axis_value),
        std::to_string(r.trial), std::to_string(r.seed), r.mechanism, f(r.sigma),
        b(r.aborted), f(r.eps_p), f(r.eps_p_final), f(r.eps_u), std::to_string(r.eps_e),
        f(r.delta_up_grad), f(r.delta_up_param), f(r.delta_two), f(r.privacy_rhs),
        b(r.privacy_pre), b(r.privacy_holds), f(r.lambda), f(r.utility_rhs),
        b(r.utility_holds), f(r.utility_he_rhs), f(r.tradeoff_general_rhs),
        f(r.tradeoff_randomization_rhs), f(r.wall_time_s)};
    out << join_csv(fields) << '\n';
  }
  if (!out) throw IoError("failed writing result rows");
}

std::vector<ResultRow> read_rows_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw IoError("result CSV is empty");
  if (split_csv_line(line) != result_columns())
    throw IoError("result CSV header does not match schema version " +
                  std::to_string(kResultSchemaVersion));
  std::vector<ResultRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto c = split_csv_line(line);
    if (c.size() != result_columns().size()) throw IoError("result CSV row has wrong width");
    if (parse_int(c[0]) != kResultSchemaVersion)
      throw IoError("unsupported result schema version " + c[0]);
    ResultRow r;
    std::size_t i = 1;
    r.experiment_id = c[i++];
    r.axis = c[i++];
    r.axis_value = parse_double(c[i++]);
    r.trial = static_cast<int>(parse_int(c[i++]));
    r.seed = parse_u64(c[i++]);
    r.mechanism = c[i++];
    r.sigma = parse_double(c[i++]);
    r.aborted = parse_bool(c[i++]);
    r.eps_p = parse_double(c[i++]);
    r.eps_p_final = parse_double(c[i++]);
    r.eps_u = parse_double(c[i++]);
    r.eps_e = static_cast<int>(parse_int(c[i++]));
    r.delta_up_grad = parse_double(c[i++]);
    r.delta_up_param = parse_double(c[i++]);
    r.delta_two = parse_double(c[i++]);
    r.privacy_rhs = parse_double(c[i++]);
    r.privacy_pre = parse_bool(c[i++]);
    r.privacy_holds = parse_bool(c[i++]);
    r.lambda = parse_double(c[i++]);
    r.utility_rhs = parse_double(c[i++]);
    r.utility_holds = parse_bool(c[i++]);
    r.utility_he_rhs = parse_double(c[i++]);
    r.tradeoff_general_rhs = parse_double(c[i++]);
    r.tradeoff_randomization_rhs = parse_double(c[i++]);
    r.wall_time_s = parse_double(c[i++]);
    rows.push_back(std::move(r));
  }
  return rows;
}

std::string to_string(SweepAxis axis) {
  switch (axis) {
    case SweepAxis::sigma: return "sigma";
    case SweepAxis::m: return "m";
    case SweepAxis::T: return "T";
    case SweepAxis::delta_up: return "delta_up";
  }
  return "sigma";
}

SweepAxis sweep_axis_from_string(const std::string& name) {
  if (name == "sigma") return SweepAxis::sigma;
  if (name == "m") return SweepAxis::m;
  if (name == "T") return SweepAxis::T;
  if (name == "delta_up") return SweepAxis::delta_up;
  throw ConfigError("unknown sweep axis '" + name + "' (expected sigma, m, T or delta_up)");
}

Scenario apply_axis(const Scenario& base, SweepAxis axis, double value) {
  Scenario s = base;
  auto as_count = [&](const char* what) {
    if (!(value >= 1) || value != std::floor(value))
      throw ConfigError(std::string(what) + " sweep values must be positive integers");
    return static_cast<int>(value);
  };
  switch (axis) {
    case SweepAxis::sigma:
      if (!(value >= 0)) throw ConfigError("sigma sweep values must be >= 0");
      s.mechanism.kind = MechanismKind::randomization;
      s.mechanism.sigma = value;
      break;
    case SweepAxis::m:
      s.data.client_sizes = {as_count("m")};
      break;
    case SweepAxis::T:
      s.attack.T = as_count("T");
      break;
    case SweepAxis::delta_up:
      if (!(value >= 0)) throw ConfigError("delta_up sweep values must be >= 0");
      s.mechanism.kind = MechanismKind::randomization;
      if (value == 0) {
        s.mechanism.sigma = 0;
        s.mechanism.fixed_norm = 0;
      } else {
        if (s.mechanism.sigma == 0) s.mechanism.sigma = 1;  // direction only
        s.mechanism.fixed_norm = value;
      }
      break;
  }
  return s;
}

SweepResult run_sweep(const ExperimentConfig& cfg, SweepAxis axis,
                      const std::vector<double>& values) {
  if (values.size() < 2) throw ConfigError("a sweep needs at least two axis values");
  if (cfg.trials < 1) throw ConfigError("trials must be >= 1");
  const int P = static_cast<int>(values.size()), N = cfg.trials;
  std::vector<Scenario> scenarios;
  std::vector<ConstantsEstimate> constants;
  for (double v : values) {
    scenarios.push_back(apply_axis(cfg.scenario, axis, v));
    scenarios.back().validate();
    constants.push_back(constants_for(scenarios.back(), cfg.master_seed));
  }
  std::vector<TrialResult> results(static_cast<std::size_t>(P) * N);
  std::vector<double> times(results.size(), 0.0);
  parallel_for(P * N, cfg.effective_threads(), [&](int idx) {
    const int p = idx / N, t = idx % N;
    const std::uint64_t seed = trial_seed(cfg.master_seed, static_cast<std::uint64_t>(t));
    const auto start = std::chrono::steady_clock::now();
    try {
      results[idx] = run_trial(scenarios[p], constants[p], t, seed);
    } catch (const NumericError& e) {
      results[idx].trial = t;
      results[idx].seed = seed;
      results[idx].aborted = true;
      results[idx].diagnostic = e.what();
    }
    if (cfg.record_timing)
      times[idx] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
                       .count();
  });

  SweepResult out;
  out.axis = axis;
  std::vector<double> xs, ys;
  for (int p = 0; p < P; ++p) {
    ExperimentConfig point_cfg = cfg;
    point_cfg.scenario = scenarios[p];
    SweepPoint sp;
    sp.value = values[p];
    std::vector<double> ep, epf, eu, rhs, dup;
    for (int t = 0; t < N; ++t) {
      const auto& r = results[static_cast<std::size_t>(p) * N + t];
      out.rows.push_back(make_row(point_cfg, r, to_string(axis), values[p],
                                  times[static_cast<std::size_t>(p) * N + t]));
      if (r.aborted) continue;
      ep.push_back(r.eps_p);
      epf.push_back(r.eps_p_final);
      eu.push_back(r.eps_u);
      rhs.push_back(r.privacy_rhs);
      dup.push_back(r.delta_up_grad);
      xs.push_back(values[p]);
      ys.push_back(r.eps_p);
    }
    sp.trials = static_cast<int>(ep.size());
    if (!ep.empty()) {
      sp.median_eps_p = median(ep);
      sp.median_eps_p_final = median(epf);
      sp.median_eps_u = median(eu);
      sp.median_privacy_rhs = median(rhs);
      sp.median_delta_up = median(dup);
    }
    out.points.push_back(sp);
  }
  if (xs.size() >= 3) out.eps_p_trend = spearman(xs, ys);
  std::vector<SweepPoint> sorted = out.points;
  std::stable_sort(sorted.begin(), sorted.end(),
                   [](const SweepPoint& a, const SweepPoint& b) { return a.value < b.value; });
  out.medians_non_increasing = true;
  for (std::size_t i = 1; i < sorted.size(); ++i)
    if (sorted[i].median_eps_p > sorted[i - 1].median_eps_p) out.medians_non_increasing = false;
  return out;
}

int cmd_train(const ExperimentConfig& cfg, std::ostream& log) {
  const Scenario& s = cfg.scenario;
  s.validate();
  const std::uint64_t seed = trial_seed(cfg.master_seed, 0);
  const DatasetSpec data = scenario_data(s, seed);
  const auto datasets = generate(data);
  FLRunConfig fl = scenario_fl_config(s, seed);
  fl.threads = cfg.effective_threads();
  const RunResult rr = run(fl, datasets);

  const fs::path dir = prepare_output(cfg.output_dir);
  {
    auto out = open_out(dir / "rounds.jsonl");
    write_round_log(out, rr);
  }
  {
    auto out = open_out(dir / "datasets.csv");
    write_datasets_csv(out, datasets);
  }
  write_text(dir / "final_model.csv", vector_to_csv(rr.final_decoded.view()) + "\n");
  write_text(dir / "final_server.csv", vector_to_csv(rr.final_observed.view()) + "\n");
  write_text(dir / "shadow_model.csv", vector_to_csv(rr.final_shadow.view()) + "\n");
  Json meta = {{"schema", kRunMetaSchema},
               {"experiment_id", cfg.id},
               {"mechanism", to_string(s.mechanism.kind)},
               {"trial_seed", seed},
               {"master_seed", cfg.master_seed},
               {"rounds", s.rounds},
               {"completed_rounds", rr.records.size()},
               {"aborted", rr.aborted},
               {"diagnostic", rr.diagnostic},
               {"data", data},
               {"model", s.model}};
  write_text(dir / "run_meta.json", meta.dump(2) + "\n");

  double max_two = 0.0;
  for (const auto& rec : rr.records) max_two = std::max(max_two, rec.delta_two);
  log << "train: " << rr.records.size() << " rounds, mechanism " << to_string(s.mechanism.kind)
      << ", max delta_two " << format_double(max_two) << ", output " << dir.string() << "\n";
  if (rr.aborted) {
    log << "train: run aborted: " << rr.diagnostic << "\n";
    return static_cast<int>(ExitCode::kNumeric);
  }
  return 0;
}

int cmd_attack(const ExperimentConfig& cfg, const std::string& run_dir, bool dump_trajectory,
               std::ostream& log) {
  const Scenario& s = cfg.scenario;
  s.validate();
  const auto& p2 = cfg.phase2;
  // Surface invalid PAC parameters before any work.
  (void)sample_lower_bound(p2.pac_eps, p2.pac_delta, 1.0, 0.0);
  (void)not_pac_condition(0.0, 1.0, p2.pac_eps);
  require(p2.test_size >= 1, "phase2 test_size must be >= 1");

  const fs::path rd(run_dir);
  Json meta;
  {
    auto in = open_artifact(rd / "run_meta.json");
    std::stringstream buf;
    buf << in.rdbuf();
    meta = parse_config_text(buf.str());
  }
  if (!meta.contains("schema") || meta.at("schema") != kRunMetaSchema)
    throw ConfigError("run_meta.json has an unexpected schema");
  if (meta.value("aborted", false)) throw NumericError("the training run was aborted");

  RunArtifacts art;
  std::uint64_t seed = 0;
  try {
    art.data = meta.at("data").get<DatasetSpec>();
    seed = meta.at("trial_seed").get<std::uint64_t>();
  } catch (const Json::exception& e) {
    throw ConfigError(std::string("run_meta.json is incomplete: ") + e.what());
  }
  {
    auto in = open_artifact(rd / "datasets.csv");
    art.datasets = read_datasets_csv(in);
  }
  {
    auto in = open_artifact(rd / "rounds.jsonl");
    art.records = read_round_log(in);
  }
  if (art.records.empty()) throw ConfigError("rounds.jsonl holds no rounds");
  art.final_decoded = art.records.back().next_theta;
  art.final_shadow = art.records.back().shadow_next;

  const ConstantsEstimate c = constants_for(s, cfg.master_seed);
  AttackTrace trace;
  const TrialResult tr = evaluate_run(s, c, 0, seed, art, &trace);

  const auto& target = art.datasets[s.target_client];
  ClientDataset recovered;
  recovered.client_id = target.client_id;
  for (std::size_t i = 0; i < target.size(); ++i)
    recovered.examples.push_back({trace.final[i], target.examples[i].y});
  const Classifier h = train_phase2(recovered, s.model, p2.epochs, p2.lr,
                                    derive_seed(seed, {stream_key("phase2")}), p2.init_scale);
  const auto test = draw(art.data, derive_seed(seed, {stream_key("phase2.test")}), p2.test_size);

  Phase2Report rep;
  rep.budget = p2.budget >= 0 ? p2.budget : c.c_a * tr.delta_up_grad;
  rep.search = p2.search;
  rep.risk = risk(h, test);
  rep.adv_risk = adv_risk(h, test, rep.budget, p2.search);
  rep.pac_eps = p2.pac_eps;
  rep.pac_delta = p2.pac_delta;
  rep.sample_lower_bound = sample_lower_bound(p2.pac_eps, p2.pac_delta, c.c_a, tr.delta_up_grad);
  rep.log_sample_lower_bound =
      log_sample_lower_bound(p2.pac_eps, p2.pac_delta, c.c_a, tr.delta_up_grad);
  rep.not_pac_learnable =
      not_pac_condition(tr.delta_up_grad, static_cast<double>(target.size()), p2.pac_eps);
  rep.classifier_diverged = h.diverged;
  rep.theta = h.theta.values();

  const fs::path dir = prepare_output(cfg.output_dir);
  {
    auto out = open_out(dir / "attack_trace.jsonl");
    for (const auto& row : trace_summary(trace)) {
      Json line = row;
      line["schema"] = "pacfl.attack_trace/1";
      out << line.dump() << '\n';
    }
  }
  {
    Json j = rep;
    j["eps_p"] = tr.eps_p;
    j["eps_p_final"] = tr.eps_p_final;
    j["delta_up_grad"] = tr.delta_up_grad;
    j["constants"] = c;
    write_text(dir / "phase2.json", j.dump(2) + "\n");
  }
  if (dump_trajectory) {
    auto out = open_out(dir / "trajectory.csv");
    out << "t,sample";
    for (int i = 0; i < trace.p; ++i) out << ",x" << i;
    out << '\n';
    for (std::size_t k = 0; k < trace.kept.size(); ++k)
      for (std::size_t i = 0; i < trace.snapshots[k].size(); ++i)
        out << trace.kept[k] << ',' << i << ',' << vector_to_csv(trace.snapshots[k][i]) << '\n';
  }
  {
    const fs::path results = dir / "results.csv";
    std::error_code ec;
    const bool fresh = !fs::exists(results, ec) || fs::file_size(results, ec) == 0;
    auto out = open_out(results, std::ios::app);
    write_rows_csv(out, {make_row(cfg, tr)}, fresh);
  }
  log << "attack: eps_p " << format_double(tr.eps_p) << ", eps_p_final "
      << format_double(tr.eps_p_final) << ", risk " << format_double(rep.risk)
      << ", adv_risk " << format_double(rep.adv_risk) << "\n";
  return 0;
}

int cmd_verify(const ExperimentConfig& cfg, const std::string& bound_name, std::ostream& log) {
  const BoundReport rep = verify_bound(bound_name, cfg.scenario, cfg.trials, cfg.master_seed,
                                       cfg.effective_threads());
  const fs::path dir = prepare_output(cfg.output_dir);
  write_text(dir / "bound_report.json", Json(rep).dump(2) + "\n");
  {
    std::vector<ResultRow> rows;
    for (const auto& t : rep.per_trial) rows.push_back(make_row(cfg, t));
    auto out = open_out(dir / "trials.csv");
    write_rows_csv(out, rows);
  }
  log << "verify " << bound_name << ": " << rep.holding << "/" << rep.evaluated
      << " trials within the bound (fraction " << format_double(rep.fraction_holding)
      << ", required " << format_double(rep.confidence - rep.slack) << "), "
      << rep.precondition_failed << " excluded by precondition, " << rep.aborted
      << " aborted\n";
  if (rep.vacuous) {
    log << "warning: probability budget " << format_double(rep.probability_budget)
        << " is not positive; the bound is vacuous for this configuration\n";
    return 0;
  }
  if (!rep.precondition_ok) {
    log << "warning: no trial satisfied the precondition; nothing to check\n";
    return 0;
  }
  return rep.holds ? 0 : static_cast<int>(ExitCode::kBoundFailed);
}

int cmd_sweep(const ExperimentConfig& cfg, const std::string& axis_name,
              const std::vector<double>& values, std::ostream& log) {
  const SweepAxis axis = sweep_axis_from_string(axis_name);
  const SweepResult res = run_sweep(cfg, axis, values);
  const fs::path dir = prepare_output(cfg.output_dir);
  {
    auto out = open_out(dir / "sweep.csv");
    write_rows_csv(out, res.rows);
  }
  Json points = Json::array();
  for (const auto& p : res.points)
    points.push_back({{"value", p.value},
                      {"trials", p.trials},
                      {"median_eps_p", p.median_eps_p},
                      {"median_eps_p_final", p.median_eps_p_final},
                      {"median_eps_u", p.median_eps_u},
                      {"median_privacy_rhs", p.median_privacy_rhs},
                      {"median_delta_up", p.median_delta_up}});
  Json summary = {{"schema", "pacfl.sweep_summary/1"},
                  {"axis", to_string(axis)},
                  {"points", points},
                  {"spearman_eps_p",
                   {{"rho", res.eps_p_trend.rho},
                    {"p_value", res.eps_p_trend.p_value},
                    {"n", res.eps_p_trend.n}}},
                  {"medians_non_increasing", res.medians_non_increasing}};
  write_text(dir / "sweep_summary.json", summary.dump(2) + "\n");
  log << "sweep " << to_string(axis) << ": " << res.rows.size() << " rows, spearman rho "
      << format_double(res.eps_p_trend.rho) << " (p " << format_double(res.eps_p_trend.p_value)
      << ")\n";
  return 0;
}

int cmd_estimate_constants(const ExperimentConfig& cfg, std::ostream& log) {
  const ConstantsEstimate c = calibrate(cfg.scenario, cfg.master_seed);
  const fs::path dir = prepare_output(cfg.output_dir);
  Json j = c;
  j["schema"] = "pacfl.constants/1";
  j["ratios"] = c.ratios;
  write_text(dir / "constants.json", j.dump(2) + "\n");
  log << "constants: c_a " << format_double(c.c_a) << ", c_b " << format_double(c.c_b)
      << ", C " << format_double(c.C) << ", M " << format_double(c.M) << ", D "
      << format_double(c.D) << ", c0 " << format_double(c.c0) << ", c2 "
      << format_double(c.c2) << "\n";
  return 0;
}

}  // namespace pacfl
