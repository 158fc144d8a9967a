#include "pacfl/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <numbers>
#include <ostream>
#include <string>

#include "pacfl/csv.hpp"
#include "pacfl/errors.hpp"

namespace pacfl {
namespace {

std::vector<double> uniform_in_ball(Rng& rng, std::size_t dim, double radius) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<double> v(dim);
  double n2 = 0.0;
  do {
    n2 = 0.0;
    for (auto& x : v) {
      x = normal(rng);
      n2 += x * x;
    }
  } while (n2 == 0.0);
  const double r =
      radius * std::pow(unif(rng), 1.0 / static_cast<double>(dim)) / std::sqrt(n2);
  for (auto& x : v) x *= r;
  return v;
}

void add_into(ParamVector& out, const ParamVector& base,
              const std::vector<double>& offset) {
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = base[i] + offset[i];
}

}  // namespace

std::string to_string(TargetKind kind) {
  switch (kind) {
    case TargetKind::class_index: return "class_index";
    case TargetKind::signed_class: return "signed_class";
    case TargetKind::teacher: return "teacher";
  }
  return "unknown";
}

TargetKind target_kind_from_string(const std::string& name) {
  if (name == "class_index") return TargetKind::class_index;
  if (name == "signed_class") return TargetKind::signed_class;
  if (name == "teacher") return TargetKind::teacher;
  throw ConfigError("unknown target kind '" + name + "'");
}

int DatasetSpec::size_of(int client) const {
  if (client_sizes.size() == 1) return client_sizes.front();
  return client_sizes.at(static_cast<std::size_t>(client));
}

void DatasetSpec::validate() const {
  if (num_clients < 1) throw ConfigError("num_clients must be >= 1");
  if (client_sizes.empty()) throw ConfigError("client_sizes must be non-empty");
  if (client_sizes.size() != 1 &&
      static_cast<int>(client_sizes.size()) != num_clients)
    throw ConfigError("client_sizes must have 1 or num_clients entries");
  for (int m : client_sizes)
    if (m < 1) throw ConfigError("every client size must be >= 1");
  if (input_dim < 1) throw ConfigError("input_dim must be >= 1");
  if (num_classes < 1) throw ConfigError("num_classes must be >= 1");
  if (!(diameter_cap > 0)) throw ConfigError("diameter_cap must be > 0");
  if (targets == TargetKind::signed_class && num_classes != 2)
    throw ConfigError("signed_class targets require num_classes == 2");
}

DataDistribution::DataDistribution(const DatasetSpec& spec) : spec_(spec) {
  spec_.validate();
  const int p = spec.input_dim, c = spec.num_classes;
  means_.assign(c, std::vector<double>(p, 0.0));
  double max_norm = 0.0;
  for (int k = 0; k < c; ++k) {
    if (p >= 2) {
      const double angle = 2.0 * std::numbers::pi * k / c;
      means_[k][0] = spec.class_separation * std::cos(angle);
      means_[k][1] = spec.class_separation * std::sin(angle);
    } else if (c > 1) {
      means_[k][0] = spec.class_separation * (2.0 * k / (c - 1) - 1.0);
    }
    max_norm = std::max(max_norm, l2_norm(means_[k]));
  }
  // Rescale so the bulk of the mixture (mean + 3 sd per axis) fits the ball.
  scale_ = radius() / (max_norm + 3.0 * std::sqrt(static_cast<double>(p)));
  if (spec.targets == TargetKind::teacher) {
    Rng rng = make_rng(spec.seed, {stream_key("teacher")});
    std::normal_distribution<double> normal(0.0, 1.0);
    teacher_.resize(p);
    double n = 0.0;
    do {
      for (auto& w : teacher_) w = normal(rng);
      n = l2_norm(teacher_);
    } while (n == 0.0);
    for (auto& w : teacher_) w /= n;
  }
}

LabeledExample DataDistribution::sample(Rng& rng) const {
  const int p = spec_.input_dim;
  std::uniform_int_distribution<int> cls(0, spec_.num_classes - 1);
  std::normal_distribution<double> normal(0.0, 1.0);
  const int k = cls(rng);
  LabeledExample ex;
  ex.x.resize(p);
  for (int i = 0; i < p; ++i) ex.x[i] = scale_ * (means_[k][i] + normal(rng));
  const double n = l2_norm(ex.x);
  if (n > radius()) {
    const double shrink = radius() / n;
    for (auto& v : ex.x) v *= shrink;
  }
  switch (spec_.targets) {
    case TargetKind::class_index: ex.y = k; break;
    case TargetKind::signed_class: ex.y = k == 1 ? 1.0 : -1.0; break;
    case TargetKind::teacher:
      ex.y = dot(teacher_, ex.x) + spec_.teacher_noise * normal(rng);
      break;
  }
  return ex;
}

std::vector<ClientDataset> generate(const DatasetSpec& spec) {
  const DataDistribution dist(spec);
  std::vector<ClientDataset> out(spec.num_clients);
  for (int k = 0; k < spec.num_clients; ++k) {
    Rng rng = make_rng(spec.seed, {stream_key("client"), static_cast<std::uint64_t>(k)});
    out[k].client_id = k;
    const int m = spec.size_of(k);
    out[k].examples.reserve(m);
    for (int i = 0; i < m; ++i) out[k].examples.push_back(dist.sample(rng));
  }
  return out;
}

double diameter(Batch examples) {
  require(!examples.empty(), "diameter: dataset must have at least one example");
  double best = 0.0;
  for (std::size_t i = 0; i < examples.size(); ++i)
    for (std::size_t j = i + 1; j < examples.size(); ++j)
      best = std::max(best, l2_distance(examples[i].x, examples[j].x));
  return best;
}

double log_covering_number(int d, double D, double lambda) {
  require(d >= 1, "covering_number: d must be >= 1");
  require(D >= 0, "covering_number: D must be >= 0");
  require(lambda > 0, "covering_number: lambda must be > 0");
  return (2.0 * D / (lambda * lambda) + 1.0) * std::log(2.0 * d);
}

double covering_number(int d, double D, double lambda) {
  const double exponent = log_covering_number(d, D, lambda) / std::log(2.0 * d);
  return std::pow(2.0 * d, exponent);
}

double sample_quantile(std::vector<double> values, double q) {
  require(!values.empty(), "quantile of an empty sample");
  require(q >= 0 && q <= 1, "quantile must lie in [0, 1]");
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

RegretFit fit_regret_constants(std::span<const double> mismatch) {
  RegretFit fit;
  fit.length = static_cast<int>(mismatch.size());
  if (mismatch.empty()) return fit;
  double cumulative = 0.0, num = 0.0, den = 0.0;
  fit.c0 = HUGE_VAL;
  fit.c2 = 0.0;
  for (std::size_t t = 0; t < mismatch.size(); ++t) {
    cumulative += mismatch[t];
    const double T = static_cast<double>(t + 1);
    const double ratio = cumulative / std::sqrt(T);
    fit.c0 = std::min(fit.c0, ratio);
    fit.c2 = std::max(fit.c2, ratio);
    num += cumulative * std::sqrt(T);
    den += T;
  }
  fit.least_squares = num / den;
  return fit;
}

ConstantsEstimate estimate_constants(const ModelSpec& spec,
                                     const ParamVector& theta_probe,
                                     std::span<const ClientDataset> datasets,
                                     const ConstantsOptions& options,
                                     std::span<const double> pilot_mismatch) {
  require(options.num_pairs >= 2, "estimate_constants: num_pairs must be >= 2");
  require(options.quantile >= 0 && options.quantile <= 0.5,
          "estimate_constants: quantile must lie in [0, 0.5]");
  require(options.delta_budget >= 0, "estimate_constants: delta_budget must be >= 0");
  std::vector<LabeledExample> pool;
  for (const auto& ds : datasets)
    pool.insert(pool.end(), ds.examples.begin(), ds.examples.end());
  require(pool.size() >= 2, "estimate_constants: need at least two examples");

  ConstantsEstimate est;
  est.pairs_requested = options.num_pairs;
  est.quantile = options.quantile;
  est.delta_budget = options.delta_budget;
  est.perturbations = options.num_perturbations;

  // Same-label index groups so the gradient difference isolates the features.
  std::map<double, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < pool.size(); ++i) groups[pool[i].y].push_back(i);

  Rng rng = make_rng(options.seed, {stream_key("constants.pairs")});
  std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
  for (int n = 0; n < options.num_pairs; ++n) {
    const std::size_t i = pick(rng);
    std::size_t j = i;
    if (spec.is_classifier()) {
      const auto& group = groups[pool[i].y];
      std::uniform_int_distribution<std::size_t> in_group(0, group.size() - 1);
      j = group[in_group(rng)];
    } else {
      j = pick(rng);
    }
    const double y = pool[i].y;  // fixed label for both members of the pair
    const double dx = l2_distance(pool[i].x, pool[j].x);
    if (i == j || dx == 0.0) {
      ++est.pairs_skipped;
      continue;
    }
    const auto g1 = example_grad_params(spec, theta_probe, pool[i].x, y);
    const auto g2 = example_grad_params(spec, theta_probe, pool[j].x, y);
    const double dg = l2_distance(g1.view(), g2.view());
    if (dg == 0.0) {
      ++est.pairs_skipped;
      continue;
    }
    est.ratios.push_back(dx / dg);
    const double dl = std::abs(example_loss(spec, theta_probe, pool[i].x, y) -
                               example_loss(spec, theta_probe, pool[j].x, y));
    est.C_data = std::max(est.C_data, dl / dx);
  }
  est.pairs_used = static_cast<int>(est.ratios.size());
  if (est.ratios.empty())
    throw EstimationError("estimate_constants: every sampled pair was degenerate");
  est.c_a = sample_quantile(est.ratios, options.quantile);
  est.c_b = sample_quantile(est.ratios, 1.0 - options.quantile);

  // Lipschitz constant in parameters and the loss magnitude under distortion.
  Rng prng = make_rng(options.seed, {stream_key("constants.perturb")});
  std::uniform_int_distribution<std::size_t> pick_z(0, pool.size() - 1);
  const std::size_t d = theta_probe.size();
  ParamVector t1(d), t2(d);
  double max_loss = 0.0;
  for (const auto& z : pool)
    max_loss = std::max(max_loss, std::abs(example_loss(spec, theta_probe, z.x, z.y)));
  for (int n = 0; n < options.num_perturbations; ++n) {
    const auto u1 = uniform_in_ball(prng, d, options.delta_budget);
    const auto u2 = uniform_in_ball(prng, d, options.delta_budget);
    add_into(t1, theta_probe, u1);
    add_into(t2, theta_probe, u2);
    const auto& z = pool[pick_z(prng)];
    const double dt = l2_distance(t1.view(), t2.view());
    if (dt > 0) {
      const double dl = std::abs(example_loss(spec, t1, z.x, z.y) -
                                 example_loss(spec, t2, z.x, z.y));
      est.C_theta = std::max(est.C_theta, dl / dt);
    }
    for (const auto& zz : pool) {
      max_loss = std::max(max_loss, std::abs(example_loss(spec, t1, zz.x, zz.y)));
      max_loss = std::max(max_loss, std::abs(example_loss(spec, t2, zz.x, zz.y)));
    }
  }
  est.C = std::max(est.C_theta, est.C_data);
  est.M = max_loss;
  est.D = diameter(pool);

  const RegretFit fit = fit_regret_constants(pilot_mismatch);
  est.c0 = fit.c0;
  est.c2 = fit.c2;
  est.c_ls = fit.least_squares;
  est.pilot_length = fit.length;
  return est;
}

void write_datasets_csv(std::ostream& out, std::span<const ClientDataset> datasets) {
  std::size_t p = 0;
  for (const auto& ds : datasets)
    if (!ds.examples.empty()) p = ds.examples.front().x.size();
  out << "client_id";
  for (std::size_t i = 0; i < p; ++i) out << ",x" << i;
  out << ",label\n";
  for (const auto& ds : datasets)
    for (const auto& ex : ds.examples) {
      out << ds.client_id;
      for (double v : ex.x) out << ',' << format_double(v);
      out << ',' << format_double(ex.y) << '\n';
    }
  if (!out) throw IoError("failed writing dataset CSV");
}

std::vector<ClientDataset> read_datasets_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw IoError("dataset CSV is empty");
  const auto header = split_csv_line(line);
  if (header.size() < 3 || header.front() != "client_id" || header.back() != "label")
    throw IoError("dataset CSV has an unexpected header");
  const std::size_t p = header.size() - 2;
  std::vector<ClientDataset> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != p + 2) throw IoError("dataset CSV row has wrong width");
    const int id = static_cast<int>(parse_int(fields[0]));
    if (id < 0) throw IoError("negative client id in dataset CSV");
    if (static_cast<int>(out.size()) <= id) {
      const int old = static_cast<int>(out.size());
      out.resize(id + 1);
      for (int k = old; k <= id; ++k) out[k].client_id = k;
    }
    LabeledExample ex;
    ex.x.reserve(p);
    for (std::size_t i = 0; i < p; ++i) ex.x.push_back(parse_double(fields[1 + i]));
    ex.y = parse_double(fields.back());
    out[id].examples.push_back(std::move(ex));
  }
  return out;
}

}  // namespace pacfl
