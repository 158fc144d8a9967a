#include "pacfl/protocol.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>

#include "json.hpp"
#include "pacfl/errors.hpp"

namespace pacfl {
namespace {

using nlohmann::json;

constexpr const char* kRoundSchema = "pacfl.round/1";

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

std::vector<double> weights_of(std::span<const int> sizes) {
  long long total = 0;
  for (int m : sizes) total += m;
  require(total > 0, "aggregate: total client size must be > 0");
  std::vector<double> w(sizes.size());
  for (std::size_t k = 0; k < sizes.size(); ++k)
    w[k] = static_cast<double>(sizes[k]) / static_cast<double>(total);
  return w;
}

template <class Vec>
Vec permute(const Vec& plain, const HeCodec& codec) {
  Vec out(plain.size());
  for (std::size_t i = 0; i < plain.size(); ++i) out[i] = plain[codec.permutation[i]];
  return out;
}

template <class Vec>
Vec unpermute(const Vec& encoded, const HeCodec& codec) {
  Vec out(encoded.size());
  for (std::size_t i = 0; i < encoded.size(); ++i)
    out[codec.permutation[i]] = encoded[i];
  return out;
}

bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

}  // namespace

HeCodec HeCodec::random(std::size_t dim, double offset_scale, std::uint64_t seed) {
  HeCodec codec;
  codec.permutation.resize(dim);
  std::iota(codec.permutation.begin(), codec.permutation.end(), std::size_t{0});
  Rng rng = make_rng(seed, {stream_key("he.codec")});
  std::shuffle(codec.permutation.begin(), codec.permutation.end(), rng);
  std::normal_distribution<double> normal(0.0, offset_scale);
  codec.offset.resize(dim);
  for (auto& o : codec.offset) o = normal(rng);
  return codec;
}

void HeCodec::validate(std::size_t dim) const {
  if (permutation.size() != dim || offset.size() != dim)
    throw ConfigError("he codec dimension does not match the model (" +
                      std::to_string(dim) + ")");
  std::vector<bool> seen(dim, false);
  for (std::size_t p : permutation) {
    if (p >= dim || seen[p]) throw ConfigError("he codec permutation is not a bijection");
    seen[p] = true;
  }
  if (!all_finite(offset)) throw ConfigError("he codec offset must be finite");
}

std::string mechanism_tag(const ProtectionMechanism& mech) {
  return std::visit(Overloaded{[](const NoProtection&) { return std::string("none"); },
                               [](const Randomization&) { return std::string("rand"); },
                               [](const HeCodec&) { return std::string("he"); }},
                    mech);
}

void validate_mechanism(const ProtectionMechanism& mech, std::size_t dim) {
  if (const auto* r = std::get_if<Randomization>(&mech)) {
    if (!(r->sigma >= 0) || !std::isfinite(r->sigma))
      throw ConfigError("randomization sigma must be finite and >= 0");
    if (!(r->fixed_norm >= 0)) throw ConfigError("fixed_norm must be >= 0");
  } else if (const auto* he = std::get_if<HeCodec>(&mech)) {
    he->validate(dim);
  }
}

std::vector<double> materialize(std::span<const double> payload, double mask_weight,
                                const ProtectionMechanism& mech) {
  std::vector<double> out(payload.begin(), payload.end());
  if (const auto* he = std::get_if<HeCodec>(&mech))
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += mask_weight * he->offset[i];
  return out;
}

Protected protect(const GradVector& g, const ProtectionMechanism& mech, Rng& rng) {
  Protected out;
  const std::size_t d = g.size();
  out.delta = GradVector(d);
  std::visit(
      Overloaded{
          [&](const NoProtection&) {
            out.g_tilde = g;
            out.encoded = {g, 0.0};
          },
          [&](const Randomization& r) {
            if (r.sigma > 0) {
              std::normal_distribution<double> normal(0.0, r.sigma);
              for (auto& v : out.delta) v = normal(rng);
              if (r.fixed_norm > 0) {
                const double n = l2_norm(out.delta.view());
                if (n > 0)
                  for (auto& v : out.delta) v *= r.fixed_norm / n;
              }
            }
            out.g_tilde = GradVector(d);
            for (std::size_t i = 0; i < d; ++i) out.g_tilde[i] = g[i] + out.delta[i];
            out.encoded = {out.g_tilde, 0.0};
          },
          [&](const HeCodec& codec) {
            out.encoded = {permute(g, codec), 1.0};
            out.g_tilde = GradVector(
                materialize(out.encoded.payload.view(), 1.0, mech));
            for (std::size_t i = 0; i < d; ++i) out.delta[i] = out.g_tilde[i] - g[i];
          }},
      mech);
  if (std::holds_alternative<HeCodec>(mech)) {
    out.delta_up = l2_distance(out.g_tilde.view(), g.view());
  } else {
    out.delta_up = l2_norm(out.delta.view());
  }
  return out;
}

GradVector client_local_update(const ModelSpec& spec, const ParamVector& theta,
                               const ClientDataset& dataset) {
  require(!dataset.examples.empty(), "client_local_update: dataset must be non-empty");
  return grad_params(spec, theta, dataset.batch());
}

ParamVector aggregate(std::span<const GradVector> g_tilde, std::span<const int> sizes,
                      const ParamVector& theta_tilde, double eta) {
  if (g_tilde.size() != sizes.size())
    throw ConfigError("aggregate: gradient and size lists differ in length");
  require(!g_tilde.empty(), "aggregate: need at least one client");
  const auto w = weights_of(sizes);
  const std::size_t d = theta_tilde.size();
  std::vector<double> acc(d, 0.0);
  for (std::size_t k = 0; k < g_tilde.size(); ++k) {
    if (g_tilde[k].size() != d) throw ConfigError("aggregate: gradient dimension mismatch");
    for (std::size_t j = 0; j < d; ++j) acc[j] += w[k] * g_tilde[k][j];
  }
  ParamVector out(d);
  for (std::size_t j = 0; j < d; ++j) out[j] = theta_tilde[j] - eta * acc[j];
  return out;
}

EncodedModel encode_model(const ParamVector& theta, const ProtectionMechanism& mech) {
  if (const auto* he = std::get_if<HeCodec>(&mech)) return {permute(theta, *he), 1.0};
  return {theta, 0.0};
}

ParamVector decode(const EncodedModel& theta_tilde, const ProtectionMechanism& mech) {
  if (const auto* he = std::get_if<HeCodec>(&mech))
    return unpermute(theta_tilde.payload, *he);
  return theta_tilde.payload;
}

double FLRunConfig::eta(int round) const {
  if (schedule == LearningRateSchedule::inv_sqrt)
    return learning_rate / std::sqrt(static_cast<double>(round + 1));
  return learning_rate;
}

void FLRunConfig::validate() const {
  if (rounds < 1) throw ConfigError("rounds must be >= 1");
  if (!(learning_rate > 0)) throw ConfigError("learning_rate must be > 0");
  if (!(init_scale >= 0)) throw ConfigError("init_scale must be >= 0");
  model.validate();
  validate_mechanism(mechanism, static_cast<std::size_t>(model.param_dim()));
}

ParamVector initial_model(const FLRunConfig& config) {
  ParamVector theta(static_cast<std::size_t>(config.model.param_dim()));
  if (config.init_scale > 0) {
    Rng rng = make_rng(config.seed, {stream_key("model.init")});
    std::normal_distribution<double> normal(0.0, config.init_scale);
    for (auto& v : theta) v = normal(rng);
  }
  return theta;
}

RunResult run(const FLRunConfig& config, std::span<const ClientDataset> datasets) {
  config.validate();
  require(!datasets.empty(), "run: need at least one client dataset");
  const auto& mech = config.mechanism;
  const int K = static_cast<int>(datasets.size());
  std::vector<int> sizes(K);
  for (int k = 0; k < K; ++k) {
    require(!datasets[k].examples.empty(), "run: every client dataset must be non-empty");
    sizes[k] = static_cast<int>(datasets[k].size());
  }
  const bool shared_noise = [&] {
    const auto* r = std::get_if<Randomization>(&mech);
    return r != nullptr && r->shared_across_clients;
  }();

  RunResult result;
  result.initial = initial_model(config);
  EncodedModel server = encode_model(result.initial, mech);
  ParamVector shadow = result.initial;

  for (int t = 0; t < config.rounds; ++t) {
    RoundRecord rec;
    rec.round = t;
    rec.eta = config.eta(t);
    rec.theta = decode(server, mech);
    rec.server_state = ParamVector(materialize(server.payload.view(), server.mask_weight, mech));
    rec.clients.resize(K);

    std::vector<Protected> uploads(K);
    std::vector<GradVector> shadow_grads(K);
    const bool shadow_in_sync = shadow == rec.theta;
    try {
      parallel_for(K, config.threads, [&](int k) {
        const auto g = client_local_update(config.model, rec.theta, datasets[k]);
        Rng rng = shared_noise
                      ? make_rng(config.seed, {stream_key("protect.shared"),
                                               static_cast<std::uint64_t>(t)})
                      : make_rng(config.seed, {stream_key("protect"),
                                               static_cast<std::uint64_t>(k),
                                               static_cast<std::uint64_t>(t)});
        uploads[k] = protect(g, mech, rng);
        shadow_grads[k] =
            shadow_in_sync ? g : client_local_update(config.model, shadow, datasets[k]);
        auto& cr = rec.clients[k];
        cr.client_id = datasets[k].client_id;
        cr.g = g;
        cr.g_tilde = uploads[k].g_tilde;
        cr.delta = uploads[k].delta;
        cr.delta_up_grad = uploads[k].delta_up;
        double s = 0.0;
        for (std::size_t j = 0; j < g.size(); ++j) {
          const double v = rec.eta * (uploads[k].g_tilde[j] - g[j]);
          s += v * v;
        }
        cr.delta_up_param = std::sqrt(s);
      });
    } catch (const NumericError& e) {
      result.aborted = true;
      result.diagnostic = "round " + std::to_string(t) + ": " + e.what();
      break;
    }

    std::vector<GradVector> payloads(K), plain(K);
    std::vector<GradVector> masks(K);
    for (int k = 0; k < K; ++k) {
      payloads[k] = uploads[k].encoded.payload;
      masks[k] = GradVector{uploads[k].encoded.mask_weight};
      plain[k] = rec.clients[k].g;
    }
    EncodedModel next;
    next.payload = aggregate(payloads, sizes, server.payload, rec.eta);
    next.mask_weight =
        aggregate(masks, sizes, ParamVector{server.mask_weight}, rec.eta)[0];
    const ParamVector same_round = aggregate(plain, sizes, rec.theta, rec.eta);
    const ParamVector shadow_next = aggregate(shadow_grads, sizes, shadow, rec.eta);

    rec.next_theta = decode(next, mech);
    rec.next_server_state =
        ParamVector(materialize(next.payload.view(), next.mask_weight, mech));
    rec.shadow_next = shadow_next;
    rec.delta_two = l2_distance(rec.next_theta.view(), same_round.view());
    rec.delta_two_shadow = l2_distance(rec.next_theta.view(), shadow_next.view());

    if (!rec.next_server_state.all_finite() || !rec.next_theta.all_finite() ||
        !shadow_next.all_finite()) {
      result.aborted = true;
      result.diagnostic = "round " + std::to_string(t) + ": model diverged (non-finite)";
      result.records.push_back(std::move(rec));
      break;
    }
    server = std::move(next);
    shadow = shadow_next;
    result.records.push_back(std::move(rec));
  }

  result.final_server = server;
  result.final_observed =
      ParamVector(materialize(server.payload.view(), server.mask_weight, mech));
  result.final_decoded = decode(server, mech);
  result.final_shadow = shadow;
  return result;
}

UtilityLoss measure_utility_loss(const ModelSpec& spec, const ParamVector& theta,
                                 std::span<const double> delta, Batch train_set,
                                 Sampler& eval_sampler, int n_eval) {
  require(n_eval >= 100, "measure_utility_loss: n_eval must be >= 100");
  require(delta.size() == theta.size(), "measure_utility_loss: delta dimension mismatch");
  ParamVector distorted(theta.size());
  for (std::size_t i = 0; i < theta.size(); ++i) distorted[i] = theta[i] + delta[i];
  double sum = 0.0, sum_sq = 0.0;
  for (int n = 0; n < n_eval; ++n) {
    auto z = eval_sampler.next();
    if (!z) throw ConfigError("measure_utility_loss: evaluation sampler exhausted after " +
                              std::to_string(n) + " draws");
    const double l = example_loss(spec, distorted, z->x, z->y);
    sum += l;
    sum_sq += l * l;
  }
  UtilityLoss out;
  out.n_eval = n_eval;
  out.expected_loss = sum / n_eval;
  out.empirical_loss = loss(spec, theta, train_set);
  out.eps_u = std::abs(out.expected_loss - out.empirical_loss);
  const double var =
      std::max(0.0, (sum_sq - n_eval * out.expected_loss * out.expected_loss) / (n_eval - 1));
  out.halfwidth = 1.96 * std::sqrt(var / n_eval);
  return out;
}

void write_round_log(std::ostream& out, const RunResult& result) {
  for (const auto& rec : result.records) {
    json j;
    j["schema"] = kRoundSchema;
    j["round"] = rec.round;
    j["eta"] = rec.eta;
    j["theta"] = rec.theta.values();
    j["server_state"] = rec.server_state.values();
    json clients = json::array();
    for (const auto& c : rec.clients) {
      clients.push_back({{"client_id", c.client_id},
                         {"g", c.g.values()},
                         {"g_tilde", c.g_tilde.values()},
                         {"delta", c.delta.values()},
                         {"delta_up_grad", c.delta_up_grad},
                         {"delta_up_param", c.delta_up_param}});
    }
    j["clients"] = std::move(clients);
    j["delta_two"] = rec.delta_two;
    j["delta_two_shadow"] = rec.delta_two_shadow;
    j["next_server_state"] = rec.next_server_state.values();
    j["next_theta"] = rec.next_theta.values();
    j["shadow_next"] = rec.shadow_next.values();
    out << j.dump() << '\n';
  }
  if (!out) throw IoError("failed writing round log");
}

std::vector<RoundRecord> read_round_log(std::istream& in) {
  std::vector<RoundRecord> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw IoError(std::string("malformed round log line: ") + e.what());
    }
    try {
      if (j.at("schema") != kRoundSchema) throw IoError("unsupported round log schema");
      RoundRecord rec;
      rec.round = j.at("round");
      rec.eta = j.at("eta");
      rec.theta = ParamVector(j.at("theta").get<std::vector<double>>());
      rec.server_state = ParamVector(j.at("server_state").get<std::vector<double>>());
      for (const auto& c : j.at("clients")) {
        ClientRound cr;
        cr.client_id = c.at("client_id");
        cr.g = GradVector(c.at("g").get<std::vector<double>>());
        cr.g_tilde = GradVector(c.at("g_tilde").get<std::vector<double>>());
        cr.delta = GradVector(c.at("delta").get<std::vector<double>>());
        cr.delta_up_grad = c.at("delta_up_grad");
        cr.delta_up_param = c.at("delta_up_param");
        rec.clients.push_back(std::move(cr));
      }
      rec.delta_two = j.at("delta_two");
      rec.delta_two_shadow = j.at("delta_two_shadow");
      rec.next_server_state = ParamVector(j.at("next_server_state").get<std::vector<double>>());
      rec.next_theta = ParamVector(j.at("next_theta").get<std::vector<double>>());
      rec.shadow_next = ParamVector(j.at("shadow_next").get<std::vector<double>>());
      out.push_back(std::move(rec));
    } catch (const json::exception& e) {
      throw IoError(std::string("round log record is missing fields: ") + e.what());
    }
  }
  return out;
}

}  // namespace pacfl
