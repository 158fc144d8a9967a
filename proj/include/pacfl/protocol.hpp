#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "pacfl/datagen.hpp"
#include "pacfl/model.hpp"
#include "pacfl/rng.hpp"

namespace pacfl {

struct NoProtection {};

// Additive isotropic Gaussian noise on the uploaded gradient.
struct Randomization {
  double sigma = 0.0;
  // Every client adds the same per-round draw.
  bool shared_across_clients = false;
  // When > 0 the draw is rescaled to exactly this norm.
  double fixed_norm = 0.0;
};

// Simulated additively homomorphic codec: Enc(g) = permute(g) + offset.
//
// A codec-domain value is held as (permuted payload, mask weight) and is
// observed as payload + weight * offset. Linear server arithmetic acts on the
// payload and weight separately, so decoding drops the mask and inverts the
// permutation without rounding.
struct HeCodec {
  std::vector<std::size_t> permutation;  // encoded[i] = plain[permutation[i]]
  std::vector<double> offset;

  static HeCodec random(std::size_t dim, double offset_scale, std::uint64_t seed);
  void validate(std::size_t dim) const;
};

using ProtectionMechanism = std::variant<NoProtection, Randomization, HeCodec>;

std::string mechanism_tag(const ProtectionMechanism& mech);
void validate_mechanism(const ProtectionMechanism& mech, std::size_t dim);

// A vector as held by the server: for the codec, the permuted payload plus the
// weight of the offset mask; for other mechanisms the plain vector.
template <class Vec>
struct Encoded {
  Vec payload;
  double mask_weight = 0.0;
};
using EncodedGrad = Encoded<GradVector>;
using EncodedModel = Encoded<ParamVector>;

// What the server observes for an encoded value.
std::vector<double> materialize(std::span<const double> payload, double mask_weight,
                                const ProtectionMechanism& mech);

struct Protected {
  GradVector g_tilde;  // observed upload
  GradVector delta;    // g_tilde - g
  double delta_up = 0.0;
  EncodedGrad encoded;  // server-side representation of the upload
};

// Applies the mechanism to a true local gradient. `rng` supplies the noise
// for randomization; the codec ignores it.
Protected protect(const GradVector& g, const ProtectionMechanism& mech, Rng& rng);

// Full-batch mean gradient of one client's loss at theta.
GradVector client_local_update(const ModelSpec& spec, const ParamVector& theta,
                               const ClientDataset& dataset);

// Size-weighted FedAvg step: theta - eta * sum_k (m_k / sum m) * g_k, with the
// client sum taken in list order.
ParamVector aggregate(std::span<const GradVector> g_tilde, std::span<const int> sizes,
                      const ParamVector& theta_tilde, double eta);

EncodedModel encode_model(const ParamVector& theta, const ProtectionMechanism& mech);
ParamVector decode(const EncodedModel& theta_tilde, const ProtectionMechanism& mech);

enum class LearningRateSchedule { constant, inv_sqrt };

struct FLRunConfig {
  int rounds = 10;
  double learning_rate = 0.1;
  LearningRateSchedule schedule = LearningRateSchedule::constant;
  ProtectionMechanism mechanism = NoProtection{};
  ModelSpec model;
  std::uint64_t seed = 0;
  // Initial parameters: zeros when init_scale == 0, else N(0, init_scale^2).
  double init_scale = 0.0;
  int threads = 1;

  double eta(int round) const;
  void validate() const;
};

struct ClientRound {
  int client_id = 0;
  GradVector g;
  GradVector g_tilde;
  GradVector delta;
  double delta_up_grad = 0.0;   // ||g_tilde - g||
  double delta_up_param = 0.0;  // ||eta * (g_tilde - g)||
};

struct RoundRecord {
  int round = 0;
  double eta = 0.0;
  ParamVector theta;         // decoded model the clients trained on
  ParamVector server_state;  // observed server-side model at the start of the round
  std::vector<ClientRound> clients;
  // ||Dec(theta_tilde_{t+1}) - (theta_t - eta * sum w_k g_k)||, the same-round
  // unprotected aggregate.
  double delta_two = 0.0;
  // ||Dec(theta_tilde_{t+1}) - shadow_{t+1}|| against the unprotected run.
  double delta_two_shadow = 0.0;
  ParamVector next_server_state;  // observed
  ParamVector next_theta;         // decoded
  ParamVector shadow_next;
};

struct RunResult {
  std::vector<RoundRecord> records;
  EncodedModel final_server;
  ParamVector final_observed;
  ParamVector final_decoded;
  ParamVector final_shadow;
  ParamVector initial;
  bool aborted = false;
  std::string diagnostic;
};

// Runs the protected protocol alongside an unprotected shadow run on the same
// data and initial model. Deterministic in (config, datasets) and independent
// of the thread count.
RunResult run(const FLRunConfig& config, std::span<const ClientDataset> datasets);

ParamVector initial_model(const FLRunConfig& config);

struct UtilityLoss {
  double eps_u = 0.0;
  double halfwidth = 0.0;  // normal-approximation 95%
  double expected_loss = 0.0;
  double empirical_loss = 0.0;
  int n_eval = 0;
};

// |mean loss of theta + delta over n_eval draws - empirical loss of theta on
// the training set|.
UtilityLoss measure_utility_loss(const ModelSpec& spec, const ParamVector& theta,
                                 std::span<const double> delta, Batch train_set,
                                 Sampler& eval_sampler, int n_eval);

// One JSON object per round.
void write_round_log(std::ostream& out, const RunResult& result);
std::vector<RoundRecord> read_round_log(std::istream& in);

}  // namespace pacfl
