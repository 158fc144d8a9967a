#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "pacfl/errors.hpp"
#include "pacfl/protocol.hpp"

using namespace pacfl;

namespace {

std::vector<ClientDataset> make_data(int clients, int m, std::uint64_t seed,
                                     TargetKind targets = TargetKind::class_index) {
  DatasetSpec s;
  s.num_clients = clients;
  s.client_sizes = {m};
  s.input_dim = 3;
  s.seed = seed;
  s.targets = targets;
  return generate(s);
}

FLRunConfig make_config(ProtectionMechanism mech, int rounds = 5) {
  FLRunConfig c;
  c.rounds = rounds;
  c.learning_rate = 0.5;
  c.mechanism = std::move(mech);
  c.model = ModelSpec::logistic(3);
  c.seed = 42;
  return c;
}

}  // namespace

TEST(LocalUpdate, SingleExampleEqualsExampleGradient) {
  const auto data = make_data(1, 1, 3);
  const auto spec = ModelSpec::logistic(3);
  const ParamVector theta{0.1, -0.3, 0.2};
  const auto& ex = data[0].examples[0];
  EXPECT_EQ(client_local_update(spec, theta, data[0]),
            example_grad_params(spec, theta, ex.x, ex.y));
}

TEST(LocalUpdate, DuplicatedDatasetGivesSameGradient) {
  const auto data = make_data(1, 5, 4);
  ClientDataset doubled = data[0];
  for (const auto& ex : data[0].examples) doubled.examples.push_back(ex);
  const auto spec = ModelSpec::logistic(3);
  const ParamVector theta{0.4, 0.1, -0.7};
  const auto a = client_local_update(spec, theta, data[0]);
  const auto b = client_local_update(spec, theta, doubled);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], 1e-15);
}

TEST(LocalUpdate, MatchesBruteForceMean) {
  const auto data = make_data(1, 8, 5);
  const auto spec = ModelSpec::logistic(3);
  const ParamVector theta{-0.2, 0.5, 0.3};
  const auto g = client_local_update(spec, theta, data[0]);
  std::vector<double> ref(3, 0.0);
  for (const auto& ex : data[0].examples) {
    const double z = theta[0] * ex.x[0] + theta[1] * ex.x[1] + theta[2] * ex.x[2];
    const double r = 1.0 / (1.0 + std::exp(-z)) - ex.y;
    for (int i = 0; i < 3; ++i) ref[i] += r * ex.x[i] / 8.0;
  }
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(g[i], ref[i], 1e-14);
}

TEST(Protect, ZeroSigmaIsIdentity) {
  const GradVector g{0.3, -1.0, 2.0};
  Rng rng(1);
  const auto p = protect(g, Randomization{0.0}, rng);
  EXPECT_EQ(p.g_tilde, g);
  EXPECT_EQ(p.delta_up, 0.0);
}

TEST(Protect, NoneIsIdentity) {
  const GradVector g{0.3, -1.0};
  Rng rng(1);
  const auto p = protect(g, NoProtection{}, rng);
  EXPECT_EQ(p.g_tilde, g);
  EXPECT_EQ(p.delta_up, 0.0);
}

TEST(Protect, HeIdentityPermutationUnitOffset) {
  HeCodec codec{{0, 1, 2}, {1.0, 0.0, 0.0}};
  const GradVector g{0.5, 0.25, -1.0};
  Rng rng(1);
  const auto p = protect(g, codec, rng);
  EXPECT_DOUBLE_EQ(p.delta_up, 1.0);
}

TEST(Protect, GaussianNoiseEnergyMatchesChiSquareMean) {
  const int d = 100, draws = 10000;
  const GradVector g(d, 0.0);
  Rng rng(2024);
  double sum = 0.0;
  for (int i = 0; i < draws; ++i) {
    const auto p = protect(g, Randomization{0.1}, rng);
    sum += p.delta_up * p.delta_up;
  }
  EXPECT_NEAR(sum / draws, d * 0.01, 0.03);
}

TEST(Protect, FixedNormRescales) {
  const GradVector g(10, 1.0);
  Rng rng(5);
  const auto p = protect(g, Randomization{0.3, false, 2.5}, rng);
  EXPECT_NEAR(p.delta_up, 2.5, 1e-12);
}

TEST(Aggregate, TwoEqualClients) {
  const std::vector<GradVector> g = {{1.0, 0.0}, {0.0, 1.0}};
  const std::vector<int> sizes = {4, 4};
  EXPECT_EQ(aggregate(g, sizes, ParamVector{0.0, 0.0}, 1.0), (ParamVector{-0.5, -0.5}));
}

TEST(Aggregate, SingleClientIsSgdStep) {
  const std::vector<GradVector> g = {{2.0, -4.0}};
  const std::vector<int> sizes = {3};
  EXPECT_EQ(aggregate(g, sizes, ParamVector{1.0, 1.0}, 0.25), (ParamVector{0.5, 2.0}));
}

TEST(Aggregate, MatchesWeightedMean) {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> n;
  std::vector<GradVector> g(3, GradVector(4));
  for (auto& v : g)
    for (auto& x : v) x = n(rng);
  const std::vector<int> sizes = {1, 2, 3};
  const ParamVector theta{0.1, 0.2, 0.3, 0.4};
  const auto out = aggregate(g, sizes, theta, 0.7);
  for (int i = 0; i < 4; ++i) {
    const double mean = (1 * g[0][i] + 2 * g[1][i] + 3 * g[2][i]) / 6.0;
    EXPECT_NEAR(out[i], theta[i] - 0.7 * mean, 1e-14);
  }
}

TEST(Aggregate, RejectsMismatchedInputs) {
  const std::vector<GradVector> g = {{1.0, 0.0}};
  const std::vector<int> sizes = {1, 2};
  EXPECT_THROW(aggregate(g, sizes, ParamVector{0, 0}, 1.0), ConfigError);
}

TEST(Decode, NoneAndRandomizationAreIdentity) {
  const ParamVector theta{1.5, -2.0};
  for (ProtectionMechanism m : {ProtectionMechanism{NoProtection{}},
                                ProtectionMechanism{Randomization{0.3}}}) {
    EXPECT_EQ(decode(encode_model(theta, m), m), theta);
  }
}

TEST(Decode, HeSingleClientRoundReproducesPlainModel) {
  const auto data = make_data(1, 6, 9);
  const auto h = HeCodec::random(3, 1.0, 77);
  const auto r = run(make_config(h, 1), data);
  ASSERT_FALSE(r.aborted);
  EXPECT_EQ(r.records[0].delta_two, 0.0);
  EXPECT_EQ(r.final_decoded, r.final_shadow);
}

TEST(Run, NoneMatchesShadowEverywhere) {
  const auto data = make_data(3, 6, 10);
  const auto r = run(make_config(NoProtection{}), data);
  ASSERT_FALSE(r.aborted);
  for (const auto& rec : r.records) {
    EXPECT_EQ(rec.next_theta, rec.shadow_next);
    EXPECT_EQ(rec.delta_two, 0.0);
    for (const auto& c : rec.clients) EXPECT_EQ(c.delta_up_grad, 0.0);
  }
}

TEST(Run, HeDecodedMatchesShadowButServerDiffers) {
  const auto data = make_data(3, 6, 11);
  const auto r = run(make_config(HeCodec::random(3, 1.0, 5)), data);
  ASSERT_FALSE(r.aborted);
  for (const auto& rec : r.records) {
    EXPECT_EQ(rec.next_theta, rec.shadow_next);
    EXPECT_NE(rec.next_server_state, rec.shadow_next);
    EXPECT_EQ(rec.delta_two, 0.0);
    EXPECT_EQ(rec.delta_two_shadow, 0.0);
    for (const auto& c : rec.clients) EXPECT_GT(c.delta_up_grad, 0.0);
  }
}

TEST(Run, SharedNoiseGivesEqualDistortions) {
  const auto data = make_data(3, 6, 12);
  const auto r = run(make_config(Randomization{0.1, true}), data);
  ASSERT_FALSE(r.aborted);
  for (const auto& rec : r.records)
    for (const auto& c : rec.clients) EXPECT_NEAR(rec.delta_two, c.delta_up_param, 1e-12);
}

TEST(Run, ZeroSigmaMatchesNone) {
  const auto data = make_data(2, 5, 13);
  const auto a = run(make_config(NoProtection{}), data);
  const auto b = run(make_config(Randomization{0.0}), data);
  ASSERT_EQ(a.records.size(), b.records.size());
  for (std::size_t t = 0; t < a.records.size(); ++t) {
    EXPECT_EQ(a.records[t].next_theta, b.records[t].next_theta);
    EXPECT_EQ(a.records[t].clients[0].g_tilde, b.records[t].clients[0].g_tilde);
  }
}

TEST(Run, ThreadCountDoesNotChangeResults) {
  const auto data = make_data(4, 6, 14);
  auto c1 = make_config(Randomization{0.2});
  auto c4 = c1;
  c4.threads = 4;
  const auto a = run(c1, data);
  const auto b = run(c4, data);
  std::stringstream sa, sb;
  write_round_log(sa, a);
  write_round_log(sb, b);
  EXPECT_EQ(sa.str(), sb.str());
}

TEST(RoundLog, RoundTrips) {
  const auto data = make_data(2, 4, 15);
  const auto r = run(make_config(HeCodec::random(3, 1.0, 6), 3), data);
  std::stringstream buf;
  write_round_log(buf, r);
  const auto back = read_round_log(buf);
  ASSERT_EQ(back.size(), r.records.size());
  for (std::size_t t = 0; t < back.size(); ++t) {
    EXPECT_EQ(back[t].next_theta, r.records[t].next_theta);
    EXPECT_EQ(back[t].server_state, r.records[t].server_state);
    EXPECT_EQ(back[t].delta_two, r.records[t].delta_two);
    ASSERT_EQ(back[t].clients.size(), r.records[t].clients.size());
    EXPECT_EQ(back[t].clients[1].g_tilde, r.records[t].clients[1].g_tilde);
  }
}

TEST(Run, InvalidConfigRejected) {
  auto c = make_config(NoProtection{});
  c.learning_rate = 0.0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = make_config(Randomization{-1.0});
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(UtilityLoss, ZeroDistortionOnReplayedTrainingSetIsZero) {
  const auto data = make_data(1, 120, 16);
  const auto spec = ModelSpec::logistic(3);
  const ParamVector theta{0.3, 0.1, -0.2};
  ReplaySampler replay(data[0].examples);
  const std::vector<double> zero(3, 0.0);
  const auto u = measure_utility_loss(spec, theta, zero, data[0].batch(), replay, 120);
  EXPECT_NEAR(u.eps_u, 0.0, 1e-15);
}

TEST(UtilityLoss, ZeroDistortionIsGeneralizationGap) {
  const auto train = make_data(1, 20, 17);
  const auto eval = make_data(1, 500, 18);
  const auto spec = ModelSpec::logistic(3);
  const ParamVector theta{0.3, 0.1, -0.2};
  ReplaySampler replay(eval[0].examples);
  const std::vector<double> zero(3, 0.0);
  const auto u = measure_utility_loss(spec, theta, zero, train[0].batch(), replay, 500);
  double a = 0, b = 0;
  for (const auto& ex : eval[0].examples) a += example_loss(spec, theta, ex.x, ex.y);
  for (const auto& ex : train[0].examples) b += example_loss(spec, theta, ex.x, ex.y);
  EXPECT_NEAR(u.eps_u, std::abs(a / 500 - b / 20), 1e-12);
}

TEST(UtilityLoss, LargeDistortionHurtsOnSeparableData) {
  DatasetSpec s;
  s.input_dim = 3;
  s.class_separation = 3.0;
  const auto spec = ModelSpec::logistic(3);
  int worse = 0;
  for (int seed = 0; seed < 50; ++seed) {
    s.seed = seed;
    s.client_sizes = {40};
    const auto train = generate(s);
    FLRunConfig c;
    c.rounds = 50;
    c.learning_rate = 1.0;
    c.model = spec;
    c.seed = seed;
    const auto r = run(c, train);
    std::vector<double> big(3), zero(3, 0.0);
    Rng rng(seed);
    std::normal_distribution<double> n(0.0, 5.0);
    for (auto& v : big) v = n(rng);
    DistributionSampler e1(DataDistribution(s), 1000 + seed), e2(DataDistribution(s), 1000 + seed);
    const auto u0 = measure_utility_loss(spec, r.final_decoded, zero, train[0].batch(), e1, 200);
    const auto u1 = measure_utility_loss(spec, r.final_decoded, big, train[0].batch(), e2, 200);
    worse += u1.eps_u >= u0.eps_u;
  }
  EXPECT_GE(worse, 45);
}

TEST(UtilityLoss, TooFewEvaluationDrawsRejected) {
  const auto data = make_data(1, 10, 19);
  ReplaySampler replay(data[0].examples);
  const std::vector<double> zero(3, 0.0);
  EXPECT_THROW(measure_utility_loss(ModelSpec::logistic(3), ParamVector(3), zero,
                                    data[0].batch(), replay, 10),
               PreconditionError);
}
