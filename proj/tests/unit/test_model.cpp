#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "pacfl/errors.hpp"
#include "pacfl/model.hpp"

using namespace pacfl;

namespace {

ParamVector random_theta(const ModelSpec& spec, std::mt19937_64& rng, double scale = 0.5) {
  std::normal_distribution<double> n(0.0, scale);
  ParamVector t(spec.param_dim());
  for (auto& v : t) v = n(rng);
  return t;
}

std::vector<LabeledExample> random_batch(const ModelSpec& spec, std::mt19937_64& rng, int m) {
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<LabeledExample> out(m);
  for (auto& ex : out) {
    ex.x.resize(spec.input_dim);
    for (auto& v : ex.x) v = n(rng);
    if (spec.is_classifier())
      ex.y = static_cast<double>(rng() % static_cast<unsigned>(spec.num_classes));
    else
      ex.y = n(rng);
  }
  return out;
}

// Straight-line mlp1 evaluation written out by index, independent of the
// library's implementation.
double mlp_reference_loss(int p, int h, int C, const std::vector<double>& th,
                          const std::vector<double>& x, int y) {
  const double* W1 = th.data();
  const double* b1 = W1 + h * p;
  const double* W2 = b1 + h;
  const double* b2 = W2 + C * h;
  std::vector<double> a(h);
  for (int j = 0; j < h; ++j) {
    double s = b1[j];
    for (int i = 0; i < p; ++i) s += W1[j * p + i] * x[i];
    a[j] = std::tanh(s);
  }
  std::vector<double> z(C);
  double zmax = -INFINITY;
  for (int c = 0; c < C; ++c) {
    double s = b2[c];
    for (int j = 0; j < h; ++j) s += W2[c * h + j] * a[j];
    z[c] = s;
    zmax = std::max(zmax, s);
  }
  double lse = 0.0;
  for (int c = 0; c < C; ++c) lse += std::exp(z[c] - zmax);
  return std::log(lse) + zmax - z[y];
}

double rel_err(double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); }

}  // namespace

TEST(ModelLoss, LinearClosedForm) {
  const auto spec = ModelSpec::linear(2);
  const ParamVector theta{1.0, 1.0};
  EXPECT_DOUBLE_EQ(example_loss(spec, theta, std::vector<double>{1.0, 2.0}, 0.0), 4.5);
}

TEST(ModelLoss, LogisticZeroThetaIsLn2) {
  const auto spec = ModelSpec::logistic(3);
  const ParamVector theta(3, 0.0);
  std::vector<LabeledExample> batch = {{{1, 2, 3}, 0}, {{-1, 0.5, 2}, 1},
                                       {{0, 0, 1}, 0}, {{4, -2, 0}, 1}};
  EXPECT_NEAR(loss(spec, theta, batch), std::log(2.0), 1e-15);
  for (const auto& ex : batch)
    EXPECT_NEAR(example_loss(spec, theta, ex.x, ex.y), std::log(2.0), 1e-15);
}

TEST(ModelLoss, MulticlassZeroThetaIsLnC) {
  const auto spec = ModelSpec::logistic(2, 4);
  const ParamVector theta(spec.param_dim(), 0.0);
  EXPECT_NEAR(example_loss(spec, theta, std::vector<double>{0.3, -1.0}, 2), std::log(4.0),
              1e-15);
}

TEST(ModelLoss, MlpMatchesStraightLineReference) {
  std::mt19937_64 rng(5);
  const auto spec = ModelSpec::mlp1(3, 4, 3);
  for (int draw = 0; draw < 5; ++draw) {
    const auto theta = random_theta(spec, rng);
    const auto batch = random_batch(spec, rng, 8);
    double ref = 0.0;
    for (const auto& ex : batch)
      ref += mlp_reference_loss(3, 4, 3, theta.values(), ex.x, static_cast<int>(ex.y));
    ref /= batch.size();
    EXPECT_NEAR(loss(spec, theta, batch), ref, 1e-12);
  }
}

TEST(ModelGrad, LinearClosedForm) {
  const auto spec = ModelSpec::linear(2);
  const auto g = example_grad_params(spec, ParamVector{1.0, 1.0}, std::vector<double>{1.0, 2.0},
                                     0.0);
  EXPECT_EQ(g, (GradVector{3.0, 6.0}));
}

TEST(ModelGrad, LogisticAtZeroIsMinusHalfX) {
  const auto spec = ModelSpec::logistic(3);
  const std::vector<double> x = {0.4, -1.0, 2.0};
  const auto g = example_grad_params(spec, ParamVector(3, 0.0), x, 1.0);
  for (int i = 0; i < 3; ++i) EXPECT_DOUBLE_EQ(g[i], -0.5 * x[i]);
}

TEST(ModelGrad, MlpMatchesCentralDifferencesOfReference) {
  std::mt19937_64 rng(11);
  const auto spec = ModelSpec::mlp1(3, 4, 3);
  const double h = 1e-5;
  for (int seed = 0; seed < 20; ++seed) {
    const auto theta = random_theta(spec, rng);
    const auto batch = random_batch(spec, rng, 4);
    const auto g = grad_params(spec, theta, batch);
    for (int k = 0; k < spec.param_dim(); ++k) {
      auto tp = theta.values(), tm = theta.values();
      tp[k] += h;
      tm[k] -= h;
      double fp = 0, fm = 0;
      for (const auto& ex : batch) {
        fp += mlp_reference_loss(3, 4, 3, tp, ex.x, static_cast<int>(ex.y));
        fm += mlp_reference_loss(3, 4, 3, tm, ex.x, static_cast<int>(ex.y));
      }
      const double fd = (fp - fm) / (2 * h * batch.size());
      EXPECT_LE(rel_err(g[k], fd), 1e-5) << "seed " << seed << " coord " << k;
    }
  }
}

TEST(ModelGrad, BatchGradientIsMeanOfExampleGradients) {
  std::mt19937_64 rng(3);
  const auto spec = ModelSpec::logistic(3, 3);
  const auto theta = random_theta(spec, rng);
  const auto batch = random_batch(spec, rng, 6);
  const auto g = grad_params(spec, theta, batch);
  std::vector<double> ref(spec.param_dim(), 0.0);
  for (const auto& ex : batch) {
    const auto gi = example_grad_params(spec, theta, ex.x, ex.y);
    for (int k = 0; k < spec.param_dim(); ++k) ref[k] += gi[k];
  }
  for (int k = 0; k < spec.param_dim(); ++k) EXPECT_NEAR(g[k], ref[k] / batch.size(), 1e-15);
}

TEST(ModelInputGrad, LinearIsResidualTimesTheta) {
  const auto spec = ModelSpec::linear(2);
  const auto g = grad_inputs(spec, ParamVector{1.0, 1.0}, {{1.0, 2.0}, 0.0});
  EXPECT_EQ(g, (std::vector<double>{3.0, 3.0}));
}

TEST(ModelInputGrad, LogisticZeroThetaGivesZero) {
  const auto spec = ModelSpec::logistic(3);
  const auto g = grad_inputs(spec, ParamVector(3, 0.0), {{1.0, -2.0, 0.5}, 1.0});
  for (double v : g) EXPECT_EQ(v, 0.0);
}

TEST(ModelInputGrad, MlpMatchesFiniteDifferences) {
  std::mt19937_64 rng(17);
  const auto spec = ModelSpec::mlp1(3, 5, 2);
  const double h = 1e-5;
  for (int draw = 0; draw < 10; ++draw) {
    const auto theta = random_theta(spec, rng);
    const auto ex = random_batch(spec, rng, 1).front();
    const auto g = grad_inputs(spec, theta, ex);
    for (int i = 0; i < spec.input_dim; ++i) {
      auto xp = ex.x, xm = ex.x;
      xp[i] += h;
      xm[i] -= h;
      const double fd = (mlp_reference_loss(3, 5, 2, theta.values(), xp, ex.y) -
                         mlp_reference_loss(3, 5, 2, theta.values(), xm, ex.y)) /
                        (2 * h);
      EXPECT_LE(rel_err(g[i], fd), 1e-5);
    }
  }
}

TEST(FiniteDiffCheck, LinearIsExactToRounding) {
  std::mt19937_64 rng(23);
  const auto spec = ModelSpec::linear(4);
  for (int draw = 0; draw < 10; ++draw) {
    const auto theta = random_theta(spec, rng);
    const auto batch = random_batch(spec, rng, 5);
    EXPECT_LE(finite_diff_check(spec, theta, batch, 1e-4), 1e-8);
  }
}

TEST(FiniteDiffCheck, MlpWithinTolerance) {
  std::mt19937_64 rng(29);
  const auto spec = ModelSpec::mlp1(3, 4, 3);
  for (int seed = 0; seed < 10; ++seed) {
    const auto theta = random_theta(spec, rng);
    const auto batch = random_batch(spec, rng, 8);
    EXPECT_LE(finite_diff_check(spec, theta, batch, 1e-5), 1e-5);
  }
}

TEST(FiniteDiffCheck, ZeroStepIsPreconditionError) {
  const auto spec = ModelSpec::linear(2);
  std::vector<LabeledExample> batch = {{{1, 2}, 0}};
  EXPECT_THROW(finite_diff_check(spec, ParamVector{1, 1}, batch, 0.0), PreconditionError);
}

TEST(ModelSpecTest, ParamDimensions) {
  EXPECT_EQ(ModelSpec::linear(5).param_dim(), 5);
  EXPECT_EQ(ModelSpec::logistic(5).param_dim(), 5);
  EXPECT_EQ(ModelSpec::logistic(5, 3).param_dim(), 15);
  EXPECT_EQ(ModelSpec::mlp1(3, 4, 2).param_dim(), 3 * 4 + 4 + 2 * 4 + 2);
}

TEST(ModelSpecTest, InvalidSpecsRejected) {
  EXPECT_THROW(ModelSpec::mlp1(3, 0, 2).validate(), ConfigError);
  EXPECT_THROW(ModelSpec::logistic(0).validate(), ConfigError);
}
