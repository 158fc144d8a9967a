#include "pacfl/model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "pacfl/errors.hpp"

namespace pacfl {
namespace {

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// log(1 + exp(z)) without overflow.
double softplus(double z) {
  if (z > 0) return z + std::log1p(std::exp(-z));
  return std::log1p(std::exp(z));
}

double log_sum_exp(std::span<const double> z) {
  const double mx = *std::max_element(z.begin(), z.end());
  double s = 0.0;
  for (double v : z) s += std::exp(v - mx);
  return mx + std::log(s);
}

std::vector<double> softmax(std::span<const double> z) {
  const double lse = log_sum_exp(z);
  std::vector<double> p(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) p[i] = std::exp(z[i] - lse);
  return p;
}

bool binary_logistic(const ModelSpec& spec) {
  return spec.kind == ModelKind::logistic && spec.num_classes == 2;
}

void check_example(const ModelSpec& spec, const ParamVector& theta,
                   std::span<const double> x, double y) {
  if (static_cast<int>(theta.size()) != spec.param_dim())
    throw ConfigError("parameter vector has length " +
                      std::to_string(theta.size()) + ", model expects " +
                      std::to_string(spec.param_dim()));
  if (static_cast<int>(x.size()) != spec.input_dim)
    throw ConfigError("example has " + std::to_string(x.size()) +
                      " features, model expects " +
                      std::to_string(spec.input_dim));
  if (spec.is_classifier()) {
    const double c = std::floor(y);
    if (c != y || c < 0 || c >= spec.num_classes)
      throw ConfigError("label " + std::to_string(y) +
                        " is not a class index in [0, " +
                        std::to_string(spec.num_classes) + ")");
  }
}

double finite_or_throw(double v, const char* what) {
  if (!std::isfinite(v)) throw NumericError(std::string(what) + " is not finite");
  return v;
}

// Hidden layer of mlp1: returns tanh activations.
std::vector<double> mlp_hidden(const ModelSpec& spec, const double* w,
                               std::span<const double> x) {
  const int p = spec.input_dim, h = spec.hidden_dim;
  const double* b1 = w + h * p;
  std::vector<double> a(h);
  for (int j = 0; j < h; ++j) {
    double z = b1[j];
    for (int i = 0; i < p; ++i) z += w[j * p + i] * x[i];
    a[j] = std::tanh(z);
  }
  return a;
}

std::vector<double> mlp_logits(const ModelSpec& spec, const double* w,
                               std::span<const double> a) {
  const int p = spec.input_dim, h = spec.hidden_dim, c = spec.num_classes;
  const double* w2 = w + h * p + h;
  const double* b2 = w2 + c * h;
  std::vector<double> z(c);
  for (int k = 0; k < c; ++k) {
    double s = b2[k];
    for (int j = 0; j < h; ++j) s += w2[k * h + j] * a[j];
    z[k] = s;
  }
  return z;
}

}  // namespace

std::string to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::linear: return "linear";
    case ModelKind::logistic: return "logistic";
    case ModelKind::mlp1: return "mlp1";
  }
  return "unknown";
}

ModelKind model_kind_from_string(const std::string& name) {
  if (name == "linear") return ModelKind::linear;
  if (name == "logistic") return ModelKind::logistic;
  if (name == "mlp1") return ModelKind::mlp1;
  throw ConfigError("unknown model kind '" + name + "'");
}

int ModelSpec::param_dim() const {
  switch (kind) {
    case ModelKind::linear: return input_dim;
    case ModelKind::logistic:
      return num_classes == 2 ? input_dim : num_classes * input_dim;
    case ModelKind::mlp1:
      return hidden_dim * input_dim + hidden_dim + num_classes * hidden_dim +
             num_classes;
  }
  return 0;
}

void ModelSpec::validate() const {
  if (input_dim < 1) throw ConfigError("input_dim must be >= 1");
  if (kind == ModelKind::mlp1 && hidden_dim < 1)
    throw ConfigError("hidden_dim must be >= 1 for mlp1");
  if (is_classifier() && num_classes < 2)
    throw ConfigError("num_classes must be >= 2 for classifiers");
}

ModelSpec ModelSpec::linear(int input_dim) {
  return ModelSpec{ModelKind::linear, input_dim, 0, 1};
}

ModelSpec ModelSpec::logistic(int input_dim, int num_classes) {
  return ModelSpec{ModelKind::logistic, input_dim, 0, num_classes};
}

ModelSpec ModelSpec::mlp1(int input_dim, int hidden_dim, int num_classes) {
  return ModelSpec{ModelKind::mlp1, input_dim, hidden_dim, num_classes};
}

std::vector<double> forward(const ModelSpec& spec, const ParamVector& theta,
                            std::span<const double> x) {
  const int p = spec.input_dim;
  switch (spec.kind) {
    case ModelKind::linear:
      return {dot(theta.view(), x)};
    case ModelKind::logistic: {
      if (binary_logistic(spec)) return {dot(theta.view(), x)};
      std::vector<double> z(spec.num_classes);
      for (int k = 0; k < spec.num_classes; ++k)
        z[k] = dot(theta.view().subspan(k * p, p), x);
      return z;
    }
    case ModelKind::mlp1: {
      const auto a = mlp_hidden(spec, theta.data(), x);
      return mlp_logits(spec, theta.data(), a);
    }
  }
  return {};
}

double example_loss(const ModelSpec& spec, const ParamVector& theta,
                    std::span<const double> x, double y) {
  check_example(spec, theta, x, y);
  const auto z = forward(spec, theta, x);
  double l = 0.0;
  if (spec.kind == ModelKind::linear) {
    const double r = z[0] - y;
    l = 0.5 * r * r;
  } else if (binary_logistic(spec)) {
    // -log sigma(z) for y = 1, -log(1 - sigma(z)) for y = 0
    l = y > 0.5 ? softplus(-z[0]) : softplus(z[0]);
  } else {
    l = log_sum_exp(z) - z[static_cast<int>(y)];
  }
  return finite_or_throw(l, "loss");
}

double loss(const ModelSpec& spec, const ParamVector& theta, Batch batch) {
  require(!batch.empty(), "loss: batch must be non-empty");
  double s = 0.0;
  for (const auto& ex : batch) s += example_loss(spec, theta, ex.x, ex.y);
  return finite_or_throw(s / static_cast<double>(batch.size()), "loss");
}

GradVector example_grad_params(const ModelSpec& spec, const ParamVector& theta,
                               std::span<const double> x, double y) {
  check_example(spec, theta, x, y);
  const int p = spec.input_dim;
  GradVector g(theta.size());
  switch (spec.kind) {
    case ModelKind::linear: {
      const double r = dot(theta.view(), x) - y;
      for (int i = 0; i < p; ++i) g[i] = r * x[i];
      break;
    }
    case ModelKind::logistic: {
      if (binary_logistic(spec)) {
        const double r = sigmoid(dot(theta.view(), x)) - y;
        for (int i = 0; i < p; ++i) g[i] = r * x[i];
      } else {
        auto prob = softmax(forward(spec, theta, x));
        prob[static_cast<int>(y)] -= 1.0;
        for (int k = 0; k < spec.num_classes; ++k)
          for (int i = 0; i < p; ++i) g[k * p + i] = prob[k] * x[i];
      }
      break;
    }
    case ModelKind::mlp1: {
      const int h = spec.hidden_dim, c = spec.num_classes;
      const double* w = theta.data();
      const auto a = mlp_hidden(spec, w, x);
      auto dz2 = softmax(mlp_logits(spec, w, a));
      dz2[static_cast<int>(y)] -= 1.0;
      const double* w2 = w + h * p + h;
      double* gw1 = g.data();
      double* gb1 = gw1 + h * p;
      double* gw2 = gb1 + h;
      double* gb2 = gw2 + c * h;
      for (int k = 0; k < c; ++k) {
        gb2[k] = dz2[k];
        for (int j = 0; j < h; ++j) gw2[k * h + j] = dz2[k] * a[j];
      }
      for (int j = 0; j < h; ++j) {
        double da = 0.0;
        for (int k = 0; k < c; ++k) da += w2[k * h + j] * dz2[k];
        const double dz1 = da * (1.0 - a[j] * a[j]);
        gb1[j] = dz1;
        for (int i = 0; i < p; ++i) gw1[j * p + i] = dz1 * x[i];
      }
      break;
    }
  }
  for (double v : g)
    if (!std::isfinite(v)) throw NumericError("parameter gradient is not finite");
  return g;
}

GradVector grad_params(const ModelSpec& spec, const ParamVector& theta,
                       Batch batch) {
  require(!batch.empty(), "grad_params: batch must be non-empty");
  GradVector acc(theta.size());
  for (const auto& ex : batch) {
    const auto g = example_grad_params(spec, theta, ex.x, ex.y);
    for (std::size_t j = 0; j < acc.size(); ++j) acc[j] += g[j];
  }
  const double inv = 1.0 / static_cast<double>(batch.size());
  for (double& v : acc) v *= inv;
  return acc;
}

std::vector<double> grad_inputs(const ModelSpec& spec, const ParamVector& theta,
                                const LabeledExample& example) {
  check_example(spec, theta, example.x, example.y);
  const int p = spec.input_dim;
  const auto& x = example.x;
  std::vector<double> gx(p, 0.0);
  switch (spec.kind) {
    case ModelKind::linear: {
      const double r = dot(theta.view(), x) - example.y;
      for (int i = 0; i < p; ++i) gx[i] = r * theta[i];
      break;
    }
    case ModelKind::logistic: {
      if (binary_logistic(spec)) {
        const double r = sigmoid(dot(theta.view(), x)) - example.y;
        for (int i = 0; i < p; ++i) gx[i] = r * theta[i];
      } else {
        auto prob = softmax(forward(spec, theta, x));
        prob[static_cast<int>(example.y)] -= 1.0;
        for (int k = 0; k < spec.num_classes; ++k)
          for (int i = 0; i < p; ++i) gx[i] += prob[k] * theta[k * p + i];
      }
      break;
    }
    case ModelKind::mlp1: {
      const int h = spec.hidden_dim, c = spec.num_classes;
      const double* w = theta.data();
      const auto a = mlp_hidden(spec, w, x);
      auto dz2 = softmax(mlp_logits(spec, w, a));
      dz2[static_cast<int>(example.y)] -= 1.0;
      const double* w2 = w + h * p + h;
      for (int j = 0; j < h; ++j) {
        double da = 0.0;
        for (int k = 0; k < c; ++k) da += w2[k * h + j] * dz2[k];
        const double dz1 = da * (1.0 - a[j] * a[j]);
        for (int i = 0; i < p; ++i) gx[i] += w[j * p + i] * dz1;
      }
      break;
    }
  }
  for (double v : gx)
    if (!std::isfinite(v)) throw NumericError("input gradient is not finite");
  return gx;
}

double finite_diff_check(const ModelSpec& spec, const ParamVector& theta,
                         Batch batch, double step) {
  require(step > 0, "finite_diff_check: step must be > 0");
  const auto analytic = grad_params(spec, theta, batch);
  ParamVector probe = theta;
  double worst = 0.0;
  for (std::size_t j = 0; j < theta.size(); ++j) {
    probe[j] = theta[j] + step;
    const double up = loss(spec, probe, batch);
    probe[j] = theta[j] - step;
    const double down = loss(spec, probe, batch);
    probe[j] = theta[j];
    const double numeric = (up - down) / (2.0 * step);
    const double err =
        std::abs(analytic[j] - numeric) / (std::abs(analytic[j]) + step);
    worst = std::max(worst, err);
  }
  return worst;
}

int predict(const ModelSpec& spec, const ParamVector& theta,
            std::span<const double> x) {
  const auto z = forward(spec, theta, x);
  if (z.size() == 1) return z[0] > 0.0 ? 1 : 0;
  return static_cast<int>(std::max_element(z.begin(), z.end()) - z.begin());
}

}  // namespace pacfl
