#pragma once

#include <span>
#include <string>
#include <vector>

#include "pacfl/vector.hpp"

namespace pacfl {

enum class ModelKind { linear, logistic, mlp1 };

std::string to_string(ModelKind kind);
ModelKind model_kind_from_string(const std::string& name);

// Architecture of one of the three supported models.
//
// Parameter layout (row-major, layer by layer):
//   linear   : w[p]                                      d = p
//   logistic : C == 2 -> w[p] (sigmoid on w.x)           d = p
//              C  > 2 -> W[C][p] (softmax on W x)        d = C*p
//   mlp1     : W1[h][p], b1[h], W2[C][h], b2[C]          d = h*p + h + C*h + C
//              hidden activation tanh, softmax output.
//
// Losses use mean reduction: squared error 0.5*(w.x - y)^2 for linear,
// cross-entropy for logistic and mlp1.
struct ModelSpec {
  ModelKind kind = ModelKind::linear;
  int input_dim = 1;
  int hidden_dim = 0;
  int num_classes = 2;

  int param_dim() const;
  bool is_classifier() const { return kind != ModelKind::linear; }
  void validate() const;

  static ModelSpec linear(int input_dim);
  static ModelSpec logistic(int input_dim, int num_classes = 2);
  static ModelSpec mlp1(int input_dim, int hidden_dim, int num_classes);

  friend bool operator==(const ModelSpec&, const ModelSpec&) = default;
};

// One training example. For classifiers `y` holds the class index.
struct LabeledExample {
  std::vector<double> x;
  double y = 0.0;

  friend bool operator==(const LabeledExample&, const LabeledExample&) = default;
};

using Batch = std::span<const LabeledExample>;

double example_loss(const ModelSpec& spec, const ParamVector& theta,
                    std::span<const double> x, double y);

// Mean per-example loss over a non-empty batch.
double loss(const ModelSpec& spec, const ParamVector& theta, Batch batch);

// Gradient with respect to the parameters of the loss at a single example.
GradVector example_grad_params(const ModelSpec& spec, const ParamVector& theta,
                               std::span<const double> x, double y);

// Gradient of the mean batch loss with respect to the parameters. Examples
// are accumulated in batch order.
GradVector grad_params(const ModelSpec& spec, const ParamVector& theta,
                       Batch batch);

// Gradient of the single-example loss with respect to its features.
std::vector<double> grad_inputs(const ModelSpec& spec, const ParamVector& theta,
                                const LabeledExample& example);

// Max over coordinates of |analytic - central difference| / (|analytic| + step).
double finite_diff_check(const ModelSpec& spec, const ParamVector& theta,
                         Batch batch, double step);

// Predicted class of a classifier; for the linear kind returns 1 when the
// regression output is positive, else 0.
int predict(const ModelSpec& spec, const ParamVector& theta,
            std::span<const double> x);

// Raw outputs: one value for linear and binary logistic, C logits otherwise.
std::vector<double> forward(const ModelSpec& spec, const ParamVector& theta,
                            std::span<const double> x);

}  // namespace pacfl
