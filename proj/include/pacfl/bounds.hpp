#pragma once

#include <span>
#include <string>
#include <vector>

#include "pacfl/datagen.hpp"

namespace pacfl {

struct PrivacyBound {
  double rhs = 0.0;
  // delta_up >= 2 c2 c_b / (c_a sqrt(T)); the bound claims nothing otherwise.
  bool precondition_ok = false;
  double threshold = 0.0;
};

// 1 + sqrt(ln(2/gamma) / (2m)) - (c_a / (2D)) * delta_up, gamma in (0, 2].
PrivacyBound privacy_upper_bound(double gamma, double m, double c_a, double D,
                                 double delta_up, double c2, double c_b, int T);

// M * sqrt((2 N ln 2 + 2 ln(1/eta)) / m) with N = (2d)^(2D/lambda^2 + 1),
// evaluated in the log domain.
double generalization_term(double M, int d, double D, double lambda, double eta, double m);

// C lambda + C delta_two + generalization_term; requires lambda > delta_two.
double utility_upper_bound(double C, double lambda, double delta_two, double M, int d,
                           double D, double eta, double m);

// Zero two-way distortion form: C lambda + generalization_term.
double utility_upper_bound_he(double C, double lambda, double M, int d, double D,
                              double eta, double m);

struct LambdaChoice {
  double lambda = 0.0;
  double rhs = 0.0;
};

// Golden-section search for the lambda in (delta_two, lambda_hi] minimising
// utility_upper_bound. lambda_hi <= 0 picks max(4D, delta_two + 1).
LambdaChoice minimize_utility_lambda(double C, double delta_two, double M, int d, double D,
                                     double eta, double m, double lambda_hi = 0.0);

struct BoundInputs {
  ConstantsEstimate constants;
  std::vector<double> gamma;  // per client
  double eta = 0.1;
  double lambda = 1.0;
  double rho = 1.0;
  double L = 1.0;
  std::vector<double> eps_p;  // per client
  std::vector<double> eps_u;  // per client
  std::vector<double> eps_e;  // per client
  std::vector<double> delta_up;  // per client
  double delta_two = 0.0;
  int K = 1;
  int d = 1;
  int T = 1;
  // Client whose eps_e enters the generalization term.
  int client = 0;

  void validate() const;
};

// C L (1/K) sum_k [(2D/c_a)(1 - eps_p^k) + (2D/c_a) sqrt(ln(1/gamma^k) / eps_e^k)]
//   + M sqrt((2N ln 2 + 2 ln(1/eta)) / eps_e^client)
double tradeoff_general(const BoundInputs& in);

// As tradeoff_general with (2 + rho) C in place of C L.
double tradeoff_randomization(const BoundInputs& in);

// factor * ln(1/eta) / (alpha - c2 (1 - eps_p))^2.
double private_pac_sample_size(double alpha, double eps_p, double c2, double eta,
                               double constant_factor = 1.0);

// 1 - eta - sum gamma; non-positive means the joint statement is vacuous.
double probability_budget(double eta, std::span<const double> gamma);

}  // namespace pacfl
