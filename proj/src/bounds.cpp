#include "pacfl/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "pacfl/errors.hpp"

namespace pacfl {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// log(exp(a) + exp(b)) with -inf handled.
double log_add_exp(double a, double b) {
  if (a == -kInf) return b;
  if (b == -kInf) return a;
  const double hi = std::max(a, b), lo = std::min(a, b);
  return hi + std::log1p(std::exp(lo - hi));
}

void check_eta(double eta) {
  require(eta > 0 && eta <= 1, "confidence eta must lie in (0, 1]");
}

double tradeoff_core(double coefficient, const BoundInputs& in) {
  in.validate();
  const auto& c = in.constants;
  double sum = 0.0;
  for (int k = 0; k < in.K; ++k) {
    const double a = (2 * c.D / c.c_a) * (1 - in.eps_p[k]);
    const double b = (2 * c.D / c.c_a) * std::sqrt(std::log(1 / in.gamma[k]) / in.eps_e[k]);
    sum += a + b;
  }
  return coefficient * (sum / in.K) +
         generalization_term(c.M, in.d, c.D, in.lambda, in.eta, in.eps_e[in.client]);
}

}  // namespace

PrivacyBound privacy_upper_bound(double gamma, double m, double c_a, double D,
                                 double delta_up, double c2, double c_b, int T) {
  require(m > 0, "privacy bound requires m > 0");
  require(D > 0, "privacy bound requires D > 0");
  require(gamma > 0 && gamma <= 2, "privacy bound requires gamma in (0, 2]");
  require(c_a > 0, "privacy bound requires c_a > 0");
  require(delta_up >= 0, "privacy bound requires delta_up >= 0");
  require(T >= 1, "privacy bound requires T >= 1");
  PrivacyBound out;
  out.rhs = 1 + std::sqrt(std::log(2 / gamma) / (2 * m)) - (c_a / (2 * D)) * delta_up;
  out.threshold = 2 * c2 * c_b / (c_a * std::sqrt(static_cast<double>(T)));
  out.precondition_ok = delta_up >= out.threshold;
  return out;
}

double generalization_term(double M, int d, double D, double lambda, double eta, double m) {
  check_eta(eta);
  require(m > 0, "utility bound requires m > 0");
  require(M >= 0, "utility bound requires M >= 0");
  const double log_n = log_covering_number(d, D, lambda);
  // ln(2 N ln 2 + 2 ln(1/eta))
  const double log_eta_part = eta < 1 ? std::log(2 * std::log(1 / eta)) : -kInf;
  const double log_inner = log_add_exp(log_n + std::log(2 * std::log(2.0)), log_eta_part);
  return M * std::exp(0.5 * (log_inner - std::log(m)));
}

double utility_upper_bound(double C, double lambda, double delta_two, double M, int d,
                           double D, double eta, double m) {
  require(lambda > delta_two, "utility bound requires lambda > delta_two");
  require(delta_two >= 0, "utility bound requires delta_two >= 0");
  return C * lambda + C * delta_two + generalization_term(M, d, D, lambda, eta, m);
}

double utility_upper_bound_he(double C, double lambda, double M, int d, double D,
                              double eta, double m) {
  require(lambda > 0, "utility bound requires lambda > 0");
  return C * lambda + generalization_term(M, d, D, lambda, eta, m);
}

LambdaChoice minimize_utility_lambda(double C, double delta_two, double M, int d, double D,
                                     double eta, double m, double lambda_hi) {
  require(delta_two >= 0, "lambda search requires delta_two >= 0");
  if (lambda_hi <= 0) lambda_hi = std::max(4 * D, delta_two + 1);
  double lo = delta_two + std::max(1e-12, 1e-9 * delta_two);
  require(lambda_hi > lo, "lambda search requires lambda_hi > delta_two");
  auto f = [&](double lam) { return utility_upper_bound(C, lam, delta_two, M, d, D, eta, m); };

  const double inv_phi = (std::sqrt(5.0) - 1) / 2;
  double a = lo, b = lambda_hi;
  double x1 = b - inv_phi * (b - a), x2 = a + inv_phi * (b - a);
  double f1 = f(x1), f2 = f(x2);
  for (int it = 0; it < 200 && (b - a) > 1e-12 * std::max(1.0, b); ++it) {
    if (f1 <= f2 && std::isfinite(f1)) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - inv_phi * (b - a);
      f1 = f(x1);
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + inv_phi * (b - a);
      f2 = f(x2);
    }
  }
  LambdaChoice best{x1, f1};
  if (f2 < best.rhs) best = {x2, f2};
  // The interval ends are candidates too when the rhs is monotone.
  const double fhi = f(lambda_hi);
  if (fhi < best.rhs) best = {lambda_hi, fhi};
  return best;
}

void BoundInputs::validate() const {
  require(K >= 1, "bound inputs require K >= 1");
  require(static_cast<int>(gamma.size()) == K && static_cast<int>(eps_p.size()) == K &&
              static_cast<int>(eps_e.size()) == K,
          "bound inputs need one gamma, eps_p and eps_e per client");
  require(client >= 0 && client < K, "bound inputs: client index out of range");
  require(d >= 1, "bound inputs require d >= 1");
  require(lambda > 0, "bound inputs require lambda > 0");
  require(constants.c_a > 0, "bound inputs require c_a > 0");
  require(constants.D >= 0, "bound inputs require D >= 0");
  check_eta(eta);
  for (int k = 0; k < K; ++k) {
    require(gamma[k] > 0 && gamma[k] <= 1, "bound inputs require gamma in (0, 1]");
    require(eps_e[k] >= 1, "bound inputs require eps_e >= 1");
  }
}

double tradeoff_general(const BoundInputs& in) {
  require(in.L > 0, "general trade-off requires L > 0");
  return tradeoff_core(in.constants.C * in.L, in);
}

double tradeoff_randomization(const BoundInputs& in) {
  require(in.rho > 0, "randomization trade-off requires rho > 0");
  return tradeoff_core((2 + in.rho) * in.constants.C, in);
}

double private_pac_sample_size(double alpha, double eps_p, double c2, double eta,
                               double constant_factor) {
  check_eta(eta);
  const double gap = alpha - c2 * (1 - eps_p);
  require(gap > 0, "private PAC sample size requires alpha > c2 (1 - eps_p)");
  return constant_factor * std::log(1 / eta) / (gap * gap);
}

double probability_budget(double eta, std::span<const double> gamma) {
  double s = 1 - eta;
  for (double g : gamma) s -= g;
  return s;
}

}  // namespace pacfl
