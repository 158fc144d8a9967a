#pragma once

#include <span>
#include <vector>

namespace pacfl {

double median(std::vector<double> values);
double mean(std::span<const double> values);

// Ranks starting at 1; ties receive the average of the ranks they span.
std::vector<double> average_ranks(std::span<const double> values);

struct Correlation {
  double rho = 0.0;
  double p_value = 1.0;  // two-sided, t approximation with n - 2 dof
  int n = 0;
};

Correlation spearman(std::span<const double> x, std::span<const double> y);

}  // namespace pacfl
