#pragma once

#include <vector>

namespace tubeness {

struct CorrelationResult {
  double rho = 0.0;
  double p_value = 1.0;
  int n = 0;
};

// Average ranks with fractional ties.
std::vector<double> fractional_ranks(const std::vector<double>& values);

// Spearman's rho with average-rank tie handling; two-sided p-value from the
// t approximation with n-2 degrees of freedom. Requires n >= 3 and
// non-constant inputs on both sides.
CorrelationResult spearman(const std::vector<double>& x,
                           const std::vector<double>& y);

// Exact two-sided permutation p-value for |rho| (all n! index permutations
// of y); limited to n <= 10.
double spearman_permutation_pvalue(const std::vector<double>& x,
                                   const std::vector<double>& y);

}  // namespace tubeness
