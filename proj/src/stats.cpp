#include "tubeness/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace tubeness {

std::vector<double> fractional_ranks(const std::vector<double>& values) {
  std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) {
                     return values[a] < values[b];
                   });
  std::vector<double> ranks(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
    double avg = 0.5 * (static_cast<double>(i) + static_cast<double>(j)) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
    i = j + 1;
  }
  return ranks;
}

namespace {

double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  std::size_t n = a.size();
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= n;
  mb /= n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double da = a[i] - ma, db = b[i] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  if (saa == 0.0 || sbb == 0.0)
    throw std::runtime_error("spearman: zero rank variance");
  return sab / std::sqrt(saa * sbb);
}

// Regularized incomplete beta by Lentz continued fraction.
double betacf(double a, double b, double x) {
  const int max_iter = 300;
  const double eps = 1e-15, fpmin = 1e-300;
  double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0, d = 1.0 - qab * x / qap;
  if (std::abs(d) < fpmin) d = fpmin;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= max_iter; ++m) {
    int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < fpmin) d = fpmin;
    c = 1.0 + aa / c;
    if (std::abs(c) < fpmin) c = fpmin;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < fpmin) d = fpmin;
    c = 1.0 + aa / c;
    if (std::abs(c) < fpmin) c = fpmin;
    d = 1.0 / d;
    double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < eps) break;
  }
  return h;
}

double ibeta(double a, double b, double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  double ln_bt = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                 a * std::log(x) + b * std::log(1.0 - x);
  double bt = std::exp(ln_bt);
  if (x < (a + 1.0) / (a + b + 2.0)) return bt * betacf(a, b, x) / a;
  return 1.0 - bt * betacf(b, a, 1.0 - x) / b;
}

}  // namespace

CorrelationResult spearman(const std::vector<double>& x,
                           const std::vector<double>& y) {
  if (x.size() != y.size())
    throw std::runtime_error("spearman: length mismatch");
  if (x.size() < 3) throw std::runtime_error("spearman: need n >= 3");

  std::vector<double> rx = fractional_ranks(x);
  std::vector<double> ry = fractional_ranks(y);
  double rho = pearson(rx, ry);

  CorrelationResult result;
  result.rho = rho;
  result.n = static_cast<int>(x.size());

  double nu = static_cast<double>(result.n - 2);
  double denom = 1.0 - rho * rho;
  double p;
  if (denom <= 0.0) {
    p = 0.0;  // |rho| = 1, t -> infinity
  } else {
    double t2 = rho * rho * nu / denom;
    p = ibeta(0.5 * nu, 0.5, nu / (nu + t2));
  }
  result.p_value = std::max(p, 1e-300);
  return result;
}

double spearman_permutation_pvalue(const std::vector<double>& x,
                                   const std::vector<double>& y) {
  if (x.size() != y.size())
    throw std::runtime_error("spearman: length mismatch");
  std::size_t n = x.size();
  if (n < 3 || n > 10)
    throw std::runtime_error("permutation p-value limited to 3 <= n <= 10");

  std::vector<double> rx = fractional_ranks(x);
  std::vector<double> ry = fractional_ranks(y);
  double observed = std::abs(pearson(rx, ry));

  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  long hits = 0, total = 0;
  std::vector<double> perm(n);
  do {
    for (std::size_t i = 0; i < n; ++i) perm[i] = ry[idx[i]];
    double r = std::abs(pearson(rx, perm));
    if (r >= observed - 1e-12) ++hits;
    ++total;
  } while (std::next_permutation(idx.begin(), idx.end()));
  return static_cast<double>(hits) / static_cast<double>(total);
}

}  // namespace tubeness
