#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace tubeness {

// Ordinal rating scale defined by inclusive upper count bounds per class;
// the last class is open-ended. Classes partition the nonnegative integers.
struct RatingScale {
  std::string name;
  std::vector<long> upper;  // size m-1; class j holds counts in
                            // (upper[j-1], upper[j]], class m-1 is > upper[m-2]

  int classes() const { return static_cast<int>(upper.size()) + 1; }
  int class_of(long count) const;

  // 0 | 1-10 | 11-20 | 21-40 | >40
  static RatingScale wardlaw();
  // 0 | 1-5 | 6-10 | 11-15 | >15
  static RatingScale patankar();
  static RatingScale by_name(const std::string& name);
};

// Proportional-odds model: P(y=j|x) = L(mu_j - beta*x) - L(mu_{j-1} - beta*x)
// with L the logistic CDF, mu_{-1} = -inf, mu_{m-1} = +inf.
struct OrderedLogitModel {
  double beta = 1.0;
  std::vector<double> mu;  // m-1 strictly increasing thresholds
  int m = 0;
  std::string scale_name;

  std::vector<double> class_probabilities(double x) const;
  void validate() const;
};

// Text round-trip with 17-significant-digit floats.
void save_model(const OrderedLogitModel& model, const std::string& path);
OrderedLogitModel load_model(const std::string& path);

struct SyntheticRating {
  long pc;   // noise-free count
  long npc;  // noisy count (regressor)
  int rc;    // assigned class
};

struct SyntheticRatingDataset {
  std::vector<SyntheticRating> rows;
  std::uint64_t seed = 0;
  double lognormal_mu = 0.0;
  double lognormal_sigma = 0.0;
  std::string scale_name;
  int m = 0;
};

// Defaults for the synthetic count distribution: median ~7.4 with ~2% zero
// counts and ~9.5% mass above 40. Without zero-count mass the lowest
// threshold is not identifiable, and without tail mass past 40 the highest
// one is poorly determined.
inline constexpr double kDefaultLognormalMu = 2.0;
inline constexpr double kDefaultLognormalSigma = 1.3;

// Three-step generation: PC ~ round(LogNormal(mu, sigma)); NPC ~
// round(Normal(PC, 1)) clamped at 0; class assigned from PC (or from NPC
// when bin_on_npc is set). Deterministic per seed: the PRNG is mt19937_64
// with Box-Muller normals, two draws per row.
SyntheticRatingDataset generate_synthetic(const RatingScale& scale, int n,
                                          std::uint64_t seed,
                                          double lognormal_mu = kDefaultLognormalMu,
                                          double lognormal_sigma = kDefaultLognormalSigma,
                                          bool bin_on_npc = false);

void save_dataset_csv(const SyntheticRatingDataset& ds, const std::string& path);

struct FitReport {
  OrderedLogitModel model;
  bool converged = false;
  bool separated = false;  // deviance ~ 0: slope unbounded, fit flagged
  int iterations = 0;
  double loglik = 0.0;
  std::vector<std::int64_t> class_counts;
  std::vector<int> empty_classes;
};

// Maximum-likelihood fit of (beta, mu) on (regressor, class) pairs via BFGS
// on (log beta, mu_0, log increments); stops when the log-likelihood
// improves by less than 1e-8 or after 500 iterations. Throws if fewer than
// two classes are observed.
FitReport fit_ordered_logit(const std::vector<double>& x,
                            const std::vector<int>& y, int m);
FitReport fit_ordered_logit(const SyntheticRatingDataset& ds);

// Sum over observations of log P(y = rating | count), probabilities floored
// at 1e-300.
double log_likelihood(const OrderedLogitModel& model,
                      const std::vector<std::pair<double, int>>& observations);

// Sum of the selected class probabilities themselves (no logs); reported as
// a diagnostic alongside the log-likelihood.
double probability_sum(const OrderedLogitModel& model,
                       const std::vector<std::pair<double, int>>& observations);

}  // namespace tubeness
