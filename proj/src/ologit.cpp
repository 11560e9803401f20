#include "tubeness/ologit.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>
#include <stdexcept>

namespace tubeness {

int RatingScale::class_of(long count) const {
  if (count < 0) throw std::runtime_error("rating scale: negative count");
  for (std::size_t j = 0; j < upper.size(); ++j)
    if (count <= upper[j]) return static_cast<int>(j);
  return static_cast<int>(upper.size());
}

RatingScale RatingScale::wardlaw() { return {"wardlaw", {0, 10, 20, 40}}; }
RatingScale RatingScale::patankar() { return {"patankar", {0, 5, 10, 15}}; }

RatingScale RatingScale::by_name(const std::string& name) {
  if (name == "wardlaw") return wardlaw();
  if (name == "patankar") return patankar();
  throw std::runtime_error("unknown rating scale: " + name);
}

namespace {

inline double logistic_cdf(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  double e = std::exp(z);
  return e / (1.0 + e);
}

// logistic pdf = L(z)(1 - L(z)), computed stably
inline double logistic_pdf(double z) {
  double az = std::abs(z);
  double e = std::exp(-az);
  double d = 1.0 + e;
  return e / (d * d);
}

// L(zu) - L(zl) for zl <= zu without the 1 - 1 cancellation when both
// arguments sit far in the upper tail.
inline double logistic_interval(double zl, double zu) {
  if (zl > 0.0 && zu > 0.0) {
    auto upper_tail = [](double z) {
      if (std::isinf(z)) return 0.0;
      double e = std::exp(-z);
      return e / (1.0 + e);
    };
    return upper_tail(zl) - upper_tail(zu);
  }
  double pl = std::isinf(zl) ? 0.0 : logistic_cdf(zl);
  double pu = std::isinf(zu) ? 1.0 : logistic_cdf(zu);
  return pu - pl;
}

}  // namespace

void OrderedLogitModel::validate() const {
  if (m < 2) throw std::runtime_error("ordered logit: need at least 2 classes");
  if (static_cast<int>(mu.size()) != m - 1)
    throw std::runtime_error("ordered logit: mu size must be m-1");
  if (!(beta > 0.0)) throw std::runtime_error("ordered logit: beta must be > 0");
  for (std::size_t j = 1; j < mu.size(); ++j)
    if (!(mu[j] > mu[j - 1]))
      throw std::runtime_error("ordered logit: mu must be strictly increasing");
}

std::vector<double> OrderedLogitModel::class_probabilities(double x) const {
  std::vector<double> p(m);
  double prev = 0.0;  // L(-inf)
  for (int j = 0; j < m - 1; ++j) {
    double cur = logistic_cdf(mu[j] - beta * x);
    p[j] = cur - prev;
    prev = cur;
  }
  p[m - 1] = 1.0 - prev;
  return p;
}

// -------------------------------------------------------------- model file

namespace {

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

void save_model(const OrderedLogitModel& model, const std::string& path) {
  model.validate();
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write model file: " + path);
  out << "m " << model.m << '\n';
  out << "beta " << fmt17(model.beta) << '\n';
  out << "mu";
  for (double v : model.mu) out << ' ' << fmt17(v);
  out << '\n';
  out << "scale " << model.scale_name << '\n';
  if (!out) throw std::runtime_error("I/O error writing " + path);
}

OrderedLogitModel load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open model file: " + path);
  OrderedLogitModel model;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    if (key == "m") {
      ls >> model.m;
    } else if (key == "beta") {
      ls >> model.beta;
    } else if (key == "mu") {
      double v;
      while (ls >> v) model.mu.push_back(v);
    } else if (key == "scale") {
      ls >> model.scale_name;
    } else {
      throw std::runtime_error("unknown key '" + key + "' in " + path);
    }
  }
  model.validate();
  return model;
}

// -------------------------------------------------------------- generation

namespace {

// Deterministic normal stream: mt19937_64 uniforms through Box-Muller,
// pairs cached so each draw consumes a predictable amount of state.
class NormalStream {
 public:
  explicit NormalStream(std::uint64_t seed) : rng_(seed) {}

  double next() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = uniform01();
    double u2 = uniform01();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

 private:
  double uniform01() {
    // (0, 1]: guards the log() above
    return (static_cast<double>(rng_() >> 11) + 1.0) * 0x1p-53;
  }
  std::mt19937_64 rng_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace

SyntheticRatingDataset generate_synthetic(const RatingScale& scale, int n,
                                          std::uint64_t seed,
                                          double lognormal_mu,
                                          double lognormal_sigma,
                                          bool bin_on_npc) {
  if (n < 1) throw std::runtime_error("generate_synthetic: n must be >= 1");
  if (!(lognormal_sigma > 0.0))
    throw std::runtime_error("generate_synthetic: sigma must be > 0");

  SyntheticRatingDataset ds;
  ds.rows.reserve(n);
  ds.seed = seed;
  ds.lognormal_mu = lognormal_mu;
  ds.lognormal_sigma = lognormal_sigma;
  ds.scale_name = scale.name;
  ds.m = scale.classes();

  NormalStream normals(seed);
  for (int i = 0; i < n; ++i) {
    double draw = std::exp(lognormal_mu + lognormal_sigma * normals.next());
    long pc = std::lround(draw);
    if (pc < 0) pc = 0;
    long npc = std::lround(static_cast<double>(pc) + normals.next());
    if (npc < 0) npc = 0;
    int rc = scale.class_of(bin_on_npc ? npc : pc);
    ds.rows.push_back({pc, npc, rc});
  }
  return ds;
}

void save_dataset_csv(const SyntheticRatingDataset& ds,
                      const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write dataset: " + path);
  out << "pc,npc,rc\n";
  for (const SyntheticRating& r : ds.rows)
    out << r.pc << ',' << r.npc << ',' << r.rc << '\n';
  if (!out) throw std::runtime_error("I/O error writing " + path);
}

// --------------------------------------------------------------------- fit

namespace {

// Parameters are theta = (log beta, mu_0, log d_1 ... log d_{m-2}) with
// mu_j = mu_0 + sum d_k, which keeps beta positive and mu increasing.
struct Objective {
  const std::vector<double>& x;
  const std::vector<int>& y;
  int m;

  void unpack(const std::vector<double>& theta, double& beta,
              std::vector<double>& mu) const {
    beta = std::exp(theta[0]);
    mu.resize(m - 1);
    mu[0] = theta[1];
    for (int j = 1; j < m - 1; ++j) mu[j] = mu[j - 1] + std::exp(theta[j + 1]);
  }

  // Negative log-likelihood; gradient optional.
  double eval(const std::vector<double>& theta,
              std::vector<double>* grad) const {
    double beta;
    std::vector<double> mu;
    unpack(theta, beta, mu);

    double nll = 0.0;
    std::vector<double> dmu(m - 1, 0.0);  // d nll / d mu_j
    double dbeta = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      int j = y[i];
      double zu = j < m - 1 ? mu[j] - beta * x[i]
                            : std::numeric_limits<double>::infinity();
      double zl = j > 0 ? mu[j - 1] - beta * x[i]
                        : -std::numeric_limits<double>::infinity();
      double p = logistic_interval(zl, zu);
      if (!(p > 0.0) || !std::isfinite(p))
        return std::numeric_limits<double>::infinity();
      nll -= std::log(p);
      if (grad) {
        double fu = j < m - 1 ? logistic_pdf(zu) : 0.0;
        double fl = j > 0 ? logistic_pdf(zl) : 0.0;
        double inv_p = 1.0 / p;
        if (j < m - 1) dmu[j] -= fu * inv_p;
        if (j > 0) dmu[j - 1] += fl * inv_p;
        dbeta += (fu - fl) * x[i] * inv_p;
      }
    }
    if (grad) {
      grad->assign(theta.size(), 0.0);
      (*grad)[0] = dbeta * beta;  // chain through beta = exp(theta0)
      // mu_j = theta[1] + sum_{k<=j} exp(theta[k+1]), so the gradient wrt a
      // threshold parameter gathers every dmu at or above it.
      double suffix = 0.0;
      for (int j = m - 2; j >= 1; --j) {
        suffix += dmu[j];
        (*grad)[j + 1] = suffix * std::exp(theta[j + 1]);
      }
      (*grad)[1] = suffix + dmu[0];
    }
    return nll;
  }
};

}  // namespace

FitReport fit_ordered_logit(const std::vector<double>& x,
                            const std::vector<int>& y, int m) {
  if (x.size() != y.size() || x.empty())
    throw std::runtime_error("fit: empty or mismatched data");
  if (m < 2) throw std::runtime_error("fit: need at least 2 classes");

  std::vector<std::int64_t> class_counts(m, 0);
  for (int yi : y) {
    if (yi < 0 || yi >= m) throw std::runtime_error("fit: class out of range");
    ++class_counts[yi];
  }
  int observed = 0;
  for (std::int64_t c : class_counts) observed += c > 0;
  if (observed < 2)
    throw std::runtime_error("fit: non-identifiable (all observations in one class)");

  Objective obj{x, y, m};

  // Start at unit slope with thresholds on the empirical class boundaries:
  // the x value splitting the cumulative class mass. Keeps every observed
  // (x, y) pair at a non-vanishing starting probability.
  std::vector<double> sorted_x = x;
  std::sort(sorted_x.begin(), sorted_x.end());
  std::size_t n_obs = x.size();
  std::vector<double> boundary(m - 1);
  std::int64_t cum = 0;
  for (int j = 0; j < m - 1; ++j) {
    cum += class_counts[j];
    double b;
    if (cum == 0)
      b = sorted_x.front() - 1.0;
    else if (cum == static_cast<std::int64_t>(n_obs))
      b = sorted_x.back() + 1.0;
    else
      b = 0.5 * (sorted_x[cum - 1] + sorted_x[cum]);
    if (j > 0) b = std::max(b, boundary[j - 1] + 0.5);
    boundary[j] = b;
  }
  std::vector<double> theta(static_cast<std::size_t>(m), 0.0);
  theta[0] = 0.0;  // log beta = 0
  theta[1] = boundary[0];
  for (int j = 1; j < m - 1; ++j)
    theta[j + 1] = std::log(boundary[j] - boundary[j - 1]);

  std::size_t dim = theta.size();
  std::vector<double> grad(dim), grad_new(dim);
  double f = obj.eval(theta, &grad);
  if (!std::isfinite(f)) throw std::runtime_error("fit: bad starting point");

  // Inverse-Hessian approximation, identity start.
  std::vector<double> hinv(dim * dim, 0.0);
  for (std::size_t i = 0; i < dim; ++i) hinv[i * dim + i] = 1.0;

  FitReport report;
  const int max_iter = 500;
  const double f_tol = 1e-8;
  int iter = 0;
  for (; iter < max_iter; ++iter) {
    // direction = -hinv * grad
    std::vector<double> dir(dim, 0.0);
    for (std::size_t r = 0; r < dim; ++r) {
      double s = 0.0;
      for (std::size_t c = 0; c < dim; ++c) s += hinv[r * dim + c] * grad[c];
      dir[r] = -s;
    }
    double g_dot_d = 0.0;
    for (std::size_t i = 0; i < dim; ++i) g_dot_d += grad[i] * dir[i];
    if (g_dot_d >= 0.0) {
      // not a descent direction; reset to steepest descent
      for (std::size_t i = 0; i < dim; ++i) dir[i] = -grad[i];
      g_dot_d = 0.0;
      for (std::size_t i = 0; i < dim; ++i) g_dot_d += grad[i] * dir[i];
      std::fill(hinv.begin(), hinv.end(), 0.0);
      for (std::size_t i = 0; i < dim; ++i) hinv[i * dim + i] = 1.0;
    }

    // Armijo backtracking
    double step = 1.0;
    std::vector<double> theta_new(dim);
    double f_new = std::numeric_limits<double>::infinity();
    for (int ls = 0; ls < 60; ++ls) {
      for (std::size_t i = 0; i < dim; ++i)
        theta_new[i] = theta[i] + step * dir[i];
      f_new = obj.eval(theta_new, nullptr);
      if (std::isfinite(f_new) && f_new <= f + 1e-4 * step * g_dot_d) break;
      step *= 0.5;
    }
    if (!std::isfinite(f_new) || f_new > f) break;  // no progress possible

    obj.eval(theta_new, &grad_new);

    // BFGS update of hinv
    std::vector<double> s(dim), yv(dim);
    double sy = 0.0;
    for (std::size_t i = 0; i < dim; ++i) {
      s[i] = theta_new[i] - theta[i];
      yv[i] = grad_new[i] - grad[i];
      sy += s[i] * yv[i];
    }
    if (sy > 1e-12) {
      double rho = 1.0 / sy;
      // hinv = (I - rho s y^T) hinv (I - rho y s^T) + rho s s^T
      std::vector<double> hy(dim, 0.0);
      for (std::size_t r = 0; r < dim; ++r)
        for (std::size_t c = 0; c < dim; ++c)
          hy[r] += hinv[r * dim + c] * yv[c];
      double yhy = 0.0;
      for (std::size_t i = 0; i < dim; ++i) yhy += yv[i] * hy[i];
      for (std::size_t r = 0; r < dim; ++r)
        for (std::size_t c = 0; c < dim; ++c) {
          hinv[r * dim + c] += -rho * (s[r] * hy[c] + hy[r] * s[c]) +
                               rho * (1.0 + rho * yhy) * s[r] * s[c];
        }
    }

    double improvement = f - f_new;
    theta = theta_new;
    grad = grad_new;
    f = f_new;
    if (improvement < f_tol) {
      report.converged = true;
      ++iter;
      break;
    }
  }

  report.iterations = iter;
  report.loglik = -f;
  report.class_counts = class_counts;
  for (int j = 0; j < m; ++j)
    if (class_counts[j] == 0) report.empty_classes.push_back(j);
  // Near-zero deviance means the classes are (almost) perfectly separated
  // and the slope ran away rather than settling at an interior optimum.
  report.separated = report.loglik > -1e-6 * static_cast<double>(n_obs);

  OrderedLogitModel model;
  model.m = m;
  obj.unpack(theta, model.beta, model.mu);
  report.model = std::move(model);
  return report;
}

FitReport fit_ordered_logit(const SyntheticRatingDataset& ds) {
  std::vector<double> x;
  std::vector<int> y;
  x.reserve(ds.rows.size());
  y.reserve(ds.rows.size());
  for (const SyntheticRating& r : ds.rows) {
    x.push_back(static_cast<double>(r.npc));
    y.push_back(r.rc);
  }
  FitReport report = fit_ordered_logit(x, y, ds.m);
  report.model.scale_name = ds.scale_name;
  return report;
}

// -------------------------------------------------------------- likelihood

double log_likelihood(const OrderedLogitModel& model,
                      const std::vector<std::pair<double, int>>& observations) {
  model.validate();
  double total = 0.0;
  for (const auto& [count, rating] : observations) {
    if (rating < 0 || rating >= model.m)
      throw std::runtime_error("log_likelihood: rating out of range");
    double p = model.class_probabilities(count)[rating];
    total += std::log(std::max(p, 1e-300));
  }
  return total;
}

double probability_sum(const OrderedLogitModel& model,
                       const std::vector<std::pair<double, int>>& observations) {
  model.validate();
  double total = 0.0;
  for (const auto& [count, rating] : observations) {
    if (rating < 0 || rating >= model.m)
      throw std::runtime_error("probability_sum: rating out of range");
    total += model.class_probabilities(count)[rating];
  }
  return total;
}

}  // namespace tubeness
