#pragma once

// Gaussian-process regression with SE / Matern kernels, the UCB acquisition
// mean + beta * sd with its analytic gradient, multi-start projected gradient
// ascent over a box, and a GP-UCB loop with regret bookkeeping.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "tbon/core.hpp"
#include "tbon/objective_models.hpp"

namespace tbon {

/// Cholesky factorization failed even at the largest jitter.
class IllConditioned : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// sqrt(var) is not differentiable where the posterior variance vanishes.
class SingularVariance : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

struct KernelSpec {
  enum class Kind { squared_exponential, matern };
  Kind kind = Kind::squared_exponential;
  double lengthscale = 1.0;
  double nu = 2.5;  // matern only: 1.5 or 2.5

  static KernelSpec se(double lengthscale) {
    KernelSpec k{Kind::squared_exponential, lengthscale, 0.0};
    k.validate();
    return k;
  }
  static KernelSpec matern(double nu, double lengthscale) {
    KernelSpec k{Kind::matern, lengthscale, nu};
    k.validate();
    return k;
  }

  void validate() const {
    require(std::isfinite(lengthscale) && lengthscale > 0.0,
            "KernelSpec: lengthscale must be positive");
    if (kind == Kind::matern)
      require(nu == 1.5 || nu == 2.5, "KernelSpec: matern nu must be 1.5 or 2.5");
  }
};

inline std::string to_string(const KernelSpec& k) {
  if (k.kind == KernelSpec::Kind::squared_exponential) return "se";
  return k.nu == 1.5 ? "matern32" : "matern52";
}

// Matern in the parameterization z = 2 sqrt(nu) r / l, for which the
// half-integer closed forms are
//   nu = 3/2: (1 + z) e^{-z}
//   nu = 5/2: (1 + z + z^2 / 3) e^{-z}
inline double kernel_eval(const KernelSpec& spec, const Vector& x,
                          const Vector& x2) {
  require(x.size() == x2.size(), "kernel_eval: dimension mismatch");
  const double l = spec.lengthscale;
  if (spec.kind == KernelSpec::Kind::squared_exponential)
    return std::exp(-(x - x2).squaredNorm() / (2.0 * l * l));
  const double z = 2.0 * std::sqrt(spec.nu) * (x - x2).norm() / l;
  if (spec.nu == 1.5) return (1.0 + z) * std::exp(-z);
  return (1.0 + z + z * z / 3.0) * std::exp(-z);
}

/// Gradient of k(x, x2) with respect to x.
inline Vector kernel_grad(const KernelSpec& spec, const Vector& x,
                          const Vector& x2) {
  require(x.size() == x2.size(), "kernel_grad: dimension mismatch");
  const double l = spec.lengthscale;
  const Vector diff = x - x2;
  if (spec.kind == KernelSpec::Kind::squared_exponential)
    return -(std::exp(-diff.squaredNorm() / (2.0 * l * l)) / (l * l)) * diff;
  const double c = 2.0 * std::sqrt(spec.nu) / l;
  const double z = c * diff.norm();
  const double e = std::exp(-z);
  if (spec.nu == 1.5) return -(c * c * e) * diff;
  return -(c * c / 3.0 * (1.0 + z) * e) * diff;
}

/// Posterior of a zero-mean GP conditioned on noisy observations.
/// Immutable once fitted; safe for concurrent reads.
class GpPosterior {
 public:
  static constexpr double kVarianceGuard = 1e-12;

  const KernelSpec& kernel() const noexcept { return kernel_; }
  const std::vector<Vector>& train_x() const noexcept { return train_x_; }
  const Vector& train_y() const noexcept { return train_y_; }
  double noise_var() const noexcept { return noise_var_; }
  double jitter() const noexcept { return jitter_; }
  std::size_t size() const noexcept { return train_x_.size(); }
  /// Lower-triangular L with L L^T = K + (noise_var + jitter) I.
  Matrix factor() const { return llt_.matrixL(); }
  /// K + noise_var I as assembled before factorization.
  const Matrix& gram() const noexcept { return gram_; }

  struct MeanVar {
    double mean;
    double var;
  };

  Vector cross_cov(const Vector& x) const {
    Vector k(static_cast<Eigen::Index>(size()));
    for (std::size_t i = 0; i < size(); ++i)
      k[static_cast<Eigen::Index>(i)] = kernel_eval(kernel_, x, train_x_[i]);
    return k;
  }

  MeanVar mean_var(const Vector& x) const {
    check_dim(x);
    const double prior = kernel_eval(kernel_, x, x);
    if (size() == 0) return {0.0, prior};
    const Vector k = cross_cov(x);
    const Vector v = llt_.matrixL().solve(k);
    const double var = prior - v.squaredNorm();
    return {k.dot(alpha_), std::max(0.0, var)};
  }

  struct MeanVarGrad {
    double mean;
    double var;
    Vector grad_mean;
    Vector grad_var;
  };

  MeanVarGrad mean_var_grad(const Vector& x) const {
    check_dim(x);
    const Eigen::Index d = x.size();
    MeanVarGrad out{0.0, kernel_eval(kernel_, x, x), Vector::Zero(d),
                    Vector::Zero(d)};
    if (size() == 0) return out;
    const Vector k = cross_cov(x);
    Matrix dk(static_cast<Eigen::Index>(size()), d);  // row i = d k_i / dx
    for (std::size_t i = 0; i < size(); ++i)
      dk.row(static_cast<Eigen::Index>(i)) = kernel_grad(kernel_, x, train_x_[i]).transpose();
    const Vector ainv_k = llt_.solve(k);
    out.mean = k.dot(alpha_);
    out.var = std::max(0.0, out.var - k.dot(ainv_k));
    out.grad_mean = dk.transpose() * alpha_;
    // k(x, x) is constant for stationary kernels
    out.grad_var = -2.0 * (dk.transpose() * ainv_k);
    return out;
  }

 private:
  friend GpPosterior fit_posterior(const KernelSpec&, std::vector<Vector>,
                                   Vector, double);

  void check_dim(const Vector& x) const {
    if (!train_x_.empty())
      require(x.size() == train_x_.front().size(),
              "GpPosterior: query dimension mismatch");
  }

  KernelSpec kernel_;
  std::vector<Vector> train_x_;
  Vector train_y_;
  double noise_var_ = 0.0;
  double jitter_ = 0.0;
  Matrix gram_;
  Eigen::LLT<Matrix> llt_;
  Vector alpha_;
};

/// Factorizes K + noise_var I. On failure retries with jitter
/// 1e-10 * s, 1e-9 * s, ..., 1e-4 * s (s = mean diagonal) before giving up.
inline GpPosterior fit_posterior(const KernelSpec& kernel,
                                 std::vector<Vector> train_x, Vector train_y,
                                 double noise_var) {
  kernel.validate();
  require(std::isfinite(noise_var) && noise_var > 0.0,
          "fit_posterior: noise variance must be positive");
  require(static_cast<Eigen::Index>(train_x.size()) == train_y.size(),
          "fit_posterior: x / y length mismatch");
  require(train_y.allFinite(), "fit_posterior: non-finite targets");
  for (const auto& x : train_x) {
    require(x.allFinite(), "fit_posterior: non-finite training point");
    require(x.size() == train_x.front().size(),
            "fit_posterior: training points of different dimension");
  }

  GpPosterior post;
  post.kernel_ = kernel;
  post.noise_var_ = noise_var;
  const auto n = static_cast<Eigen::Index>(train_x.size());
  post.gram_.resize(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j <= i; ++j) {
      const double v = kernel_eval(kernel, train_x[i], train_x[j]);
      post.gram_(i, j) = v;
      post.gram_(j, i) = v;
    }
    post.gram_(i, i) += noise_var;
  }
  post.train_x_ = std::move(train_x);
  post.train_y_ = std::move(train_y);
  if (n == 0) return post;

  const double scale = post.gram_.diagonal().mean();
  double jitter = 0.0;
  for (double rel = 1e-10;; rel *= 10.0) {
    Matrix a = post.gram_;
    a.diagonal().array() += jitter;
    post.llt_.compute(a);
    if (post.llt_.info() == Eigen::Success) break;
    if (rel > 1e-4 * (1.0 + 1e-9))
      throw IllConditioned("fit_posterior: Gram matrix not positive definite "
                           "after maximum jitter");
    jitter = rel * scale;
  }
  post.jitter_ = jitter;
  post.alpha_ = post.llt_.solve(post.train_y_);
  return post;
}

inline GpPosterior fit_posterior(const KernelSpec& kernel,
                                 const std::vector<Vector>& train_x,
                                 const std::vector<double>& train_y,
                                 double noise_var) {
  Vector y = Eigen::Map<const Vector>(train_y.data(),
                                      static_cast<Eigen::Index>(train_y.size()));
  return fit_posterior(kernel, train_x, std::move(y), noise_var);
}

inline GpPosterior::MeanVar posterior_mean_var(const GpPosterior& post,
                                               const Vector& x) {
  return post.mean_var(x);
}

inline double ucb_value(const GpPosterior& post, const Vector& x, double beta) {
  require(beta >= 0.0, "ucb_value: beta must be non-negative");
  const auto mv = post.mean_var(x);
  return mv.mean + beta * std::sqrt(mv.var);
}

/// Analytic gradient of mean + beta * sqrt(var). Throws SingularVariance when
/// var <= 1e-12.
inline Vector ucb_grad(const GpPosterior& post, const Vector& x, double beta) {
  require(beta >= 0.0, "ucb_grad: beta must be non-negative");
  const auto mvg = post.mean_var_grad(x);
  if (mvg.var <= GpPosterior::kVarianceGuard)
    throw SingularVariance("ucb_grad: posterior variance vanishes at query point");
  const double sd = std::sqrt(mvg.var);
  return mvg.grad_mean + (beta / (2.0 * sd)) * mvg.grad_var;
}

// ---------------------------------------------------------------------------
// Multi-start ascent

struct AscentOptions {
  int max_iterations = 200;
  double grad_tolerance = 1e-6;
  double step_tolerance = 1e-10;
  double initial_step_fraction = 0.1;  // of the box diagonal
  double merge_radius_fraction = 1e-3;  // of the box diagonal
};

struct LocalMaximum {
  Vector point;
  double value = 0.0;
  Vector start;
  double start_value = 0.0;
  int iterations = 0;
  bool converged = false;
};

/// Projected gradient ascent with backtracking from a single start.
inline LocalMaximum ascend_from(const GpPosterior& post, double beta,
                                const Box& box, const Vector& start,
                                const AscentOptions& opt = {}) {
  LocalMaximum out;
  out.start = box.project(start);
  out.start_value = ucb_value(post, out.start, beta);
  Vector x = out.start;
  double fx = out.start_value;
  double step = opt.initial_step_fraction * box.diagonal();

  int it = 0;
  for (; it < opt.max_iterations; ++it) {
    Vector grad;
    try {
      grad = ucb_grad(post, x, beta);
    } catch (const SingularVariance&) {
      out.converged = true;
      break;
    }
    const double gnorm = grad.norm();
    if (gnorm < opt.grad_tolerance) {
      out.converged = true;
      break;
    }
    const Vector dir = grad / gnorm;
    bool improved = false;
    while (step >= opt.step_tolerance) {
      const Vector cand = box.project(x + step * dir);
      if ((cand - x).norm() < opt.step_tolerance) break;  // pinned at a face
      const double fc = ucb_value(post, cand, beta);
      if (fc > fx) {
        x = cand;
        fx = fc;
        improved = true;
        step *= 2.0;
        break;
      }
      step *= 0.5;
    }
    if (!improved) {
      out.converged = true;
      break;
    }
  }
  out.point = std::move(x);
  out.value = fx;
  out.iterations = it;
  return out;
}

/// Runs ascent from `n_starts` uniform starts in the box and merges maxima
/// closer than the merge radius (keeping the higher value). Results are sorted
/// by decreasing value; equal values keep start order.
inline std::vector<LocalMaximum> multistart_ascent(const GpPosterior& post,
                                                   double beta, const Box& box,
                                                   std::size_t n_starts,
                                                   Rng& rng,
                                                   const AscentOptions& opt = {},
                                                   const std::vector<Vector>& extra_starts = {}) {
  require(n_starts >= 1, "multistart_ascent: n_starts must be >= 1");
  std::vector<Vector> starts;
  starts.reserve(n_starts + extra_starts.size());
  for (std::size_t i = 0; i < n_starts; ++i) starts.push_back(box.sample(rng));
  for (const auto& s : extra_starts) starts.push_back(s);

  std::vector<LocalMaximum> found;
  for (const auto& s : starts) found.push_back(ascend_from(post, beta, box, s, opt));
  std::stable_sort(found.begin(), found.end(),
                   [](const LocalMaximum& a, const LocalMaximum& b) {
                     return a.value > b.value;
                   });
  const double radius = opt.merge_radius_fraction * box.diagonal();
  std::vector<LocalMaximum> merged;
  for (auto& m : found) {
    const bool dup = std::any_of(merged.begin(), merged.end(), [&](const LocalMaximum& k) {
      return (k.point - m.point).norm() <= radius;
    });
    if (!dup) merged.push_back(std::move(m));
  }
  return merged;
}

// ---------------------------------------------------------------------------
// GP-UCB loop

/// Either a constant beta or the logarithmic rule beta_t = 2 ln(t + 1) + 2.
struct UcbSchedule {
  enum class Kind { constant, logarithmic };
  Kind kind = Kind::constant;
  double beta = 2.0;

  double at(std::size_t t) const {
    if (kind == Kind::constant) return beta;
    return 2.0 * std::log(static_cast<double>(t) + 1.0) + 2.0;
  }
};

struct RegretRecord {
  double optimum = 0.0;
  std::vector<Vector> points;
  std::vector<double> true_values;
  std::vector<double> observed;
  std::vector<double> cumulative_regret;
  std::vector<double> simple_regret;  // gap of the best true value so far

  std::size_t size() const noexcept { return points.size(); }

  void append(Vector x, double f, double y) {
    const double gap = optimum - f;
    const double cum = (cumulative_regret.empty() ? 0.0 : cumulative_regret.back()) + gap;
    const double simple = simple_regret.empty() ? gap : std::min(simple_regret.back(), gap);
    points.push_back(std::move(x));
    true_values.push_back(f);
    observed.push_back(y);
    cumulative_regret.push_back(cum);
    simple_regret.push_back(simple);
  }

  /// Cumulative regret non-decreasing and simple regret non-increasing.
  bool invariants_hold(double tol = 1e-12) const {
    for (std::size_t t = 1; t < size(); ++t) {
      if (cumulative_regret[t] < cumulative_regret[t - 1] - tol) return false;
      if (simple_regret[t] > simple_regret[t - 1] + tol) return false;
    }
    return true;
  }
};

/// Maximum of `f` over the box: dense grid (1D: 20001 points, 2D: 801^2,
/// otherwise 4096 random points) followed by projected gradient refinement.
inline std::pair<Vector, double> maximize_on_box(const ObjectiveModel& model,
                                                 const Box& box) {
  require(model.dim() == box.dim(), "maximize_on_box: dimension mismatch");
  const Eigen::Index d = box.dim();
  auto consider = [&](const Vector& x, Vector& best, double& fbest) {
    const double f = model.mu(x);
    if (f > fbest) {
      fbest = f;
      best = x;
    }
  };
  Vector best = box.lower;
  double fbest = -std::numeric_limits<double>::infinity();
  if (d == 1) {
    const int m = 20000;
    for (int i = 0; i <= m; ++i) {
      Vector x(1);
      x[0] = box.lower[0] + (box.upper[0] - box.lower[0]) * i / m;
      consider(x, best, fbest);
    }
  } else if (d == 2) {
    const int m = 800;
    Vector x(2);
    for (int i = 0; i <= m; ++i)
      for (int j = 0; j <= m; ++j) {
        x[0] = box.lower[0] + (box.upper[0] - box.lower[0]) * i / m;
        x[1] = box.lower[1] + (box.upper[1] - box.lower[1]) * j / m;
        consider(x, best, fbest);
      }
  } else {
    Rng rng(0x5eed);
    for (int i = 0; i < 4096; ++i) consider(box.sample(rng), best, fbest);
  }
  double step = 1e-2 * box.diagonal();
  for (int it = 0; it < 10000 && step > 1e-15; ++it) {
    const Vector cand = box.project(best + step * model.grad_mu(best));
    const double fc = model.mu(cand);
    if (fc > fbest) {
      best = cand;
      fbest = fc;
      step *= 1.5;
    } else {
      step *= 0.5;
    }
  }
  return {best, fbest};
}

struct GpUcbOptions {
  std::size_t iterations = 30;  // T
  double noise_sd = 0.1;
  KernelSpec kernel = KernelSpec::se(0.2);
  UcbSchedule schedule{};
  std::size_t n_starts = 8;
  AscentOptions ascent{};
};

/// Fit -> ascend -> evaluate with noise -> append, T times. The noise variance
/// given to the posterior is max(noise_sd^2, 1e-6).
inline RegretRecord gp_ucb_loop(const ObjectiveModel& objective, const Box& box,
                                const GpUcbOptions& opt, Rng& rng,
                                std::optional<double> known_optimum = std::nullopt) {
  require(opt.iterations >= 1, "gp_ucb_loop: T must be >= 1");
  require(opt.noise_sd >= 0.0, "gp_ucb_loop: noise_sd must be >= 0");
  require(objective.dim() == box.dim(), "gp_ucb_loop: dimension mismatch");
  RegretRecord rec;
  rec.optimum = known_optimum ? *known_optimum : maximize_on_box(objective, box).second;
  const double noise_var = std::max(opt.noise_sd * opt.noise_sd, 1e-6);

  std::vector<Vector> xs;
  std::vector<double> ys;
  for (std::size_t t = 1; t <= opt.iterations; ++t) {
    const GpPosterior post = fit_posterior(opt.kernel, xs, ys, noise_var);
    const double beta = opt.schedule.at(t);
    std::vector<Vector> extra;
    if (!ys.empty()) {
      // also restart from the best observation
      const auto it = std::max_element(ys.begin(), ys.end());
      extra.push_back(xs[static_cast<std::size_t>(it - ys.begin())]);
    }
    const auto maxima = multistart_ascent(post, beta, box, opt.n_starts, rng, opt.ascent, extra);
    const Vector x = maxima.front().point;
    const double f = objective.mu(x);
    const double y = f + opt.noise_sd * standard_normal(rng);
    xs.push_back(x);
    ys.push_back(y);
    rec.append(x, f, y);
  }
  return rec;
}

/// Uniform random search baseline with the same budget and bookkeeping.
inline RegretRecord random_search_loop(const ObjectiveModel& objective,
                                       const Box& box, std::size_t iterations,
                                       double noise_sd, Rng& rng,
                                       std::optional<double> known_optimum = std::nullopt) {
  require(iterations >= 1, "random_search_loop: T must be >= 1");
  RegretRecord rec;
  rec.optimum = known_optimum ? *known_optimum : maximize_on_box(objective, box).second;
  for (std::size_t t = 1; t <= iterations; ++t) {
    Vector x = box.sample(rng);
    const double f = objective.mu(x);
    const double y = f + noise_sd * standard_normal(rng);
    rec.append(std::move(x), f, y);
  }
  return rec;
}

}  // namespace tbon
