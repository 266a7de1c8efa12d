#pragma once

// Synthetic embedding-space objectives: mean field mu, deviation field sigma,
// their analytic gradients, uniform sphere sampling and the first-order edit
// operator x -> x + eps*u + r(eps, u).

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "tbon/core.hpp"

namespace tbon {

enum class ModelKind { linear, quadratic, sinusoid, branin };

inline std::string to_string(ModelKind k) {
  switch (k) {
    case ModelKind::linear: return "linear";
    case ModelKind::quadratic: return "quadratic";
    case ModelKind::sinusoid: return "sinusoid";
    case ModelKind::branin: return "branin";
  }
  return "unknown";
}

/// Mean/deviation fields over R^d with analytic gradients.
///
/// `smoothness_bound` is the constant C with
///   |mu(x + eps*u) - mu(x) - eps * grad_mu(x).u| <= C eps^2
/// and ||r(eps, u)|| <= C eps^2 for the edit remainder.
class ObjectiveModel {
 public:
  using ScalarField = std::function<double(const Vector&)>;
  using VectorField = std::function<Vector(const Vector&)>;
  using Remainder = std::function<Vector(double, const Vector&)>;

  ObjectiveModel(ModelKind kind, Eigen::Index dim, ScalarField mu,
                 ScalarField sigma, VectorField grad_mu, VectorField grad_sigma,
                 Remainder remainder, double smoothness_bound)
      : kind_(kind),
        dim_(dim),
        mu_(std::move(mu)),
        sigma_(std::move(sigma)),
        grad_mu_(std::move(grad_mu)),
        grad_sigma_(std::move(grad_sigma)),
        remainder_(std::move(remainder)),
        smoothness_bound_(smoothness_bound) {
    require(dim_ >= 1, "ObjectiveModel: dimension must be >= 1");
    require(smoothness_bound_ >= 0.0, "ObjectiveModel: negative smoothness");
  }

  ModelKind kind() const noexcept { return kind_; }
  Eigen::Index dim() const noexcept { return dim_; }
  double smoothness_bound() const noexcept { return smoothness_bound_; }

  double mu(const Vector& x) const { return mu_(checked(x)); }
  double sigma(const Vector& x) const { return sigma_(checked(x)); }
  Vector grad_mu(const Vector& x) const { return grad_mu_(checked(x)); }
  Vector grad_sigma(const Vector& x) const { return grad_sigma_(checked(x)); }
  Vector remainder(double eps, const Vector& u) const {
    return remainder_(eps, u);
  }

  /// UCB acquisition mu + beta*sigma of the model itself.
  double acquisition(const Vector& x, double beta) const {
    return mu(x) + beta * sigma(x);
  }

  /// Step radius below which the first-order edit contract is declared valid.
  /// Defaults to sigma(x) / (2 ||h||), or 1 when h vanishes.
  double validity_radius(const Vector& x) const {
    if (validity_radius_) return *validity_radius_;
    const double hn = grad_sigma(x).norm();
    if (hn > 0.0) return sigma(x) / (2.0 * hn);
    return 1.0;
  }
  void set_validity_radius(std::optional<double> r) {
    if (r) require(*r > 0.0, "validity radius must be positive");
    validity_radius_ = r;
  }

  /// (g, h) for the linear backend; empty for nonlinear fields.
  const std::optional<std::pair<Vector, Vector>>& linear_terms() const {
    return linear_terms_;
  }

 private:
  friend ObjectiveModel make_linear_model(const Vector&, const Vector&, double,
                                          double);

  const Vector& checked(const Vector& x) const {
    require(x.size() == dim_, "ObjectiveModel: point dimension mismatch");
    return x;
  }

  ModelKind kind_;
  Eigen::Index dim_;
  ScalarField mu_;
  ScalarField sigma_;
  VectorField grad_mu_;
  VectorField grad_sigma_;
  Remainder remainder_;
  double smoothness_bound_;
  std::optional<double> validity_radius_;
  std::optional<std::pair<Vector, Vector>> linear_terms_;
};

namespace detail {

inline Vector zero_remainder(double, const Vector& u) {
  return Vector::Zero(u.size());
}

// Norm-preserving cyclic shift; the direction of the synthetic O(eps^2) drift.
inline Vector cyclic_shift(const Vector& u) {
  const Eigen::Index d = u.size();
  Vector out(d);
  for (Eigen::Index i = 0; i < d; ++i) out[(i + 1) % d] = u[i];
  return out;
}

}  // namespace detail

/// mu(x) = mu0 + g.x, sigma(x) = max(0, sigma0 + h.x); zero edit remainder.
///
/// sigma is clamped at zero so that it stays a standard deviation when a step
/// radius exceeds sigma0 / ||h||. Inside the region sigma0 + h.x > 0 the fields
/// are exactly linear.
inline ObjectiveModel make_linear_model(const Vector& g, const Vector& h,
                                        double mu0, double sigma0) {
  require(g.size() >= 1, "make_linear_model: empty gradient");
  require(g.size() == h.size(), "make_linear_model: g and h lengths differ");
  require(sigma0 > 0.0, "make_linear_model: sigma0 must be positive");
  require(g.allFinite() && h.allFinite() && std::isfinite(mu0),
          "make_linear_model: non-finite input");
  ObjectiveModel m(
      ModelKind::linear, g.size(),
      [g, mu0](const Vector& x) { return mu0 + g.dot(x); },
      [h, sigma0](const Vector& x) { return std::max(0.0, sigma0 + h.dot(x)); },
      [g](const Vector&) { return g; },
      [h, sigma0](const Vector& x) -> Vector {
        if (sigma0 + h.dot(x) > 0.0) return h;
        return Vector::Zero(h.size());
      },
      detail::zero_remainder, 0.0);
  m.linear_terms_ = std::make_pair(g, h);
  return m;
}

/// Parameters for the nonlinear test fields. Only the block matching the
/// chosen kind is read.
struct SmoothModelParams {
  // quadratic bowl: mu = -curvature * ||x - center||^2,
  //                 sigma = sigma0 + sigma_curvature * ||x||^2
  Eigen::Index dim = 2;
  double curvature = 1.0;
  Vector center;  // empty means origin
  double sigma_curvature = 0.0;

  // sinusoid-sum (1D): mu = sum_k a_k sin(w_k x + phi_k)
  std::vector<double> amplitudes{1.0};
  std::vector<double> frequencies{3.0};
  std::vector<double> phases{0.0};

  // shared
  double sigma0 = 0.1;
  double edit_curvature = 0.0;  // kappa in r(eps,u) = kappa eps^2 shift(u)
};

inline ModelKind parse_model_kind(const std::string& tag) {
  if (tag == "linear") return ModelKind::linear;
  if (tag == "quadratic") return ModelKind::quadratic;
  if (tag == "sinusoid") return ModelKind::sinusoid;
  if (tag == "branin") return ModelKind::branin;
  throw std::invalid_argument("unknown model kind: " + tag);
}

namespace detail {

// Standard Branin constants.
struct BraninConst {
  static constexpr double a = 1.0;
  static constexpr double b = 5.1 / (4.0 * std::numbers::pi * std::numbers::pi);
  static constexpr double c = 5.0 / std::numbers::pi;
  static constexpr double r = 6.0;
  static constexpr double s = 10.0;
  static constexpr double t = 1.0 / (8.0 * std::numbers::pi);
};

inline double branin(const Vector& x) {
  using B = BraninConst;
  const double w = x[1] - B::b * x[0] * x[0] + B::c * x[0] - B::r;
  return B::a * w * w + B::s * (1.0 - B::t) * std::cos(x[0]) + B::s;
}

inline Vector branin_grad(const Vector& x) {
  using B = BraninConst;
  const double w = x[1] - B::b * x[0] * x[0] + B::c * x[0] - B::r;
  Vector g(2);
  g[0] = 2.0 * B::a * w * (-2.0 * B::b * x[0] + B::c) -
         B::s * (1.0 - B::t) * std::sin(x[0]);
  g[1] = 2.0 * B::a * w;
  return g;
}

// Half the largest Hessian spectral norm over [-6, 11] x [-1, 16], i.e. the
// standard domain padded by one unit.
inline double branin_smoothness_bound() {
  using B = BraninConst;
  double worst = 0.0;
  for (int i = 0; i <= 340; ++i) {
    for (int j = 0; j <= 340; ++j) {
      const double x0 = -6.0 + 17.0 * i / 340.0;
      const double x1 = -1.0 + 17.0 * j / 340.0;
      const double w = x1 - B::b * x0 * x0 + B::c * x0 - B::r;
      const double dw = -2.0 * B::b * x0 + B::c;
      const double h11 = 2.0 * B::a * (dw * dw - 2.0 * B::b * w) -
                         B::s * (1.0 - B::t) * std::cos(x0);
      const double h12 = 2.0 * B::a * dw;
      const double h22 = 2.0 * B::a;
      const double tr = 0.5 * (h11 + h22);
      const double disc = std::sqrt(0.25 * (h11 - h22) * (h11 - h22) + h12 * h12);
      worst = std::max({worst, std::abs(tr + disc), std::abs(tr - disc)});
    }
  }
  // grid spacing slack
  return 0.5 * worst * 1.05;
}

}  // namespace detail

/// Nonlinear C^{1,1} test fields.
///
///  quadratic  mu = -a ||x - c||^2, C = max(a, sigma_curvature, kappa)
///  sinusoid   1D sum of sines, C = max(sum |a_k| w_k^2 / 2, kappa)
///  branin     mu = -Branin(x), 2D, C from a Hessian bound on the padded
///             standard domain [-6, 11] x [-1, 16]
inline ObjectiveModel make_smooth_model(ModelKind kind,
                                        const SmoothModelParams& p) {
  require(p.sigma0 >= 0.0, "make_smooth_model: sigma0 must be >= 0");
  require(p.edit_curvature >= 0.0, "make_smooth_model: negative edit curvature");
  const double kappa = p.edit_curvature;
  auto remainder = [kappa](double eps, const Vector& u) -> Vector {
    return kappa * eps * eps * detail::cyclic_shift(u);
  };

  switch (kind) {
    case ModelKind::quadratic: {
      require(p.dim >= 1, "quadratic: dim must be >= 1");
      require(p.curvature >= 0.0 && p.sigma_curvature >= 0.0,
              "quadratic: curvatures must be >= 0");
      const Vector c = p.center.size() == 0 ? Vector::Zero(p.dim) : p.center;
      require(c.size() == p.dim, "quadratic: center dimension mismatch");
      const double a = p.curvature, s0 = p.sigma0, s2 = p.sigma_curvature;
      return ObjectiveModel(
          kind, p.dim,
          [a, c](const Vector& x) { return -a * (x - c).squaredNorm(); },
          [s0, s2](const Vector& x) { return s0 + s2 * x.squaredNorm(); },
          [a, c](const Vector& x) -> Vector { return -2.0 * a * (x - c); },
          [s2](const Vector& x) -> Vector { return 2.0 * s2 * x; }, remainder,
          std::max({a, s2, kappa}));
    }
    case ModelKind::sinusoid: {
      const auto& amp = p.amplitudes;
      const auto& freq = p.frequencies;
      const auto& ph = p.phases;
      require(!amp.empty() && amp.size() == freq.size() &&
                  amp.size() == ph.size(),
              "sinusoid: amplitude/frequency/phase lengths differ");
      double c = 0.0;
      for (std::size_t k = 0; k < amp.size(); ++k)
        c += 0.5 * std::abs(amp[k]) * freq[k] * freq[k];
      const double s0 = p.sigma0;
      return ObjectiveModel(
          kind, 1,
          [amp, freq, ph](const Vector& x) {
            double v = 0.0;
            for (std::size_t k = 0; k < amp.size(); ++k)
              v += amp[k] * std::sin(freq[k] * x[0] + ph[k]);
            return v;
          },
          [s0](const Vector&) { return s0; },
          [amp, freq, ph](const Vector& x) -> Vector {
            double v = 0.0;
            for (std::size_t k = 0; k < amp.size(); ++k)
              v += amp[k] * freq[k] * std::cos(freq[k] * x[0] + ph[k]);
            return Vector::Constant(1, v);
          },
          [](const Vector&) -> Vector { return Vector::Zero(1); }, remainder,
          std::max(c, kappa));
    }
    case ModelKind::branin: {
      const double s0 = p.sigma0;
      return ObjectiveModel(
          kind, 2, [](const Vector& x) { return -detail::branin(x); },
          [s0](const Vector&) { return s0; },
          [](const Vector& x) -> Vector { return -detail::branin_grad(x); },
          [](const Vector&) -> Vector { return Vector::Zero(2); }, remainder,
          std::max(detail::branin_smoothness_bound(), kappa));
    }
    case ModelKind::linear:
      break;
  }
  throw std::invalid_argument(
      "make_smooth_model: use make_linear_model for the linear backend");
}

inline ObjectiveModel make_smooth_model(const std::string& tag,
                                        const SmoothModelParams& p) {
  return make_smooth_model(parse_model_kind(tag), p);
}

/// n i.i.d. uniform directions on S^{d-1} (normalized Gaussian vectors).
inline std::vector<UnitDirection> sample_unit_sphere(Eigen::Index d,
                                                     std::size_t n, Rng& rng) {
  require(d >= 1, "sample_unit_sphere: d must be >= 1");
  require(n >= 1, "sample_unit_sphere: n must be >= 1");
  std::vector<UnitDirection> out;
  out.reserve(n);
  Vector z(d);
  while (out.size() < n) {
    for (Eigen::Index k = 0; k < d; ++k) z[k] = standard_normal(rng);
    const double nrm = z.norm();
    if (nrm == 0.0) continue;
    out.push_back(UnitDirection::normalized(z));
  }
  return out;
}

struct EditRealization {
  Vector base;
  double epsilon;
  UnitDirection direction;
  Vector remainder;

  Vector point() const { return base + epsilon * direction.coords() + remainder; }
};

inline EditRealization realize_edit(const Vector& base, double epsilon,
                                    const UnitDirection& direction,
                                    const ObjectiveModel& model) {
  require(base.size() == model.dim() && direction.dim() == model.dim(),
          "apply_edit: dimension mismatch");
  require(base.allFinite(), "apply_edit: non-finite base point");
  require(std::isfinite(epsilon) && epsilon >= 0.0,
          "apply_edit: epsilon must be non-negative");
  // relative slack so eps == radius computed on another path is accepted
  require(epsilon <= model.validity_radius(base) * (1.0 + 1e-12),
          "apply_edit: epsilon exceeds the validity radius");
  Vector r = epsilon == 0.0 ? Vector::Zero(base.size())
                            : model.remainder(epsilon, direction.coords());
  return EditRealization{base, epsilon, direction, std::move(r)};
}

/// x + eps*u + r(eps, u); eps = 0 returns the base point.
inline Vector apply_edit(const Vector& base, double epsilon,
                         const UnitDirection& direction,
                         const ObjectiveModel& model) {
  return realize_edit(base, epsilon, direction, model).point();
}

}  // namespace tbon
