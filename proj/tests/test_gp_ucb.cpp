#include <gtest/gtest.h>

#include <boost/math/special_functions/bessel.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <Eigen/LU>

#include "tbon/gp_ucb.hpp"

using namespace tbon;

namespace {

const std::vector<KernelSpec>& kernels() {
  static const std::vector<KernelSpec> k{KernelSpec::se(0.4), KernelSpec::matern(1.5, 0.4),
                                         KernelSpec::matern(2.5, 0.4)};
  return k;
}

struct Dataset {
  std::vector<Vector> x;
  Vector y;
};

Dataset random_dataset(Eigen::Index d, std::size_t n, Rng& rng) {
  Dataset ds;
  const Box box(Vector::Zero(d), Vector::Ones(d));
  ds.y.resize(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    ds.x.push_back(box.sample(rng));
    ds.y[static_cast<Eigen::Index>(i)] = std::sin(3.0 * ds.x.back().sum()) + 0.1 * standard_normal(rng);
  }
  return ds;
}

}  // namespace

TEST(Kernels, MaternMatchesBesselForm) {
  // with z = 2 sqrt(nu) r / l: k = 2^{1-nu} / Gamma(nu) z^nu K_nu(z)
  for (double nu : {1.5, 2.5}) {
    const auto k = KernelSpec::matern(nu, 0.7);
    for (double r : {0.01, 0.1, 0.5, 1.0, 2.5}) {
      const double z = 2.0 * std::sqrt(nu) * r / 0.7;
      const double ref = std::pow(2.0, 1.0 - nu) / boost::math::tgamma(nu) * std::pow(z, nu) *
                         boost::math::cyl_bessel_k(nu, z);
      Vector a = Vector::Zero(2), b = Vector::Zero(2);
      b[1] = r;
      EXPECT_NEAR(kernel_eval(k, a, b), ref, 1e-12) << "nu " << nu << " r " << r;
    }
  }
}

TEST(Kernels, UnitDiagonalAndSymmetry) {
  Rng rng(1);
  for (const auto& k : kernels()) {
    const Vector a = Vector::Random(3), b = Vector::Random(3);
    EXPECT_DOUBLE_EQ(kernel_eval(k, a, a), 1.0);
    EXPECT_DOUBLE_EQ(kernel_eval(k, a, b), kernel_eval(k, b, a));
  }
}

TEST(Kernels, GradientMatchesFiniteDifferences) {
  Rng rng(2);
  for (const auto& k : kernels()) {
    for (int i = 0; i < 20; ++i) {
      const Vector x = Box(Vector::Zero(3), Vector::Ones(3)).sample(rng);
      const Vector y = Box(Vector::Zero(3), Vector::Ones(3)).sample(rng);
      const Vector g = kernel_grad(k, x, y);
      for (Eigen::Index j = 0; j < 3; ++j) {
        Vector a = x, b = x;
        a[j] += 1e-6;
        b[j] -= 1e-6;
        EXPECT_NEAR(g[j], (kernel_eval(k, a, y) - kernel_eval(k, b, y)) / 2e-6, 1e-6)
            << to_string(k);
      }
    }
  }
}

TEST(Kernels, RejectInvalidParameters) {
  EXPECT_THROW(KernelSpec::se(0.0), std::invalid_argument);
  EXPECT_THROW(KernelSpec::matern(0.5, 1.0), std::invalid_argument);
}

TEST(Posterior, MatchesDenseSolve) {
  Rng rng(3);
  for (const auto& k : kernels()) {
    for (int rep = 0; rep < 3; ++rep) {
      const auto ds = random_dataset(2, 15, rng);
      const double noise = 0.01;
      const auto post = fit_posterior(k, ds.x, ds.y, noise);
      const Eigen::Index n = ds.y.size();
      Matrix kxx(n, n);
      for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j)
          kxx(i, j) = kernel_eval(k, ds.x[i], ds.x[j]) + (i == j ? noise : 0.0);
      const Matrix inv = kxx.fullPivLu().inverse();
      for (int p = 0; p < 10; ++p) {
        const Vector x = Box(Vector::Zero(2), Vector::Ones(2)).sample(rng);
        Vector kx(n);
        for (Eigen::Index i = 0; i < n; ++i) kx[i] = kernel_eval(k, x, ds.x[i]);
        const auto mv = post.mean_var(x);
        EXPECT_NEAR(mv.mean, kx.dot(inv * ds.y), 1e-8);
        EXPECT_NEAR(mv.var, 1.0 - kx.dot(inv * kx), 1e-8);
      }
    }
  }
}

TEST(Posterior, EmptyDataIsPrior) {
  const auto post = fit_posterior(KernelSpec::se(1.0), std::vector<Vector>{}, Vector(), 0.1);
  const auto mv = post.mean_var(Vector::Zero(3));
  EXPECT_EQ(mv.mean, 0.0);
  EXPECT_EQ(mv.var, 1.0);
}

TEST(Posterior, InterpolatesWithSmallNoise) {
  std::vector<Vector> xs;
  std::vector<double> ys;
  for (int i = 0; i < 8; ++i) {
    xs.push_back(Vector::Constant(1, i / 7.0));
    ys.push_back(std::sin(5.0 * i / 7.0));
  }
  for (const auto& k : {KernelSpec::se(0.1), KernelSpec::matern(1.5, 0.2),
                        KernelSpec::matern(2.5, 0.2)}) {
    const auto post = fit_posterior(k, xs, ys, 1e-10);
    EXPECT_EQ(post.jitter(), 0.0);
    for (std::size_t i = 0; i < xs.size(); ++i) {
      const auto mv = post.mean_var(xs[i]);
      EXPECT_NEAR(mv.mean, ys[i], 1e-6) << to_string(k);
      EXPECT_LT(mv.var, 1e-8);
    }
  }
}

TEST(Posterior, MoreDataNeverIncreasesVariance) {
  Rng rng(5);
  for (const auto& k : kernels()) {
    const auto ds = random_dataset(2, 12, rng);
    std::vector<Vector> xs;
    std::vector<double> ys;
    std::vector<Vector> probes;
    for (int p = 0; p < 10; ++p) probes.push_back(Box(Vector::Zero(2), Vector::Ones(2)).sample(rng));
    std::vector<double> prev(probes.size(), 1.0);
    for (std::size_t i = 0; i < ds.x.size(); ++i) {
      xs.push_back(ds.x[i]);
      ys.push_back(ds.y[static_cast<Eigen::Index>(i)]);
      const auto post = fit_posterior(k, xs, ys, 0.01);
      for (std::size_t p = 0; p < probes.size(); ++p) {
        const double v = post.mean_var(probes[p]).var;
        EXPECT_LE(v, prev[p] + 1e-12);
        EXPECT_GE(v, 0.0);
        prev[p] = v;
      }
    }
  }
}

TEST(Posterior, DuplicatePointsAreHandled) {
  std::vector<Vector> xs(5, Vector::Constant(1, 0.3));
  std::vector<double> ys{1.0, 1.1, 0.9, 1.0, 1.05};
  const auto post = fit_posterior(KernelSpec::se(0.2), xs, ys, 1e-12);
  EXPECT_NEAR(post.mean_var(Vector::Constant(1, 0.3)).mean, 1.01, 1e-3);
}

TEST(Posterior, RejectsBadInput) {
  std::vector<Vector> xs{Vector::Zero(2)};
  EXPECT_THROW(fit_posterior(KernelSpec::se(1.0), xs, std::vector<double>{1.0}, 0.0),
               std::invalid_argument);
  EXPECT_THROW(fit_posterior(KernelSpec::se(1.0), xs, std::vector<double>{1.0, 2.0}, 0.1),
               std::invalid_argument);
  EXPECT_THROW(fit_posterior(KernelSpec::se(1.0), xs, std::vector<double>{std::nan("")}, 0.1),
               std::invalid_argument);
}

TEST(Ucb, GradientMatchesCentralDifferences) {
  Rng rng(6);
  for (const auto& k : kernels()) {
    const auto ds = random_dataset(2, 10, rng);
    const auto post = fit_posterior(k, ds.x, ds.y, 0.01);
    for (int p = 0; p < 20; ++p) {
      const Vector x = Box(Vector::Zero(2), Vector::Ones(2)).sample(rng);
      const Vector g = ucb_grad(post, x, 2.0);
      Vector fd(2);
      for (Eigen::Index j = 0; j < 2; ++j) {
        Vector a = x, b = x;
        a[j] += 1e-6;
        b[j] -= 1e-6;
        fd[j] = (ucb_value(post, a, 2.0) - ucb_value(post, b, 2.0)) / 2e-6;
      }
      EXPECT_LE((g - fd).norm(), 1e-5 * std::max(1.0, fd.norm())) << to_string(k);
    }
  }
}

TEST(Ucb, SingularVarianceIsReported) {
  std::vector<Vector> xs{Vector::Constant(1, 0.5)};
  const auto post = fit_posterior(KernelSpec::se(1.0), xs, std::vector<double>{1.0}, 1e-14);
  EXPECT_THROW(ucb_grad(post, Vector::Constant(1, 0.5), 2.0), SingularVariance);
}

TEST(Ascent, MultistartFindsGridMaximum) {
  Rng rng(7);
  const auto ds = random_dataset(1, 8, rng);
  const auto post = fit_posterior(KernelSpec::se(0.15), ds.x, ds.y, 0.01);
  const Box box(Vector::Zero(1), Vector::Ones(1));
  double grid_best = -1e300;
  for (int i = 0; i <= 100000; ++i)
    grid_best = std::max(grid_best, ucb_value(post, Vector::Constant(1, i / 100000.0), 2.0));
  const auto maxima = multistart_ascent(post, 2.0, box, 16, rng);
  ASSERT_FALSE(maxima.empty());
  EXPECT_NEAR(maxima.front().value, grid_best, 1e-6);
  for (std::size_t i = 1; i < maxima.size(); ++i)
    EXPECT_GE(maxima[i - 1].value, maxima[i].value);
  for (const auto& m : maxima) {
    EXPECT_TRUE(box.contains(m.point));
    EXPECT_GE(m.value, m.start_value - 1e-12);
  }
}

TEST(Ascent, StaysInsideBoxAtBoundaryMaximum) {
  std::vector<Vector> xs{Vector::Constant(2, 1.0)};
  const auto post = fit_posterior(KernelSpec::se(1.0), xs, std::vector<double>{5.0}, 0.01);
  const Box box(Vector::Zero(2), Vector::Constant(2, 0.5));
  Rng rng(8);
  const auto maxima = multistart_ascent(post, 0.1, box, 4, rng);
  EXPECT_TRUE(maxima.front().point.isApprox(Vector::Constant(2, 0.5), 1e-6));
}

TEST(Schedule, ConstantAndLogarithmic) {
  UcbSchedule c;
  EXPECT_EQ(c.at(1), 2.0);
  EXPECT_EQ(c.at(100), 2.0);
  UcbSchedule l{UcbSchedule::Kind::logarithmic, 0.0};
  EXPECT_NEAR(l.at(1), 2.0 * std::log(2.0) + 2.0, 1e-15);
  EXPECT_GT(l.at(10), l.at(9));
}

TEST(Regret, Bookkeeping) {
  RegretRecord r;
  r.optimum = 1.0;
  r.append(Vector::Zero(1), 0.2, 0.3);
  r.append(Vector::Zero(1), 0.9, 0.8);
  r.append(Vector::Zero(1), 0.5, 0.6);
  EXPECT_NEAR(r.cumulative_regret.back(), 0.8 + 0.1 + 0.5, 1e-15);
  EXPECT_NEAR(r.simple_regret.back(), 0.1, 1e-15);
  EXPECT_TRUE(r.invariants_hold());
}

TEST(Loop, OptimumOfBenchmarkAndRegretInvariants) {
  SmoothModelParams p;
  p.amplitudes = {1.0, 0.5};
  p.frequencies = {3.0, 7.0};
  p.phases = {0.0, 1.0};
  p.sigma0 = 0.0;
  const auto f = make_smooth_model(ModelKind::sinusoid, p);
  const Box box(Vector::Zero(1), Vector::Constant(1, 3.0));
  const auto [xstar, fstar] = maximize_on_box(f, box);
  EXPECT_NEAR(xstar[0], 2.7325, 1e-3);
  EXPECT_NEAR(fstar, 1.420288, 1e-5);

  GpUcbOptions opt;
  opt.iterations = 15;
  Rng a(9), b(9);
  const auto r1 = gp_ucb_loop(f, box, opt, a, fstar);
  const auto r2 = gp_ucb_loop(f, box, opt, b, fstar);
  EXPECT_TRUE(r1.invariants_hold());
  EXPECT_EQ(r1.observed, r2.observed);
  for (const auto& x : r1.points) EXPECT_TRUE(box.contains(x));
  for (double s : r1.simple_regret) EXPECT_GE(s, -1e-9);
}

TEST(Loop, ZeroNoiseIsAccepted) {
  SmoothModelParams p;
  p.sigma0 = 0.0;
  const auto f = make_smooth_model(ModelKind::sinusoid, p);
  GpUcbOptions opt;
  opt.iterations = 12;
  opt.noise_sd = 0.0;
  Rng rng(10);
  const auto r = gp_ucb_loop(f, Box(Vector::Zero(1), Vector::Constant(1, 3.0)), opt, rng);
  EXPECT_EQ(r.size(), 12u);
  EXPECT_EQ(r.observed, r.true_values);
}
