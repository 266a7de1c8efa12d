#pragma once

// Standard-normal quantiles, the Best-of-N exploration weight q_N and Monte
// Carlo samples of the maximum / runner-up of N standard normals.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <span>
#include <vector>

#include "tbon/core.hpp"

namespace tbon {

/// P(Z > x) for Z ~ N(0, 1), accurate in the far tail.
inline double std_normal_upper_tail(double x) {
  return 0.5 * std::erfc(x / std::numbers::sqrt2);
}

inline double std_normal_cdf(double x) {
  return 0.5 * std::erfc(-x / std::numbers::sqrt2);
}

/// x with P(Z > x) = tail, by bisection on erfc. Absolute error below 1e-12.
inline double std_normal_upper_quantile(double tail) {
  require(tail > 0.0 && tail < 1.0,
          "std_normal_upper_quantile: tail must lie in (0, 1)");
  if (tail == 0.5) return 0.0;
  if (tail > 0.5) return -std_normal_upper_quantile(1.0 - tail);
  // erfc(x / sqrt2) / 2 underflows past x ~ 38.5
  double lo = 0.0, hi = 40.0;
  while (hi - lo > 1e-13) {
    const double mid = 0.5 * (lo + hi);
    if (std_normal_upper_tail(mid) > tail)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

/// Inverse of the standard normal CDF on (0, 1).
inline double std_normal_quantile(double p) {
  require(p > 0.0 && p < 1.0, "std_normal_quantile: p must lie in (0, 1)");
  if (p <= 0.5) return -std_normal_upper_quantile(p);
  return std_normal_upper_quantile(1.0 - p);
}

/// q_N, the (1 - 1/N)-quantile of N(0, 1): the exploration weight that
/// Best-of-N selection induces. Grows like sqrt(2 ln N).
inline double beta_of_n(double n) {
  require(n >= 2.0, "beta_of_n: n must be >= 2");
  return std_normal_upper_quantile(1.0 / n);
}

/// Maximum, runner-up and q_N for one draw of N standard normals.
struct MaxSpacingSample {
  double max;
  double second;
  std::size_t n;
  double q;
};

/// Builds a sample from explicit draws (n >= 2).
inline MaxSpacingSample max_spacing_from(std::span<const double> draws) {
  require(draws.size() >= 2, "max_spacing_from: need at least two draws");
  double m1 = -std::numeric_limits<double>::infinity();
  double m2 = m1;
  for (double v : draws) {
    if (v > m1) {
      m2 = m1;
      m1 = v;
    } else if (v > m2) {
      m2 = v;
    }
  }
  const double n = static_cast<double>(draws.size());
  return MaxSpacingSample{m1, m2, draws.size(), beta_of_n(n)};
}

inline std::vector<MaxSpacingSample> sample_max_spacing(std::size_t n,
                                                        std::size_t trials,
                                                        Rng& rng) {
  require(n >= 2, "sample_max_spacing: n must be >= 2");
  require(trials >= 1, "sample_max_spacing: trials must be >= 1");
  const double q = beta_of_n(static_cast<double>(n));
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<MaxSpacingSample> out;
  out.reserve(trials);
  for (std::size_t t = 0; t < trials; ++t) {
    double m1 = -std::numeric_limits<double>::infinity();
    double m2 = m1;
    for (std::size_t i = 0; i < n; ++i) {
      const double v = normal(rng);
      if (v > m1) {
        m2 = m1;
        m1 = v;
      } else if (v > m2) {
        m2 = v;
      }
    }
    out.push_back(MaxSpacingSample{m1, m2, n, q});
  }
  return out;
}

/// Aggregates over a batch of samples sharing one N.
struct MaxSpacingSummary {
  std::size_t n = 0;
  double q = 0.0;
  double mean_gap = 0.0;        // mean of M_N - q_N
  double sd_gap = 0.0;          // sample sd of M_N - q_N
  double median_max = 0.0;      // median of M_N
  double mean_spacing_scaled = 0.0;  // mean of (M_N - S_N) * q_N
  std::size_t trials = 0;
};

inline MaxSpacingSummary summarize_max_spacing(
    std::span<const MaxSpacingSample> samples) {
  require(!samples.empty(), "summarize_max_spacing: no samples");
  MaxSpacingSummary s;
  s.n = samples.front().n;
  s.q = samples.front().q;
  s.trials = samples.size();
  std::vector<double> maxima;
  maxima.reserve(samples.size());
  double sum = 0.0, sum_sq = 0.0, spacing = 0.0;
  for (const auto& x : samples) {
    require(x.n == s.n, "summarize_max_spacing: mixed N");
    const double gap = x.max - x.q;
    sum += gap;
    sum_sq += gap * gap;
    spacing += (x.max - x.second) * x.q;
    maxima.push_back(x.max);
  }
  const double k = static_cast<double>(samples.size());
  s.mean_gap = sum / k;
  s.sd_gap = k > 1 ? std::sqrt(std::max(0.0, (sum_sq - k * s.mean_gap * s.mean_gap) /
                                                 (k - 1.0)))
                   : 0.0;
  s.mean_spacing_scaled = spacing / k;
  const auto mid = maxima.begin() + static_cast<std::ptrdiff_t>(maxima.size() / 2);
  std::nth_element(maxima.begin(), mid, maxima.end());
  if (maxima.size() % 2 == 1) {
    s.median_max = *mid;
  } else {
    const double upper = *mid;
    const double lower = *std::max_element(maxima.begin(), mid);
    s.median_max = 0.5 * (lower + upper);
  }
  return s;
}

}  // namespace tbon
