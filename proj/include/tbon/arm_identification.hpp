#pragma once

// Best-arm and worst-k-arm identification by successive elimination, with the
// two objectives refined in alternating rounds under a shared sample budget.

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <vector>

#include "tbon/core.hpp"

namespace tbon {

struct IdentifyOptions {
  std::size_t budget = 5000;
  std::size_t k_worst = 5;
  double delta = 0.05;
  /// Sub-Gaussian scale of one reward. For rewards bounded in [lo, hi] use
  /// (hi - lo) / 2, which turns the radius below into Hoeffding's bound.
  double scale = 0.5;

  static double scale_for_range(double lo, double hi) {
    require(hi >= lo, "IdentifyOptions: empty score range");
    return 0.5 * (hi - lo);
  }
};

struct IdentifyResult {
  std::size_t best = 0;
  std::vector<std::size_t> worst;  // ascending estimated mean
  std::vector<std::size_t> pulls;
  std::vector<double> means;
  std::size_t samples_used = 0;
};

/// `sample(arm, rng)` draws one reward. Every arm is sampled once, then rounds
/// alternate between the arms still contending for best and the arms whose
/// worst-k membership is undecided. Confidence radius after n pulls:
///   scale * sqrt(2 ln(4 K n^2 / delta) / n).
inline IdentifyResult identify_best_and_worst(
    std::size_t arms, const std::function<double(std::size_t, Rng&)>& sample,
    const IdentifyOptions& opt, Rng& rng) {
  require(arms >= 1, "identify_best_and_worst: need at least one arm");
  require(opt.k_worst >= 1 && opt.k_worst <= arms,
          "identify_best_and_worst: k_worst must lie in [1, arms]");
  require(opt.budget >= arms, "identify_best_and_worst: budget smaller than arm count");
  require(opt.delta > 0.0 && opt.delta < 1.0, "identify_best_and_worst: delta in (0, 1)");
  require(opt.scale >= 0.0, "identify_best_and_worst: negative scale");

  IdentifyResult res;
  res.pulls.assign(arms, 0);
  std::vector<double> sums(arms, 0.0);
  auto pull = [&](std::size_t i) {
    sums[i] += sample(i, rng);
    ++res.pulls[i];
    ++res.samples_used;
  };
  for (std::size_t i = 0; i < arms; ++i) pull(i);

  const double k_arms = static_cast<double>(arms);
  auto radius = [&](std::size_t i) {
    const double n = static_cast<double>(res.pulls[i]);
    return opt.scale * std::sqrt(2.0 * std::log(4.0 * k_arms * n * n / opt.delta) / n);
  };

  std::vector<double> mean(arms), lcb(arms), ucb(arms);
  auto refresh = [&] {
    for (std::size_t i = 0; i < arms; ++i) {
      mean[i] = sums[i] / static_cast<double>(res.pulls[i]);
      const double r = radius(i);
      lcb[i] = mean[i] - r;
      ucb[i] = mean[i] + r;
    }
  };
  auto best_contenders = [&] {
    const double top_lcb = *std::max_element(lcb.begin(), lcb.end());
    std::vector<std::size_t> c;
    for (std::size_t i = 0; i < arms; ++i)
      if (ucb[i] >= top_lcb) c.push_back(i);
    return c;
  };
  // arm i is surely in the worst k when at least arms - k arms sit above it,
  // surely outside when at least k arms sit below it
  auto worst_status = [&](std::size_t i) {
    std::size_t above = 0, below = 0;
    for (std::size_t j = 0; j < arms; ++j) {
      if (j == i) continue;
      if (lcb[j] > ucb[i]) ++above;
      if (ucb[j] < lcb[i]) ++below;
    }
    if (above >= arms - opt.k_worst) return -1;
    if (below >= opt.k_worst) return 1;
    return 0;
  };
  auto worst_undecided = [&] {
    std::vector<std::size_t> u;
    if (opt.k_worst == arms) return u;
    for (std::size_t i = 0; i < arms; ++i)
      if (worst_status(i) == 0) u.push_back(i);
    return u;
  };

  bool best_round = true;
  while (res.samples_used < opt.budget) {
    refresh();
    const auto contenders = best_contenders();
    const auto undecided = worst_undecided();
    const bool best_done = contenders.size() <= 1;
    const bool worst_done = undecided.empty();
    if (best_done && worst_done) break;
    const std::vector<std::size_t>& round =
        (best_round && !best_done) || worst_done ? contenders : undecided;
    for (std::size_t i : round) {
      if (res.samples_used >= opt.budget) break;
      pull(i);
    }
    best_round = !best_round;
  }

  refresh();
  res.means = mean;
  const auto contenders = best_contenders();
  res.best = contenders.front();
  for (std::size_t i : contenders)
    if (mean[i] > mean[res.best]) res.best = i;

  std::vector<std::size_t> surely_in, rest;
  for (std::size_t i = 0; i < arms; ++i) {
    const int s = opt.k_worst == arms ? -1 : worst_status(i);
    (s == -1 ? surely_in : rest).push_back(i);
  }
  auto by_mean = [&](std::size_t a, std::size_t b) {
    return mean[a] < mean[b] || (mean[a] == mean[b] && a < b);
  };
  std::sort(surely_in.begin(), surely_in.end(), by_mean);
  std::sort(rest.begin(), rest.end(), by_mean);
  res.worst = surely_in;
  for (std::size_t i : rest) {
    if (res.worst.size() >= opt.k_worst) break;
    res.worst.push_back(i);
  }
  res.worst.resize(std::min(res.worst.size(), opt.k_worst));
  std::sort(res.worst.begin(), res.worst.end(), by_mean);
  return res;
}

}  // namespace tbon
