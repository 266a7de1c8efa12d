#pragma once

// Best-of-N gradient step in embedding space plus the statistics used to check
// that the selected direction tracks the UCB gradient g + q_N h.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <vector>

#include "tbon/core.hpp"
#include "tbon/gaussian_order_stats.hpp"
#include "tbon/objective_models.hpp"
#include "tbon/tournament.hpp"

namespace tbon {

/// N edits of one base point with their noisy scores
/// Y_i = mu(x_i) + sigma(x_i) * xi_i.
struct CandidateBatch {
  Vector base;
  double epsilon = 0.0;
  std::vector<UnitDirection> directions;
  std::vector<Vector> points;
  std::vector<double> noise;
  std::vector<double> scores;

  std::size_t size() const noexcept { return scores.size(); }
};

struct SelectionResult {
  std::size_t index;
  UnitDirection direction;
  Vector step;
};

struct JudgeModel {
  enum class Kind { exact, noisy };
  Kind kind = Kind::exact;
  double accuracy = 1.0;

  static JudgeModel exact() { return {Kind::exact, 1.0}; }
  static JudgeModel noisy(double p) {
    require(p > 0.5 && p <= 1.0, "JudgeModel: accuracy must lie in (0.5, 1]");
    return {Kind::noisy, p};
  }

  /// Whether the judge prefers the item with true score `first` over the one
  /// with `second`. Each query errs independently with probability 1 - p.
  bool prefers_first(double first, double second, Rng& rng) const {
    bool truth;
    if (first == second)
      truth = std::bernoulli_distribution(0.5)(rng);
    else
      truth = first > second;
    if (kind == Kind::exact || accuracy >= 1.0) return truth;
    return std::bernoulli_distribution(accuracy)(rng) ? truth : !truth;
  }
};

struct TournamentConfig {
  int repeats = 2;
  std::uint64_t seed = 0;
};

inline CandidateBatch generate_candidates(const Vector& base, double epsilon,
                                          std::size_t n,
                                          const ObjectiveModel& model,
                                          Rng& rng) {
  require(n >= 1, "generate_candidates: n must be >= 1");
  require(std::isfinite(epsilon) && epsilon > 0.0,
          "generate_candidates: epsilon must be positive");
  CandidateBatch b;
  b.base = base;
  b.epsilon = epsilon;
  b.directions = sample_unit_sphere(model.dim(), n, rng);
  b.noise.resize(n);
  for (auto& xi : b.noise) xi = standard_normal(rng);
  b.points.reserve(n);
  b.scores.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    b.points.push_back(apply_edit(base, epsilon, b.directions[i], model));
    const Vector& x = b.points.back();
    b.scores.push_back(model.mu(x) + model.sigma(x) * b.noise[i]);
  }
  return b;
}

inline SelectionResult make_selection(const CandidateBatch& batch,
                                      std::size_t index) {
  return SelectionResult{index, batch.directions[index],
                         batch.points[index] - batch.base};
}

/// argmax of the scores, lowest index on ties.
inline SelectionResult select_oracle(const CandidateBatch& batch) {
  require(batch.size() >= 1, "select_oracle: empty batch");
  std::size_t best = 0;
  for (std::size_t i = 1; i < batch.size(); ++i)
    if (batch.scores[i] > batch.scores[best]) best = i;
  return make_selection(batch, best);
}

inline SelectionResult select_tournament(const CandidateBatch& batch,
                                         const JudgeModel& judge, int repeats,
                                         Rng& rng) {
  require(batch.size() >= 1, "select_tournament: empty batch");
  auto prefers = [&](std::size_t a, std::size_t b, Rng& r) {
    return judge.prefers_first(batch.scores[a], batch.scores[b], r);
  };
  return make_selection(batch, run_tournament(batch.size(), prefers, repeats, rng));
}

inline SelectionResult select_tournament(const CandidateBatch& batch,
                                         const JudgeModel& judge,
                                         const TournamentConfig& cfg) {
  Rng rng(cfg.seed);
  return select_tournament(batch, judge, cfg.repeats, rng);
}

using Selector = std::function<SelectionResult(const CandidateBatch&, Rng&)>;

inline Selector oracle_selector() {
  return [](const CandidateBatch& b, Rng&) { return select_oracle(b); };
}

inline Selector tournament_selector(JudgeModel judge, int repeats) {
  require(repeats >= 2 && repeats % 2 == 0,
          "tournament_selector: repeats must be a positive even number");
  return [judge, repeats](const CandidateBatch& b, Rng& rng) {
    return select_tournament(b, judge, repeats, rng);
  };
}

inline SelectionResult bon_gradient_step(const Vector& base, double epsilon,
                                         std::size_t n,
                                         const ObjectiveModel& model,
                                         const Selector& selector, Rng& rng) {
  const CandidateBatch batch = generate_candidates(base, epsilon, n, model, rng);
  return selector(batch, rng);
}

// ---------------------------------------------------------------------------
// Direction-law statistics

struct EffectiveBetaRow {
  std::size_t n = 0;
  double beta_hat = 0.0;      // <mean u, h> / <mean u, g>; NaN when unstable
  double q_n = 0.0;
  double mean_cosine = 0.0;   // mean of u . (g + q_n h) / ||g + q_n h||
  double ci_halfwidth = 0.0;  // 1.96 * sd / sqrt(trials) of the cosine
  double ascent_fraction = 0.0;  // share with A_{q_n}(x + step) >= A_{q_n}(x)
  double mean_g_projection = 0.0;  // <mean u, g>
  std::size_t trials = 0;
  bool stable = true;
};

struct EffectiveBetaConfig {
  Vector base;  // empty means origin
  double epsilon = 0.05;
  std::vector<std::size_t> n_values;
  std::size_t trials = 2000;
};

/// Runs `trials` oracle Best-of-N steps per n on a linear model with g ⟂ h
/// (||g|| = 1, ||h|| in {0, 1}) and summarizes the mean selected direction.
/// Trial k for a given n draws from a stream keyed by (seed, n, k).
inline std::vector<EffectiveBetaRow> estimate_effective_beta(
    const ObjectiveModel& model, const EffectiveBetaConfig& cfg, Rng& rng) {
  require(model.linear_terms().has_value(),
          "estimate_effective_beta: requires the linear backend");
  const auto& [g, h] = *model.linear_terms();
  require(std::abs(g.norm() - 1.0) <= 1e-9, "estimate_effective_beta: ||g|| != 1");
  const double hn = h.norm();
  require(hn == 0.0 || std::abs(hn - 1.0) <= 1e-9,
          "estimate_effective_beta: ||h|| must be 0 or 1");
  require(std::abs(g.dot(h)) <= 1e-9, "estimate_effective_beta: g and h not orthogonal");
  require(!cfg.n_values.empty() && cfg.trials >= 1,
          "estimate_effective_beta: empty n list or zero trials");

  const Vector base = cfg.base.size() == 0 ? Vector::Zero(model.dim()) : cfg.base;
  const std::uint64_t master = rng();
  const Selector oracle = oracle_selector();
  std::vector<EffectiveBetaRow> rows;
  for (std::size_t n : cfg.n_values) {
    require(n >= 2, "estimate_effective_beta: n must be >= 2");
    EffectiveBetaRow row;
    row.n = n;
    row.q_n = beta_of_n(static_cast<double>(n));
    row.trials = cfg.trials;
    const Vector target_raw = g + row.q_n * h;
    const Vector target = target_raw / target_raw.norm();
    const double a0 = model.acquisition(base, row.q_n);

    Vector mean_u = Vector::Zero(model.dim());
    double cos_sum = 0.0, cos_sq = 0.0;
    std::size_t ascents = 0;
    for (std::size_t k = 0; k < cfg.trials; ++k) {
      Rng trial_rng = derive_stream(master, n, k);
      const SelectionResult sel =
          bon_gradient_step(base, cfg.epsilon, n, model, oracle, trial_rng);
      mean_u += sel.direction.coords();
      const double c = sel.direction.dot(target);
      cos_sum += c;
      cos_sq += c * c;
      if (model.acquisition(base + sel.step, row.q_n) >= a0) ++ascents;
    }
    const double t = static_cast<double>(cfg.trials);
    mean_u /= t;
    row.mean_cosine = cos_sum / t;
    const double var =
        t > 1 ? std::max(0.0, (cos_sq - t * row.mean_cosine * row.mean_cosine) / (t - 1))
              : 0.0;
    row.ci_halfwidth = 1.96 * std::sqrt(var / t);
    row.ascent_fraction = static_cast<double>(ascents) / t;
    row.mean_g_projection = mean_u.dot(g);
    if (hn == 0.0) {
      row.beta_hat = 0.0;
    } else if (std::abs(row.mean_g_projection) < 1e-6) {
      row.beta_hat = std::numeric_limits<double>::quiet_NaN();
      row.stable = false;
    } else {
      row.beta_hat = mean_u.dot(h) / row.mean_g_projection;
    }
    rows.push_back(row);
  }
  return rows;
}

struct CapCoverageRow {
  std::size_t n = 0;
  double mean_deficit = 0.0;
  double se = 0.0;
  std::size_t trials = 0;
};

/// Mean of 1 - max_i v.U_i over `trials` draws of n uniform directions.
inline std::vector<CapCoverageRow> cap_coverage_stat(
    const UnitDirection& v, const std::vector<std::size_t>& n_values,
    std::size_t trials, Rng& rng) {
  const Eigen::Index d = v.dim();
  require(d >= 2, "cap_coverage_stat: d must be >= 2");
  require(trials >= 1, "cap_coverage_stat: trials must be >= 1");
  const std::uint64_t master = rng();
  std::vector<CapCoverageRow> rows;
  for (std::size_t n : n_values) {
    require(n >= 1, "cap_coverage_stat: n must be >= 1");
    double sum = 0.0, sum_sq = 0.0;
    for (std::size_t k = 0; k < trials; ++k) {
      Rng trial_rng = derive_stream(master, n, k);
      double best = -1.0;
      for (const auto& u : sample_unit_sphere(d, n, trial_rng))
        best = std::max(best, v.dot(u.coords()));
      const double deficit = 1.0 - best;
      sum += deficit;
      sum_sq += deficit * deficit;
    }
    const double t = static_cast<double>(trials);
    CapCoverageRow row{n, sum / t, 0.0, trials};
    if (trials > 1)
      row.se = std::sqrt(std::max(0.0, (sum_sq - t * row.mean_deficit * row.mean_deficit) /
                                           (t - 1)) / t);
    rows.push_back(row);
  }
  return rows;
}

struct ThinBandCount {
  std::size_t band = 0;           // xi_i >= M_N - delta
  std::size_t band_and_cap = 0;   // ... and v.u_i >= 1 - eta
};

inline ThinBandCount thin_band_census(const CandidateBatch& batch,
                                      const UnitDirection& v, double delta,
                                      double eta) {
  require(batch.size() >= 1, "thin_band_census: empty batch");
  require(delta >= 0.0 && eta >= 0.0, "thin_band_census: negative width");
  const double top = *std::max_element(batch.noise.begin(), batch.noise.end());
  ThinBandCount c;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    if (batch.noise[i] >= top - delta) {
      ++c.band;
      if (v.dot(batch.directions[i].coords()) >= 1.0 - eta) ++c.band_and_cap;
    }
  }
  return c;
}

}  // namespace tbon
