#pragma once

// T-BoN BO main loop over abstract critic / system / evaluator backends:
// J parallel trajectories, G Best-of-N gradient steps per iteration, one
// costly evaluation per trajectory and iteration, rollback acceptance, shared
// history and a once-per-iteration meta-reflection.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <iostream>
#include <numeric>
#include <optional>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "tbon/core.hpp"
#include "tbon/tournament.hpp"

namespace tbon {

/// A backend cannot provide one of the required operations.
class BackendUnavailable : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// 64-bit FNV-1a.
inline std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

/// Shortest round-trippable decimal form; used for every emitted score.
inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

template <class Traits>
struct Candidate {
  typename Traits::Payload payload;
  typename Traits::Outcome outcome;
};

template <class Traits>
struct HistoryEntry {
  std::size_t iteration;
  std::size_t trajectory;
  Candidate<Traits> candidate;
  double score;
  bool accepted;
};

template <class Traits>
using History = std::vector<HistoryEntry<Traits>>;

template <class Traits>
struct Reflection {
  typename Traits::ReflectionContent content{};
  std::size_t version = 0;
};

template <class Traits>
struct TrajectoryState {
  std::size_t trajectory = 0;
  Candidate<Traits> current;
  double accepted_score = 0.0;
};

/// The four critic operators. Implementations must be safe to call
/// concurrently from different trajectories (all methods are const).
template <class Traits>
class Critic {
 public:
  using Payload = typename Traits::Payload;
  using Edit = typename Traits::Edit;

  virtual ~Critic() = default;
  /// true when the outcome of `first` is preferred over that of `second`.
  virtual bool pairwise_judge(const Candidate<Traits>& first,
                              const Candidate<Traits>& second,
                              const Reflection<Traits>& reflection,
                              Rng& rng) const = 0;
  virtual typename Traits::ReflectionContent meta_reflect(
      const History<Traits>& history) const = 0;
  virtual Edit textual_gradient(const Candidate<Traits>& candidate,
                                const Reflection<Traits>& reflection,
                                Rng& rng) const = 0;
  virtual Payload apply(const Payload& payload, const Edit& edit) const = 0;
};

/// The system map: payload -> outcome.
template <class Traits>
class SystemMap {
 public:
  virtual ~SystemMap() = default;
  virtual typename Traits::Outcome produce(const typename Traits::Payload& payload,
                                           Rng& rng) const = 0;
};

/// Per-sample reward r(y(c, x)) with x drawn from the input law.
template <class Traits>
class Evaluator {
 public:
  virtual ~Evaluator() = default;
  virtual double reward(const Candidate<Traits>& candidate, Rng& rng) const = 0;
  /// When true every reward must lie in [0, 1].
  virtual bool bounded_unit() const { return false; }
};

template <class Traits>
struct Backends {
  const Critic<Traits>* critic = nullptr;
  const SystemMap<Traits>* system = nullptr;
  const Evaluator<Traits>* evaluator = nullptr;
  /// Initial payloads, one per trajectory.
  std::vector<typename Traits::Payload> starts;
  /// Serialized payload for digests.
  std::function<std::string(const typename Traits::Payload&)> serialize;
};

enum class SelectorKind { oracle, tournament };

struct RunParams {
  std::size_t iterations = 10;           // T
  std::size_t trajectories = 4;          // J_traj
  std::size_t gradient_steps = 1;        // G
  std::size_t candidates_per_step = 8;   // N
  std::size_t eval_samples = 8;          // L
  std::uint64_t master_seed = 0;
  SelectorKind selector = SelectorKind::oracle;
  int tournament_repeats = 2;            // K

  void validate() const {
    require(trajectories >= 1, "RunParams: trajectories must be >= 1");
    require(gradient_steps >= 1, "RunParams: gradient_steps must be >= 1");
    require(candidates_per_step >= 1, "RunParams: candidates_per_step must be >= 1");
    require(eval_samples >= 1, "RunParams: eval_samples must be >= 1");
    require(tournament_repeats >= 2 && tournament_repeats % 2 == 0,
            "RunParams: tournament_repeats must be a positive even number");
  }
};

/// Mean of L rewards. Reward-map exceptions propagate and abort the
/// evaluation.
template <class Traits>
double evaluate(const Candidate<Traits>& candidate, const Evaluator<Traits>& evaluator,
                std::size_t samples, Rng& rng) {
  require(samples >= 1, "evaluate: L must be >= 1");
  double sum = 0.0;
  for (std::size_t l = 0; l < samples; ++l) {
    const double r = evaluator.reward(candidate, rng);
    if (!std::isfinite(r)) throw std::runtime_error("evaluate: non-finite reward");
    if (evaluator.bounded_unit() && (r < 0.0 || r > 1.0))
      throw std::runtime_error("evaluate: reward outside the declared [0, 1] range");
    sum += r;
  }
  return sum / static_cast<double>(samples);
}

/// sum_k k * p_k for the score scale 1..5. Probabilities that do not sum to
/// one within 1e-9 are renormalized (a warning goes to std::clog and
/// `renormalized`, when given, is set).
inline double expected_score_from_probs(std::span<const double, 5> probs,
                                        bool* renormalized = nullptr) {
  double total = 0.0;
  for (double p : probs) {
    require(std::isfinite(p) && p >= 0.0,
            "expected_score_from_probs: negative or non-finite probability");
    total += p;
  }
  require(total > 0.0, "expected_score_from_probs: probabilities sum to zero");
  const bool fix = std::abs(total - 1.0) > 1e-9;
  if (fix) std::clog << "warning: score probabilities sum to " << total
                     << "; renormalizing\n";
  if (renormalized) *renormalized = fix;
  double e = 0.0;
  for (std::size_t k = 0; k < 5; ++k) e += static_cast<double>(k + 1) * probs[k];
  return e / (fix ? total : 1.0);
}

/// Same expectation from log-probabilities (softmax over the five scores).
inline double expected_score_from_logprobs(std::span<const double, 5> logprobs) {
  const double top = *std::max_element(logprobs.begin(), logprobs.end());
  std::array<double, 5> p{};
  double z = 0.0;
  for (std::size_t k = 0; k < 5; ++k) z += p[k] = std::exp(logprobs[k] - top);
  for (auto& v : p) v /= z;
  double e = 0.0;
  for (std::size_t k = 0; k < 5; ++k) e += static_cast<double>(k + 1) * p[k];
  return e;
}

/// Keeps the new candidate when new_score >= accepted score, else rolls back.
template <class Traits>
TrajectoryState<Traits> accept_or_rollback(TrajectoryState<Traits> state,
                                           Candidate<Traits> new_candidate,
                                           double new_score) {
  if (new_score >= state.accepted_score) {
    state.current = std::move(new_candidate);
    state.accepted_score = new_score;
  }
  return state;
}

struct RunCounters {
  std::size_t evaluations = 0;
  std::size_t generations = 0;          // candidate outcomes produced by BoN steps
  std::size_t initial_outcomes = 0;
  std::size_t reflections = 0;

  /// Candidate generations per evaluation, excluding the initial scoring.
  double generations_per_evaluation(std::size_t trajectories) const {
    const std::size_t iter_evals = evaluations - trajectories;
    return iter_evals == 0 ? 0.0
                           : static_cast<double>(generations) /
                                 static_cast<double>(iter_evals);
  }
};

/// Flat view of one history entry as written to CSV.
struct HistoryRow {
  std::size_t t;
  std::size_t j;
  double score;
  bool accepted;
  std::string payload_digest;
};

struct BestRow {
  std::size_t t;
  std::size_t j;
  double score;
  std::string payload_digest;
};

inline void write_history_csv(std::ostream& os, std::span<const HistoryRow> rows) {
  os << "t,j,score,accepted_flag,payload_digest\n";
  for (const auto& r : rows)
    os << r.t << ',' << r.j << ',' << format_double(r.score) << ','
       << (r.accepted ? 1 : 0) << ',' << r.payload_digest << '\n';
}

inline void write_best_csv(std::ostream& os, std::span<const BestRow> rows) {
  os << "t,j,score,payload_digest\n";
  for (const auto& r : rows)
    os << r.t << ',' << r.j << ',' << format_double(r.score) << ','
       << r.payload_digest << '\n';
}

/// Raised when a backend fails mid-run; carries the history recorded so far.
class RunAborted : public std::runtime_error {
 public:
  RunAborted(const std::string& what, std::vector<HistoryRow> history)
      : std::runtime_error(what), history_(std::move(history)) {}
  const std::vector<HistoryRow>& history() const noexcept { return history_; }

 private:
  std::vector<HistoryRow> history_;
};

template <class Traits>
struct RunResult {
  History<Traits> history;
  std::vector<std::size_t> best_trajectory;  // j_t^* for t = 0..T
  std::vector<Candidate<Traits>> best_candidates;
  std::vector<double> best_scores;
  Reflection<Traits> reflection;
  RunCounters counters;
  /// accepted_scores[j][t] after the rollback rule at iteration t.
  std::vector<std::vector<double>> accepted_scores;
};

template <class Traits>
class TbonRunner {
 public:
  TbonRunner(RunParams params, Backends<Traits> backends)
      : params_(std::move(params)), b_(std::move(backends)) {
    params_.validate();
    require(b_.critic && b_.system && b_.evaluator,
            "TbonRunner: critic, system and evaluator are required");
    require(b_.starts.size() == params_.trajectories,
            "TbonRunner: need one start payload per trajectory");
    require(static_cast<bool>(b_.serialize), "TbonRunner: serializer missing");
  }

  const RunParams& params() const noexcept { return params_; }
  const RunCounters& counters() const noexcept { return counters_; }

  std::string digest(const typename Traits::Payload& p) const {
    return hex64(fnv1a64(b_.serialize(p)));
  }

  /// Best-of-N choice among candidates with the configured selector.
  std::size_t select(const std::vector<Candidate<Traits>>& cands,
                     const Reflection<Traits>& reflection, Rng& rng) const {
    const Critic<Traits>& critic = *b_.critic;
    auto prefers = [&](std::size_t a, std::size_t c, Rng& r) {
      return critic.pairwise_judge(cands[a], cands[c], reflection, r);
    };
    if (params_.selector == SelectorKind::tournament)
      return run_tournament(cands.size(), prefers, params_.tournament_repeats, rng);
    // sequential king-of-the-hill; equals argmax for an exact judge
    std::size_t best = 0;
    for (std::size_t i = 1; i < cands.size(); ++i)
      if (prefers(i, best, rng)) best = i;
    return best;
  }

  /// G successive Best-of-N steps from the trajectory's current candidate.
  /// Returns the step-G winner; performs no evaluations.
  Candidate<Traits> gradient_phase(const Candidate<Traits>& start,
                                   const Reflection<Traits>& reflection, Rng& rng,
                                   std::size_t& generations) const {
    Candidate<Traits> cur = start;
    for (std::size_t g = 0; g < params_.gradient_steps; ++g) {
      std::vector<Candidate<Traits>> cands;
      cands.reserve(params_.candidates_per_step);
      for (std::size_t i = 0; i < params_.candidates_per_step; ++i) {
        auto edit = b_.critic->textual_gradient(cur, reflection, rng);
        auto payload = b_.critic->apply(cur.payload, edit);
        auto outcome = b_.system->produce(payload, rng);
        cands.push_back(Candidate<Traits>{std::move(payload), std::move(outcome)});
        ++generations;
      }
      const std::size_t win = select(cands, reflection, rng);
      cur = std::move(cands[win]);
    }
    return cur;
  }

  /// Initial scoring of all start payloads (iteration 0).
  std::pair<std::vector<TrajectoryState<Traits>>, History<Traits>> initialize() {
    std::vector<TrajectoryState<Traits>> states;
    History<Traits> delta;
    for (std::size_t j = 0; j < params_.trajectories; ++j) {
      Rng rng = derive_stream(params_.master_seed, 0, j);
      Candidate<Traits> c{b_.starts[j], b_.system->produce(b_.starts[j], rng)};
      ++counters_.initial_outcomes;
      const double s = evaluate(c, *b_.evaluator, params_.eval_samples, rng);
      ++counters_.evaluations;
      delta.push_back(HistoryEntry<Traits>{0, j, c, s, true});
      states.push_back(TrajectoryState<Traits>{j, std::move(c), s});
    }
    return {std::move(states), std::move(delta)};
  }

  /// One iteration t >= 1. The reflection is read-only here; each trajectory
  /// uses its own stream keyed by (seed, t, j) and results merge in j order.
  std::pair<std::vector<TrajectoryState<Traits>>, History<Traits>> run_iteration(
      const std::vector<TrajectoryState<Traits>>& states,
      const Reflection<Traits>& reflection, std::size_t t) {
    require(states.size() == params_.trajectories, "run_iteration: state count mismatch");
    std::vector<TrajectoryState<Traits>> next(states.size());
    History<Traits> delta(states.size());
    std::vector<std::size_t> gens(states.size(), 0);
    for (std::size_t j = 0; j < states.size(); ++j) {
      Rng rng = derive_stream(params_.master_seed, t, j);
      Candidate<Traits> cand = gradient_phase(states[j].current, reflection, rng, gens[j]);
      const double s = evaluate(cand, *b_.evaluator, params_.eval_samples, rng);
      const bool accepted = s >= states[j].accepted_score;
      delta[j] = HistoryEntry<Traits>{t, j, cand, s, accepted};
      next[j] = accept_or_rollback(states[j], std::move(cand), s);
    }
    counters_.evaluations += states.size();
    counters_.generations += std::accumulate(gens.begin(), gens.end(), std::size_t{0});
    return {std::move(next), std::move(delta)};
  }

  std::vector<HistoryRow> rows(const History<Traits>& h) const {
    std::vector<HistoryRow> out;
    out.reserve(h.size());
    for (const auto& e : h)
      out.push_back(HistoryRow{e.iteration, e.trajectory, e.score, e.accepted,
                               digest(e.candidate.payload)});
    return out;
  }

  RunResult<Traits> run() {
    RunResult<Traits> res;
    try {
      auto [states, init] = initialize();
      res.history = std::move(init);
      res.accepted_scores.resize(states.size());
      record_best(states, res);
      for (std::size_t t = 1; t <= params_.iterations; ++t) {
        auto [next, delta] = run_iteration(states, res.reflection, t);
        states = std::move(next);
        res.history.insert(res.history.end(), delta.begin(), delta.end());
        record_best(states, res);
        // barrier: all trajectories of iteration t are complete
        Reflection<Traits> r;
        r.content = b_.critic->meta_reflect(res.history);
        r.version = res.reflection.version + 1;
        res.reflection = std::move(r);
        ++counters_.reflections;
      }
    } catch (const std::exception& e) {
      throw RunAborted(std::string("T-BoN run aborted: ") + e.what(), rows(res.history));
    }
    res.counters = counters_;
    return res;
  }

  std::vector<BestRow> best_rows(const RunResult<Traits>& res) const {
    std::vector<BestRow> out;
    for (std::size_t t = 0; t < res.best_scores.size(); ++t)
      out.push_back(BestRow{t, res.best_trajectory[t], res.best_scores[t],
                            digest(res.best_candidates[t].payload)});
    return out;
  }

 private:
  void record_best(const std::vector<TrajectoryState<Traits>>& states,
                   RunResult<Traits>& res) const {
    std::size_t best = 0;
    for (std::size_t j = 0; j < states.size(); ++j) {
      res.accepted_scores[j].push_back(states[j].accepted_score);
      if (states[j].accepted_score > states[best].accepted_score) best = j;
    }
    res.best_trajectory.push_back(best);
    res.best_candidates.push_back(states[best].current);
    res.best_scores.push_back(states[best].accepted_score);
  }

  RunParams params_;
  Backends<Traits> b_;
  RunCounters counters_;
};

/// (best, worst): indices of the `k` highest and `k` lowest scores (all entries when
/// fewer than 2k exist). Indices refer to `history`.
template <class Entry>
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> extreme_entries(
    const std::vector<Entry>& history, std::size_t k) {
  std::vector<std::size_t> idx(history.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return history[a].score > history[b].score;
  });
  if (idx.size() < 2 * k) {
    std::vector<std::size_t> worst(idx.rbegin(), idx.rend());
    return {idx, worst};
  }
  std::vector<std::size_t> best(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k));
  std::vector<std::size_t> worst(idx.rbegin(), idx.rbegin() + static_cast<std::ptrdiff_t>(k));
  return {best, worst};
}

}  // namespace tbon
