#pragma once

// Embedding-space backend: payloads are points, a textual gradient is a
// uniform sphere direction of radius eps, Apply is the first-order edit, the
// system map draws a noisy quality mu(x) + sigma(x) xi, and the judge compares
// those qualities.

#include <algorithm>
#include <string>
#include <vector>

#include "tbon/bon_gradient.hpp"
#include "tbon/objective_models.hpp"
#include "tbon/orchestrator.hpp"

namespace tbon::synthetic {

struct Outcome {
  double quality = 0.0;
};

struct Edit {
  double epsilon = 0.0;
  UnitDirection direction;
};

struct DigestEntry {
  std::size_t iteration;
  std::size_t trajectory;
  double score;
  bool accepted;
};

/// Best-five / worst-five summary of the history.
struct Digest {
  std::vector<DigestEntry> best;
  std::vector<DigestEntry> worst;
  double mean_score = 0.0;
  std::size_t entries = 0;
};

struct Traits {
  using Payload = Vector;
  using Outcome = synthetic::Outcome;
  using Edit = synthetic::Edit;
  using ReflectionContent = Digest;
};

class Critic final : public tbon::Critic<Traits> {
 public:
  Critic(const ObjectiveModel& model, double epsilon, JudgeModel judge)
      : model_(&model), epsilon_(epsilon), judge_(judge) {
    require(epsilon > 0.0, "synthetic::Critic: epsilon must be positive");
  }

  bool pairwise_judge(const Candidate<Traits>& first, const Candidate<Traits>& second,
                      const Reflection<Traits>&, Rng& rng) const override {
    return judge_.prefers_first(first.outcome.quality, second.outcome.quality, rng);
  }

  Digest meta_reflect(const History<Traits>& history) const override {
    Digest d;
    d.entries = history.size();
    double sum = 0.0;
    for (const auto& e : history) sum += e.score;
    d.mean_score = history.empty() ? 0.0 : sum / static_cast<double>(history.size());
    const auto [best, worst] = extreme_entries(history, 5);
    auto pick = [&](std::size_t i) {
      const auto& e = history[i];
      return DigestEntry{e.iteration, e.trajectory, e.score, e.accepted};
    };
    for (auto i : best) d.best.push_back(pick(i));
    for (auto i : worst) d.worst.push_back(pick(i));
    return d;
  }

  Edit textual_gradient(const Candidate<Traits>&, const Reflection<Traits>&,
                        Rng& rng) const override {
    return Edit{epsilon_, sample_unit_sphere(model_->dim(), 1, rng).front()};
  }

  Vector apply(const Vector& payload, const Edit& edit) const override {
    return apply_edit(payload, edit.epsilon, edit.direction, *model_);
  }

 private:
  const ObjectiveModel* model_;
  double epsilon_;
  JudgeModel judge_;
};

class System final : public SystemMap<Traits> {
 public:
  explicit System(const ObjectiveModel& model) : model_(&model) {}
  Outcome produce(const Vector& x, Rng& rng) const override {
    return Outcome{model_->mu(x) + model_->sigma(x) * standard_normal(rng)};
  }

 private:
  const ObjectiveModel* model_;
};

/// r = mu(x) + noise_sd * zeta per input sample.
class Evaluator final : public tbon::Evaluator<Traits> {
 public:
  Evaluator(const ObjectiveModel& model, double noise_sd)
      : model_(&model), noise_sd_(noise_sd) {
    require(noise_sd >= 0.0, "synthetic::Evaluator: noise_sd must be >= 0");
  }
  double reward(const Candidate<Traits>& c, Rng& rng) const override {
    const double mu = model_->mu(c.payload);
    return noise_sd_ == 0.0 ? mu : mu + noise_sd_ * standard_normal(rng);
  }

 private:
  const ObjectiveModel* model_;
  double noise_sd_;
};

inline std::string serialize(const Vector& x) {
  std::string s;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    if (i) s += ',';
    s += format_double(x[i]);
  }
  return s;
}

}  // namespace tbon::synthetic
