#pragma once

// Scripted stand-in for an LLM critic. Payloads are token strings such as
// "A+3+1"; edit k appends "+k". Every edit index carries a hidden weight drawn
// once from the table seed, the outcome quality of a payload is the sum of its
// edit weights, and rewards are Bernoulli(logistic(quality)) so scores live
// in [0, 1].

#include <cmath>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "tbon/bon_gradient.hpp"
#include "tbon/orchestrator.hpp"

namespace tbon::mock_text {

struct Outcome {
  double quality = 0.0;
};

struct Traits {
  using Payload = std::string;
  using Outcome = mock_text::Outcome;
  using Edit = int;
  using ReflectionContent = std::vector<std::string>;  // rule strings
};

/// Seeded (payload, edit index) -> payload lookup with per-edit weights.
class EditTable {
 public:
  EditTable(int size, std::uint64_t seed) : weights_(static_cast<std::size_t>(size)) {
    require(size >= 1, "EditTable: size must be >= 1");
    Rng rng(seed);
    std::normal_distribution<double> w(0.0, 0.5);
    for (auto& v : weights_) v = w(rng);
  }

  int size() const noexcept { return static_cast<int>(weights_.size()); }
  double weight(int k) const { return weights_.at(static_cast<std::size_t>(k)); }

  std::string apply(const std::string& payload, int edit) const {
    if (edit < 0 || edit >= size()) throw BackendUnavailable("EditTable: unknown edit index");
    return payload + "+" + std::to_string(edit);
  }

  /// Edit indices recorded in a payload, in order.
  static std::vector<int> edits_of(const std::string& payload) {
    std::vector<int> out;
    std::size_t pos = payload.find('+');
    while (pos != std::string::npos) {
      const std::size_t next = payload.find('+', pos + 1);
      out.push_back(std::stoi(payload.substr(pos + 1, next - pos - 1)));
      pos = next;
    }
    return out;
  }

  double quality(const std::string& payload) const {
    double q = 0.0;
    for (int k : edits_of(payload)) q += weight(k);
    return q;
  }

 private:
  std::vector<double> weights_;
};

class Critic final : public tbon::Critic<Traits> {
 public:
  Critic(const EditTable& table, JudgeModel judge) : table_(&table), judge_(judge) {}

  bool pairwise_judge(const Candidate<Traits>& first, const Candidate<Traits>& second,
                      const Reflection<Traits>&, Rng& rng) const override {
    return judge_.prefers_first(first.outcome.quality, second.outcome.quality, rng);
  }

  /// "prefer +k" for edits seen only among the best five entries,
  /// "avoid +k" for edits seen only among the worst five.
  std::vector<std::string> meta_reflect(const History<Traits>& history) const override {
    const auto [best, worst] = extreme_entries(history, 5);
    std::set<int> in_best, in_worst;
    for (auto i : best)
      for (int k : EditTable::edits_of(history[i].candidate.payload)) in_best.insert(k);
    for (auto i : worst)
      for (int k : EditTable::edits_of(history[i].candidate.payload)) in_worst.insert(k);
    std::vector<std::string> rules;
    for (int k : in_best)
      if (!in_worst.count(k)) rules.push_back("prefer +" + std::to_string(k));
    for (int k : in_worst)
      if (!in_best.count(k)) rules.push_back("avoid +" + std::to_string(k));
    return rules;
  }

  /// Uniform over edits the reflection does not ask to avoid.
  int textual_gradient(const Candidate<Traits>&, const Reflection<Traits>& reflection,
                       Rng& rng) const override {
    std::vector<int> allowed;
    for (int k = 0; k < table_->size(); ++k) {
      const std::string rule = "avoid +" + std::to_string(k);
      bool avoided = false;
      for (const auto& r : reflection.content) avoided = avoided || r == rule;
      if (!avoided) allowed.push_back(k);
    }
    if (allowed.empty())
      for (int k = 0; k < table_->size(); ++k) allowed.push_back(k);
    std::uniform_int_distribution<std::size_t> pick(0, allowed.size() - 1);
    return allowed[pick(rng)];
  }

  std::string apply(const std::string& payload, const int& edit) const override {
    return table_->apply(payload, edit);
  }

 private:
  const EditTable* table_;
  JudgeModel judge_;
};

class System final : public SystemMap<Traits> {
 public:
  explicit System(const EditTable& table) : table_(&table) {}
  Outcome produce(const std::string& payload, Rng&) const override {
    return Outcome{table_->quality(payload)};
  }

 private:
  const EditTable* table_;
};

class Evaluator final : public tbon::Evaluator<Traits> {
 public:
  double reward(const Candidate<Traits>& c, Rng& rng) const override {
    const double p = 1.0 / (1.0 + std::exp(-c.outcome.quality));
    return std::bernoulli_distribution(p)(rng) ? 1.0 : 0.0;
  }
  bool bounded_unit() const override { return true; }
};

inline std::string serialize(const std::string& s) { return s; }

}  // namespace tbon::mock_text
