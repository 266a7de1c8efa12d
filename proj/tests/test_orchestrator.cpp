#include <gtest/gtest.h>

#include <array>
#include <sstream>

#include "tbon/mock_text_backend.hpp"
#include "tbon/orchestrator.hpp"
#include "tbon/synthetic_backend.hpp"

using namespace tbon;

namespace {

struct MockRig {
  mock_text::EditTable table{8, 42};
  mock_text::Critic critic{table, JudgeModel::exact()};
  mock_text::System system{table};
  mock_text::Evaluator evaluator;

  Backends<mock_text::Traits> backends(std::size_t j) const {
    Backends<mock_text::Traits> b{&critic, &system, &evaluator, {}, mock_text::serialize};
    for (std::size_t i = 0; i < j; ++i) b.starts.push_back(std::string(1, char('A' + i)));
    return b;
  }
};

RunParams params(std::size_t t, std::size_t j, std::size_t g, std::size_t n,
                 std::uint64_t seed = 1) {
  RunParams p;
  p.iterations = t;
  p.trajectories = j;
  p.gradient_steps = g;
  p.candidates_per_step = n;
  p.eval_samples = 4;
  p.master_seed = seed;
  return p;
}

std::string history_csv(const std::vector<HistoryRow>& rows) {
  std::ostringstream os;
  write_history_csv(os, rows);
  return os.str();
}

// Rewards replayed from a fixed list.
class ScriptedEvaluator final : public Evaluator<mock_text::Traits> {
 public:
  explicit ScriptedEvaluator(std::vector<double> r) : rewards_(std::move(r)) {}
  double reward(const Candidate<mock_text::Traits>&, Rng&) const override {
    return rewards_[next_++ % rewards_.size()];
  }
  bool bounded_unit() const override { return true; }

 private:
  std::vector<double> rewards_;
  mutable std::size_t next_ = 0;
};

// Fails on the k-th edit application.
class FailingCritic final : public Critic<mock_text::Traits> {
 public:
  FailingCritic(const mock_text::Critic& inner, int fail_at) : inner_(inner), left_(fail_at) {}
  bool pairwise_judge(const Candidate<mock_text::Traits>& a, const Candidate<mock_text::Traits>& b,
                      const Reflection<mock_text::Traits>& r, Rng& rng) const override {
    return inner_.pairwise_judge(a, b, r, rng);
  }
  std::vector<std::string> meta_reflect(const History<mock_text::Traits>& h) const override {
    return inner_.meta_reflect(h);
  }
  int textual_gradient(const Candidate<mock_text::Traits>& c,
                       const Reflection<mock_text::Traits>& r, Rng& rng) const override {
    return inner_.textual_gradient(c, r, rng);
  }
  std::string apply(const std::string& p, const int& e) const override {
    if (--left_ == 0) throw BackendUnavailable("apply unavailable");
    return inner_.apply(p, e);
  }

 private:
  const mock_text::Critic& inner_;
  mutable int left_;
};

}  // namespace

TEST(MockText, ScriptedEdits) {
  const mock_text::EditTable table(8, 1);
  EXPECT_EQ(table.apply("A", 3), "A+3");
  EXPECT_EQ(table.apply(table.apply("A", 3), 1), "A+3+1");
  EXPECT_THROW(table.apply("A", 8), BackendUnavailable);
  EXPECT_EQ(mock_text::EditTable::edits_of("A+3+1+12"), (std::vector<int>{3, 1, 12}));
  EXPECT_NEAR(table.quality("A+3+3"), 2.0 * table.weight(3), 1e-15);
}

TEST(ExpectedScore, DocumentedExamples) {
  const std::array<double, 5> uniform{0.2, 0.2, 0.2, 0.2, 0.2};
  const std::array<double, 5> point{0, 0, 0, 0, 1};
  const std::array<double, 5> mixed{0.1, 0.2, 0.3, 0.25, 0.15};
  EXPECT_NEAR(expected_score_from_probs(uniform), 3.0, 1e-12);
  EXPECT_NEAR(expected_score_from_probs(point), 5.0, 1e-12);
  EXPECT_NEAR(expected_score_from_probs(mixed), 3.15, 1e-12);
}

TEST(ExpectedScore, RenormalizesAndRejectsNegatives) {
  const std::array<double, 5> doubled{0.4, 0.4, 0.4, 0.4, 0.4};
  bool fixed = false;
  EXPECT_NEAR(expected_score_from_probs(doubled, &fixed), 3.0, 1e-12);
  EXPECT_TRUE(fixed);
  const std::array<double, 5> neg{-0.1, 0.3, 0.3, 0.3, 0.2};
  EXPECT_THROW(expected_score_from_probs(neg), std::invalid_argument);
  std::array<double, 5> logp{};
  for (std::size_t k = 0; k < 5; ++k) logp[k] = std::log(0.2);
  EXPECT_NEAR(expected_score_from_logprobs(logp), 3.0, 1e-12);
}

TEST(Evaluate, MeanOfRewards) {
  ScriptedEvaluator ev({0.0, 1.0, 1.0, 0.0});
  Candidate<mock_text::Traits> c{"A", {0.0}};
  Rng rng(1);
  EXPECT_DOUBLE_EQ(evaluate(c, ev, 4, rng), 0.5);
  ScriptedEvaluator single({0.7});
  EXPECT_DOUBLE_EQ(evaluate(c, single, 1, rng), 0.7);
  EXPECT_THROW(evaluate(c, single, 0, rng), std::invalid_argument);
  ScriptedEvaluator out_of_range({1.5});
  EXPECT_THROW(evaluate(c, out_of_range, 1, rng), std::runtime_error);
}

TEST(Evaluate, VarianceShrinksLikeOneOverL) {
  SmoothModelParams p;
  p.dim = 2;
  const auto m = make_smooth_model(ModelKind::quadratic, p);
  const synthetic::Evaluator ev(m, 1.0);
  Candidate<synthetic::Traits> c{Vector::Zero(2), {0.0}};
  Rng rng(2);
  auto variance = [&](std::size_t l) {
    double s = 0, ss = 0;
    for (int i = 0; i < 1000; ++i) {
      const double v = evaluate(c, ev, l, rng);
      s += v;
      ss += v * v;
    }
    return (ss - s * s / 1000.0) / 999.0;
  };
  EXPECT_NEAR(variance(1), 1.0, 0.15);
  EXPECT_NEAR(variance(16), 1.0 / 16.0, 0.01);
}

TEST(Rollback, RuleAndTies) {
  TrajectoryState<mock_text::Traits> s{0, {"A", {0.0}}, 0.5};
  const auto kept = accept_or_rollback(s, {"B", {0.0}}, 0.4);
  EXPECT_EQ(kept.current.payload, "A");
  EXPECT_EQ(kept.accepted_score, 0.5);
  const auto tie = accept_or_rollback(s, {"C", {0.0}}, 0.5);
  EXPECT_EQ(tie.current.payload, "C");
}

TEST(Runner, CountsAndReflectionVersion) {
  MockRig rig;
  const auto p = params(5, 3, 2, 4);
  TbonRunner<mock_text::Traits> runner(p, rig.backends(3));
  const auto res = runner.run();
  EXPECT_EQ(res.counters.evaluations, 3u * 6u);
  EXPECT_EQ(res.counters.generations, 3u * 5u * 4u * 2u);
  EXPECT_DOUBLE_EQ(res.counters.generations_per_evaluation(3), 8.0);
  EXPECT_EQ(res.reflection.version, 5u);
  EXPECT_EQ(res.counters.reflections, 5u);
  ASSERT_EQ(res.history.size(), 18u);
  for (std::size_t i = 0; i < res.history.size(); ++i) {
    EXPECT_EQ(res.history[i].iteration, i / 3);
    EXPECT_EQ(res.history[i].trajectory, i % 3);
  }
  EXPECT_EQ(res.best_scores.size(), 6u);
}

TEST(Runner, ZeroIterationsOnlyScoresStarts) {
  MockRig rig;
  TbonRunner<mock_text::Traits> runner(params(0, 2, 1, 4), rig.backends(2));
  const auto res = runner.run();
  EXPECT_EQ(res.history.size(), 2u);
  EXPECT_EQ(res.counters.evaluations, 2u);
  EXPECT_EQ(res.counters.generations, 0u);
  EXPECT_EQ(res.reflection.version, 0u);
  for (const auto& e : res.history) EXPECT_TRUE(e.accepted);
}

TEST(Runner, DegenerateSingleCandidateStep) {
  MockRig rig;
  TbonRunner<mock_text::Traits> runner(params(3, 1, 1, 1), rig.backends(1));
  const auto res = runner.run();
  // each iteration applies exactly one unselected edit to the accepted payload
  EXPECT_EQ(res.counters.generations, 3u);
  for (std::size_t t = 1; t <= 3; ++t)
    EXPECT_EQ(res.history[t].candidate.payload.rfind(res.best_candidates[t - 1].payload, 0), 0u);
  for (std::size_t t = 1; t <= 3; ++t)
    EXPECT_EQ(mock_text::EditTable::edits_of(res.history[t].candidate.payload).size(),
              mock_text::EditTable::edits_of(res.best_candidates[t - 1].payload).size() + 1);
}

TEST(Runner, AcceptedScoresNeverDecrease) {
  MockRig rig;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    auto p = params(6, 2, 1 + seed % 2, 1 + seed % 5, seed);
    p.selector = seed % 2 ? SelectorKind::tournament : SelectorKind::oracle;
    TbonRunner<mock_text::Traits> runner(p, rig.backends(2));
    const auto res = runner.run();
    for (const auto& traj : res.accepted_scores)
      for (std::size_t t = 1; t < traj.size(); ++t) EXPECT_GE(traj[t], traj[t - 1]);
    for (std::size_t t = 1; t < res.best_scores.size(); ++t)
      EXPECT_GE(res.best_scores[t], res.best_scores[t - 1]);
  }
}

TEST(Runner, RejectedCandidatesStayInHistory) {
  MockRig rig;
  TbonRunner<mock_text::Traits> runner(params(20, 2, 1, 2, 5), rig.backends(2));
  const auto res = runner.run();
  std::size_t rejected = 0;
  for (const auto& e : res.history) rejected += !e.accepted;
  EXPECT_GT(rejected, 0u);
  EXPECT_EQ(res.history.size(), 42u);
}

TEST(Runner, SeededRunsAreByteIdentical) {
  MockRig rig;
  auto p = params(8, 3, 2, 4, 77);
  p.selector = SelectorKind::tournament;
  TbonRunner<mock_text::Traits> a(p, rig.backends(3)), b(p, rig.backends(3));
  const auto ra = a.run();
  const auto rb = b.run();
  EXPECT_EQ(history_csv(a.rows(ra.history)), history_csv(b.rows(rb.history)));
  p.master_seed = 78;
  TbonRunner<mock_text::Traits> c(p, rig.backends(3));
  EXPECT_NE(history_csv(a.rows(ra.history)), history_csv(c.rows(c.run().history)));
}

TEST(Runner, BackendFailureAbortsWithHistory) {
  MockRig rig;
  FailingCritic critic(rig.critic, 10);
  auto b = rig.backends(2);
  b.critic = &critic;
  TbonRunner<mock_text::Traits> runner(params(5, 2, 1, 4), b);
  try {
    runner.run();
    FAIL() << "expected RunAborted";
  } catch (const RunAborted& e) {
    // initial scoring and iteration 1 complete before the 10th apply
    EXPECT_EQ(e.history().size(), 4u);
  }
}

TEST(Runner, RejectsInvalidParams) {
  MockRig rig;
  EXPECT_THROW(TbonRunner<mock_text::Traits>(params(1, 2, 1, 4), rig.backends(1)),
               std::invalid_argument);
  auto p = params(1, 1, 1, 4);
  p.tournament_repeats = 3;
  EXPECT_THROW(TbonRunner<mock_text::Traits>(p, rig.backends(1)), std::invalid_argument);
  p = params(1, 1, 0, 4);
  EXPECT_THROW(TbonRunner<mock_text::Traits>(p, rig.backends(1)), std::invalid_argument);
}

TEST(Synthetic, NoiselessHillClimbIsMonotone) {
  SmoothModelParams sp;
  sp.dim = 3;
  sp.sigma0 = 0.0;
  const auto m = make_smooth_model(ModelKind::quadratic, sp);
  synthetic::Critic critic(m, 0.05, JudgeModel::exact());
  synthetic::System system(m);
  synthetic::Evaluator ev(m, 0.0);
  Backends<synthetic::Traits> b{&critic, &system, &ev, {Vector::Constant(3, 0.5)},
                                synthetic::serialize};
  TbonRunner<synthetic::Traits> runner(params(30, 1, 1, 1), b);
  const auto res = runner.run();
  const auto& s = res.accepted_scores[0];
  for (std::size_t t = 1; t < s.size(); ++t) EXPECT_GE(s[t], s[t - 1]);
  for (std::size_t t = 0; t < s.size(); ++t)
    EXPECT_DOUBLE_EQ(s[t], m.mu(res.best_candidates[t].payload));
}

TEST(Synthetic, OracleRunImprovesOnLinearModel) {
  const auto m = make_linear_model(Vector::Unit(4, 0), Vector::Zero(4), 0.0, 0.05);
  synthetic::Critic critic(m, 0.05, JudgeModel::exact());
  synthetic::System system(m);
  synthetic::Evaluator ev(m, 0.01);
  Backends<synthetic::Traits> b{&critic, &system, &ev, {Vector::Zero(4), Vector::Zero(4)},
                                synthetic::serialize};
  TbonRunner<synthetic::Traits> runner(params(20, 2, 2, 8), b);
  const auto res = runner.run();
  EXPECT_GE(res.best_scores.back(), res.best_scores.front());
  EXPECT_GT(res.best_scores.back(), 0.5);
}

TEST(Synthetic, ApplyIsFirstOrderEdit) {
  const auto m = make_linear_model(Vector::Unit(2, 0), Vector::Zero(2), 0.0, 1.0);
  synthetic::Critic critic(m, 0.1, JudgeModel::exact());
  const UnitDirection u(Vector::Unit(2, 1));
  EXPECT_TRUE(critic.apply(Vector::Zero(2), {0.1, u}).isApprox(0.1 * u.coords()));
}

TEST(Synthetic, DigestHoldsBestAndWorstFive) {
  const auto m = make_linear_model(Vector::Unit(2, 0), Vector::Zero(2), 0.0, 1.0);
  synthetic::Critic critic(m, 0.1, JudgeModel::exact());
  History<synthetic::Traits> h;
  const std::vector<double> scores{3, 9, 1, 7, 5, 0, 8, 2, 6, 4};
  for (std::size_t i = 0; i < scores.size(); ++i)
    h.push_back({i, 0, {Vector::Zero(2), {0.0}}, scores[i], true});
  const auto d = critic.meta_reflect(h);
  ASSERT_EQ(d.best.size(), 5u);
  ASSERT_EQ(d.worst.size(), 5u);
  for (std::size_t k = 0; k < 5; ++k) {
    EXPECT_EQ(d.best[k].score, 9.0 - static_cast<double>(k));
    EXPECT_EQ(d.worst[k].score, static_cast<double>(k));
  }
  EXPECT_DOUBLE_EQ(d.mean_score, 4.5);
  h.resize(6);
  const auto small = critic.meta_reflect(h);
  EXPECT_EQ(small.best.size(), 6u);
  EXPECT_EQ(small.worst.size(), 6u);
}

TEST(Digest, Fnv1aKnownValues) {
  EXPECT_EQ(hex64(fnv1a64("")), "cbf29ce484222325");
  EXPECT_EQ(hex64(fnv1a64("a")), "af63dc4c8601ec8c");
}
