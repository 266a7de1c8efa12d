#pragma once

// Config-driven experiment drivers behind the command-line tool. Each driver
// writes its CSV files into the output directory and reports whether every
// run-time invariant held.

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "tbon/arm_identification.hpp"
#include "tbon/bon_gradient.hpp"
#include "tbon/config.hpp"
#include "tbon/gaussian_order_stats.hpp"
#include "tbon/gp_ucb.hpp"
#include "tbon/mock_text_backend.hpp"
#include "tbon/objective_models.hpp"
#include "tbon/orchestrator.hpp"
#include "tbon/summary.hpp"
#include "tbon/synthetic_backend.hpp"

namespace tbon {

namespace fs = std::filesystem;

struct ExperimentReport {
  std::vector<std::string> files;  // relative to the output directory
  bool invariants_ok = true;
  std::vector<std::string> messages;

  void fail(const std::string& why) {
    invariants_ok = false;
    messages.push_back("invariant violated: " + why);
  }
};

/// Thrown when results already exist and overwriting was not requested.
class OutputExists : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

class OutputDir {
 public:
  OutputDir(fs::path dir, ExperimentReport& report) : dir_(std::move(dir)), report_(report) {}

  std::ofstream open(const std::string& name) {
    std::ofstream os(dir_ / name, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("cannot write " + (dir_ / name).string());
    report_.files.push_back(name);
    return os;
  }

 private:
  fs::path dir_;
  ExperimentReport& report_;
};

inline Vector unit_axis(Eigen::Index d, Eigen::Index k) {
  Vector v = Vector::Zero(d);
  v[k] = 1.0;
  return v;
}

inline Box box_from(const RunConfig& cfg, Eigen::Index dim) {
  auto lo = cfg.reals("lower");
  auto hi = cfg.reals("upper");
  if (lo.size() == 1 && dim > 1) lo.assign(static_cast<std::size_t>(dim), lo.front());
  if (hi.size() == 1 && dim > 1) hi.assign(static_cast<std::size_t>(dim), hi.front());
  if (static_cast<Eigen::Index>(lo.size()) != dim || static_cast<Eigen::Index>(hi.size()) != dim)
    throw ConfigError("gpucb.lower/upper: expected " + std::to_string(dim) + " bounds");
  for (std::size_t i = 0; i < lo.size(); ++i)
    if (!(hi[i] > lo[i])) throw ConfigError("gpucb.upper: must exceed gpucb.lower");
  return Box(Eigen::Map<Vector>(lo.data(), dim), Eigen::Map<Vector>(hi.data(), dim));
}

inline ObjectiveModel gpucb_objective(const RunConfig& cfg) {
  SmoothModelParams p;
  p.sigma0 = 0.0;
  const std::string fn = cfg.choice("function");
  if (fn == "sinusoid") {
    p.amplitudes = cfg.reals("amplitudes");
    p.frequencies = cfg.reals("frequencies");
    p.phases = cfg.reals("phases");
    if (p.amplitudes.size() != p.frequencies.size() || p.amplitudes.size() != p.phases.size())
      throw ConfigError("gpucb.amplitudes: amplitudes, frequencies and phases differ in length");
  }
  p.dim = static_cast<Eigen::Index>(cfg.count("dim"));
  return make_smooth_model(fn, p);
}

inline KernelSpec kernel_from(const RunConfig& cfg) {
  const std::string k = cfg.choice("kernel");
  const double l = cfg.real("lengthscale");
  if (k == "se") return KernelSpec::se(l);
  return KernelSpec::matern(k == "matern32" ? 1.5 : 2.5, l);
}

inline void write_regret(std::ostream& os, std::uint64_t seed, const RegretRecord& rec) {
  for (std::size_t t = 0; t < rec.size(); ++t)
    os << seed << ',' << (t + 1) << ',' << format_double(rec.observed[t]) << ','
       << format_double(rec.cumulative_regret[t]) << ','
       << format_double(rec.simple_regret[t]) << '\n';
}

}  // namespace detail

/// Cross-field checks run before any work starts.
inline void validate_run_config(const RunConfig& cfg) {
  const std::string& c = cfg.command;
  if (c == "gpucb") {
    const auto model = detail::gpucb_objective(cfg);
    detail::box_from(cfg, model.dim());
    detail::kernel_from(cfg);
  } else if (c == "identify") {
    if (cfg.count("budget") < cfg.count("arms"))
      throw ConfigError("identify.budget: must be at least identify.arms");
    if (cfg.count("k_worst") > cfg.count("arms"))
      throw ConfigError("identify.k_worst: must not exceed identify.arms");
  } else if (c == "tbon") {
    if (cfg.choice("model") == "linear" && !(cfg.real("sigma0") > 0.0))
      throw ConfigError("tbon.sigma0: must be > 0 for the linear model");
    if (cfg.choice("model") == "linear" && cfg.count("d") < 1)
      throw ConfigError("tbon.d: must be >= 1");
  } else if (c == "summarize") {
    if (cfg.texts("inputs").empty()) throw ConfigError("summarize.inputs: at least one CSV required");
  }
}

inline void run_theorem1(const RunConfig& cfg, detail::OutputDir& out, ExperimentReport& rep) {
  const auto d = static_cast<Eigen::Index>(cfg.count("d"));
  const double eps = cfg.real("epsilon");
  const Vector g = detail::unit_axis(d, 0);
  const Vector h = cfg.flag("h_zero") ? Vector::Zero(d) : detail::unit_axis(d, 1);
  ObjectiveModel model = make_linear_model(g, h, cfg.real("mu0"), cfg.real("sigma0"));
  model.set_validity_radius(eps);
  EffectiveBetaConfig ec;
  ec.epsilon = eps;
  ec.n_values = cfg.counts("n_values");
  ec.trials = cfg.count("trials");
  Rng rng(cfg.seed());
  const auto rows = estimate_effective_beta(model, ec, rng);

  auto os = out.open("theorem1.csv");
  os << "n,beta_hat,q_n,mean_cosine,ci_halfwidth,trials\n";
  for (const auto& r : rows) {
    os << r.n << ',' << format_double(r.beta_hat) << ',' << format_double(r.q_n) << ','
       << format_double(r.mean_cosine) << ',' << format_double(r.ci_halfwidth) << ','
       << r.trials << '\n';
    if (!r.stable) rep.fail("theorem1: unstable beta_hat at n=" + std::to_string(r.n));
  }
  auto asc = out.open("theorem1_ascent.csv");
  asc << "n,q_n,ascent_fraction,trials\n";
  for (const auto& r : rows)
    asc << r.n << ',' << format_double(r.q_n) << ',' << format_double(r.ascent_fraction)
        << ',' << r.trials << '\n';
}

inline void run_maxstats(const RunConfig& cfg, detail::OutputDir& out, ExperimentReport& rep) {
  auto os = out.open("maxstats.csv");
  os << "n,q_n,mean_gap,sd_gap,mean_spacing_scaled\n";
  for (std::size_t n : cfg.counts("n_values")) {
    Rng rng = derive_stream(cfg.seed(), n);
    const auto samples = sample_max_spacing(n, cfg.count("trials"), rng);
    for (const auto& s : samples)
      if (s.max < s.second) rep.fail("maxstats: max below runner-up");
    const auto s = summarize_max_spacing(samples);
    os << n << ',' << format_double(s.q) << ',' << format_double(s.mean_gap) << ','
       << format_double(s.sd_gap) << ',' << format_double(s.mean_spacing_scaled) << '\n';
  }
}

inline void run_capstats(const RunConfig& cfg, detail::OutputDir& out, ExperimentReport&) {
  const auto d = static_cast<Eigen::Index>(cfg.count("d"));
  Rng rng(cfg.seed());
  const auto rows = cap_coverage_stat(UnitDirection(detail::unit_axis(d, 0)),
                                      cfg.counts("n_values"), cfg.count("trials"), rng);
  auto os = out.open("capstats.csv");
  os << "d,n,mean_deficit,se,trials\n";
  for (const auto& r : rows)
    os << d << ',' << r.n << ',' << format_double(r.mean_deficit) << ','
       << format_double(r.se) << ',' << r.trials << '\n';
}

inline void run_gpucb(const RunConfig& cfg, detail::OutputDir& out, ExperimentReport& rep) {
  const ObjectiveModel f = detail::gpucb_objective(cfg);
  const Box box = detail::box_from(cfg, f.dim());
  const double optimum = maximize_on_box(f, box).second;
  GpUcbOptions opt;
  opt.iterations = cfg.count("T");
  opt.noise_sd = cfg.real("noise_sd");
  opt.kernel = detail::kernel_from(cfg);
  opt.schedule.kind = cfg.choice("schedule") == "log" ? UcbSchedule::Kind::logarithmic
                                                      : UcbSchedule::Kind::constant;
  opt.schedule.beta = cfg.real("beta");
  opt.n_starts = cfg.count("n_starts");

  auto os = out.open("gpucb.csv");
  os << "seed,t,y,cum_regret,simple_regret\n";
  std::ofstream base;
  const bool baseline = cfg.flag("baseline");
  if (baseline) {
    base = out.open("gpucb_random.csv");
    base << "seed,t,y,cum_regret,simple_regret\n";
  }
  for (std::uint64_t s = 0; s < cfg.count("seeds"); ++s) {
    Rng rng = derive_stream(cfg.seed(), s, 0);
    const RegretRecord rec = gp_ucb_loop(f, box, opt, rng, optimum);
    if (!rec.invariants_hold()) rep.fail("gpucb: regret monotonicity, seed " + std::to_string(s));
    detail::write_regret(os, s, rec);
    if (baseline) {
      Rng rrng = derive_stream(cfg.seed(), s, 1);
      const RegretRecord rr = random_search_loop(f, box, opt.iterations, opt.noise_sd, rrng, optimum);
      if (!rr.invariants_hold()) rep.fail("gpucb: random-search regret monotonicity");
      detail::write_regret(base, s, rr);
    }
  }
}

inline void run_tournament_bench(const RunConfig& cfg, detail::OutputDir& out,
                                 ExperimentReport& rep) {
  const auto d = static_cast<Eigen::Index>(cfg.count("d"));
  const ObjectiveModel m = make_linear_model(detail::unit_axis(d, 0), Vector::Zero(d), 0.0, 1.0);
  const JudgeModel judge = cfg.choice("judge") == "exact" ? JudgeModel::exact()
                                                          : JudgeModel::noisy(cfg.real("accuracy"));
  const int repeats = static_cast<int>(cfg.count("repeats"));
  auto os = out.open("tournament.csv");
  os << "trial,winner,winner_rank,oracle_index\n";
  for (std::uint64_t t = 0; t < cfg.count("trials"); ++t) {
    Rng rng = derive_stream(cfg.seed(), t);
    const CandidateBatch b = generate_candidates(Vector::Zero(d), 0.1, cfg.count("n"), m, rng);
    const auto win = select_tournament(b, judge, repeats, rng);
    const auto best = select_oracle(b);
    std::size_t rank = 0;
    for (double s : b.scores) rank += s > b.scores[win.index];
    if (judge.kind == JudgeModel::Kind::exact && win.index != best.index)
      rep.fail("tournament: exact judge disagrees with argmax");
    os << t << ',' << win.index << ',' << rank << ',' << best.index << '\n';
  }
}

template <class Traits>
void check_tbon_run(const RunParams& p, const RunResult<Traits>& res, ExperimentReport& rep) {
  for (const auto& traj : res.accepted_scores)
    for (std::size_t t = 1; t < traj.size(); ++t)
      if (traj[t] < traj[t - 1]) rep.fail("tbon: accepted score decreased");
  if (res.counters.evaluations != p.trajectories * (p.iterations + 1))
    rep.fail("tbon: evaluation count differs from J_traj (T + 1)");
  if (res.history.size() != p.trajectories * (p.iterations + 1))
    rep.fail("tbon: history size differs from J_traj (T + 1)");
  if (p.iterations > 0 &&
      res.counters.generations_per_evaluation(p.trajectories) !=
          static_cast<double>(p.candidates_per_step * p.gradient_steps))
    rep.fail("tbon: generations per evaluation differ from N G");
  if (res.reflection.version != p.iterations) rep.fail("tbon: reflection version differs from T");
}

template <class Traits>
void emit_tbon(const TbonRunner<Traits>& runner, const RunResult<Traits>& res,
               detail::OutputDir& out) {
  {
    auto os = out.open("tbon_history.csv");
    const auto rows = runner.rows(res.history);
    write_history_csv(os, rows);
  }
  {
    auto os = out.open("tbon_best.csv");
    const auto rows = runner.best_rows(res);
    write_best_csv(os, rows);
  }
  auto os = out.open("tbon_metrics.csv");
  const auto& p = runner.params();
  os << "metric,value\n"
     << "evaluations," << res.counters.evaluations << '\n'
     << "generations," << res.counters.generations << '\n'
     << "generations_per_evaluation,"
     << format_double(res.counters.generations_per_evaluation(p.trajectories)) << '\n'
     << "reflection_version," << res.reflection.version << '\n'
     << "final_best_score," << format_double(res.best_scores.back()) << '\n';
}

inline RunParams run_params_from(const RunConfig& cfg) {
  RunParams p;
  p.iterations = cfg.count("iterations");
  p.trajectories = cfg.count("trajectories");
  p.gradient_steps = cfg.count("gradient_steps");
  p.candidates_per_step = cfg.count("candidates");
  p.eval_samples = cfg.count("eval_samples");
  p.master_seed = cfg.seed();
  p.selector = cfg.choice("selector") == "tournament" ? SelectorKind::tournament
                                                      : SelectorKind::oracle;
  p.tournament_repeats = static_cast<int>(cfg.count("repeats"));
  return p;
}

inline void run_tbon_cmd(const RunConfig& cfg, detail::OutputDir& out, ExperimentReport& rep) {
  const RunParams p = run_params_from(cfg);
  const JudgeModel judge = cfg.choice("judge") == "exact" ? JudgeModel::exact()
                                                          : JudgeModel::noisy(cfg.real("accuracy"));
  if (cfg.choice("backend") == "synthetic") {
    const auto d = static_cast<Eigen::Index>(cfg.count("d"));
    const double eps = cfg.real("epsilon");
    ObjectiveModel model = [&] {
      if (cfg.choice("model") == "linear") {
        ObjectiveModel m = make_linear_model(detail::unit_axis(d, 0), Vector::Zero(d), 0.0,
                                             cfg.real("sigma0"));
        m.set_validity_radius(std::max(eps, 1.0));
        return m;
      }
      SmoothModelParams sp;
      sp.dim = d;
      sp.sigma0 = cfg.real("sigma0");
      return make_smooth_model(ModelKind::quadratic, sp);
    }();
    synthetic::Critic critic(model, eps, judge);
    synthetic::System system(model);
    synthetic::Evaluator evaluator(model, cfg.real("eval_noise_sd"));
    Backends<synthetic::Traits> b{&critic, &system, &evaluator, {}, synthetic::serialize};
    Rng start_rng = derive_stream(cfg.seed(), 0x5747);
    for (std::size_t j = 0; j < p.trajectories; ++j)
      b.starts.push_back(Box(Vector::Constant(d, -1.0), Vector::Constant(d, 1.0)).sample(start_rng));
    TbonRunner<synthetic::Traits> runner(p, b);
    const auto res = runner.run();
    check_tbon_run(p, res, rep);
    emit_tbon(runner, res, out);
  } else {
    const mock_text::EditTable table(static_cast<int>(cfg.count("edit_table_size")),
                                     derive_seed(cfg.seed(), 0x7ab1e));
    mock_text::Critic critic(table, judge);
    mock_text::System system(table);
    mock_text::Evaluator evaluator;
    Backends<mock_text::Traits> b{&critic, &system, &evaluator, {}, mock_text::serialize};
    for (std::size_t j = 0; j < p.trajectories; ++j)
      b.starts.push_back(std::string(1, static_cast<char>('A' + j % 26)));
    TbonRunner<mock_text::Traits> runner(p, b);
    const auto res = runner.run();
    check_tbon_run(p, res, rep);
    emit_tbon(runner, res, out);
  }
}

inline void run_identify(const RunConfig& cfg, detail::OutputDir& out, ExperimentReport&) {
  const std::size_t arms = cfg.count("arms");
  const double spacing = cfg.real("spacing"), sd = cfg.real("sd");
  IdentifyOptions opt;
  opt.budget = cfg.count("budget");
  opt.k_worst = cfg.count("k_worst");
  opt.delta = cfg.real("delta");
  opt.scale = sd;
  auto os = out.open("identify.csv");
  os << "repetition,best,true_best,worst,worst_exact\n";
  for (std::uint64_t r = 0; r < cfg.count("repetitions"); ++r) {
    Rng rng = derive_stream(cfg.seed(), r);
    auto sample = [&](std::size_t i, Rng& g) {
      return spacing * static_cast<double>(i) + (sd == 0.0 ? 0.0 : sd * standard_normal(g));
    };
    const auto res = identify_best_and_worst(arms, sample, opt, rng);
    std::vector<std::size_t> w = res.worst;
    std::sort(w.begin(), w.end());
    bool exact = w.size() == opt.k_worst;
    for (std::size_t i = 0; exact && i < w.size(); ++i) exact = w[i] == i;
    os << r << ',' << res.best << ',' << (arms - 1) << ',';
    for (std::size_t i = 0; i < res.worst.size(); ++i) os << (i ? ";" : "") << res.worst[i];
    os << ',' << (exact ? 1 : 0) << '\n';
  }
}

inline void run_summarize(const RunConfig& cfg, detail::OutputDir& out, ExperimentReport&) {
  std::vector<CsvTable> tables;
  for (const auto& path : cfg.texts("inputs")) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw SchemaError("cannot read " + path);
    tables.push_back(read_csv(in, path));
  }
  const auto group = cfg.texts("group");
  const auto rows = summarize(tables, group, cfg.texts("metrics"));
  auto os = out.open("summary.csv");
  write_summary_csv(os, group, rows);
}

/// Runs the configured command in `cfg.output_dir`. Refuses to touch a
/// directory holding a manifest from an earlier run unless `force` is set.
/// Writes effective_config.ini and manifest.txt alongside the results.
inline ExperimentReport run_experiment(const RunConfig& cfg, bool force = false) {
  validate_run_config(cfg);
  const fs::path dir(cfg.output_dir);
  if (fs::exists(dir / "manifest.txt") && !force)
    throw OutputExists(
        (dir / "manifest.txt").string() + " exists; pass --force to overwrite");
  fs::create_directories(dir);

  ExperimentReport rep;
  detail::OutputDir out(dir, rep);
  const std::string& c = cfg.command;
  if (c == "theorem1") run_theorem1(cfg, out, rep);
  else if (c == "maxstats") run_maxstats(cfg, out, rep);
  else if (c == "capstats") run_capstats(cfg, out, rep);
  else if (c == "gpucb") run_gpucb(cfg, out, rep);
  else if (c == "tournament") run_tournament_bench(cfg, out, rep);
  else if (c == "tbon") run_tbon_cmd(cfg, out, rep);
  else if (c == "identify") run_identify(cfg, out, rep);
  else if (c == "summarize") run_summarize(cfg, out, rep);
  else throw ConfigError("unknown command: " + c);

  {
    auto os = out.open("effective_config.ini");
    os << emit_config(cfg);
  }
  std::ofstream manifest(dir / "manifest.txt", std::ios::binary | std::ios::trunc);
  for (const auto& f : rep.files) manifest << f << '\n';
  manifest << "manifest.txt\n";
  rep.files.push_back("manifest.txt");
  return rep;
}

}  // namespace tbon
