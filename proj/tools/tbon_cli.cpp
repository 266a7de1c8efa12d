// Command-line front end: one subcommand per experiment.
//
// Settings are resolved in increasing precedence: built-in defaults, the
// --config file, the TBON_OUTPUT_DIR environment variable (output_dir only),
// then command-line flags.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "tbon/experiments.hpp"

namespace {

enum ExitCode { kOk = 0, kInvariant = 1, kConfig = 2, kExists = 3, kRuntime = 4 };

struct CommonFlags {
  std::string config_path;
  std::vector<std::string> sets;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> output_dir;
  bool force = false;
  std::vector<std::string> inputs;
  std::vector<std::string> group;
};

void add_common(CLI::App* sub, CommonFlags& f) {
  sub->add_option("-c,--config", f.config_path, "INI config file")->check(CLI::ExistingFile);
  sub->add_option("-s,--set", f.sets, "override a field, key=value (repeatable)");
  sub->add_option("--seed", f.seed, "master seed");
  sub->add_option("-o,--output-dir", f.output_dir, "output directory");
  sub->add_flag("-f,--force", f.force, "overwrite results of an earlier run");
}

std::string read_file(const std::string& path) {
  if (path.empty()) return {};
  std::ifstream in(path, std::ios::binary);
  if (!in) throw tbon::ConfigError("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string join(const std::vector<std::string>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + v[i];
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Best-of-N textual gradients and GP-UCB experiments"};
  app.require_subcommand(1);
  CommonFlags flags;
  const std::vector<std::pair<std::string, std::string>> commands{
      {"theorem1", "effective exploration weight of Best-of-N selection"},
      {"maxstats", "maximum and top spacing of Gaussian samples"},
      {"capstats", "spherical-cap coverage of random directions"},
      {"gpucb", "GP-UCB against random search on a benchmark"},
      {"tournament", "knockout-tournament selection accuracy"},
      {"tbon", "tournament Best-of-N optimization run"},
      {"identify", "best and worst-k arm identification"},
      {"summarize", "mean and standard error of CSV columns"},
  };
  for (const auto& [name, help] : commands) {
    auto* sub = app.add_subcommand(name, help);
    add_common(sub, flags);
    if (name == "summarize") {
      sub->add_option("-i,--input", flags.inputs, "input CSV (repeatable)");
      sub->add_option("-g,--group", flags.group, "grouping column (repeatable)");
    }
  }
  CLI11_PARSE(app, argc, argv);
  const std::string command = app.get_subcommands().front()->get_name();

  try {
    tbon::Overrides ov;
    if (const char* env = std::getenv("TBON_OUTPUT_DIR"); env && *env)
      ov.emplace_back("output_dir", env);
    for (const auto& s : flags.sets) {
      const auto eq = s.find('=');
      if (eq == std::string::npos || eq == 0)
        throw tbon::ConfigError("--set expects key=value, got '" + s + "'");
      ov.emplace_back(s.substr(0, eq), s.substr(eq + 1));
    }
    if (!flags.inputs.empty()) ov.emplace_back("inputs", join(flags.inputs));
    if (!flags.group.empty()) ov.emplace_back("group", join(flags.group));
    if (flags.seed) ov.emplace_back("master_seed", std::to_string(*flags.seed));
    if (flags.output_dir) ov.emplace_back("output_dir", *flags.output_dir);

    const tbon::RunConfig cfg = tbon::parse_config(read_file(flags.config_path), command, ov);
    const tbon::ExperimentReport rep = tbon::run_experiment(cfg, flags.force);
    for (const auto& f : rep.files) std::cout << cfg.output_dir << '/' << f << '\n';
    for (const auto& m : rep.messages) std::cerr << m << '\n';
    return rep.invariants_ok ? kOk : kInvariant;
  } catch (const tbon::OutputExists& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExists;
  } catch (const tbon::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const tbon::SchemaError& e) {
    std::cerr << "input error: " << e.what() << '\n';
    return kConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRuntime;
  }
}
