#pragma once

// Run configuration: a flat key = value text format with one [section] per
// command. Top-level keys (before any section) are master_seed and
// output_dir. Every key is checked against the command's schema; unknown
// keys and sections are rejected, and errors name the field path.

#include <cerrno>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace tbon {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class FieldType { count, real, real_list, count_list, choice, text_list, flag };

enum class Bound {
  none,
  positive,         // > 0
  non_negative,     // >= 0
  at_least_one,
  at_least_two,
  even_positive,
  unit_open,        // (0, 1)
  half_open_one,    // (0.5, 1]
};

struct FieldSpec {
  std::string name;
  FieldType type;
  std::string default_value;
  Bound bound = Bound::none;
  std::vector<std::string> choices{};
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  if (trim(s).empty()) return out;
  std::string item;
  std::istringstream ss(s);
  while (std::getline(ss, item, ',')) out.push_back(trim(item));
  return out;
}

inline std::string join(const std::vector<std::string>& items) {
  std::string s;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) s += ',';
    s += items[i];
  }
  return s;
}

/// Shortest decimal that parses back to the same double.
inline std::string shortest_double(double v) {
  char buf[40];
  for (int prec = 1; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

inline std::optional<double> parse_real(const std::string& s) {
  if (s.empty()) return std::nullopt;
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(s.c_str(), &end);
  if (errno != 0 || end != s.c_str() + s.size()) return std::nullopt;
  return v;
}

inline std::optional<std::uint64_t> parse_count(const std::string& s) {
  if (s.empty() || s.find_first_not_of("0123456789") != std::string::npos)
    return std::nullopt;
  char* end = nullptr;
  errno = 0;
  const unsigned long long v = std::strtoull(s.c_str(), &end, 10);
  if (errno != 0) return std::nullopt;
  return static_cast<std::uint64_t>(v);
}

inline std::optional<std::string> bound_violation(Bound b, double v) {
  switch (b) {
    case Bound::none: return std::nullopt;
    case Bound::positive: if (!(v > 0)) return "must be > 0"; break;
    case Bound::non_negative: if (!(v >= 0)) return "must be >= 0"; break;
    case Bound::at_least_one: if (!(v >= 1)) return "must be >= 1"; break;
    case Bound::at_least_two: if (!(v >= 2)) return "must be >= 2"; break;
    case Bound::even_positive:
      if (!(v >= 2) || static_cast<std::uint64_t>(v) % 2 != 0)
        return "must be a positive even number";
      break;
    case Bound::unit_open: if (!(v > 0 && v < 1)) return "must lie in (0, 1)"; break;
    case Bound::half_open_one: if (!(v > 0.5 && v <= 1)) return "must lie in (0.5, 1]"; break;
  }
  return std::nullopt;
}

}  // namespace detail

inline const std::vector<std::string>& command_names() {
  static const std::vector<std::string> names{
      "theorem1", "maxstats", "capstats", "gpucb",
      "tournament", "tbon", "identify", "summarize"};
  return names;
}

inline bool is_randomized(const std::string& command) { return command != "summarize"; }

inline const std::vector<FieldSpec>& command_schema(const std::string& command) {
  using T = FieldType;
  using B = Bound;
  static const std::map<std::string, std::vector<FieldSpec>> schemas{
      {"theorem1",
       {{"d", T::count, "8", B::at_least_two},
        {"epsilon", T::real, "0.05", B::positive},
        {"sigma0", T::real, "0.025", B::positive},
        {"mu0", T::real, "0"},
        {"n_values", T::count_list, "8,16,64,256,1024,4096", B::at_least_two},
        {"trials", T::count, "2000", B::at_least_one},
        {"h_zero", T::flag, "false"}}},
      {"maxstats",
       {{"n_values", T::count_list, "10000", B::at_least_two},
        {"trials", T::count, "1000", B::at_least_one}}},
      {"capstats",
       {{"d", T::count, "3", B::at_least_two},
        {"n_values", T::count_list, "4,16,64,256,1024", B::at_least_one},
        {"trials", T::count, "10000", B::at_least_one}}},
      {"gpucb",
       {{"function", T::choice, "sinusoid", B::none, {"sinusoid", "quadratic", "branin"}},
        {"amplitudes", T::real_list, "1,0.5"},
        {"frequencies", T::real_list, "3,7"},
        {"phases", T::real_list, "0,1"},
        {"dim", T::count, "2", B::at_least_one},
        {"lower", T::real_list, "0"},
        {"upper", T::real_list, "3"},
        {"T", T::count, "30", B::at_least_one},
        {"seeds", T::count, "50", B::at_least_one},
        {"noise_sd", T::real, "0.1", B::non_negative},
        {"kernel", T::choice, "se", B::none, {"se", "matern32", "matern52"}},
        {"lengthscale", T::real, "0.2", B::positive},
        {"schedule", T::choice, "constant", B::none, {"constant", "log"}},
        {"beta", T::real, "2", B::positive},
        {"n_starts", T::count, "8", B::at_least_one},
        {"baseline", T::flag, "true"}}},
      {"tournament",
       {{"n", T::count, "16", B::at_least_one},
        {"d", T::count, "4", B::at_least_one},
        {"trials", T::count, "1000", B::at_least_one},
        {"judge", T::choice, "noisy", B::none, {"exact", "noisy"}},
        {"accuracy", T::real, "0.9", B::half_open_one},
        {"repeats", T::count, "4", B::even_positive}}},
      {"tbon",
       {{"backend", T::choice, "synthetic", B::none, {"synthetic", "mock_text"}},
        {"iterations", T::count, "20"},
        {"trajectories", T::count, "4", B::at_least_one},
        {"gradient_steps", T::count, "2", B::at_least_one},
        {"candidates", T::count, "8", B::at_least_one},
        {"eval_samples", T::count, "8", B::at_least_one},
        {"selector", T::choice, "oracle", B::none, {"oracle", "tournament"}},
        {"repeats", T::count, "2", B::even_positive},
        {"judge", T::choice, "exact", B::none, {"exact", "noisy"}},
        {"accuracy", T::real, "0.9", B::half_open_one},
        {"model", T::choice, "quadratic", B::none, {"linear", "quadratic"}},
        {"d", T::count, "8", B::at_least_one},
        {"epsilon", T::real, "0.05", B::positive},
        {"sigma0", T::real, "0.025", B::non_negative},
        {"eval_noise_sd", T::real, "0.05", B::non_negative},
        {"edit_table_size", T::count, "8", B::at_least_one}}},
      {"identify",
       {{"arms", T::count, "64", B::at_least_one},
        {"spacing", T::real, "0.1", B::positive},
        {"sd", T::real, "0.5", B::non_negative},
        {"budget", T::count, "5000", B::at_least_one},
        {"k_worst", T::count, "5", B::at_least_one},
        {"delta", T::real, "0.05", B::unit_open},
        {"repetitions", T::count, "200", B::at_least_one}}},
      {"summarize",
       {{"inputs", T::text_list, ""},
        {"group", T::text_list, ""},
        {"metrics", T::text_list, ""}}},
  };
  const auto it = schemas.find(command);
  if (it == schemas.end()) throw ConfigError("unknown command: " + command);
  return it->second;
}

/// Validated configuration for one command. Values are stored in normalized
/// text form, so emitting and re-parsing reproduces the same object.
struct RunConfig {
  std::string command;
  std::optional<std::uint64_t> master_seed;
  std::string output_dir = "out";
  std::map<std::string, std::string> params;

  bool operator==(const RunConfig&) const = default;

  const std::string& raw(const std::string& key) const {
    const auto it = params.find(key);
    if (it == params.end()) throw ConfigError(command + "." + key + ": no such field");
    return it->second;
  }
  double real(const std::string& key) const { return *detail::parse_real(raw(key)); }
  std::uint64_t count(const std::string& key) const { return *detail::parse_count(raw(key)); }
  bool flag(const std::string& key) const { return raw(key) == "true"; }
  const std::string& choice(const std::string& key) const { return raw(key); }
  std::vector<double> reals(const std::string& key) const {
    std::vector<double> out;
    for (const auto& s : detail::split_list(raw(key))) out.push_back(*detail::parse_real(s));
    return out;
  }
  std::vector<std::size_t> counts(const std::string& key) const {
    std::vector<std::size_t> out;
    for (const auto& s : detail::split_list(raw(key)))
      out.push_back(static_cast<std::size_t>(*detail::parse_count(s)));
    return out;
  }
  std::vector<std::string> texts(const std::string& key) const {
    return detail::split_list(raw(key));
  }
  std::uint64_t seed() const {
    if (!master_seed) throw ConfigError("master_seed: required for command " + command);
    return *master_seed;
  }
};

namespace detail {

/// Checks and normalizes one value; returns the canonical text.
inline std::string normalize_field(const std::string& command, const FieldSpec& f,
                                   const std::string& value) {
  const std::string path = command + "." + f.name;
  auto fail = [&](const std::string& why) -> std::string {
    throw ConfigError(path + ": " + why + " (got '" + value + "')");
  };
  switch (f.type) {
    case FieldType::count: {
      const auto v = parse_count(value);
      if (!v) return fail("expected a non-negative integer");
      if (auto e = bound_violation(f.bound, static_cast<double>(*v))) return fail(*e);
      return std::to_string(*v);
    }
    case FieldType::real: {
      const auto v = parse_real(value);
      if (!v || !std::isfinite(*v)) return fail("expected a finite real number");
      if (auto e = bound_violation(f.bound, *v)) return fail(*e);
      return shortest_double(*v);
    }
    case FieldType::count_list: {
      std::vector<std::string> out;
      const auto items = split_list(value);
      if (items.empty()) return fail("expected a non-empty list");
      for (const auto& s : items) {
        const auto v = parse_count(s);
        if (!v) return fail("expected a list of non-negative integers");
        if (auto e = bound_violation(f.bound, static_cast<double>(*v))) return fail("each entry " + *e);
        out.push_back(std::to_string(*v));
      }
      return join(out);
    }
    case FieldType::real_list: {
      std::vector<std::string> out;
      const auto items = split_list(value);
      if (items.empty()) return fail("expected a non-empty list");
      for (const auto& s : items) {
        const auto v = parse_real(s);
        if (!v || !std::isfinite(*v)) return fail("expected a list of finite reals");
        if (auto e = bound_violation(f.bound, *v)) return fail("each entry " + *e);
        out.push_back(shortest_double(*v));
      }
      return join(out);
    }
    case FieldType::choice: {
      for (const auto& c : f.choices)
        if (value == c) return value;
      return fail("expected one of {" + join(f.choices) + "}");
    }
    case FieldType::text_list:
      return join(split_list(value));
    case FieldType::flag:
      if (value == "true" || value == "1" || value == "yes") return "true";
      if (value == "false" || value == "0" || value == "no") return "false";
      return fail("expected true or false");
  }
  return value;
}

inline const FieldSpec* find_field(const std::vector<FieldSpec>& schema,
                                   const std::string& key) {
  for (const auto& f : schema)
    if (f.name == key) return &f;
  return nullptr;
}

inline void set_global(RunConfig& cfg, const std::string& key, const std::string& value) {
  if (key == "master_seed") {
    const auto v = parse_count(value);
    if (!v) throw ConfigError("master_seed: expected an unsigned 64-bit integer (got '" + value + "')");
    cfg.master_seed = *v;
  } else if (key == "output_dir") {
    if (value.empty()) throw ConfigError("output_dir: must not be empty");
    cfg.output_dir = value;
  } else {
    throw ConfigError("unknown top-level key: " + key);
  }
}

}  // namespace detail

/// key=value overrides (from flags). A bare key addresses the selected
/// command's section; master_seed and output_dir address the top level.
using Overrides = std::vector<std::pair<std::string, std::string>>;

/// Parses config text for `command`, applies overrides, fills defaults and
/// validates everything before returning.
inline RunConfig parse_config(const std::string& text, const std::string& command,
                              const Overrides& overrides = {}) {
  const auto& schema = command_schema(command);
  RunConfig cfg;
  cfg.command = command;
  std::map<std::string, std::string> raw;

  std::istringstream in(text);
  std::string line, section;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string where = "line " + std::to_string(lineno);
    const auto hash = line.find_first_of("#;");
    if (hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(where + ": malformed section header");
      section = detail::trim(line.substr(1, line.size() - 2));
      command_schema(section);  // rejects unknown sections
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(where + ": expected key = value");
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));
    if (section.empty()) {
      detail::set_global(cfg, key, value);
      continue;
    }
    const auto& sec_schema = command_schema(section);
    const FieldSpec* f = detail::find_field(sec_schema, key);
    if (!f) throw ConfigError(section + "." + key + ": unknown key");
    const std::string norm = detail::normalize_field(section, *f, value);
    if (section == command) raw[key] = norm;
  }

  for (const auto& [key, value] : overrides) {
    if (key == "master_seed" || key == "output_dir") {
      detail::set_global(cfg, key, value);
      continue;
    }
    const FieldSpec* f = detail::find_field(schema, key);
    if (!f) throw ConfigError(command + "." + key + ": unknown key");
    raw[key] = detail::normalize_field(command, *f, value);
  }

  for (const auto& f : schema) {
    const auto it = raw.find(f.name);
    cfg.params[f.name] = it != raw.end()
                             ? it->second
                             : detail::normalize_field(command, f, f.default_value);
  }
  if (is_randomized(command) && !cfg.master_seed)
    throw ConfigError("master_seed: required for command " + command);
  return cfg;
}

/// Canonical text form; parse_config(emit_config(c), c.command) == c.
inline std::string emit_config(const RunConfig& cfg) {
  std::ostringstream os;
  if (cfg.master_seed) os << "master_seed = " << *cfg.master_seed << '\n';
  os << "output_dir = " << cfg.output_dir << "\n\n[" << cfg.command << "]\n";
  for (const auto& f : command_schema(cfg.command))
    os << f.name << " = " << cfg.params.at(f.name) << '\n';
  return os.str();
}

}  // namespace tbon
