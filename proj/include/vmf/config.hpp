#pragma once
// Scenario configs: flat `key = value` text with literal grammars for the
// domain/measure/seed/vortex values. Errors name the offending key and line.

#include <cctype>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "vmf/blowup.hpp"
#include "vmf/domain.hpp"
#include "vmf/kirchhoff.hpp"
#include "vmf/measure.hpp"
#include "vmf/solver.hpp"

namespace vmf {

class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& key, int line, const std::string& what)
      : std::runtime_error("config error: key '" + key + "' (line " +
                           std::to_string(line) + "): " + what) {}
  ConfigError(int line, const std::string& what)
      : std::runtime_error("config error: line " + std::to_string(line) +
                           ": " + what) {}
  explicit ConfigError(const std::string& what)
      : std::runtime_error("config error: " + what) {}
};

struct Scenario {
  Domain domain = Domain::unit_disk();
  int n = 64;
  Variant variant = Variant::Neri;
  IntensityMeasure measure = liouville_measure();

  std::vector<double> lambda_list;  // one entry for `solve`, a ladder for `continue`
  SeedPolicy seed_policy = SeedPolicy::Previous;
  BumpSeed bump;
  bool has_bump = false;
  NewtonOptions newton;

  BlowupOptions analysis;
  std::vector<double> estimate_deltas = {0.02, 0.05, 0.1, 0.2};
  int torus_modes = 128;
  std::uint64_t rng_seed = 42;
  std::string out_dir;

  VortexConfig vortex;
  bool has_vortex = false;
};

namespace detail {

struct RawEntry {
  std::string value;
  int line = 0;
  bool used = false;
};

inline std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

inline double to_double(const std::string& key, int line, const std::string& s) {
  const std::string t = trim(s);
  if (t.empty()) throw ConfigError(key, line, "expected a number, got nothing");
  char* end = nullptr;
  double x = std::strtod(t.c_str(), &end);
  if (end != t.c_str() + t.size())
    throw ConfigError(key, line, "not a number: '" + t + "'");
  return x;
}

inline long to_long(const std::string& key, int line, const std::string& s) {
  double x = to_double(key, line, s);
  long v = static_cast<long>(x);
  if (static_cast<double>(v) != x)
    throw ConfigError(key, line, "expected an integer: '" + trim(s) + "'");
  return v;
}

// Splits "a, b, c" at top level, respecting one level of (...) nesting.
inline std::vector<std::string> split_top(const std::string& key, int line,
                                          const std::string& s) {
  std::vector<std::string> parts;
  int depth = 0;
  std::string cur;
  for (char c : s) {
    if (c == '(') ++depth;
    if (c == ')') {
      --depth;
      if (depth < 0) throw ConfigError(key, line, "unbalanced ')'");
    }
    if (c == ',' && depth == 0) {
      parts.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (depth != 0) throw ConfigError(key, line, "unbalanced '('");
  parts.push_back(cur);
  return parts;
}

// "[a, b, c]" -> items; "[]" -> empty.
inline std::vector<std::string> bracket_items(const std::string& key, int line,
                                              const std::string& s) {
  const std::string t = trim(s);
  if (t.size() < 2 || t.front() != '[' || t.back() != ']')
    throw ConfigError(key, line, "expected a [...] list, got '" + t + "'");
  const std::string body = trim(t.substr(1, t.size() - 2));
  if (body.empty()) return {};
  return split_top(key, line, body);
}

// "name(a, b, ...)" -> {name, args}; a bare word yields empty args.
inline std::pair<std::string, std::vector<std::string>> call_form(
    const std::string& key, int line, const std::string& s) {
  const std::string t = trim(s);
  std::size_t open = t.find('(');
  if (open == std::string::npos) return {t, {}};
  if (t.back() != ')')
    throw ConfigError(key, line, "expected '" + t.substr(0, open) + "(...)'");
  std::string name = trim(t.substr(0, open));
  std::string body = t.substr(open + 1, t.size() - open - 2);
  if (trim(body).empty()) return {name, {}};
  return {name, split_top(key, line, body)};
}

inline std::vector<double> to_double_list(const std::string& key, int line,
                                          const std::string& s) {
  std::vector<double> out;
  for (const std::string& item : bracket_items(key, line, s))
    out.push_back(to_double(key, line, item));
  return out;
}

inline Domain parse_domain(const std::string& key, int line, const std::string& s) {
  auto [name, args] = call_form(key, line, s);
  try {
    if (name == "disk") {
      if (!args.empty()) throw ConfigError(key, line, "disk takes no arguments");
      return Domain::unit_disk();
    }
    if (name == "rectangle") {
      if (args.size() != 2)
        throw ConfigError(key, line, "expected rectangle(width, height)");
      return Domain::rectangle(to_double(key, line, args[0]),
                               to_double(key, line, args[1]));
    }
    if (name == "torus") {
      if (args.size() != 2)
        throw ConfigError(key, line, "expected torus(l1, l2)");
      return Domain::flat_torus(to_double(key, line, args[0]),
                                to_double(key, line, args[1]));
    }
  } catch (const std::invalid_argument& e) {
    throw ConfigError(key, line, e.what());
  }
  throw ConfigError(key, line, "unknown domain '" + name + "'");
}

inline IntensityMeasure parse_measure(const std::string& key, int line,
                                      const std::string& s) {
  const std::string t = trim(s);
  try {
    if (t == "liouville") return liouville_measure();
    if (t == "sinh") return sinh_measure();
    if (t.rfind("atomic", 0) == 0) {
      std::vector<Atom> atoms;
      for (const std::string& item : bracket_items(key, line, t.substr(6))) {
        auto [nm, args] = call_form(key, line, item);
        if (!nm.empty() || args.size() != 2)
          throw ConfigError(key, line, "expected (alpha, weight) pairs");
        atoms.push_back({to_double(key, line, args[0]), to_double(key, line, args[1])});
      }
      return IntensityMeasure::atomic(std::move(atoms));
    }
    auto [name, args] = call_form(key, line, t);
    if (name == "density") {
      if (args.size() != 4)
        throw ConfigError(key, line, "expected density(name, a, b, nodes)");
      return IntensityMeasure::density(trim(args[0]), to_double(key, line, args[1]),
                                       to_double(key, line, args[2]),
                                       static_cast<int>(to_long(key, line, args[3])));
    }
  } catch (const std::invalid_argument& e) {
    throw ConfigError(key, line, e.what());
  }
  throw ConfigError(key, line, "unknown measure '" + t + "'");
}

inline Variant parse_variant(const std::string& key, int line, const std::string& s) {
  const std::string t = trim(s);
  if (t == "neri") return Variant::Neri;
  if (t == "ss") return Variant::SS;
  if (t == "torus-neri") return Variant::TorusNeri;
  throw ConfigError(key, line, "unknown variant '" + t + "' (neri|ss|torus-neri)");
}

}  // namespace detail

class Config {
 public:
  static Config parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_text(buf.str());
  }

  static Config parse_text(const std::string& text) {
    Config c;
    std::istringstream in(text);
    std::string line;
    int ln = 0;
    while (std::getline(in, line)) {
      ++ln;
      std::size_t hash = line.find('#');
      if (hash != std::string::npos) line.erase(hash);
      const std::string t = detail::trim(line);
      if (t.empty()) continue;
      std::size_t eq = t.find('=');
      if (eq == std::string::npos)
        throw ConfigError(ln, "expected 'key = value', got '" + t + "'");
      std::string key = detail::trim(t.substr(0, eq));
      std::string value = detail::trim(t.substr(eq + 1));
      if (key.empty()) throw ConfigError(ln, "missing key before '='");
      if (value.empty()) throw ConfigError(key, ln, "missing value");
      auto [it, fresh] = c.entries_.emplace(key, detail::RawEntry{value, ln, false});
      if (!fresh)
        throw ConfigError(key, ln, "duplicate key (first at line " +
                                       std::to_string(it->second.line) + ")");
    }
    return c;
  }

  bool has(const std::string& key) const { return entries_.count(key) != 0; }

  Scenario scenario() const {
    Scenario s;
    for (auto& [key, e] : entries_) e.used = false;

    if (const auto* e = find("domain"))
      s.domain = detail::parse_domain("domain", e->line, e->value);
    if (const auto* e = find("n")) {
      long n = detail::to_long("n", e->line, e->value);
      if (n < 4 || n > 4096) throw ConfigError("n", e->line, "n out of range [4, 4096]");
      s.n = static_cast<int>(n);
    }
    if (const auto* e = find("variant"))
      s.variant = detail::parse_variant("variant", e->line, e->value);
    if (const auto* e = find("measure"))
      s.measure = detail::parse_measure("measure", e->line, e->value);

    const auto* single = find("lambda");
    const auto* list = find("lambda_list");
    if (single && list)
      throw ConfigError("lambda_list", list->line, "give either lambda or lambda_list, not both");
    if (single) {
      double l = detail::to_double("lambda", single->line, single->value);
      if (!(l >= 0.0)) throw ConfigError("lambda", single->line, "lambda must be >= 0");
      s.lambda_list = {l};
    }
    if (list) {
      s.lambda_list = detail::to_double_list("lambda_list", list->line, list->value);
      if (s.lambda_list.empty())
        throw ConfigError("lambda_list", list->line, "empty list");
      for (std::size_t i = 0; i < s.lambda_list.size(); ++i) {
        if (!(s.lambda_list[i] >= 0.0))
          throw ConfigError("lambda_list", list->line, "lambdas must be >= 0");
        if (i > 0 && !(s.lambda_list[i] > s.lambda_list[i - 1]))
          throw ConfigError("lambda_list", list->line, "lambdas must be strictly increasing");
      }
    }

    if (const auto* e = find("seed")) {
      auto [name, args] = detail::call_form("seed", e->line, e->value);
      if (name == "zero") {
        if (!args.empty()) throw ConfigError("seed", e->line, "zero takes no arguments");
      } else if (name == "bump") {
        if (args.size() != 4)
          throw ConfigError("seed", e->line, "expected bump(x, y, amplitude, width)");
        s.bump.x = detail::to_double("seed", e->line, args[0]);
        s.bump.y = detail::to_double("seed", e->line, args[1]);
        s.bump.amplitude = detail::to_double("seed", e->line, args[2]);
        s.bump.width = detail::to_double("seed", e->line, args[3]);
        if (!(s.bump.width > 0.0))
          throw ConfigError("seed", e->line, "bump width must be positive");
        s.has_bump = true;
      } else {
        throw ConfigError("seed", e->line, "unknown seed '" + name + "' (zero|bump)");
      }
    }
    if (const auto* e = find("seed_policy")) {
      const std::string t = detail::trim(e->value);
      if (t == "zero") s.seed_policy = SeedPolicy::Zero;
      else if (t == "previous") s.seed_policy = SeedPolicy::Previous;
      else if (t == "previous+bump") s.seed_policy = SeedPolicy::PreviousPlusBump;
      else throw ConfigError("seed_policy", e->line,
                             "unknown policy '" + t + "' (zero|previous|previous+bump)");
    } else if (s.has_bump) {
      s.seed_policy = SeedPolicy::PreviousPlusBump;
    }
    if (s.seed_policy == SeedPolicy::PreviousPlusBump && !s.has_bump) {
      const auto* e = find("seed_policy");
      throw ConfigError("seed_policy", e ? e->line : 0, "previous+bump needs a seed = bump(...)");
    }

    if (const auto* e = find("tol")) {
      s.newton.tol = detail::to_double("tol", e->line, e->value);
      if (!(s.newton.tol > 0.0)) throw ConfigError("tol", e->line, "tol must be positive");
    }
    if (const auto* e = find("max_newton")) {
      long m = detail::to_long("max_newton", e->line, e->value);
      if (m < 1 || m > 1000) throw ConfigError("max_newton", e->line, "out of range [1, 1000]");
      s.newton.max_iter = static_cast<int>(m);
    }

    if (const auto* e = find("peak_threshold")) {
      s.analysis.peak_threshold = detail::to_double("peak_threshold", e->line, e->value);
      if (!(s.analysis.peak_threshold > 0.0))
        throw ConfigError("peak_threshold", e->line, "must be positive");
    }
    if (const auto* e = find("peak_min_separation")) {
      s.analysis.peak_min_separation =
          detail::to_double("peak_min_separation", e->line, e->value);
      if (s.analysis.peak_min_separation < 0.0)
        throw ConfigError("peak_min_separation", e->line, "must be >= 0");
    }
    if (const auto* e = find("ball_radius"))
      s.analysis.ball_radius = detail::to_double("ball_radius", e->line, e->value);
    if (const auto* e = find("rv_radius")) {
      s.analysis.rv_radius = detail::to_double("rv_radius", e->line, e->value);
      if (!(s.analysis.rv_radius > 0.0))
        throw ConfigError("rv_radius", e->line, "must be positive");
    }
    if (const auto* e = find("rv_mass")) {
      const std::string t = detail::trim(e->value);
      if (t == "limit") s.analysis.rv_use_limit_mass = true;
      else if (t == "ball") s.analysis.rv_use_limit_mass = false;
      else throw ConfigError("rv_mass", e->line, "unknown mode '" + t + "' (limit|ball)");
    }
    if (const auto* e = find("pohozaev_radii"))
      s.analysis.pohozaev_radii =
          detail::to_double_list("pohozaev_radii", e->line, e->value);
    if (const auto* e = find("estimate_deltas")) {
      s.estimate_deltas = detail::to_double_list("estimate_deltas", e->line, e->value);
      for (double d : s.estimate_deltas)
        if (!(d > 0.0)) throw ConfigError("estimate_deltas", e->line, "deltas must be positive");
    }
    if (const auto* e = find("torus_modes")) {
      long k = detail::to_long("torus_modes", e->line, e->value);
      if (k < 4 || k > 1024) throw ConfigError("torus_modes", e->line, "out of range [4, 1024]");
      s.torus_modes = static_cast<int>(k);
    }
    if (const auto* e = find("rng_seed")) {
      long v = detail::to_long("rng_seed", e->line, e->value);
      if (v < 0) throw ConfigError("rng_seed", e->line, "must be >= 0");
      s.rng_seed = static_cast<std::uint64_t>(v);
    }
    if (const auto* e = find("out")) s.out_dir = detail::trim(e->value);

    if (const auto* e = find("vortex")) {
      for (const std::string& item : detail::bracket_items("vortex", e->line, e->value)) {
        auto [nm, args] = detail::call_form("vortex", e->line, item);
        if (!nm.empty() || args.size() != 3)
          throw ConfigError("vortex", e->line, "expected (x, y, intensity) triples");
        s.vortex.points.push_back({detail::to_double("vortex", e->line, args[0]),
                                   detail::to_double("vortex", e->line, args[1])});
        s.vortex.intensities.push_back(detail::to_double("vortex", e->line, args[2]));
      }
      if (s.vortex.points.empty())
        throw ConfigError("vortex", e->line, "empty vortex list");
      s.has_vortex = true;
    }

    for (const auto& [key, e] : entries_)
      if (!e.used)
        throw ConfigError(key, e.line, "unknown key");
    return s;
  }

 private:
  const detail::RawEntry* find(const std::string& key) const {
    auto it = entries_.find(key);
    if (it == entries_.end()) return nullptr;
    it->second.used = true;
    return &it->second;
  }

  mutable std::map<std::string, detail::RawEntry> entries_;
};

}  // namespace vmf
