#pragma once

#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "topopt/assembly.hpp"
#include "topopt/error.hpp"
#include "topopt/filters.hpp"
#include "topopt/optimizer.hpp"
#include "topopt/setup.hpp"
#include "topopt/solver.hpp"

namespace topopt::io {

/// Settings of one optimization run. Loaded from a flat `key = value` file;
/// nested settings use dotted keys (`heaviside.beta_max = 512`).
struct RunConfig {
  std::string problem = "cantilever2d";
  std::vector<int> cells{160, 100};
  std::string mesh = "quad";  // quad | tri (2D only); 3D is always hex
  double volfrac = 0.4;
  double penal = 3.0;
  double rmin = 6.0;
  FilterKind filter = FilterKind::sensitivity;
  HeavisideParams heaviside;
  OptimizerKind optimizer = OptimizerKind::oc;
  int max_iter = 200;
  double tol = 0.01;
  SolverKind solver = SolverKind::direct;
  AssemblyMethod assembly = AssemblyMethod::fast;
  std::optional<double> initial_density;  // defaults to volfrac
  std::string output_dir = "out";
  int snapshot_every = 0;  // 0 disables snapshots
  double E0 = 1.0;
  double Emin = 1e-9;
  double nu = 0.3;
  double load = -1.0;
  double oc_move = 0.2;
  double oc_eta = 0.5;
  double mma_move = 0.5;

  [[nodiscard]] double rho0() const { return initial_density.value_or(volfrac); }
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline double to_double(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  double d = 0.0;
  try {
    d = std::stod(v, &used);
  } catch (const std::exception&) {
    throw ConfigError(key + ": '" + v + "' is not a number");
  }
  if (used != v.size()) throw ConfigError(key + ": '" + v + "' is not a number");
  return d;
}

inline int to_int(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  int i = 0;
  try {
    i = std::stoi(v, &used);
  } catch (const std::exception&) {
    throw ConfigError(key + ": '" + v + "' is not an integer");
  }
  if (used != v.size()) throw ConfigError(key + ": '" + v + "' is not an integer");
  return i;
}

template <class Parse>
auto wrap(const std::string& key, Parse&& parse) {
  try {
    return parse();
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(key + ": " + e.what());
  }
}

}  // namespace detail

/// Sets one key. Throws ConfigError naming the key on unknown keys or
/// malformed values.
inline void set_value(RunConfig& c, const std::string& key_in, const std::string& value_in) {
  using detail::to_double;
  using detail::to_int;
  const std::string key = detail::trim(key_in), v = detail::trim(value_in);
  if (key == "problem") c.problem = v;
  else if (key == "cells") c.cells = detail::wrap(key, [&] { return parse_cells(v); });
  else if (key == "mesh") c.mesh = v;
  else if (key == "volfrac") c.volfrac = to_double(key, v);
  else if (key == "penal") c.penal = to_double(key, v);
  else if (key == "rmin") c.rmin = to_double(key, v);
  else if (key == "filter") c.filter = detail::wrap(key, [&] { return parse_filter_kind(v); });
  else if (key == "heaviside.beta0") c.heaviside.beta0 = to_double(key, v);
  else if (key == "heaviside.beta_max") c.heaviside.beta_max = to_double(key, v);
  else if (key == "heaviside.continuation_iter") c.heaviside.continuation_iter = to_int(key, v);
  else if (key == "optimizer") c.optimizer = detail::wrap(key, [&] { return parse_optimizer_kind(v); });
  else if (key == "max_iter") c.max_iter = to_int(key, v);
  else if (key == "tol") c.tol = to_double(key, v);
  else if (key == "solver") c.solver = detail::wrap(key, [&] { return parse_solver_kind(v); });
  else if (key == "assembly") c.assembly = detail::wrap(key, [&] { return parse_assembly_method(v); });
  else if (key == "initial_density") c.initial_density = to_double(key, v);
  else if (key == "output_dir") c.output_dir = v;
  else if (key == "snapshot_every") c.snapshot_every = to_int(key, v);
  else if (key == "E0") c.E0 = to_double(key, v);
  else if (key == "Emin") c.Emin = to_double(key, v);
  else if (key == "nu") c.nu = to_double(key, v);
  else if (key == "load") c.load = to_double(key, v);
  else if (key == "oc.move") c.oc_move = to_double(key, v);
  else if (key == "oc.eta") c.oc_eta = to_double(key, v);
  else if (key == "mma.move") c.mma_move = to_double(key, v);
  else throw ConfigError("unknown key '" + key + "'");
}

/// Applies "key=value".
inline void apply_override(RunConfig& c, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw ConfigError("override '" + assignment + "' is not key=value");
  set_value(c, assignment.substr(0, eq), assignment.substr(eq + 1));
}

inline void validate(const RunConfig& c) {
  auto fail = [](const std::string& m) { throw ConfigError(m); };
  bool known = false;
  for (const auto& n : problem_names()) known = known || n == c.problem;
  if (!known) fail("problem: unknown problem '" + c.problem + "'");
  const std::size_t dim = c.problem == "cantilever3d" ? 3 : 2;
  if (c.cells.size() != dim) fail("cells: problem '" + c.problem + "' needs " + std::to_string(dim) + " cell counts");
  if (c.mesh != "quad" && c.mesh != "tri") fail("mesh: expected quad or tri");
  if (c.mesh == "tri" && dim == 3) fail("mesh: tri is only available for 2D problems");
  if (!(c.volfrac > 0.0 && c.volfrac < 1.0)) fail("volfrac: must lie in (0, 1)");
  if (!(c.penal >= 1.0)) fail("penal: must be >= 1");
  if (!(c.rmin > 0.0)) fail("rmin: must be positive");
  if (!(c.tol >= 0.0)) fail("tol: must be non-negative");
  if (c.max_iter < 1) fail("max_iter: must be >= 1");
  if (c.snapshot_every < 0) fail("snapshot_every: must be >= 0");
  if (!(c.heaviside.beta0 >= 1.0)) fail("heaviside.beta0: must be >= 1");
  if (!(c.heaviside.beta_max >= c.heaviside.beta0)) fail("heaviside.beta_max: must be >= heaviside.beta0");
  if (c.heaviside.continuation_iter < 1) fail("heaviside.continuation_iter: must be >= 1");
  if (c.initial_density && !(*c.initial_density >= 0.0 && *c.initial_density <= 1.0))
    fail("initial_density: must lie in [0, 1]");
  if (!(c.E0 > 0.0)) fail("E0: must be positive");
  if (!(c.Emin > 0.0 && c.Emin < c.E0)) fail("Emin: must lie in (0, E0)");
  if (!(c.nu >= 0.0 && c.nu < 0.5)) fail("nu: must lie in [0, 0.5)");
  if (c.load == 0.0) fail("load: must be nonzero");
  if (!(c.oc_move > 0.0 && c.oc_move <= 1.0)) fail("oc.move: must lie in (0, 1]");
  if (!(c.oc_eta > 0.0 && c.oc_eta <= 1.0)) fail("oc.eta: must lie in (0, 1]");
  if (!(c.mma_move > 0.0 && c.mma_move <= 1.0)) fail("mma.move: must lie in (0, 1]");
  if (c.output_dir.empty()) fail("output_dir: must not be empty");
}

/// Parses config text. Blank lines and lines starting with '#' are skipped;
/// trailing '#' comments are stripped.
inline RunConfig parse_config(const std::string& text) {
  RunConfig c;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
    set_value(c, line.substr(0, eq), line.substr(eq + 1));
  }
  return c;
}

inline RunConfig load_config(const std::string& path, const std::vector<std::string>& overrides = {}) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot read config file '" + path + "'");
  std::stringstream ss;
  ss << f.rdbuf();
  RunConfig c = parse_config(ss.str());
  for (const auto& o : overrides) apply_override(c, o);
  validate(c);
  return c;
}

/// Canonical `key = value` rendering of every field.
inline std::string format_config(const RunConfig& c) {
  std::ostringstream o;
  o.precision(17);
  o << "problem = " << c.problem << "\n"
    << "cells = " << format_cells(c.cells) << "\n"
    << "mesh = " << c.mesh << "\n"
    << "volfrac = " << c.volfrac << "\n"
    << "penal = " << c.penal << "\n"
    << "rmin = " << c.rmin << "\n"
    << "filter = " << to_string(c.filter) << "\n"
    << "heaviside.beta0 = " << c.heaviside.beta0 << "\n"
    << "heaviside.beta_max = " << c.heaviside.beta_max << "\n"
    << "heaviside.continuation_iter = " << c.heaviside.continuation_iter << "\n"
    << "optimizer = " << to_string(c.optimizer) << "\n"
    << "max_iter = " << c.max_iter << "\n"
    << "tol = " << c.tol << "\n"
    << "solver = " << to_string(c.solver) << "\n"
    << "assembly = " << to_string(c.assembly) << "\n"
    << "initial_density = " << c.rho0() << "\n"
    << "output_dir = " << c.output_dir << "\n"
    << "snapshot_every = " << c.snapshot_every << "\n"
    << "E0 = " << c.E0 << "\n"
    << "Emin = " << c.Emin << "\n"
    << "nu = " << c.nu << "\n"
    << "load = " << c.load << "\n"
    << "oc.move = " << c.oc_move << "\n"
    << "oc.eta = " << c.oc_eta << "\n"
    << "mma.move = " << c.mma_move << "\n";
  return o.str();
}

}  // namespace topopt::io
