#pragma once

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "topopt/assembly.hpp"
#include "topopt/compliance.hpp"
#include "topopt/filters.hpp"
#include "topopt/io/config.hpp"
#include "topopt/io/history.hpp"
#include "topopt/io/vtk.hpp"
#include "topopt/optimizer.hpp"
#include "topopt/setup.hpp"
#include "topopt/verify.hpp"

namespace topopt::cli {

enum ExitCode : int {
  kConverged = 0,
  kConfigError = 1,
  kMaxIterations = 2,
  kSolverFailure = 3,
  kCheckFailed = 4,
};

inline SimpMaterial material_from(const io::RunConfig& c) {
  SimpMaterial m = SimpMaterial::for_dim(static_cast<int>(c.cells.size()));
  m.E0 = c.E0;
  m.Emin = c.Emin;
  m.penal = c.penal;
  m.nu = c.nu;
  return m;
}

struct RunOutcome {
  OptimizationResult result;
  double final_compliance = 0.0;
  double final_volume_fraction = 0.0;
  double final_beta = 1.0;
  double seconds = 0.0;
};

/// Runs one configured optimization and writes history.csv, summary.txt,
/// density_final.vtk and the optional density_iter_<k>.vtk snapshots into
/// output_dir. Library errors propagate.
inline RunOutcome execute_run(const io::RunConfig& cfg, std::ostream& log) {
  io::validate(cfg);
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(cfg.output_dir, ec);
  if (ec || !fs::is_directory(cfg.output_dir))
    throw ConfigError("output_dir: cannot create '" + cfg.output_dir + "'");

  Benchmark b = make_benchmark(cfg.problem, cfg.cells, cfg.mesh == "tri", cfg.load);
  const Mesh mesh = b.mesh;
  FilterOperator filter = build_filter(mesh, cfg.rmin, cfg.filter, cfg.heaviside);
  ComplianceProblem fe(std::move(b.mesh), std::move(b.problem), material_from(cfg), cfg.assembly, cfg.solver);

  OptimizationOptions opts;
  opts.optimizer = cfg.optimizer;
  opts.volfrac = cfg.volfrac;
  opts.max_iterations = cfg.max_iter;
  opts.tolerance = cfg.tol;
  opts.oc.move = cfg.oc_move;
  opts.oc.eta = cfg.oc_eta;
  opts.mma.move = cfg.mma_move;

  const fs::path dir(cfg.output_dir);
  IterationObserver observer = [&](int k, std::span<const double> phys) {
    if (cfg.snapshot_every > 0 && k % cfg.snapshot_every == 0)
      io::write_vtk((dir / ("density_iter_" + std::to_string(k) + ".vtk")).string(), mesh, phys);
  };

  const auto t0 = std::chrono::steady_clock::now();
  RunOutcome out;
  out.result = run_optimization(fe, filter, std::vector<double>(fe.n_elements(), cfg.rho0()), opts, observer);
  out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const auto& last = out.result.history.back();
  out.final_compliance = last.compliance;
  out.final_volume_fraction = last.volume_fraction;
  out.final_beta = filter.beta();

  io::write_history_csv((dir / "history.csv").string(), out.result.history);
  io::write_vtk((dir / "density_final.vtk").string(), mesh, out.result.density.physical);

  std::ostringstream s;
  char buf[256];
  s << "status: " << (out.result.converged ? "converged" : "stopped at max_iter") << "\n";
  s << "iterations: " << out.result.iterations << "\n";
  std::snprintf(buf, sizeof buf, "compliance: %.4f\nvolume_fraction: %.4f\nmax_change: %.6f\n",
                out.final_compliance, out.final_volume_fraction, last.max_change);
  s << buf;
  s << "elements: " << mesh.n_elements() << " (" << to_string(mesh.element_type) << ")\n";
  s << "dofs: " << fe.dofs().n_dofs << "\n";
  if (cfg.filter == FilterKind::heaviside) s << "final_beta: " << out.final_beta << "\n";
  if (cfg.optimizer == OptimizerKind::oc) s << "oc_bracket_failures: " << out.result.oc_bracket_failures << "\n";
  if (cfg.optimizer == OptimizerKind::mma) {
    std::snprintf(buf, sizeof buf, "mma_max_kkt_residual: %.3e\n", out.result.max_mma_kkt_residual);
    s << buf;
  }
  std::snprintf(buf, sizeof buf, "wall_seconds: %.3f\n", out.seconds);
  s << buf;
  s << "\n[config]\n" << io::format_config(cfg);
  io::write_text((dir / "summary.txt").string(), s.str());
  log << s.str();
  return out;
}

/// `run` subcommand body; maps failures to exit codes.
inline int cmd_run(const std::string& config_path, const std::vector<std::string>& overrides, std::ostream& out,
                   std::ostream& err) {
  io::RunConfig cfg;
  try {
    cfg = io::load_config(config_path, overrides);
  } catch (const Error& e) {
    err << "config error: " << e.what() << "\n";
    return kConfigError;
  }
  try {
    RunOutcome r = execute_run(cfg, out);
    return r.result.converged ? kConverged : kMaxIterations;
  } catch (const SolverError& e) {
    err << "solver failure";
    if (e.iteration()) err << " at iteration " << *e.iteration();
    err << ": " << e.what() << " (residual " << e.residual() << ")\n";
    return kSolverFailure;
  } catch (const MatrixError& e) {
    err << "solver failure";
    if (e.iteration()) err << " at iteration " << *e.iteration();
    err << ": " << e.what() << "\n";
    return kSolverFailure;
  } catch (const Error& e) {
    err << "error";
    if (e.iteration()) err << " at iteration " << *e.iteration();
    err << ": " << e.what() << "\n";
    return kConfigError;
  }
}

inline int cmd_gradcheck(const GradCheckConfig& cfg, std::ostream& out, std::ostream& err) {
  GradCheckReport rep;
  try {
    rep = check_sensitivity_chain(cfg);
  } catch (const SolverError& e) {
    err << "solver failure: " << e.what() << "\n";
    return kSolverFailure;
  } catch (const MatrixError& e) {
    err << "solver failure: " << e.what() << "\n";
    return kSolverFailure;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kConfigError;
  }
  const double thr = gradcheck_threshold(cfg.filter);
  const bool pass = rep.max_rel_err < thr;
  char buf[256];
  std::snprintf(buf, sizeof buf,
                "problem %s cells %s filter %s h %.1e\nchecked %zu elements\nmax_rel_err %.3e (worst element %zu)\n"
                "threshold %.1e\n%s\n",
                cfg.problem.c_str(), format_cells(cfg.cells).c_str(), to_string(cfg.filter).c_str(), rep.h,
                rep.n_checked, rep.max_rel_err, rep.worst_element, thr, pass ? "PASS" : "FAIL");
  out << buf;
  return pass ? kConverged : kCheckFailed;
}

struct BenchRow {
  AssemblyMethod method;
  double first_seconds = 0.0;
  double average_seconds = 0.0;
  double max_rel_diff = 0.0;  ///< against standard
};

struct BenchResult {
  std::vector<BenchRow> rows;
  bool agree = false;
  int iterations = 0;
  std::size_t elements = 0;
  std::size_t dofs = 0;
};

/// Times `iterations` assemblies per method after a separately timed first
/// call, all on the same random densities. The agreement check runs before
/// any timing.
inline BenchResult bench_assembly(const std::string& problem, const std::vector<int>& cells, int iterations,
                                  unsigned seed = 1) {
  if (iterations < 1) throw InvalidArgument("iterations must be >= 1");
  Benchmark b = make_benchmark(problem, cells);
  const DofMap dofs = build_dof_map(b.mesh);
  const SimpMaterial mat = SimpMaterial::for_dim(b.mesh.dim);
  std::vector<double> rho(b.mesh.n_elements());
  std::mt19937 gen(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (double& v : rho) v = u(gen);

  BenchResult res;
  res.iterations = iterations;
  res.elements = b.mesh.n_elements();
  res.dofs = dofs.n_dofs;
  const AssemblyMethod methods[] = {AssemblyMethod::standard, AssemblyMethod::fast, AssemblyMethod::symbolic};

  std::vector<double> reference;
  double scale = 0.0;
  res.agree = true;
  for (AssemblyMethod m : methods) {
    StiffnessAssembler a(b.mesh, dofs, mat, m);
    CsrMatrix K = a.assemble(rho);
    if (reference.empty()) {
      reference = K.val;
      scale = K.max_abs();
    }
    BenchRow row{m};
    for (std::size_t i = 0; i < reference.size(); ++i)
      row.max_rel_diff = std::max(row.max_rel_diff, std::abs(K.val[i] - reference[i]) / scale);
    res.agree = res.agree && row.max_rel_diff <= 1e-12;
    res.rows.push_back(row);
  }

  using clock = std::chrono::steady_clock;
  for (BenchRow& row : res.rows) {
    StiffnessAssembler a(b.mesh, dofs, mat, row.method);
    CsrMatrix K;
    auto t0 = clock::now();
    a.assemble(rho, K);
    row.first_seconds = std::chrono::duration<double>(clock::now() - t0).count();
    t0 = clock::now();
    for (int k = 0; k < iterations; ++k) a.assemble(rho, K);
    row.average_seconds = std::chrono::duration<double>(clock::now() - t0).count() / iterations;
  }
  return res;
}

inline std::string format_bench_text(const BenchResult& r) {
  std::ostringstream o;
  char buf[160];
  o << "elements " << r.elements << ", dofs " << r.dofs << ", " << r.iterations << " assemblies per method\n";
  std::snprintf(buf, sizeof buf, "%-10s %14s %14s %10s %14s\n", "method", "first [s]", "average [s]", "ratio",
                "max rel diff");
  o << buf;
  const double base = r.rows.front().average_seconds;
  for (const auto& row : r.rows) {
    std::snprintf(buf, sizeof buf, "%-10s %14.6f %14.6f %10.3f %14.3e\n", to_string(row.method).c_str(),
                  row.first_seconds, row.average_seconds, row.average_seconds / base, row.max_rel_diff);
    o << buf;
  }
  o << (r.agree ? "methods agree to 1e-12\n" : "methods DISAGREE beyond 1e-12\n");
  return o.str();
}

inline std::string format_bench_csv(const BenchResult& r) {
  std::ostringstream o;
  o << "method,first_seconds,average_seconds,ratio_to_standard,max_rel_diff\n";
  char buf[160];
  const double base = r.rows.front().average_seconds;
  for (const auto& row : r.rows) {
    std::snprintf(buf, sizeof buf, "%s,%.9f,%.9f,%.6f,%.3e\n", to_string(row.method).c_str(), row.first_seconds,
                  row.average_seconds, row.average_seconds / base, row.max_rel_diff);
    o << buf;
  }
  return o.str();
}

/// Parses argv and dispatches to a subcommand.
inline int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"SIMP topology optimization"};
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> overrides;
  auto* run = app.add_subcommand("run", "run an optimization from a config file");
  run->add_option("--config", config_path, "key = value config file")->required();
  run->add_option("--set", overrides, "override a config key (key=value), repeatable");

  GradCheckConfig gc;
  std::string gc_cells = "8x5", gc_filter = "none", gc_mesh = "quad";
  auto* grad = app.add_subcommand("gradcheck", "compare analytic sensitivities with finite differences");
  grad->set_help_flag("--help", "print this help message and exit");
  grad->add_option("--problem", gc.problem, "cantilever2d | mbb2d | cantilever3d")->required();
  grad->add_option("--cells", gc_cells, "cell counts, e.g. 8x5 or 4x2x2")->required();
  grad->add_option("--filter", gc_filter, "none | density | heaviside");
  grad->add_option("--h", gc.h, "finite-difference step");
  grad->add_option("--rmin", gc.rmin, "filter radius");
  grad->add_option("--beta", gc.beta, "Heaviside sharpness");
  grad->add_option("--mesh", gc_mesh, "quad | tri");
  grad->add_option("--seed", gc.seed, "seed of the random evaluation point");
  grad->add_option("--corrupt", gc.corrupt_scale, "scale the analytic gradient (detector self-test)")
      ->group("");

  std::string b_problem, b_cells, b_csv;
  int b_iters = 10;
  auto* bench = app.add_subcommand("bench-assembly", "time standard, fast and symbolic assembly");
  bench->add_option("--problem", b_problem, "cantilever2d | mbb2d | cantilever3d")->required();
  bench->add_option("--cells", b_cells, "cell counts")->required();
  bench->add_option("--iters", b_iters, "timed assemblies per method");
  bench->add_option("--csv", b_csv, "also write the table as CSV to this path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    std::ostringstream o, eo;
    const int code = app.exit(e, o, eo);
    out << o.str();
    err << eo.str();
    return code == 0 ? 0 : kConfigError;
  }

  if (*run) return cmd_run(config_path, overrides, out, err);

  if (*grad) {
    try {
      gc.cells = parse_cells(gc_cells);
      gc.filter = parse_filter_kind(gc_filter);
      if (gc_mesh != "quad" && gc_mesh != "tri") throw InvalidArgument("mesh must be quad or tri");
      gc.triangles = gc_mesh == "tri";
    } catch (const Error& e) {
      err << "config error: " << e.what() << "\n";
      return kConfigError;
    }
    return cmd_gradcheck(gc, out, err);
  }

  try {
    BenchResult r = bench_assembly(b_problem, parse_cells(b_cells), b_iters);
    out << format_bench_text(r) << "\n" << format_bench_csv(r);
    if (!b_csv.empty()) io::write_text(b_csv, format_bench_csv(r));
    return r.agree ? kConverged : kCheckFailed;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kConfigError;
  }
}

}  // namespace topopt::cli
