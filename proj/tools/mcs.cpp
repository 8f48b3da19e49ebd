// Command-line driver: element self-checks, single solves, convergence
// studies and the viscosity sweep against Taylor-Hood.
//
// Exit codes: 0 success, 1 runtime failure (IO, solver, failed check),
// 2 usage error.

#include "mcs/mcs.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace {

using namespace mcs;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Config {
  int dim = 2;
  int k = 2;
  int n = -1;  // structured subdivisions; -1 picks a default per command
  int levels = 3;
  double nu = 1e-3;
  std::vector<double> nus{1, 1e-2, 1e-4, 1e-6, 1e-8};
  std::string output;
  bool condense = true;
  bool force = false;
  int threads = 0;  // 0: MCS_THREADS or hardware concurrency
  int cells = 100;  // random affine cells for element-check

  [[nodiscard]] SolveOptions options() const {
    SolveOptions o;
    o.condense = condense;
    o.threads = threads > 0 ? threads : default_threads();
    return o;
  }
};

void validate(const Config& c, bool taylor_hood = false) {
  if (c.dim != 2 && c.dim != 3) throw UsageError("--dim must be 2 or 3");
  if (c.k < 1) throw UsageError("--k must be >= 1 (the stress space needs k >= 1), got " + std::to_string(c.k));
  if (taylor_hood && c.k < 2) throw UsageError("Taylor-Hood needs --k >= 2, got " + std::to_string(c.k));
  if (c.dim == 3 && c.k > 3 && !c.force)
    throw UsageError("d = 3 with k > 3 is outside the tested range; pass --force to run anyway");
  if (!(c.nu > 0)) throw UsageError("--nu must be positive");
  for (double v : c.nus)
    if (!(v > 0)) throw UsageError("--nus entries must be positive");
  if (c.threads < 0) throw UsageError("--threads must be >= 1");
}

std::ofstream open_output(const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open '" + path + "' for writing");
  return os;
}

void finish(std::ofstream& os, const std::string& path) {
  os.close();
  if (!os) throw std::runtime_error("writing '" + path + "' failed");
}

/// Sibling path with another extension: out.csv -> out.gp.
std::string sibling(const std::string& path, const std::string& ext) {
  return std::filesystem::path(path).replace_extension(ext).string();
}

void print_check(const CheckResult& r) {
  std::printf("%s  %-56s %.3e (%s %.0e)\n", r.passed() ? "PASS" : "FAIL", r.name.c_str(), r.value,
              r.upper ? "<=" : ">", r.tolerance);
}

template <int Dim>
int element_check(const Config& c) {
  const auto el = stress_basis<Dim>(c.k);
  const auto bdm = bdm_basis<Dim>(c.k);
  std::printf("d = %d, k = %d\n", Dim, c.k);
  std::printf("dim Sigma_%d(T) = %d (%d facet + %d interior)\n", c.k, el.size(), el.num_facet_functions(),
              el.num_bubbles());
  std::printf("dim BDM_%d(T) = %d, dim P_%d(T) = %d\n", c.k, bdm.size(), c.k - 1, poly_dim(Dim, c.k - 1));
  const auto results = element_checks<Dim>(c.k, c.cells);
  for (const auto& r : results) print_check(r);
  const bool ok = all_passed(results);
  std::printf("%s\n", ok ? "all checks passed" : "some checks FAILED");
  return ok ? 0 : 1;
}

template <int Dim>
int solve_once(const Config& c) {
  const int n = c.n > 0 ? c.n : (Dim == 2 ? 8 : 2);
  const Mesh<Dim> mesh = build_structured_mesh<Dim>(n);
  const ErrorReport e = solve_manufactured(mesh, c.k, c.nu, c.options());
  const bool div_ok = e.div_residual <= 1e-10 * e.norm_v;
  std::printf("d = %d, k = %d, nu = %.6e, n = %d, cells = %d\n", Dim, c.k, c.nu, n, e.cells);
  std::printf("h1_broken_velocity  %.16e\n", e.h1_velocity);
  std::printf("l2_stress           %.16e\n", e.l2_stress);
  std::printf("l2_pressure         %.16e\n", e.l2_pressure);
  std::printf("l2_velocity         %.16e\n", e.l2_velocity);
  std::printf("div_residual        %.16e\n", e.div_residual);
  std::printf("norm_Vh(u_h)        %.16e\n", e.norm_v);
  std::printf("solve_residual      %.16e\n", e.solve_residual);
  std::printf("%s  div_residual <= 1e-10 * ||u_h||_Vh\n", div_ok ? "PASS" : "FAIL");
  return div_ok ? 0 : 1;
}

template <int Dim>
int convergence(const Config& c) {
  if (c.levels < 2) throw UsageError("--levels must be >= 2");
  if (c.output.empty()) throw UsageError("convergence needs -o <file.csv>");
  const int n = c.n > 0 ? c.n : (Dim == 2 ? 2 : 1);
  const std::string gp = sibling(c.output, ".gp");
  // open both files first so that IO problems surface before the solves
  auto os = open_output(c.output);
  auto gs = open_output(gp);
  const ConvergenceTable t = convergence_study<Dim>(c.k, c.nu, c.levels, n, c.options());
  write_convergence_csv(t, os);
  finish(os, c.output);
  write_convergence_gnuplot(gs, std::filesystem::path(c.output).filename().string(), Dim, c.k,
                            std::filesystem::path(sibling(c.output, ".png")).filename().string());
  finish(gs, gp);
  std::ostringstream summary;
  write_convergence_csv(t, summary);
  std::cout << summary.str();
  std::printf("wrote %s and %s\n", c.output.c_str(), gp.c_str());
  return 0;
}

int probust(const Config& c) {
  if (c.output.empty()) throw UsageError("probust needs -o <file.csv>");
  const int n = c.n > 0 ? c.n : 16;
  const std::string gp = sibling(c.output, ".gp");
  auto os = open_output(c.output);
  auto gs = open_output(gp);
  const auto rows = pressure_robustness_sweep(c.k, c.nus, n, c.options());
  write_robustness_csv(rows, os);
  finish(os, c.output);
  write_robustness_gnuplot(gs, std::filesystem::path(c.output).filename().string(),
                           std::filesystem::path(sibling(c.output, ".png")).filename().string());
  finish(gs, gp);
  std::ostringstream summary;
  write_robustness_csv(rows, summary);
  std::cout << summary.str();
  std::printf("wrote %s and %s\n", c.output.c_str(), gp.c_str());
  return 0;
}

template <class Fn2, class Fn3>
int by_dim(const Config& c, Fn2 f2, Fn3 f3) {
  return c.dim == 2 ? f2(c) : f3(c);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Mass-conserving mixed stress (MCS) Stokes solver"};
  app.require_subcommand(1);
  Config c;

  auto add_common = [&](CLI::App* s) {
    s->add_option("--dim", c.dim, "Space dimension (2 or 3)");
    s->add_option("--k", c.k, "Polynomial order k >= 1");
    s->add_option("--threads", c.threads, "Worker threads (default: MCS_THREADS or all cores)");
    s->add_flag("--force", c.force, "Allow d = 3 with k > 3");
  };
  auto add_solver = [&](CLI::App* s) {
    s->add_option("--nu", c.nu, "Viscosity");
    s->add_option("--n", c.n, "Structured mesh subdivisions per direction");
    s->add_flag("--condense,!--no-condense", c.condense, "Static condensation of cell interiors (default on)");
  };

  auto* ec = app.add_subcommand("element-check", "Reference element and mapping self-checks");
  add_common(ec);
  ec->add_option("--cells", c.cells, "Random affine cells for the mapping identities")->check(CLI::PositiveNumber);

  auto* so = app.add_subcommand("solve", "Solve the manufactured problem on one mesh");
  add_common(so);
  add_solver(so);

  auto* cv = app.add_subcommand("convergence", "Convergence study under uniform refinement");
  add_common(cv);
  add_solver(cv);
  cv->add_option("--levels", c.levels, "Number of meshes");
  cv->add_option("-o,--output", c.output, "CSV file; a gnuplot script is written next to it");

  auto* pr = app.add_subcommand("probust", "Viscosity sweep, MCS against Taylor-Hood (2D)");
  add_common(pr);
  add_solver(pr);
  pr->add_option("--nus", c.nus, "Viscosities")->delimiter(',');
  pr->add_option("-o,--output", c.output, "CSV file; a gnuplot script is written next to it");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (ec->parsed()) {
      validate(c);
      return by_dim(c, element_check<2>, element_check<3>);
    }
    if (so->parsed()) {
      validate(c);
      return by_dim(c, solve_once<2>, solve_once<3>);
    }
    if (cv->parsed()) {
      validate(c);
      return by_dim(c, convergence<2>, convergence<3>);
    }
    if (pr->parsed()) {
      if (c.dim != 2) throw UsageError("probust runs on the 2D mesh only");
      validate(c, true);
      return probust(c);
    }
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
