#pragma once

// Solves of the manufactured problems, error measurement, convergence
// studies with estimated orders of convergence, the viscosity sweep against
// Taylor-Hood, and CSV / gnuplot output.

#include "mcs/assembly.hpp"
#include "mcs/condense.hpp"
#include "mcs/linsolve.hpp"
#include "mcs/manufactured.hpp"
#include "mcs/mesh.hpp"
#include "mcs/space.hpp"
#include "mcs/taylor_hood.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <functional>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

namespace mcs {

struct ErrorReport {
  int cells = 0;
  int k = 0;
  double nu = 0;
  double h1_velocity = 0;  // || grad u - grad_h u_h ||
  double l2_stress = 0;
  double l2_pressure = 0;
  double l2_velocity = 0;
  double div_residual = 0;  // max |div u_h|
  double norm_v = 0;        // || u_h ||_{V_h}
  double solve_residual = 0;
};

/// The manufactured fields in the form consistency_residual expects
/// (smooth fields, so the cell index is ignored).
template <int Dim>
ExactFields<Dim> exact_fields(const ManufacturedCase<Dim>& mc) {
  ExactFields<Dim> ex;
  ex.sigma = [mc](int, const Point<Dim>& x) { return mc.sigma(x); };
  ex.u = [mc](int, const Point<Dim>& x) { return mc.u(x); };
  ex.grad_u = [mc](int, const Point<Dim>& x) { return mc.grad_u(x); };
  ex.p = [mc](int, const Point<Dim>& x) { return mc.p(x); };
  ex.f = [mc](const Point<Dim>& x) { return mc.f(x); };
  return ex;
}

struct SolveOptions {
  bool condense = false;
  int threads = default_threads();
};

/// Solves the MCS system for the load f, directly or through static
/// condensation. Either way the full-system residual is checked.
template <int Dim, class Load>
McsSolution<Dim> solve_mcs(const McsSpace<Dim>& V, double nu, Load f, int load_degree, const SolveOptions& opt = {},
                           double* residual = nullptr) {
  const auto sys = assemble_system(V, nu, f, load_degree, B2Form::Gradient, opt.threads);
  Eigen::VectorXd x;
  SolveInfo info;
  if (opt.condense) {
    const auto cs = static_condense(sys, opt.threads);
    x = solve_condensed(cs, sys.matrix, sys.rhs, &info);
  } else {
    x = solve(sys.matrix, sys.rhs, &info);
  }
  if (residual) *residual = info.residual;
  return split_solution(V, x);
}

/// Error quadrature degree: at least 2k+6; in 2D high enough to integrate
/// the squared velocity error exactly.
template <int Dim>
int error_degree(int k) {
  return Dim == 2 ? std::max(2 * k + 6, 2 * ManufacturedCase<2>::velocity_degree()) : 2 * k + 6;
}

template <int Dim>
ErrorReport compute_errors(const McsSolution<Dim>& sol, const ManufacturedCase<Dim>& mc) {
  const McsSpace<Dim>* V = sol.u.space;
  if (!V || sol.sigma.space != V || sol.p.space != V)
    throw std::invalid_argument("compute_errors: solution components live on different meshes");
  const auto& m = V->mesh();
  const int k = V->order();
  const ReferenceTables<Dim> ref(*V, error_degree<Dim>(k));
  const auto& q = ref.rule;
  const auto& d = V->dofs();
  ErrorReport e;
  e.cells = m.num_cells();
  e.k = k;
  e.nu = mc.nu;
  double eg = 0, es = 0, ep = 0, eu = 0;
  const StressTable sref{ref.stress.val, {}};
  for (int c = 0; c < m.num_cells(); ++c) {
    const auto& g = V->geometry(c);
    const Eigen::VectorXd s = V->stress_physical(c, sref).val * gather(sol.sigma.coef, d.stress[c]);
    const VelocityTable vt = V->velocity_physical(c, ref.velocity);
    const Eigen::VectorXd lu = gather(sol.u.coef, d.velocity[c]);
    const Eigen::VectorXd uv = vt.val * lu, ug = vt.grad * lu;
    const Eigen::VectorXd pv = ref.pressure * gather(sol.p.coef, d.pressure[c]);
    for (std::size_t p = 0; p < q.size(); ++p) {
      const double w = q.weights[p] * g.detF;
      const Point<Dim> x = g.map(q.points[p]);
      const Mat<Dim> G = mc.grad_u(x), S = mc.sigma(x);
      const Eigen::Map<const Eigen::Matrix<double, Dim, Dim, Eigen::RowMajor>> Gh(&ug[p * Dim * Dim]), Sh(&s[p * Dim * Dim]);
      eg += w * (G - Gh).squaredNorm();
      es += w * (S - Sh).squaredNorm();
      ep += w * std::pow(mc.p(x) - pv[p], 2);
      eu += w * (mc.u(x) - uv.template segment<Dim>(p * Dim)).squaredNorm();
    }
  }
  e.h1_velocity = std::sqrt(eg);
  e.l2_stress = std::sqrt(es);
  e.l2_pressure = std::sqrt(ep);
  e.l2_velocity = std::sqrt(eu);
  e.div_residual = divergence_residual(sol.u);
  e.norm_v = discrete_norm_V(sol.u);
  return e;
}

/// Solve of the manufactured problem on one mesh.
template <int Dim>
ErrorReport solve_manufactured(const Mesh<Dim>& mesh, int k, double nu, const SolveOptions& opt = {}) {
  const McsSpace<Dim> V(mesh, k, opt.threads);
  const ManufacturedCase<Dim> mc(nu);
  double res = 0;
  const auto sol = solve_mcs(V, nu, [&](const Point<Dim>& x) { return mc.f(x); }, mc.load_degree() + k, opt, &res);
  ErrorReport e = compute_errors(sol, mc);
  e.solve_residual = res;
  return e;
}

struct ConvergenceRow {
  ErrorReport report;
  // eoc of h1_velocity, l2_stress, l2_pressure, l2_velocity (empty on the first row)
  std::optional<std::array<double, 4>> eoc;
};

using ConvergenceTable = std::vector<ConvergenceRow>;

inline double eoc(double coarse, double fine) { return std::log2(coarse / fine); }

/// Uniform refinement sequence starting from the structured mesh with n
/// subdivisions per direction.
template <int Dim>
ConvergenceTable convergence_study(int k, double nu, int levels, int base_n, const SolveOptions& opt = {}) {
  if (levels < 2) throw std::invalid_argument("convergence_study: need at least two levels");
  ConvergenceTable table;
  Mesh<Dim> mesh = build_structured_mesh<Dim>(base_n);
  for (int l = 0; l < levels; ++l) {
    if (l > 0) mesh = uniform_refine(mesh);
    ConvergenceRow row;
    row.report = solve_manufactured(mesh, k, nu, opt);
    if (!table.empty()) {
      const auto& a = table.back().report;
      const auto& b = row.report;
      row.eoc = std::array<double, 4>{eoc(a.h1_velocity, b.h1_velocity), eoc(a.l2_stress, b.l2_stress),
                                      eoc(a.l2_pressure, b.l2_pressure), eoc(a.l2_velocity, b.l2_velocity)};
    }
    table.push_back(row);
  }
  return table;
}

struct RobustnessRow {
  double nu = 0;
  double mcs_h1_velocity = 0;
  double th_h1_velocity = 0;
  double mcs_div_residual = 0;
  double th_div_residual = 0;
};

/// MCS and Taylor-Hood velocity errors for each viscosity on the structured
/// 2D mesh with n subdivisions; rows sorted by nu descending.
inline std::vector<RobustnessRow> pressure_robustness_sweep(int k, std::vector<double> nus, int n,
                                                            const SolveOptions& opt = {}) {
  if (k < 2) throw std::invalid_argument("pressure_robustness_sweep: Taylor-Hood needs k >= 2");
  std::sort(nus.begin(), nus.end(), std::greater<>());
  const Mesh<2> mesh = build_structured_mesh<2>(n);
  const McsSpace<2> V(mesh, k, opt.threads);
  std::vector<RobustnessRow> rows;
  for (double nu : nus) {
    const ManufacturedCase<2> mc(nu);
    RobustnessRow r;
    r.nu = nu;
    const auto f = [&](const Point<2>& x) { return mc.f(x); };
    const auto sol = solve_mcs(V, nu, f, mc.load_degree() + k, opt);
    const auto e = compute_errors(sol, mc);
    r.mcs_h1_velocity = e.h1_velocity;
    r.mcs_div_residual = e.div_residual;
    const auto th = assemble_taylor_hood(mesh, k, nu, f, mc.load_degree(), opt.threads);
    const Eigen::VectorXd x = solve(th.matrix, th.rhs);
    const auto te = taylor_hood_errors(
        th, x, [&](const Point<2>& y) { return mc.grad_u(y); }, [&](const Point<2>& y) { return mc.p(y); },
        error_degree<2>(k));
    r.th_h1_velocity = te.h1_velocity;
    r.th_div_residual = te.div_residual;
    rows.push_back(r);
  }
  return rows;
}

// ---------------------------------------------------------------- output

inline std::string format_number(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.16e", v);
  return buf;
}

inline void write_convergence_csv(const ConvergenceTable& t, std::ostream& os) {
  os << "cells,h1_u,eoc_h1_u,l2_sigma,eoc_l2_sigma,l2_p,eoc_l2_p,l2_u,eoc_l2_u,div_residual\r\n";
  for (const auto& row : t) {
    const auto& r = row.report;
    const double err[4] = {r.h1_velocity, r.l2_stress, r.l2_pressure, r.l2_velocity};
    os << r.cells;
    for (int i = 0; i < 4; ++i) os << ',' << format_number(err[i]) << ',' << (row.eoc ? format_number((*row.eoc)[i]) : "");
    os << ',' << format_number(r.div_residual) << "\r\n";
  }
}

inline void write_robustness_csv(const std::vector<RobustnessRow>& rows, std::ostream& os) {
  os << "nu,mcs_h1_u,taylor_hood_h1_u\r\n";
  for (const auto& r : rows)
    os << format_number(r.nu) << ',' << format_number(r.mcs_h1_velocity) << ',' << format_number(r.th_h1_velocity)
       << "\r\n";
}

/// Log-log plot of the errors against the number of cells with reference
/// slopes h^2 ... h^6 (h ~ cells^(-1/d)).
inline void write_convergence_gnuplot(std::ostream& os, const std::string& csv, int dim, int k,
                                      const std::string& image) {
  os << "set datafile separator ','\n"
     << "set terminal pngcairo size 900,650\n"
     << "set output '" << image << "'\n"
     << "set logscale xy\n"
     << "set format y '10^{%L}'\n"
     << "set xlabel '|T_h|'\n"
     << "set ylabel 'error'\n"
     << "set key outside right\n"
     << "set title 'MCS, d = " << dim << ", k = " << k << "'\n"
     << "stats '" << csv << "' using 1:2 nooutput\n"
     << "x0 = STATS_min_x; y0 = STATS_max_y\n";
  os << "plot '" << csv << "' using 1:2 every ::1 with linespoints title '||grad u - grad u_h||', \\\n"
     << "     '' using 1:4 every ::1 with linespoints title '||sigma - sigma_h||', \\\n"
     << "     '' using 1:6 every ::1 with linespoints title '||p - p_h||', \\\n"
     << "     '' using 1:8 every ::1 with linespoints title '||u - u_h||'";
  for (int r = 2; r <= 6; ++r)
    os << ", \\\n     y0 * (x / x0)**(-" << r << ".0 / " << dim << ") with lines dashtype 2 title 'h^" << r << "'";
  os << "\n";
}

inline void write_robustness_gnuplot(std::ostream& os, const std::string& csv, const std::string& image) {
  os << "set datafile separator ','\n"
     << "set terminal pngcairo size 900,650\n"
     << "set output '" << image << "'\n"
     << "set logscale xy\n"
     << "set xlabel 'nu'\n"
     << "set ylabel '||grad u - grad u_h||'\n"
     << "set key top right\n"
     << "plot '" << csv << "' using 1:2 every ::1 with linespoints title 'MCS', \\\n"
     << "     '' using 1:3 every ::1 with linespoints title 'Taylor-Hood'\n";
}

}  // namespace mcs
