#include "mcs/interpolation.hpp"
#include "mcs/study.hpp"
#include "test_helpers.hpp"

#include <gtest/gtest.h>

#include <random>
#include <sstream>

namespace {

using namespace mcs;

template <int Dim>
Point<Dim> random_point(std::mt19937& gen) {
  std::uniform_real_distribution<double> u(0, 1);
  Point<Dim> x;
  for (int i = 0; i < Dim; ++i) x[i] = u(gen);
  return x;
}

template <int Dim>
void check_manufactured_fields() {
  const ManufacturedCase<Dim> mc(0.3);
  std::mt19937 gen(11);
  const double h = 1e-5;
  for (int rep = 0; rep < 100; ++rep) {
    const Point<Dim> x = random_point<Dim>(gen);
    const Mat<Dim> G = mc.grad_u(x);
    EXPECT_LE(std::abs(G.trace()), 1e-13);
    EXPECT_LT((mc.sigma(x) - 0.3 * G).norm(), 1e-15);
    // closed-form derivatives against central differences
    Point<Dim> lap = Point<Dim>::Zero();
    for (int m = 0; m < Dim; ++m) {
      Point<Dim> e = Point<Dim>::Zero();
      e[m] = h;
      const Point<Dim> du = (mc.u(x + e) - mc.u(x - e)) / (2 * h);
      EXPECT_LT((du - G.col(m)).norm(), 1e-8);
      lap += (mc.grad_u(x + e).col(m) - mc.grad_u(x - e).col(m)) / (2 * h);
      EXPECT_NEAR((mc.p(x + e) - mc.p(x - e)) / (2 * h), mc.grad_p(x)[m], 1e-8);
    }
    EXPECT_LT((lap - mc.laplace_u(x)).norm(), 1e-7);
    EXPECT_LT((mc.f(x) - (-0.3 * mc.laplace_u(x) + mc.grad_p(x))).norm(), 1e-13);
  }
  // u vanishes on the boundary
  for (int rep = 0; rep < 20; ++rep) {
    Point<Dim> x = random_point<Dim>(gen);
    x[rep % Dim] = rep % 2 ? 1.0 : 0.0;
    EXPECT_LT(mc.u(x).norm(), 1e-15);
  }
  // int p = 0 with an exact rule
  const auto q = simplex_quadrature<Dim>(6);
  const Mesh<Dim> m = build_structured_mesh<Dim>(1);
  double ip = 0;
  for (int c = 0; c < m.num_cells(); ++c) {
    const auto g = cell_geometry(m, c);
    for (std::size_t p = 0; p < q.size(); ++p) ip += q.weights[p] * g.detF * mc.p(g.map(q.points[p]));
  }
  EXPECT_NEAR(ip, 0.0, 1e-14);
}

TEST(Manufactured, Fields2D) {
  check_manufactured_fields<2>();
  const ManufacturedCase<2> mc(1.0);
  EXPECT_LT(mc.u(Point<2>(0.5, 0.5)).norm(), 1e-16);
  // u = (-d_y psi, d_x psi)
  const Point<2> x(0.3, 0.7);
  EXPECT_NEAR(mc.u(x)[0], -g_derivative(0, 0.3) * g_derivative(1, 0.7), 1e-16);
  EXPECT_NEAR(mc.u(x)[1], g_derivative(1, 0.3) * g_derivative(0, 0.7), 1e-16);
  EXPECT_THROW(ManufacturedCase<2>(0.0), std::invalid_argument);
}

TEST(Manufactured, Fields3D) { check_manufactured_fields<3>(); }

template <int Dim>
McsSolution<Dim> interpolant(const McsSpace<Dim>& V, const ManufacturedCase<Dim>& mc) {
  McsSolution<Dim> s;
  s.sigma = FeFunction<Dim>(Field::Stress, V, interpolate_stress(V, [&](const Point<Dim>& x) { return mc.sigma(x); }));
  s.u = FeFunction<Dim>(Field::Velocity, V, interpolate_velocity(V, [&](const Point<Dim>& x) { return mc.u(x); }));
  s.p = FeFunction<Dim>(Field::Pressure, V, project_pressure(V, [&](const Point<Dim>& x) { return mc.p(x); }));
  return s;
}

// Interpolation errors through FeFunction evaluation with a different rule.
TEST(Errors, MatchDirectInterpolationErrors) {
  const Mesh<2> mesh = testutil::perturbed_mesh<2>(3, 0.2);
  const McsSpace<2> V(mesh, 2);
  const ManufacturedCase<2> mc(1e-3);
  const auto s = interpolant(V, mc);
  const ErrorReport e = compute_errors(s, mc);
  const auto q = simplex_quadrature<2>(error_degree<2>(2) + 2);
  double eg = 0, es = 0, ep = 0, eu = 0;
  for (int c = 0; c < mesh.num_cells(); ++c) {
    const auto& g = V.geometry(c);
    const Eigen::VectorXd sv = s.sigma.values(c, q.points), uv = s.u.values(c, q.points),
                          pv = s.p.values(c, q.points);
    Eigen::VectorXd gv, dv;
    s.u.gradients(c, q.points, gv, dv);
    for (std::size_t p = 0; p < q.size(); ++p) {
      const double w = q.weights[p] * g.detF;
      const Point<2> x = g.map(q.points[p]);
      Mat<2> Gh, Sh;
      for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) {
          Gh(i, j) = gv[p * 4 + i * 2 + j];
          Sh(i, j) = sv[p * 4 + i * 2 + j];
        }
      eg += w * (mc.grad_u(x) - Gh).squaredNorm();
      es += w * (mc.sigma(x) - Sh).squaredNorm();
      ep += w * std::pow(mc.p(x) - pv[p], 2);
      eu += w * (mc.u(x) - Point<2>(uv[2 * p], uv[2 * p + 1])).squaredNorm();
    }
  }
  EXPECT_NEAR(e.h1_velocity, std::sqrt(eg), 1e-12 * std::sqrt(eg));
  EXPECT_NEAR(e.l2_stress, std::sqrt(es), 1e-12 * std::sqrt(es));
  EXPECT_NEAR(e.l2_pressure, std::sqrt(ep), 1e-12 * std::sqrt(ep));
  EXPECT_NEAR(e.l2_velocity, std::sqrt(eu), 1e-12 * std::sqrt(eu));
  EXPECT_GT(e.h1_velocity, 1e-6);
}

// With k = 7 the exact fields lie in the discrete spaces (u of degree 7,
// sigma of degree 6, p of degree 5), so all errors vanish.
TEST(Errors, VanishForFieldsInTheSpace) {
  const Mesh<2> mesh = build_structured_mesh<2>(1);
  const McsSpace<2> V(mesh, 7);
  const ManufacturedCase<2> mc(1.0);
  const ErrorReport e = compute_errors(interpolant(V, mc), mc);
  EXPECT_LT(e.h1_velocity, 1e-11);
  EXPECT_LT(e.l2_stress, 1e-11);
  EXPECT_LT(e.l2_pressure, 1e-11);
  EXPECT_LT(e.l2_velocity, 1e-12);
}

TEST(Errors, MismatchedSpacesRejected) {
  const Mesh<2> mesh = build_structured_mesh<2>(2);
  const McsSpace<2> V(mesh, 1), W(mesh, 1);
  const ManufacturedCase<2> mc(1.0);
  auto s = interpolant(V, mc);
  s.p = FeFunction<2>(Field::Pressure, W, Eigen::VectorXd::Zero(W.dofs().num_pressure));
  EXPECT_THROW(compute_errors(s, mc), std::invalid_argument);
  EXPECT_EQ(error_degree<2>(2), 14);
  EXPECT_EQ(error_degree<3>(2), 10);
}

// Exact facet and interior moments of a solenoidal field give a solenoidal
// interpolant (div commutes with the BDM interpolant).
TEST(Interpolation, BdmInterpolantOfExactVelocityIsSolenoidal) {
  for (int k = 1; k <= 3; ++k) {
    const Mesh<2> mesh = testutil::perturbed_mesh<2>(3, 0.2);
    const McsSpace<2> V(mesh, k);
    const ManufacturedCase<2> mc(1.0);
    const FeFunction<2> u(Field::Velocity, V, interpolate_velocity(V, [&](const Point<2>& x) { return mc.u(x); }, 8));
    EXPECT_LE(divergence_residual(u), 1e-12) << "k=" << k;
  }
  const Mesh<3> mesh = build_structured_mesh<3>(2);
  const McsSpace<3> V(mesh, 2);
  const ManufacturedCase<3> mc(1.0);
  // moments integrated exactly: u has degree 11
  const FeFunction<3> u(Field::Velocity, V, interpolate_velocity(V, [&](const Point<3>& x) { return mc.u(x); }, 12));
  EXPECT_LE(divergence_residual(u), 1e-12);
}

TEST(Solve, SecondOrderVelocityConvergence2D) {
  const SolveOptions opt;
  const ErrorReport a = solve_manufactured(build_structured_mesh<2>(4), 2, 1e-3, opt);
  const ErrorReport b = solve_manufactured(build_structured_mesh<2>(8), 2, 1e-3, opt);
  const double ratio = a.h1_velocity / b.h1_velocity;
  EXPECT_GE(ratio, std::pow(2.0, 1.5));
  EXPECT_LE(ratio, std::pow(2.0, 2.5));
  for (const auto& e : {a, b}) {
    EXPECT_LE(e.div_residual, 1e-10 * e.norm_v);
    EXPECT_LE(e.solve_residual, 1e-10);
  }
}

TEST(Solve, ConvergenceTableAndEoc) {
  SolveOptions opt;
  opt.condense = true;
  const auto t = convergence_study<2>(1, 1.0, 3, 2, opt);
  ASSERT_EQ(t.size(), 3u);
  EXPECT_FALSE(t[0].eoc.has_value());
  EXPECT_EQ(t[0].report.cells, 8);
  EXPECT_EQ(t[2].report.cells, 128);
  ASSERT_TRUE(t[2].eoc.has_value());
  EXPECT_DOUBLE_EQ((*t[2].eoc)[0], std::log2(t[1].report.h1_velocity / t[2].report.h1_velocity));
  EXPECT_NEAR((*t[2].eoc)[0], 1.0, 0.3);
  EXPECT_THROW(convergence_study<2>(1, 1.0, 1, 2), std::invalid_argument);
  EXPECT_DOUBLE_EQ(eoc(4.0, 1.0), 2.0);
}

template <int Dim>
void check_condensed_matches_full(const Mesh<Dim>& mesh, int k, double nu) {
  const McsSpace<Dim> V(mesh, k);
  const ManufacturedCase<Dim> mc(nu);
  const auto sys = assemble_system(V, nu, [&](const Point<Dim>& x) { return mc.f(x); }, mc.load_degree() + k);
  const Eigen::VectorXd full = solve(sys.matrix, sys.rhs);
  const auto cs = static_condense(sys);
  SolveInfo info;
  const Eigen::VectorXd cond = solve_condensed(cs, sys.matrix, sys.rhs, &info);
  EXPECT_LE((cond - full).norm(), 1e-10 * full.norm()) << "k=" << k;
  EXPECT_LE(info.residual, 1e-10);
  // the condensed system keeps facet DOFs, cell constants and the multiplier
  EXPECT_EQ(cs.matrix.rows(), mesh.num_facets() * coupling_dofs_per_facet(V) + mesh.num_cells() + 1);
  EXPECT_LE(symmetry_defect(cs.matrix), 1e-10 * cs.matrix.norm());
}

TEST(Condense, AgreesWithFullSolve) {
  for (int k = 1; k <= 3; ++k) check_condensed_matches_full(testutil::perturbed_mesh<2>(3, 0.2), k, 1e-3);
  check_condensed_matches_full(build_structured_mesh<2>(4), 2, 1e-8);
  check_condensed_matches_full(build_structured_mesh<3>(1), 1, 1.0);
  check_condensed_matches_full(testutil::perturbed_mesh<3>(2, 0.15), 2, 1e-3);
}

TEST(Condense, CouplingDofsPerFacet) {
  const Mesh<2> m2 = build_structured_mesh<2>(2);
  for (int k = 1; k <= 5; ++k) EXPECT_EQ(coupling_dofs_per_facet(McsSpace<2>(m2, k)), 2 * k + 1);
  // 3D: 2 dim P^{k-1}(F) + dim P^k(F)
  const Mesh<3> m3 = build_structured_mesh<3>(1);
  EXPECT_EQ(coupling_dofs_per_facet(McsSpace<3>(m3, 1)), 2 + 3);
  EXPECT_EQ(coupling_dofs_per_facet(McsSpace<3>(m3, 2)), 6 + 6);
}

TEST(Condense, ZeroLoadGivesZero) {
  const Mesh<2> mesh = build_structured_mesh<2>(3);
  const McsSpace<2> V(mesh, 2);
  const auto sys = assemble_system(V, 1.0, [](const Point<2>&) { return Point<2>::Zero().eval(); }, 4);
  const auto cs = static_condense(sys);
  EXPECT_EQ(solve_condensed(cs, sys.matrix, sys.rhs).norm(), 0.0);
}

TEST(TaylorHood, ZeroLoadAndGuards) {
  const Mesh<2> mesh = build_structured_mesh<2>(3);
  const auto th = assemble_taylor_hood(mesh, 2, 1.0, [](const Point<2>&) { return Point<2>::Zero().eval(); }, 0);
  EXPECT_EQ(solve(th.matrix, th.rhs).norm(), 0.0);
  EXPECT_EQ(th.size(), 2 * 49 + 16 + 1);
  EXPECT_LE(symmetry_defect(th.matrix), 1e-14);
  EXPECT_THROW(assemble_taylor_hood(mesh, 1, 1.0, [](const Point<2>& x) { return x; }, 1), std::invalid_argument);
}

TaylorHoodErrors taylor_hood_run(int n, double nu) {
  const Mesh<2> mesh = build_structured_mesh<2>(n);
  const ManufacturedCase<2> mc(nu);
  const auto th = assemble_taylor_hood(mesh, 2, nu, [&](const Point<2>& x) { return mc.f(x); }, mc.load_degree());
  const Eigen::VectorXd x = solve(th.matrix, th.rhs);
  return taylor_hood_errors(
      th, x, [&](const Point<2>& y) { return mc.grad_u(y); }, [&](const Point<2>& y) { return mc.p(y); }, 14);
}

TEST(TaylorHood, ConvergesAndIsNotPressureRobust) {
  const auto a = taylor_hood_run(4, 1.0), b = taylor_hood_run(8, 1.0);
  EXPECT_NEAR(std::log2(a.h1_velocity / b.h1_velocity), 2.0, 0.35);
  EXPECT_NEAR(std::log2(a.l2_pressure / b.l2_pressure), 2.0, 0.5);
  const auto lo = taylor_hood_run(4, 1e-6);
  EXPECT_GT(lo.div_residual, 1e-3);
  EXPECT_GT(lo.h1_velocity, 1e3 * a.h1_velocity);
}

TEST(Robustness, McsVelocityIndependentOfViscosity) {
  SolveOptions opt;
  opt.condense = true;
  const auto rows = pressure_robustness_sweep(2, {1e-8, 1.0, 1e-4}, 4, opt);
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[0].nu, 1.0);
  EXPECT_EQ(rows[2].nu, 1e-8);
  for (const auto& r : rows) {
    EXPECT_NEAR(r.mcs_h1_velocity / rows[0].mcs_h1_velocity, 1.0, 1e-3);
    EXPECT_LE(r.mcs_div_residual, 1e-12);
  }
  // Taylor-Hood: once the pressure part dominates the error scales like 1/nu
  EXPECT_NEAR(rows[2].th_h1_velocity / rows[1].th_h1_velocity, 1e4, 1e2);
  EXPECT_GT(rows[1].th_h1_velocity, 1e3 * rows[0].th_h1_velocity);
  EXPECT_THROW(pressure_robustness_sweep(1, {1.0}, 2), std::invalid_argument);
}

// Adding grad(x^5 + y^5) to f leaves u_h and sigma_h unchanged and shifts
// p_h by the projection of the potential.
TEST(Robustness, IrrotationalLoadShiftsOnlyThePressure) {
  const Mesh<2> mesh = testutil::perturbed_mesh<2>(4, 0.2);
  for (int k : {1, 2, 3}) {
    const McsSpace<2> V(mesh, k);
    const double nu = 1e-3;
    const ManufacturedCase<2> mc(nu);
    const auto f = [&](const Point<2>& x) { return mc.f(x); };
    const auto g = [&](const Point<2>& x) { return Point<2>(mc.f(x) + Point<2>(5 * std::pow(x[0], 4), 5 * std::pow(x[1], 4))); };
    const auto a = solve_mcs(V, nu, f, mc.load_degree() + k);
    const auto b = solve_mcs(V, nu, g, mc.load_degree() + k);
    EXPECT_LE((a.u.coef - b.u.coef).norm(), 1e-9 * a.u.coef.norm()) << "k=" << k;
    EXPECT_LE((a.sigma.coef - b.sigma.coef).norm(), 1e-9 * a.sigma.coef.norm()) << "k=" << k;
    const Eigen::VectorXd phi =
        project_pressure(V, [](const Point<2>& x) { return std::pow(x[0], 5) + std::pow(x[1], 5); });
    EXPECT_LE((b.p.coef - a.p.coef - phi).norm(), 1e-9 * phi.norm()) << "k=" << k;
  }
}

// A pure gradient load is balanced by the pressure alone.
TEST(Robustness, GradientLoadGivesZeroVelocity) {
  const Mesh<2> mesh = testutil::perturbed_mesh<2>(4, 0.2);
  for (int k : {1, 2, 3}) {
    const McsSpace<2> V(mesh, k);
    const auto g = [](const Point<2>& x) { return Point<2>(5 * std::pow(x[0], 4), 5 * std::pow(x[1], 4)); };
    const auto sol = solve_mcs(V, 1e-3, g, 4 + k);
    EXPECT_LE(sol.u.coef.norm(), 1e-10) << "k=" << k;
    EXPECT_LE(sol.sigma.coef.norm(), 1e-10) << "k=" << k;
    EXPECT_GT(sol.p.coef.norm(), 0.1) << "k=" << k;
  }
}

TEST(Output, ConvergenceCsvSchemaAndDeterminism) {
  SolveOptions opt;
  opt.condense = true;
  std::ostringstream a, b;
  write_convergence_csv(convergence_study<2>(1, 1e-3, 2, 2, opt), a);
  write_convergence_csv(convergence_study<2>(1, 1e-3, 2, 2, opt), b);
  EXPECT_EQ(a.str(), b.str());
  const std::string s = a.str();
  std::vector<std::string> lines;
  std::size_t pos = 0;
  while (pos < s.size()) {
    const std::size_t e = s.find("\r\n", pos);
    ASSERT_NE(e, std::string::npos);
    lines.push_back(s.substr(pos, e - pos));
    pos = e + 2;
  }
  ASSERT_EQ(lines.size(), 3u);
  EXPECT_EQ(lines[0], "cells,h1_u,eoc_h1_u,l2_sigma,eoc_l2_sigma,l2_p,eoc_l2_p,l2_u,eoc_l2_u,div_residual");
  for (const auto& l : lines) EXPECT_EQ(std::count(l.begin(), l.end(), ','), 9);
  EXPECT_EQ(lines[1].rfind("8,", 0), 0u);
  EXPECT_NE(lines[1].find(",,"), std::string::npos);  // no eoc on the first row
  EXPECT_EQ(lines[2].find(",,"), std::string::npos);
  EXPECT_EQ(format_number(0.1), "1.0000000000000001e-01");
  EXPECT_EQ(s.find('\n'), s.find("\r\n") + 1);
}

TEST(Output, RobustnessCsvAndScripts) {
  std::vector<RobustnessRow> rows(2);
  rows[0].nu = 1;
  rows[0].mcs_h1_velocity = 2;
  rows[0].th_h1_velocity = 3;
  rows[1].nu = 0.5;
  std::ostringstream os;
  write_robustness_csv(rows, os);
  EXPECT_EQ(os.str(),
            "nu,mcs_h1_u,taylor_hood_h1_u\r\n"
            "1.0000000000000000e+00,2.0000000000000000e+00,3.0000000000000000e+00\r\n"
            "5.0000000000000000e-01,0.0000000000000000e+00,0.0000000000000000e+00\r\n");
  std::ostringstream gp;
  write_convergence_gnuplot(gp, "out.csv", 2, 3, "out.png");
  const std::string g = gp.str();
  EXPECT_NE(g.find("set logscale xy"), std::string::npos);
  for (int r = 2; r <= 6; ++r) EXPECT_NE(g.find("title 'h^" + std::to_string(r) + "'"), std::string::npos);
  EXPECT_NE(g.find("'out.csv'"), std::string::npos);
}

}  // namespace
