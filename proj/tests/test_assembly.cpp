#include "mcs/assembly.hpp"
#include "mcs/manufactured.hpp"
#include "mcs/study.hpp"
#include "test_helpers.hpp"

#include <gtest/gtest.h>

#include <random>

namespace {

using namespace mcs;

double max_abs(const SparseMatrix& A) {
  double m = 0;
  for (int k = 0; k < A.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(A, k); it; ++it) m = std::max(m, std::abs(it.value()));
  return m;
}

Eigen::VectorXd random_vector(Eigen::Index n, unsigned seed) {
  std::mt19937 gen(seed);
  std::uniform_real_distribution<double> U(-1, 1);
  Eigen::VectorXd x(n);
  for (auto& v : x) v = U(gen);
  return x;
}

Mesh<2> two_triangles() {
  return Mesh<2>::from_cells({Point<2>(0, 0), Point<2>(1, 0), Point<2>(0.2, 1.1), Point<2>(1.3, 0.9)},
                             {{0, 1, 2}, {1, 3, 2}});
}

template <int Dim>
void expect_b2_forms_agree(const Mesh<Dim>& mesh, int k) {
  const McsSpace<Dim> V(mesh, k);
  const SparseMatrix B1 = assemble_b2(V, B2Form::Divergence);
  const SparseMatrix B2 = assemble_b2(V, B2Form::Gradient);
  const double scale = std::max(1.0, max_abs(B2));
  EXPECT_LT(max_abs(B1 - B2), 1e-12 * scale) << "k=" << k;
  EXPECT_GT(max_abs(B2), 1e-3);
}

TEST(Assembly, B2RepresentationsAgree2D) {
  for (int k = 1; k <= 3; ++k) expect_b2_forms_agree<2>(two_triangles(), k);
  for (int k = 1; k <= 3; ++k) expect_b2_forms_agree<2>(testutil::perturbed_mesh<2>(3, 0.2), k);
}

TEST(Assembly, B2RepresentationsAgree3D) {
  for (int k = 1; k <= 3; ++k) expect_b2_forms_agree<3>(build_structured_mesh<3>(1), k);
  expect_b2_forms_agree<3>(testutil::perturbed_mesh<3>(2, 0.15), 2);
}

Mesh<2> reference_triangle() { return Mesh<2>::from_cells({Point<2>(0, 0), Point<2>(1, 0), Point<2>(0, 1)}, {{0, 1, 2}}); }

TEST(Assembly, EnergyOfConstantS0OnReferenceCell) {
  const auto mesh = reference_triangle();
  const McsSpace<2> V(mesh, 1);
  const Mat<2> S0 = s_matrices<2>()(0, 0);
  const Eigen::VectorXd x = interpolate_stress(V, [&](const Point<2>&) { return S0; });
  const SparseMatrix A = assemble_a(V, 1.0);
  EXPECT_NEAR(x.dot(A * x), 2.0, 1e-13);
  EXPECT_NEAR(discrete_norm_Sigma(FeFunction<2>(Field::Stress, V, x)), std::sqrt(2.0), 1e-13);
}

TEST(Assembly, AScalesWithViscosityAndIsSymmetric) {
  const auto mesh = testutil::perturbed_mesh<2>(2, 0.2);
  const McsSpace<2> V(mesh, 2);
  const SparseMatrix A1 = assemble_a(V, 1.0), A10 = assemble_a(V, 10.0);
  EXPECT_LT(max_abs(A10 - A1 / 10.0), 1e-15 * max_abs(A1));
  EXPECT_LE(symmetry_defect(A1), 1e-14);
  // positive semidefinite Gram matrix
  const Eigen::MatrixXd Ad(A1);
  EXPECT_GT(Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(Ad).eigenvalues().minCoeff(), -1e-12 * Ad.norm());
}

TEST(Assembly, DevIsAppliedToGeneralMatrices) {
  const Eigen::MatrixXd I = (Eigen::MatrixXd(4, 1) << 2, 0, 0, 2).finished();
  EXPECT_LT(detail::deviator<2>(I).norm(), 1e-15);
}

TEST(Assembly, B1MatchesDirectDivergenceIntegrals) {
  const auto mesh = testutil::perturbed_mesh<2>(2, 0.2, 9);
  const int k = 2;
  const McsSpace<2> V(mesh, k);
  const auto u = [](const Point<2>& x) { return Point<2>(x[0] * x[0] + x[1], x[0] * x[1] - 3 * x[1] * x[1]); };
  const auto div_u = [](const Point<2>& x) { return 2 * x[0] + x[0] - 6 * x[1]; };
  const Eigen::VectorXd xv = interpolate_velocity(V, u);
  const Eigen::VectorXd b = assemble_b1(V) * xv;
  const auto q = simplex_quadrature<2>(6);
  const Eigen::MatrixXd R = V.pressure_table(q.points);
  for (int c = 0; c < mesh.num_cells(); ++c) {
    Eigen::VectorXd direct = Eigen::VectorXd::Zero(R.cols());
    for (std::size_t p = 0; p < q.size(); ++p)
      direct += q.weights[p] * V.geometry(c).detF * div_u(V.geometry(c).map(q.points[p])) * R.row(p).transpose();
    EXPECT_LT((b.segment(c * R.cols(), R.cols()) - direct).norm(), 1e-13);
  }
}

TEST(Assembly, B1PiolaPreservesIntegratedDivergence) {
  // one cell, v = Piola image of a field with reference divergence 1
  const auto mesh = Mesh<2>::from_cells({Point<2>(0.1, 0.2), Point<2>(1.3, 0.1), Point<2>(0.4, 0.9)}, {{0, 1, 2}});
  const McsSpace<2> V(mesh, 1);
  const auto& g = V.geometry(0);
  const Eigen::VectorXd xv = interpolate_velocity(V, [&](const Point<2>& x) {
    const Point<2> xh = g.pullback(x);
    return Point<2>(map_piola(g, Point<2>(xh[0], 0.0)));
  });
  // the pressure basis starts with the constant 1
  const double integral = (assemble_b1(V) * xv)[0];
  EXPECT_NEAR(integral, 0.5, 1e-13);  // reference area
}

TEST(Assembly, B2WithConstantVelocityReducesToBoundaryTerms) {
  const auto mesh = testutil::perturbed_mesh<2>(3, 0.2, 4);
  const McsSpace<2> V(mesh, 2);
  const Point<2> c0(0.7, -0.4);
  const Eigen::VectorXd xv = interpolate_velocity(V, [&](const Point<2>&) { return c0; });
  const Eigen::VectorXd xs = random_vector(V.dofs().num_stress(), 3);
  const double assembled = xv.dot(assemble_b2(V) * xs);
  const FeFunction<2> tau(Field::Stress, V, xs);
  const auto fq = facet_quadrature<2>(6);
  double direct = 0;
  for (int f = 0; f < mesh.num_facets(); ++f) {
    if (!mesh.is_boundary(f)) continue;
    const auto& side = mesh.facet_cells(f)[0];
    const auto& fg = V.facet(f);
    const Point<2> n = mesh.outward_sign(side.cell, side.local_facet) * fg.normal;
    const Eigen::VectorXd s = tau.values(side.cell, V.pullback(side.cell, V.facet_points(f, fq)));
    for (std::size_t p = 0; p < fq.size(); ++p) {
      const Eigen::Map<const Eigen::Matrix<double, 2, 2, Eigen::RowMajor>> S(&s[p * 4]);
      const Point<2> sn = S * n;
      direct += fq.weights[p] * fg.measure * (sn - sn.dot(n) * n).dot(c0 - c0.dot(n) * n);
    }
  }
  EXPECT_NEAR(assembled, direct, 1e-12 * std::max(1.0, std::abs(direct)));
}

TEST(Assembly, SystemIsSymmetricWithDocumentedLayout) {
  const auto mesh = build_structured_mesh<2>(2);
  const McsSpace<2> V(mesh, 2);
  const auto sys = assemble_system(V, 1.0, [](const Point<2>&) { return Point<2>(1, 0); }, 4);
  const auto& d = V.dofs();
  EXPECT_EQ(sys.matrix.rows(), d.size());
  // (2, n=2), k=2: 16 facets x 2 + 8 cells x 9 stress, 16 x 3 + 8 x 3 velocity, 8 x 3 pressure, 1 multiplier
  EXPECT_EQ(d.num_stress(), 16 * 2 + 8 * 9);
  EXPECT_EQ(d.num_velocity(), 16 * 3 + 8 * 3);
  EXPECT_EQ(d.num_pressure, 8 * 3);
  EXPECT_EQ(d.size(), 104 + 72 + 24 + 1);
  EXPECT_LE(symmetry_defect(sys.matrix), 1e-14);
  for (int i : d.boundary_velocity) {
    EXPECT_EQ(sys.matrix.coeff(d.velocity_offset() + i, d.velocity_offset() + i), 1.0);
    EXPECT_EQ(sys.rhs[d.velocity_offset() + i], 0.0);
  }
}

template <int Dim, class Load>
McsSolution<Dim> solve_case(const McsSpace<Dim>& V, double nu, Load f, int degree, SolveInfo* info = nullptr) {
  const auto sys = assemble_system(V, nu, f, degree);
  return split_solution(V, solve(sys.matrix, sys.rhs, info));
}

TEST(Assembly, ZeroLoadGivesZeroSolution) {
  const auto mesh = build_structured_mesh<2>(2);
  const McsSpace<2> V(mesh, 2);
  const auto s = solve_case(V, 1.0, [](const Point<2>&) { return Point<2>::Zero(); }, 4);
  EXPECT_LE(s.u.coef.norm() + s.sigma.coef.norm() + s.p.coef.norm(), 1e-12);
}

TEST(Assembly, GradientLoadGivesZeroVelocity) {
  const auto mesh = testutil::perturbed_mesh<2>(4, 0.2);
  for (int k = 1; k <= 3; ++k) {
    const McsSpace<2> V(mesh, k);
    SolveInfo info;
    const auto s = solve_case(
        V, 1e-3, [](const Point<2>& x) { return Point<2>(5 * std::pow(x[0], 4), 5 * std::pow(x[1], 4)); }, 4 + k, &info);
    EXPECT_LE(info.residual, 1e-10);
    EXPECT_LE(discrete_norm_V(s.u), 1e-10) << "k=" << k;
    EXPECT_LE(l2_norm(s.sigma), 1e-10) << "k=" << k;
    EXPECT_GT(discrete_norm_Q(s.p), 0.1);
  }
}

TEST(Assembly, SolvedVelocityIsExactlyDivergenceFree) {
  const auto mesh = testutil::perturbed_mesh<2>(4, 0.2);
  const ManufacturedCase<2> mc(1e-3);
  for (int k = 1; k <= 3; ++k) {
    const McsSpace<2> V(mesh, k);
    const auto s = solve_case(V, mc.nu, [&](const Point<2>& x) { return mc.f(x); }, mc.load_degree() + k);
    EXPECT_LE(divergence_residual(s.u), 1e-10 * discrete_norm_V(s.u)) << "k=" << k;
    EXPECT_LE((assemble_b1(V) * s.u.coef).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Assembly, ViscosityScaling) {
  const auto mesh = build_structured_mesh<2>(3);
  const McsSpace<2> V(mesh, 2);
  const ManufacturedCase<2> mc(1.0);
  const double nu = 0.01;
  const auto a = solve_case(V, nu, [&](const Point<2>& x) { return mc.f(x); }, 7);
  const auto b = solve_case(V, 1.0, [&](const Point<2>& x) { return Point<2>(mc.f(x) / nu); }, 7);
  EXPECT_LE((a.u.coef - b.u.coef).norm(), 1e-10 * a.u.coef.norm());
  EXPECT_LE((a.sigma.coef / nu - b.sigma.coef).norm(), 1e-10 * b.sigma.coef.norm());
  EXPECT_LE((a.p.coef / nu - b.p.coef).norm(), 1e-10 * b.p.coef.norm());
}

template <int Dim>
void check_consistency(int n, int k) {
  const auto mesh = testutil::perturbed_mesh<Dim>(n, 0.15);
  const McsSpace<Dim> V(mesh, k);
  const ManufacturedCase<Dim> mc(1e-3);
  const int degree = mc.velocity_degree() + k;
  const Eigen::VectorXd load = assemble_load(V, [&](const Point<Dim>& x) { return mc.f(x); }, degree);
  const double scale = load.cwiseAbs().maxCoeff();
  const double res = consistency_residual(V, mc.nu, exact_fields(mc), degree);
  EXPECT_LE(res, 1e-10 * scale) << "d=" << Dim << " k=" << k;

  // negative control: a cellwise constant perturbation of u breaks the
  // tangential continuity the identity relies on
  auto bad = exact_fields(mc);
  bad.u = [mc](int c, const Point<Dim>& x) {
    Point<Dim> v = mc.u(x);
    v[0] += 0.01 * ((c % 3) - 1.0);
    return v;
  };
  EXPECT_GT(consistency_residual(V, mc.nu, bad, degree), 1e-6);
}

TEST(Assembly, ConsistencyWithExactSolution2D) {
  for (int k = 1; k <= 3; ++k) check_consistency<2>(3, k);
}

TEST(Assembly, ConsistencyWithExactSolution3D) {
  for (int k = 1; k <= 2; ++k) check_consistency<3>(1, k);
}

TEST(Assembly, ConsistencyLoadShiftOnlyTouchesVelocityRows) {
  const auto mesh = build_structured_mesh<2>(2);
  const McsSpace<2> V(mesh, 2);
  const ManufacturedCase<2> mc(1.0);
  auto ex = exact_fields(mc);
  const Eigen::VectorXd r0 = consistency_residual_vector(V, mc.nu, ex, 9);
  ex.f = [mc](const Point<2>& x) { return Point<2>(mc.f(x) + Point<2>(1, 2)); };
  const Eigen::VectorXd r1 = consistency_residual_vector(V, mc.nu, ex, 9);
  const auto& d = V.dofs();
  const Eigen::VectorXd diff = r1 - r0;
  EXPECT_EQ(diff.head(d.num_stress()).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(diff.tail(d.num_pressure + 1).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_GT(diff.segment(d.velocity_offset(), d.num_velocity()).cwiseAbs().maxCoeff(), 1e-3);
}

TEST(Assembly, NormsOfSimpleFields) {
  const auto mesh = build_structured_mesh<2>(2);
  const McsSpace<2> V(mesh, 4);
  // q = 1: the first pressure basis function is the constant
  Eigen::VectorXd one = Eigen::VectorXd::Zero(V.dofs().num_pressure);
  for (int c = 0; c < mesh.num_cells(); ++c) one[V.dofs().pressure[c][0]] = 1;
  EXPECT_NEAR(discrete_norm_Q(FeFunction<2>(Field::Pressure, V, one)), 1.0, 1e-14);
  // v = (b, b), b = x(1-x)y(1-y): no jumps, |v|_1^2 = 2/45
  const auto b = [](const Point<2>& x) { return x[0] * (1 - x[0]) * x[1] * (1 - x[1]); };
  const Eigen::VectorXd xv = interpolate_velocity(V, [&](const Point<2>& x) { return Point<2>(b(x), b(x)); });
  EXPECT_NEAR(discrete_norm_V(FeFunction<2>(Field::Velocity, V, xv)), std::sqrt(2.0 / 45), 1e-13);
}

TEST(Assembly, JumpNormRatioStaysBounded) {
  // sum_F h_F ||[tau_nt]||^2 / ||tau||^2 is zero for nt-continuous fields;
  // for the normal-normal jump the ratio stays bounded under refinement
  std::vector<double> ratios;
  auto mesh = build_structured_mesh<2>(2);
  for (int level = 0; level < 3; ++level) {
    const McsSpace<2> V(mesh, 2);
    const FeFunction<2> tau(Field::Stress, V, random_vector(V.dofs().num_stress(), 17));
    const auto fq = facet_quadrature<2>(6);
    double jump_nt = 0, jump_nn = 0;
    for (int f = 0; f < mesh.num_facets(); ++f) {
      if (mesh.is_boundary(f)) continue;
      const auto& fg = V.facet(f);
      const auto pts = V.facet_points(f, fq);
      Eigen::VectorXd sn[2];
      for (int s = 0; s < 2; ++s) {
        const int c = mesh.facet_cells(f)[s].cell;
        sn[s] = tau.values(c, V.pullback(c, pts));
      }
      for (std::size_t p = 0; p < fq.size(); ++p) {
        const Eigen::Map<const Eigen::Matrix<double, 2, 2, Eigen::RowMajor>> S0(&sn[0][p * 4]), S1(&sn[1][p * 4]);
        const Point<2> j = (S0 - S1) * fg.normal;
        jump_nn += fq.weights[p] * fg.measure * fg.diam * std::pow(j.dot(fg.normal), 2);
        jump_nt += fq.weights[p] * fg.measure * fg.diam * (j - j.dot(fg.normal) * fg.normal).squaredNorm();
      }
    }
    const double l2 = l2_norm(tau);
    EXPECT_LT(jump_nt, 1e-20 * l2 * l2);
    ratios.push_back(jump_nn / (l2 * l2));
    mesh = uniform_refine(mesh);
  }
  EXPECT_LT(ratios[2], 2 * ratios[0]);
  EXPECT_LT(ratios[1], 2 * ratios[0]);
}

}  // namespace
