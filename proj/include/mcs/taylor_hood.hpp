#pragma once

// Taylor-Hood comparator: continuous P^k velocity, continuous P^{k-1}
// pressure, forms (nu grad u, grad v) and (div u, q), homogeneous Dirichlet
// velocity by symmetric elimination and the same mean-value multiplier.
// Unknowns: [u_1 | ... | u_d | p | multiplier].

#include "mcs/assembly.hpp"
#include "mcs/linsolve.hpp"
#include "mcs/mesh.hpp"
#include "mcs/parallel.hpp"
#include "mcs/scalar_elements.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace mcs {

template <int Dim>
struct TaylorHoodSystem {
  const Mesh<Dim>* mesh = nullptr;
  int k = 2;
  LagrangeElement<Dim> velocity_element{2}, pressure_element{1};
  LagrangeDofMap<Dim> velocity_dofs, pressure_dofs;
  SparseMatrix matrix;
  Eigen::VectorXd rhs;

  [[nodiscard]] int num_velocity() const { return Dim * velocity_dofs.num_dofs; }
  [[nodiscard]] int pressure_offset() const { return num_velocity(); }
  [[nodiscard]] int multiplier() const { return num_velocity() + pressure_dofs.num_dofs; }
  [[nodiscard]] int size() const { return multiplier() + 1; }
};

namespace detail {

template <int Dim>
struct LagrangeTables {
  std::vector<Eigen::VectorXd> val;                         // per point
  std::vector<Eigen::Matrix<double, Eigen::Dynamic, Dim>> grad;  // per point, reference
};

template <int Dim>
LagrangeTables<Dim> lagrange_tables(const LagrangeElement<Dim>& el, const std::vector<Point<Dim>>& pts) {
  LagrangeTables<Dim> t;
  t.val.resize(pts.size());
  t.grad.resize(pts.size());
  for (std::size_t p = 0; p < pts.size(); ++p) el.values_grads(pts[p], t.val[p], t.grad[p]);
  return t;
}

}  // namespace detail

template <int Dim, class Load>
TaylorHoodSystem<Dim> assemble_taylor_hood(const Mesh<Dim>& mesh, int k, double nu, Load f, int load_degree,
                                           int threads = default_threads()) {
  if (k < 2) throw std::invalid_argument("Taylor-Hood needs k >= 2, got " + std::to_string(k));
  if (!(nu > 0)) throw std::invalid_argument("assemble_taylor_hood: viscosity must be positive");
  TaylorHoodSystem<Dim> sys;
  sys.mesh = &mesh;
  sys.k = k;
  sys.velocity_element = LagrangeElement<Dim>(k);
  sys.pressure_element = LagrangeElement<Dim>(k - 1);
  sys.velocity_dofs = lagrange_dofmap(mesh, sys.velocity_element);
  sys.pressure_dofs = lagrange_dofmap(mesh, sys.pressure_element);
  const int nv = sys.velocity_dofs.num_dofs, oP = sys.pressure_offset(), lam = sys.multiplier(), n = sys.size();

  std::vector<char> constrained(n, 0);
  for (int i = 0; i < nv; ++i)
    if (sys.velocity_dofs.on_boundary[i])
      for (int c = 0; c < Dim; ++c) constrained[c * nv + i] = 1;

  const auto q = simplex_quadrature<Dim>(std::max(2 * k, load_degree + k));
  const auto vt = detail::lagrange_tables(sys.velocity_element, q.points);
  const auto pt = detail::lagrange_tables(sys.pressure_element, q.points);
  const int nvl = sys.velocity_element.size(), npl = sys.pressure_element.size();

  std::vector<Eigen::VectorXd> load(mesh.num_cells());
  auto t = detail::collect_triplets(mesh.num_cells(), threads, [&](int c, std::vector<Triplet>& out) {
    const auto g = cell_geometry(mesh, c);
    Eigen::MatrixXd L = Eigen::MatrixXd::Zero(nvl, nvl), M = Eigen::VectorXd::Zero(npl);
    std::array<Eigen::MatrixXd, Dim> B;
    for (auto& b : B) b = Eigen::MatrixXd::Zero(npl, nvl);
    Eigen::VectorXd F = Eigen::VectorXd::Zero(Dim * nvl);
    for (std::size_t p = 0; p < q.size(); ++p) {
      const double w = q.weights[p] * g.detF;
      const Eigen::Matrix<double, Eigen::Dynamic, Dim> G = vt.grad[p] * g.invF;
      L += w * G * G.transpose();
      for (int i = 0; i < Dim; ++i) B[i] += w * pt.val[p] * G.col(i).transpose();
      M += w * pt.val[p];
      const Point<Dim> fx = f(g.map(q.points[p]));
      for (int i = 0; i < Dim; ++i) F.segment(i * nvl, nvl) += w * fx[i] * vt.val[p];
    }
    const auto& vd = sys.velocity_dofs.cell_dofs[c];
    const auto& pd = sys.pressure_dofs.cell_dofs[c];
    auto emit = [&](int r, int col, double v) {
      if (!constrained[r] && !constrained[col]) out.emplace_back(r, col, v);
    };
    for (int i = 0; i < Dim; ++i)
      for (int a = 0; a < nvl; ++a) {
        for (int b = 0; b < nvl; ++b) emit(i * nv + vd[a], i * nv + vd[b], nu * L(a, b));
        for (int b = 0; b < npl; ++b) {
          emit(oP + pd[b], i * nv + vd[a], -B[i](b, a));
          emit(i * nv + vd[a], oP + pd[b], -B[i](b, a));
        }
      }
    for (int b = 0; b < npl; ++b) {
      out.emplace_back(oP + pd[b], lam, M(b, 0));
      out.emplace_back(lam, oP + pd[b], M(b, 0));
    }
    load[c] = F;
  });
  for (int i = 0; i < n; ++i)
    if (constrained[i]) t.emplace_back(i, i, 1.0);
  sys.matrix = compile(n, n, t);
  sys.rhs = Eigen::VectorXd::Zero(n);
  for (int c = 0; c < mesh.num_cells(); ++c) {
    const auto& vd = sys.velocity_dofs.cell_dofs[c];
    for (int i = 0; i < Dim; ++i)
      for (int a = 0; a < nvl; ++a) sys.rhs[i * nv + vd[a]] += load[c][i * nvl + a];
  }
  for (int i = 0; i < n; ++i)
    if (constrained[i]) sys.rhs[i] = 0;
  return sys;
}

struct TaylorHoodErrors {
  double h1_velocity = 0;  // || grad u - grad u_h ||
  double l2_pressure = 0;  // || p - p_h || (both with zero mean)
  double div_residual = 0; // max |div u_h| at the points of a degree-2k rule
};

/// Errors of a Taylor-Hood solution x against exact fields.
template <int Dim, class GradU, class PFn>
TaylorHoodErrors taylor_hood_errors(const TaylorHoodSystem<Dim>& sys, const Eigen::VectorXd& x, GradU grad_u, PFn p,
                                    int degree) {
  const auto& mesh = *sys.mesh;
  const int nv = sys.velocity_dofs.num_dofs, nvl = sys.velocity_element.size(), npl = sys.pressure_element.size();
  const auto q = simplex_quadrature<Dim>(std::max(degree, 2 * sys.k + 6));
  const auto qd = simplex_quadrature<Dim>(2 * sys.k);
  const auto vt = detail::lagrange_tables(sys.velocity_element, q.points);
  const auto vtd = detail::lagrange_tables(sys.velocity_element, qd.points);
  const auto pt = detail::lagrange_tables(sys.pressure_element, q.points);
  TaylorHoodErrors e;
  double eu = 0, ep = 0;
  for (int c = 0; c < mesh.num_cells(); ++c) {
    const auto g = cell_geometry(mesh, c);
    const auto& vd = sys.velocity_dofs.cell_dofs[c];
    const auto& pd = sys.pressure_dofs.cell_dofs[c];
    Eigen::Matrix<double, Eigen::Dynamic, Dim> U(nvl, Dim);
    for (int i = 0; i < Dim; ++i)
      for (int a = 0; a < nvl; ++a) U(a, i) = x[i * nv + vd[a]];
    Eigen::VectorXd P(npl);
    for (int a = 0; a < npl; ++a) P[a] = x[sys.pressure_offset() + pd[a]];
    for (std::size_t s = 0; s < q.size(); ++s) {
      const Point<Dim> xp = g.map(q.points[s]);
      const Mat<Dim> Gh = U.transpose() * (vt.grad[s] * g.invF);  // (i, m) = d_m u_i
      eu += q.weights[s] * g.detF * (Mat<Dim>(grad_u(xp)) - Gh).squaredNorm();
      ep += q.weights[s] * g.detF * std::pow(p(xp) - pt.val[s].dot(P), 2);
    }
    for (std::size_t s = 0; s < qd.size(); ++s)
      e.div_residual = std::max(e.div_residual, std::abs((U.transpose() * (vtd.grad[s] * g.invF)).trace()));
  }
  e.h1_velocity = std::sqrt(eu);
  e.l2_pressure = std::sqrt(ep);
  return e;
}

}  // namespace mcs
