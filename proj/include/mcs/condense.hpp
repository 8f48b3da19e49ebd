#pragma once

// Static condensation of the MCS saddle-point system. Cell-interior unknowns
// (stress bubbles, velocity bubbles, non-constant pressure modes) are
// eliminated cell by cell; what remains are the facet DOFs of stress and
// velocity, the cellwise constant pressures and the mean multiplier.

#include "mcs/assembly.hpp"
#include "mcs/linsolve.hpp"
#include "mcs/parallel.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <string>
#include <stdexcept>
#include <vector>

namespace mcs {

struct CondensedSystem {
  SparseMatrix matrix;
  Eigen::VectorXd rhs;
  std::vector<int> coupling;  // system index of each condensed unknown

  struct CellBlock {
    std::vector<int> interior;  // system indices
    std::vector<int> neighbours;  // condensed indices coupled to the interior
    Eigen::PartialPivLU<Eigen::MatrixXd> lu;
    Eigen::MatrixXd K_ic;  // interior x neighbours
    Eigen::MatrixXd K_ci;  // neighbours x interior
  };
  std::vector<CellBlock> cells;
  int full_size = 0;

  /// Condensed right-hand side for a full right-hand side b.
  [[nodiscard]] Eigen::VectorXd condense_rhs(const Eigen::VectorXd& b) const {
    Eigen::VectorXd rc(coupling.size());
    for (std::size_t i = 0; i < coupling.size(); ++i) rc[i] = b[coupling[i]];
    for (const auto& cb : cells) {
      if (cb.interior.empty()) continue;
      const Eigen::VectorXd g = cb.K_ci * cb.lu.solve(local_rhs(cb, b));
      for (std::size_t i = 0; i < cb.neighbours.size(); ++i) rc[cb.neighbours[i]] -= g[i];
    }
    return rc;
  }

  /// Full solution from the condensed one and the full right-hand side.
  [[nodiscard]] Eigen::VectorXd recover(const Eigen::VectorXd& xc, const Eigen::VectorXd& b) const {
    Eigen::VectorXd x = Eigen::VectorXd::Zero(full_size);
    for (std::size_t i = 0; i < coupling.size(); ++i) x[coupling[i]] = xc[i];
    for (const auto& cb : cells) {
      if (cb.interior.empty()) continue;
      Eigen::VectorXd r = local_rhs(cb, b);
      for (std::size_t j = 0; j < cb.neighbours.size(); ++j) r -= cb.K_ic.col(j) * xc[cb.neighbours[j]];
      const Eigen::VectorXd xi = cb.lu.solve(r);
      for (std::size_t i = 0; i < cb.interior.size(); ++i) x[cb.interior[i]] = xi[i];
    }
    return x;
  }

 private:
  static Eigen::VectorXd local_rhs(const CellBlock& cb, const Eigen::VectorXd& b) {
    Eigen::VectorXd r(cb.interior.size());
    for (std::size_t i = 0; i < cb.interior.size(); ++i) r[i] = b[cb.interior[i]];
    return r;
  }
};

/// Interior system indices of every cell.
template <int Dim>
std::vector<std::vector<int>> interior_dofs(const McsSpace<Dim>& V) {
  const auto& d = V.dofs();
  std::vector<std::vector<int>> out(V.mesh().num_cells());
  for (int c = 0; c < V.mesh().num_cells(); ++c) {
    for (int b = 0; b < d.stress_per_cell; ++b) out[c].push_back(d.num_stress_facet + c * d.stress_per_cell + b);
    for (int b = 0; b < d.velocity_per_cell; ++b)
      out[c].push_back(d.velocity_offset() + d.num_velocity_facet + c * d.velocity_per_cell + b);
    // pressure basis function 0 is the cellwise constant and stays global
    for (int b = 1; b < d.pressure_per_cell; ++b) out[c].push_back(d.pressure_offset() + d.pressure[c][b]);
  }
  return out;
}

/// Number of condensed unknowns attached to one interior facet.
template <int Dim>
int coupling_dofs_per_facet(const McsSpace<Dim>& V) {
  return V.dofs().stress_per_facet + V.dofs().velocity_per_facet;
}

template <int Dim>
CondensedSystem static_condense(const SaddleSystem<Dim>& sys, int threads = default_threads()) {
  const auto& V = *sys.space;
  const int n = static_cast<int>(sys.matrix.rows());
  const auto interior = interior_dofs(V);
  const int nc = static_cast<int>(interior.size());

  std::vector<int> owner(n, -1), local(n, -1);
  for (int c = 0; c < nc; ++c)
    for (std::size_t i = 0; i < interior[c].size(); ++i) {
      owner[interior[c][i]] = c;
      local[interior[c][i]] = static_cast<int>(i);
    }
  CondensedSystem cs;
  cs.full_size = n;
  std::vector<int> cidx(n, -1);
  for (int i = 0; i < n; ++i)
    if (owner[i] < 0) {
      cidx[i] = static_cast<int>(cs.coupling.size());
      cs.coupling.push_back(i);
    }
  const int ncoup = static_cast<int>(cs.coupling.size());

  // K is stored by columns; K^T gives row access for the interior rows
  const SparseMatrix& K = sys.matrix;
  const SparseMatrix KT = K.transpose();

  std::vector<Triplet> t;
  for (int col = 0; col < n; ++col) {
    if (owner[col] >= 0) continue;
    for (SparseMatrix::InnerIterator it(K, col); it; ++it)
      if (owner[it.row()] < 0) t.emplace_back(cidx[it.row()], cidx[col], it.value());
  }
  cs.cells.resize(nc);
  std::vector<std::vector<Triplet>> schur(nc);
  parallel_for(nc, threads, [&](int c) {
    auto& cb = cs.cells[c];
    cb.interior = interior[c];
    const int ni = static_cast<int>(cb.interior.size());
    if (ni == 0) return;
    Eigen::MatrixXd Kii = Eigen::MatrixXd::Zero(ni, ni);
    std::vector<int>& nb = cb.neighbours;
    // columns of the interior unknowns: K_ii and K_ci
    for (int i = 0; i < ni; ++i)
      for (SparseMatrix::InnerIterator it(K, cb.interior[i]); it; ++it) {
        const int r = static_cast<int>(it.row());
        if (owner[r] == c) {
          Kii(local[r], i) = it.value();
        } else if (owner[r] >= 0) {
          if (it.value() != 0) throw std::logic_error("static_condense: interior unknowns of different cells couple");
        } else {
          nb.push_back(cidx[r]);
        }
      }
    // rows of the interior unknowns: K_ic
    for (int i = 0; i < ni; ++i)
      for (SparseMatrix::InnerIterator it(KT, cb.interior[i]); it; ++it)
        if (owner[it.row()] < 0) nb.push_back(cidx[it.row()]);
    std::sort(nb.begin(), nb.end());
    nb.erase(std::unique(nb.begin(), nb.end()), nb.end());
    const int nn = static_cast<int>(nb.size());
    auto pos = [&](int condensed) {
      return static_cast<int>(std::lower_bound(nb.begin(), nb.end(), condensed) - nb.begin());
    };
    Eigen::MatrixXd& Kci = cb.K_ci;
    Kci = Eigen::MatrixXd::Zero(nn, ni);
    cb.K_ic = Eigen::MatrixXd::Zero(ni, nn);
    for (int i = 0; i < ni; ++i) {
      for (SparseMatrix::InnerIterator it(K, cb.interior[i]); it; ++it)
        if (owner[it.row()] < 0) Kci(pos(cidx[it.row()]), i) = it.value();
      for (SparseMatrix::InnerIterator it(KT, cb.interior[i]); it; ++it)
        if (owner[it.row()] < 0) cb.K_ic(i, pos(cidx[it.row()])) = it.value();
    }
    cb.lu.compute(Kii);
    const double cond = 1.0 / std::max(1e-300, cb.lu.rcond());
    if (!std::isfinite(cond) || cond > 1e15)
      throw std::runtime_error("static_condense: singular interior block on cell " + std::to_string(c));
    const Eigen::MatrixXd S = Kci * cb.lu.solve(cb.K_ic);
    for (int j = 0; j < nn; ++j)
      for (int i = 0; i < nn; ++i)
        if (S(i, j) != 0) schur[c].emplace_back(nb[i], nb[j], -S(i, j));
  });
  for (int c = 0; c < nc; ++c) t.insert(t.end(), schur[c].begin(), schur[c].end());
  cs.matrix = compile(ncoup, ncoup, t);
  cs.rhs = cs.condense_rhs(sys.rhs);
  return cs;
}

/// Solves K x = b through the condensed system. The cell eliminations are
/// repeated on the full residual (iterative refinement) as long as that
/// halves the residual, at most max_refinements times. Refining past tol
/// matters: the divergence rows are scaled by the cell volume, so a residual
/// that is small relative to b can still hide a visible div u_h.
/// info->residual reports the relative full-system residual.
inline Eigen::VectorXd solve_condensed(const CondensedSystem& cs, const SparseMatrix& K, const Eigen::VectorXd& b,
                                       SolveInfo* info = nullptr, double tol = 1e-10, int max_refinements = 4) {
  // the condensed solve only has to be a good preconditioner for the
  // refinement loop; the contract is checked on the full residual below
  LinearSolver solver(1e-4);
  solver.factorize(cs.matrix);
  auto condensed_solve = [&](const Eigen::VectorXd& rhs) {
    return cs.recover(rhs.norm() > 0 ? solver.solve(cs.condense_rhs(rhs))
                                     : Eigen::VectorXd::Zero(cs.matrix.rows()).eval(),
                      rhs);
  };
  const double bn = b.norm();
  Eigen::VectorXd x = condensed_solve(b);
  Eigen::VectorXd r = b - K * x;
  auto relative = [&](const Eigen::VectorXd& v) { return bn > 0 ? v.norm() / bn : v.norm(); };
  int it = 0;
  while (it < max_refinements && r.norm() > 0) {
    const Eigen::VectorXd dx = condensed_solve(r);
    const Eigen::VectorXd xn = x + dx;
    const Eigen::VectorXd rn = b - K * xn;
    if (!(rn.norm() < 0.5 * r.norm())) break;
    x = xn;
    r = rn;
    ++it;
  }
  const double res = relative(r);
  if (!std::isfinite(res) || res > tol)
    throw std::runtime_error("solve_condensed: relative residual " + detail::sci(res) + " violates tolerance " +
                             detail::sci(tol));
  if (info) {
    info->residual = res;
    info->refinements = it;
  }
  return x;
}

}  // namespace mcs
