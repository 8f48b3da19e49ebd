#pragma once

// Scalar elements: the discontinuous modal pressure element (Dubiner basis of
// P^m, pulled back without any scaling) and the continuous nodal Lagrange
// element used by the Taylor-Hood comparator.

#include "mcs/mesh.hpp"
#include "mcs/polynomials.hpp"
#include "mcs/quadrature.hpp"
#include "mcs/reference.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace mcs {

template <int Dim>
class PressureElement {
 public:
  explicit PressureElement(int degree) : m_(degree) {
    if (degree < 0) throw std::invalid_argument("PressureElement: negative degree");
  }
  [[nodiscard]] int degree() const { return m_; }
  [[nodiscard]] int size() const { return poly_dim(Dim, m_); }

  [[nodiscard]] std::vector<double> values(const Point<Dim>& xhat) const {
    std::vector<double> r;
    const auto lam = barycentric<Dim, double>(to_array(xhat));
    dubiner_all<Dim>(m_, lam.data(), r);
    return r;
  }

 private:
  int m_;
};

template <int Dim>
class LagrangeElement {
 public:
  explicit LagrangeElement(int k) : k_(k) {
    if (k < 1) throw std::invalid_argument("LagrangeElement: order must be >= 1, got " + std::to_string(k));
    // equispaced lattice, barycentric multi-indices alpha with |alpha| = k
    std::vector<int> alpha(Dim + 1, 0);
    enumerate(alpha, 0, k);
    const int n = static_cast<int>(nodes_.size());
    Eigen::MatrixXd V(n, n);
    for (int i = 0; i < n; ++i) {
      std::vector<double> lam(Dim + 1), r;
      for (int c = 0; c <= Dim; ++c) lam[c] = double(nodes_[i][c]) / k;
      dubiner_all<Dim>(k, lam.data(), r);
      for (int p = 0; p < n; ++p) V(i, p) = r[p];
    }
    Eigen::FullPivLU<Eigen::MatrixXd> lu(V);
    if (lu.rank() != n) throw std::logic_error("LagrangeElement: singular Vandermonde matrix");
    C_ = lu.inverse();  // shape a = sum_p C(p, a) r_p
  }

  [[nodiscard]] int order() const { return k_; }
  [[nodiscard]] int size() const { return static_cast<int>(nodes_.size()); }
  /// Barycentric lattice index of node i (entries sum to k).
  [[nodiscard]] const std::vector<int>& node(int i) const { return nodes_[i]; }

  void values_grads(const Point<Dim>& xhat, Eigen::VectorXd& vals, Eigen::Matrix<double, Eigen::Dynamic, Dim>& grads) const {
    using D = Dual<Dim>;
    std::array<D, Dim> x;
    for (int i = 0; i < Dim; ++i) x[i] = D::variable(xhat[i], i);
    const auto lam = barycentric<Dim, D>(x);
    std::vector<D> r;
    dubiner_all<Dim>(k_, lam.data(), r);
    const int n = size();
    Eigen::VectorXd rv(n);
    Eigen::Matrix<double, Eigen::Dynamic, Dim> rg(n, Dim);
    for (int p = 0; p < n; ++p) {
      rv[p] = r[p].v;
      for (int m = 0; m < Dim; ++m) rg(p, m) = r[p].d[m];
    }
    vals = C_.transpose() * rv;
    grads = C_.transpose() * rg;
  }

  [[nodiscard]] Eigen::VectorXd values(const Point<Dim>& xhat) const {
    Eigen::VectorXd v;
    Eigen::Matrix<double, Eigen::Dynamic, Dim> g;
    values_grads(xhat, v, g);
    return v;
  }

 private:
  void enumerate(std::vector<int>& alpha, int pos, int remaining) {
    if (pos == Dim) {
      alpha[Dim] = remaining;
      nodes_.push_back(alpha);
      return;
    }
    for (int a = remaining; a >= 0; --a) {
      alpha[pos] = a;
      enumerate(alpha, pos + 1, remaining - a);
    }
  }

  int k_;
  std::vector<std::vector<int>> nodes_;
  Eigen::MatrixXd C_;
};

template <int Dim>
LagrangeElement<Dim> lagrange_basis(int k) {
  return LagrangeElement<Dim>(k);
}

/// Global numbering of a continuous Lagrange space. Nodes are identified by
/// the sorted list of (global vertex, lattice weight) pairs with nonzero
/// weight, which is independent of the cell a node is seen from.
template <int Dim>
struct LagrangeDofMap {
  int num_dofs = 0;
  std::vector<std::vector<int>> cell_dofs;
  std::vector<bool> on_boundary;
};

template <int Dim>
LagrangeDofMap<Dim> lagrange_dofmap(const Mesh<Dim>& m, const LagrangeElement<Dim>& el) {
  LagrangeDofMap<Dim> map;
  std::map<std::vector<std::pair<int, int>>, int> ids;
  map.cell_dofs.resize(m.num_cells());
  for (int c = 0; c < m.num_cells(); ++c) {
    const auto& cell = m.cell(c);
    for (int i = 0; i < el.size(); ++i) {
      std::vector<std::pair<int, int>> key;
      for (int v = 0; v <= Dim; ++v)
        if (el.node(i)[v] > 0) key.emplace_back(cell[v], el.node(i)[v]);
      std::sort(key.begin(), key.end());
      auto [it, inserted] = ids.emplace(key, map.num_dofs);
      if (inserted) {
        ++map.num_dofs;
        map.on_boundary.push_back(false);
      }
      // a node lies on the boundary if some cell sees it on a boundary facet
      for (int j = 0; j <= Dim; ++j)
        if (el.node(i)[j] == 0 && m.is_boundary(m.cell_facet(c, j))) map.on_boundary[it->second] = true;
      map.cell_dofs[c].push_back(it->second);
    }
  }
  return map;
}

}  // namespace mcs
