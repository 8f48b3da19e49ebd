#pragma once

// Trace-free, normal-tangential continuous stress element Sigma_k of degree
// k-1 on the reference simplex.
//
// Shape functions are products of a constant trace-free matrix and a scalar
// Dubiner polynomial:
//   facet j (2D):  S^j   r_i0(l_{j+1}, l_{j+2}),                 i <= k-1
//   facet j (3D):  S^j_q r_il0(l_{j+1}, l_{j+2}, l_{j+3}),        i+l <= k-1
//   interior:      l_j S^j_q r(l_0, ..., l_d),                    deg r <= k-1
// with barycentric indices taken mod d+1. The matrix S^j_q has vanishing
// normal-tangential trace on every facet but F_j, and the factor l_j kills it
// on F_j, so the interior group spans the bubble space.

#include "mcs/mesh.hpp"
#include "mcs/polynomials.hpp"
#include "mcs/quadrature.hpp"
#include "mcs/reference.hpp"

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace mcs {

template <int Dim>
struct SMatrixSet {
  // S[j][q]: matrix attached to facet j and reference tangent q
  std::array<std::array<Mat<Dim>, Dim - 1>, Dim + 1> S;

  [[nodiscard]] const Mat<Dim>& operator()(int j, int q) const { return S[j][q]; }
};

/// Value of t_{j,q}^T S^j_q n_j for the published matrices and reference
/// frames: sqrt(2) for the 2D S^0, -1 for the 3D S^2_0 and S^3_0, and 1
/// otherwise. Off-diagonal pairings (other facet or tangent) vanish exactly.
inline double s_duality_scale(int dim, int j, int q = 0) {
  if (dim == 2) return j == 0 ? std::sqrt(2.0) : 1.0;
  return (q == 0 && (j == 2 || j == 3)) ? -1.0 : 1.0;
}

template <int Dim>
SMatrixSet<Dim> s_matrices() {
  SMatrixSet<Dim> set;
  if constexpr (Dim == 2) {
    const double r2 = std::sqrt(2.0);
    set.S[0][0] << -r2, 0, 0, r2;
    set.S[1][0] << 0.5, 0, 1, -0.5;
    set.S[2][0] << 0.5, -1, 0, -0.5;
  } else {
    const double r6 = std::sqrt(6.0), a = 1.0 / 3.0, b = -2.0 / 3.0;
    set.S[0][0] = r6 * Point<3>(b, a, a).asDiagonal();
    set.S[1][0] << a, 0, 0, 1, b, 0, 0, 0, a;
    set.S[2][0] << b, 1, 0, 0, a, 0, 0, 0, a;
    set.S[3][0] << b, 0, 1, 0, a, 0, 0, 0, a;
    set.S[0][1] = r6 * Point<3>(a, a, b).asDiagonal();
    set.S[1][1] << a, 0, 0, 0, a, 0, 1, 0, b;
    set.S[2][1] << a, 0, 0, 0, a, 0, 0, 1, b;
    set.S[3][1] << a, 0, 0, 0, b, 1, 0, 0, a;
  }
  // trace-free, dual to the reference facet frames, and a basis of the
  // trace-free matrices
  Eigen::MatrixXd basis(Dim * Dim, (Dim + 1) * (Dim - 1));
  for (int j = 0; j <= Dim; ++j)
    for (int q = 0; q < Dim - 1; ++q) {
      const Mat<Dim>& S = set.S[j][q];
      if (std::abs(S.trace()) > 1e-14) throw std::logic_error("s_matrices: matrix not trace-free");
      basis.col(j * (Dim - 1) + q) = Eigen::Map<const Eigen::VectorXd>(S.data(), Dim * Dim);
      for (int i = 0; i <= Dim; ++i) {
        const auto t = reference_tangents<Dim>(i);
        const Point<Dim> n = reference_normal<Dim>(i);
        for (int l = 0; l < Dim - 1; ++l) {
          const double expect = (i == j && l == q) ? s_duality_scale(Dim, j, q) : 0.0;
          if (std::abs(t[l].dot(S * n) - expect) > 1e-14)
            throw std::logic_error("s_matrices: duality with reference facet frames violated");
        }
      }
    }
  if (Eigen::FullPivLU<Eigen::MatrixXd>(basis).rank() != Dim * Dim - 1)
    throw std::logic_error("s_matrices: not a basis of the trace-free matrices");
  return set;
}

inline int stress_dimension(int dim, int k) {
  if (dim == 2) return 3 * (k + 1) * (k + 2) / 2 - 3;
  return 4 * (k + 1) * (k + 2) * (k + 3) / 3 - 8 * (k + 1);
}

template <int Dim>
class StressElement {
 public:
  explicit StressElement(int k) : k_(k), S_(s_matrices<Dim>()) {
    if (k < 1) throw std::invalid_argument("StressElement: order k must be >= 1, got " + std::to_string(k));
    const auto idx = dubiner_indices(Dim, k - 1);
    for (int a = 0; a < static_cast<int>(idx.size()); ++a)
      if (idx[a][Dim - 1] == 0) facet_poly_.push_back(a);
    n_interior_poly_ = static_cast<int>(idx.size());
  }

  [[nodiscard]] int order() const { return k_; }
  [[nodiscard]] const SMatrixSet<Dim>& smatrices() const { return S_; }
  [[nodiscard]] int num_facet_polys() const { return static_cast<int>(facet_poly_.size()); }
  [[nodiscard]] int dofs_per_facet() const { return (Dim - 1) * num_facet_polys(); }
  [[nodiscard]] int num_facet_functions() const { return (Dim + 1) * dofs_per_facet(); }
  [[nodiscard]] int num_bubbles() const { return (Dim + 1) * (Dim - 1) * n_interior_poly_; }
  [[nodiscard]] int size() const { return num_facet_functions() + num_bubbles(); }

  /// Index of facet function (facet j, tangent q, facet polynomial a).
  [[nodiscard]] int facet_index(int j, int q, int a) const { return j * dofs_per_facet() + q * num_facet_polys() + a; }

  /// Calls emit(index, scalar, S) for each shape function scalar * S at the
  /// reference point with coordinates x (any scalar type T).
  template <class T, class Emit>
  void evaluate(const std::array<T, Dim>& x, Emit&& emit) const {
    const auto lam = barycentric<Dim, T>(x);
    std::vector<T> poly;
    std::array<T, Dim + 1> perm;
    for (int j = 0; j <= Dim; ++j) {
      for (int i = 0; i < Dim; ++i) perm[i] = lam[(j + 1 + i) % (Dim + 1)];
      perm[Dim] = lam[j];
      dubiner_all<Dim>(k_ - 1, perm.data(), poly);
      for (int q = 0; q < Dim - 1; ++q)
        for (int a = 0; a < num_facet_polys(); ++a) emit(facet_index(j, q, a), poly[facet_poly_[a]], S_(j, q));
    }
    dubiner_all<Dim>(k_ - 1, lam.data(), poly);
    int idx = num_facet_functions();
    for (int j = 0; j <= Dim; ++j)
      for (int q = 0; q < Dim - 1; ++q)
        for (int a = 0; a < n_interior_poly_; ++a) emit(idx++, lam[j] * poly[a], S_(j, q));
  }

  [[nodiscard]] std::vector<Mat<Dim>> values(const Point<Dim>& xhat) const {
    std::vector<Mat<Dim>> out(size());
    evaluate<double>(to_array(xhat), [&](int i, double s, const Mat<Dim>& S) { out[i] = s * S; });
    return out;
  }

  /// Values and reference divergences (div of row i = sum_j d_j tau_ij).
  void values_div(const Point<Dim>& xhat, std::vector<Mat<Dim>>& vals, std::vector<Point<Dim>>& divs) const {
    using D = Dual<Dim>;
    std::array<D, Dim> x;
    for (int i = 0; i < Dim; ++i) x[i] = D::variable(xhat[i], i);
    vals.resize(size());
    divs.resize(size());
    evaluate<D>(x, [&](int i, const D& s, const Mat<Dim>& S) {
      vals[i] = s.v * S;
      Point<Dim> g;
      for (int m = 0; m < Dim; ++m) g[m] = s.d[m];
      divs[i] = S * g;
    });
  }

 private:
  int k_;
  SMatrixSet<Dim> S_;
  std::vector<int> facet_poly_;
  int n_interior_poly_ = 0;
};

template <int Dim>
StressElement<Dim> stress_basis(int k) {
  return StressElement<Dim>(k);
}

/// Reference DOFs of a matrix field: facet moments
///   int_{F_j} t_{j,q}^T tau n_j r_a ds   (r_a: Dubiner basis of P^{k-1}(F_j)
///   in the facet coordinates lambda_{j+1}, lambda_{j+2}, ...)
/// followed by the interior moments int_T tau : psi_b over the bubbles.
template <int Dim, class Fn>
Eigen::VectorXd apply_stress_reference_dofs(const StressElement<Dim>& el, Fn tau_hat, int extra_degree = 2) {
  const int k = el.order();
  Eigen::VectorXd dofs = Eigen::VectorXd::Zero(el.size());
  const auto fq = facet_quadrature<Dim>(2 * k + extra_degree);
  std::vector<double> r;
  for (int j = 0; j <= Dim; ++j) {
    const auto t = reference_tangents<Dim>(j);
    const Point<Dim> n = reference_normal<Dim>(j);
    const double meas = reference_facet_measure<Dim>(j);
    for (std::size_t p = 0; p < fq.size(); ++p) {
      const Point<Dim> x = reference_facet_point<Dim>(j, fq.points[p]);
      const Mat<Dim> tau = tau_hat(x);
      facet_dubiner<Dim>(k - 1, fq.points[p], r);
      const Point<Dim> tn = tau * n;
      for (int q = 0; q < Dim - 1; ++q) {
        const double tnt = t[q].dot(tn) * fq.weights[p] * meas;
        for (int a = 0; a < el.num_facet_polys(); ++a) dofs[el.facet_index(j, q, a)] += tnt * r[a];
      }
    }
  }
  const auto vq = simplex_quadrature<Dim>(2 * k + extra_degree);
  const int nf = el.num_facet_functions();
  for (std::size_t p = 0; p < vq.size(); ++p) {
    const Mat<Dim> tau = tau_hat(vq.points[p]);
    const double w = vq.weights[p];
    el.template evaluate<double>(to_array(vq.points[p]), [&](int i, double s, const Mat<Dim>& S) {
      if (i >= nf) dofs[i] += w * s * (tau.cwiseProduct(S)).sum();
    });
  }
  return dofs;
}

/// Entry (a, b) = reference DOF a applied to shape function b.
template <int Dim>
Eigen::MatrixXd stress_dof_matrix(const StressElement<Dim>& el) {
  const int n = el.size();
  Eigen::MatrixXd D(n, n);
  for (int b = 0; b < n; ++b)
    D.col(b) = apply_stress_reference_dofs<Dim>(el, [&](const Point<Dim>& x) { return el.values(x)[b]; });
  return D;
}

/// Reciprocal condition number (ratio of extreme singular values).
inline double reciprocal_condition(const Eigen::MatrixXd& A) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(A);
  const auto& s = svd.singularValues();
  return s.size() == 0 ? 0.0 : s[s.size() - 1] / s[0];
}

}  // namespace mcs
