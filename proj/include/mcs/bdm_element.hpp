#pragma once

// BDM^k velocity element on the reference simplex, built as the dual basis of
//   facet DOFs:    int_{F_j} v.n_j mu_c ds,  mu_c Dubiner basis of P^k(F_j)
//   interior DOFs: int_T v.grad r_i dx,      r_i non-constant Dubiner P^{k-1}
//                  int_T v.b dx,             b divergence-free bubbles
// inside P^k(T, R^d), represented in the vector Dubiner basis e_i r_p.
// The gradient moments make the interpolant commute with the divergence.

#include "mcs/polynomials.hpp"
#include "mcs/quadrature.hpp"
#include "mcs/reference.hpp"
#include "mcs/stress_element.hpp"

#include <Eigen/Dense>

#include <stdexcept>
#include <string>
#include <vector>

namespace mcs {

template <int Dim>
class BdmElement {
 public:
  explicit BdmElement(int k) : k_(k) {
    if (k < 1) throw std::invalid_argument("BdmElement: order k must be >= 1, got " + std::to_string(k));
    np_ = poly_dim(Dim, k);
    nfp_ = poly_dim(Dim - 1, k);
    build();
  }

  [[nodiscard]] int order() const { return k_; }
  [[nodiscard]] int dofs_per_facet() const { return nfp_; }
  [[nodiscard]] int num_facet_functions() const { return (Dim + 1) * nfp_; }
  [[nodiscard]] int size() const { return Dim * np_; }
  [[nodiscard]] int num_bubbles() const { return size() - num_facet_functions(); }

  /// Shape function values at a reference point (one vector per function).
  [[nodiscard]] std::vector<Point<Dim>> values(const Point<Dim>& xhat) const {
    std::vector<double> r;
    const auto lam = barycentric<Dim, double>(to_array(xhat));
    dubiner_all<Dim>(k_, lam.data(), r);
    const Eigen::Map<const Eigen::VectorXd> rv(r.data(), np_);
    std::vector<Point<Dim>> out(size());
    for (int i = 0; i < Dim; ++i) {
      const Eigen::VectorXd c = C_.middleRows(i * np_, np_).transpose() * rv;
      for (int a = 0; a < size(); ++a) out[a][i] = c[a];
    }
    return out;
  }

  /// Values and reference gradients (row i = gradient of component i).
  void values_grads(const Point<Dim>& xhat, std::vector<Point<Dim>>& vals, std::vector<Mat<Dim>>& grads) const {
    using D = Dual<Dim>;
    std::array<D, Dim> x;
    for (int i = 0; i < Dim; ++i) x[i] = D::variable(xhat[i], i);
    const auto lam = barycentric<Dim, D>(x);
    std::vector<D> r;
    dubiner_all<Dim>(k_, lam.data(), r);
    Eigen::MatrixXd rd(np_, Dim + 1);
    for (int p = 0; p < np_; ++p) {
      rd(p, 0) = r[p].v;
      for (int m = 0; m < Dim; ++m) rd(p, m + 1) = r[p].d[m];
    }
    vals.resize(size());
    grads.resize(size());
    for (int i = 0; i < Dim; ++i) {
      const Eigen::MatrixXd c = C_.middleRows(i * np_, np_).transpose() * rd;
      for (int a = 0; a < size(); ++a) {
        vals[a][i] = c(a, 0);
        for (int m = 0; m < Dim; ++m) grads[a](i, m) = c(a, m + 1);
      }
    }
  }

  /// Interior test fields at a reference point.
  [[nodiscard]] std::vector<Point<Dim>> interior_tests(const Point<Dim>& xhat) const {
    std::vector<Point<Dim>> out;
    out.reserve(num_bubbles());
    using D = Dual<Dim>;
    std::array<D, Dim> x;
    for (int i = 0; i < Dim; ++i) x[i] = D::variable(xhat[i], i);
    const auto lam = barycentric<Dim, D>(x);
    std::vector<D> r;
    dubiner_all<Dim>(k_ - 1, lam.data(), r);
    for (std::size_t i = 1; i < r.size(); ++i) {
      Point<Dim> g;
      for (int m = 0; m < Dim; ++m) g[m] = r[i].d[m];
      out.push_back(g);
    }
    const Eigen::VectorXd raw = raw_values(xhat);
    for (int b = 0; b < free_bubbles_.cols(); ++b) {
      Point<Dim> v = Point<Dim>::Zero();
      for (int i = 0; i < Dim; ++i) v[i] = raw.segment(i * np_, np_).dot(free_bubbles_.col(b).segment(i * np_, np_));
      out.push_back(v);
    }
    return out;
  }

  /// DOF matrix of the raw vector Dubiner basis (its inverse gives the
  /// shape-function coefficients).
  [[nodiscard]] const Eigen::MatrixXd& dof_matrix() const { return dofs_; }

 private:
  // concatenated scalar Dubiner values, one copy per component
  [[nodiscard]] Eigen::VectorXd raw_values(const Point<Dim>& xhat) const {
    std::vector<double> r;
    const auto lam = barycentric<Dim, double>(to_array(xhat));
    dubiner_all<Dim>(k_, lam.data(), r);
    Eigen::VectorXd out(Dim * np_);
    for (int i = 0; i < Dim; ++i)
      for (int p = 0; p < np_; ++p) out[i * np_ + p] = r[p];
    return out;
  }

  void build() {
    const int n = size();
    const int nf = num_facet_functions();
    Eigen::MatrixXd R = Eigen::MatrixXd::Zero(nf, n);
    const auto fq = facet_quadrature<Dim>(2 * k_ + 2);
    std::vector<double> mu, r;
    for (int j = 0; j <= Dim; ++j) {
      const Point<Dim> nrm = reference_normal<Dim>(j);
      const double meas = reference_facet_measure<Dim>(j);
      for (std::size_t p = 0; p < fq.size(); ++p) {
        const Point<Dim> x = reference_facet_point<Dim>(j, fq.points[p]);
        facet_dubiner<Dim>(k_, fq.points[p], mu);
        const auto lam = barycentric<Dim, double>(to_array(x));
        dubiner_all<Dim>(k_, lam.data(), r);
        const double w = fq.weights[p] * meas;
        for (int c = 0; c < nfp_; ++c)
          for (int i = 0; i < Dim; ++i)
            for (int q = 0; q < np_; ++q) R(j * nfp_ + c, i * np_ + q) += w * mu[c] * nrm[i] * r[q];
      }
    }
    // bubbles: kernel of the facet rows
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(R, Eigen::ComputeFullV);
    const int nb = n - nf;
    if (svd.singularValues()[nf - 1] < 1e-10 * svd.singularValues()[0])
      throw std::logic_error("BdmElement: facet functionals are dependent");
    const Eigen::MatrixXd B = svd.matrixV().rightCols(nb);

    // divergence of the bubbles tested against non-constant P^{k-1}
    const auto vq = simplex_quadrature<Dim>(2 * k_ + 2);
    const int nq = poly_dim(Dim, k_ - 1);
    Eigen::MatrixXd divm = Eigen::MatrixXd::Zero(std::max(nq - 1, 0), nb);
    using D = Dual<Dim>;
    for (std::size_t p = 0; p < vq.size(); ++p) {
      std::array<D, Dim> x;
      for (int i = 0; i < Dim; ++i) x[i] = D::variable(vq.points[p][i], i);
      const auto lam = barycentric<Dim, D>(x);
      std::vector<D> rd;
      dubiner_all<Dim>(k_, lam.data(), rd);
      const auto lam0 = barycentric<Dim, double>(to_array(vq.points[p]));
      std::vector<double> s;
      dubiner_all<Dim>(k_ - 1, lam0.data(), s);
      Eigen::VectorXd div_raw(n);
      for (int i = 0; i < Dim; ++i)
        for (int q = 0; q < np_; ++q) div_raw[i * np_ + q] = rd[q].d[i];
      const Eigen::RowVectorXd div_b = div_raw.transpose() * B;
      for (int i = 1; i < nq; ++i) divm.row(i - 1) += vq.weights[p] * s[i] * div_b;
    }
    if (nq > 1) {
      Eigen::JacobiSVD<Eigen::MatrixXd> dsvd(divm, Eigen::ComputeFullV);
      const int rank = nq - 1;
      if (dsvd.singularValues()[rank - 1] < 1e-10 * dsvd.singularValues()[0])
        throw std::logic_error("BdmElement: divergence of bubbles not onto");
      free_bubbles_ = B * dsvd.matrixV().rightCols(nb - rank);
    } else {
      free_bubbles_ = B;
    }

    dofs_ = Eigen::MatrixXd::Zero(n, n);
    dofs_.topRows(nf) = R;
    for (std::size_t p = 0; p < vq.size(); ++p) {
      const auto tests = interior_tests(vq.points[p]);
      const Eigen::VectorXd raw = raw_values(vq.points[p]);
      for (int m = 0; m < nb; ++m)
        for (int i = 0; i < Dim; ++i)
          dofs_.row(nf + m).segment(i * np_, np_) += vq.weights[p] * tests[m][i] * raw.segment(i * np_, np_).transpose();
    }
    Eigen::FullPivLU<Eigen::MatrixXd> lu(dofs_);
    if (lu.rank() != n) throw std::logic_error("BdmElement: DOF matrix singular");
    C_ = lu.inverse();
  }

  int k_;
  int np_ = 0;
  int nfp_ = 0;
  Eigen::MatrixXd C_;
  Eigen::MatrixXd dofs_;
  Eigen::MatrixXd free_bubbles_;
};

template <int Dim>
BdmElement<Dim> bdm_basis(int k) {
  return BdmElement<Dim>(k);
}

/// Reference DOFs of a vector field, in the order facet moments (per facet,
/// per facet polynomial) followed by the interior moments.
template <int Dim, class Fn>
Eigen::VectorXd apply_bdm_reference_dofs(const BdmElement<Dim>& el, Fn v_hat, int extra_degree = 2) {
  const int k = el.order();
  Eigen::VectorXd dofs = Eigen::VectorXd::Zero(el.size());
  const auto fq = facet_quadrature<Dim>(2 * k + extra_degree);
  std::vector<double> mu;
  for (int j = 0; j <= Dim; ++j) {
    const Point<Dim> n = reference_normal<Dim>(j);
    const double meas = reference_facet_measure<Dim>(j);
    for (std::size_t p = 0; p < fq.size(); ++p) {
      const Point<Dim> x = reference_facet_point<Dim>(j, fq.points[p]);
      facet_dubiner<Dim>(k, fq.points[p], mu);
      const double vn = Point<Dim>(v_hat(x)).dot(n) * fq.weights[p] * meas;
      for (int c = 0; c < el.dofs_per_facet(); ++c) dofs[j * el.dofs_per_facet() + c] += vn * mu[c];
    }
  }
  const auto vq = simplex_quadrature<Dim>(2 * k + extra_degree);
  const int nf = el.num_facet_functions();
  for (std::size_t p = 0; p < vq.size(); ++p) {
    const Point<Dim> v = v_hat(vq.points[p]);
    const auto tests = el.interior_tests(vq.points[p]);
    for (int m = 0; m < el.num_bubbles(); ++m) dofs[nf + m] += vq.weights[p] * v.dot(tests[m]);
  }
  return dofs;
}

}  // namespace mcs
