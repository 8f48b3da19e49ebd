#pragma once

// Self-checks of the reference elements and their mappings. Every check
// reports the measured quantity next to the pinned tolerance, so the same
// suite drives the unit tests, the `element-check` CLI command and the
// acceptance binary.

#include "mcs/bdm_element.hpp"
#include "mcs/mapping.hpp"
#include "mcs/polynomials.hpp"
#include "mcs/quadrature.hpp"
#include "mcs/reference.hpp"
#include "mcs/stress_element.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <random>
#include <string>
#include <vector>

namespace mcs {

struct CheckResult {
  std::string name;
  double value = 0;
  double tolerance = 0;
  bool upper = true;  // pass iff value <= tolerance (upper) or value > tolerance
  [[nodiscard]] bool passed() const { return std::isfinite(value) && (upper ? value <= tolerance : value > tolerance); }
};

inline bool all_passed(const std::vector<CheckResult>& r) {
  return std::all_of(r.begin(), r.end(), [](const CheckResult& c) { return c.passed(); });
}

namespace check {

template <int Dim>
Point<Dim> random_reference_point(std::mt19937& gen) {
  std::uniform_real_distribution<double> u(0, 1);
  Point<Dim> x;
  do {
    for (int i = 0; i < Dim; ++i) x[i] = u(gen);
  } while (x.sum() > 1);
  return x;
}

/// Random affine cell with |det F| bounded away from zero.
template <int Dim>
CellGeometry<Dim> random_affine_cell(std::mt19937& gen) {
  std::uniform_real_distribution<double> u(-1, 1);
  Mat<Dim> F;
  do {
    for (int i = 0; i < Dim; ++i)
      for (int j = 0; j < Dim; ++j) F(i, j) = (i == j ? 1.0 : 0.0) + 0.6 * u(gen);
  } while (F.determinant() < 0.2);
  std::array<Point<Dim>, Dim + 1> v;
  for (int i = 0; i < Dim; ++i) v[0][i] = u(gen);
  for (int i = 0; i < Dim; ++i) v[i + 1] = v[0] + F.col(i);
  return simplex_geometry<Dim>(v);
}

/// Random matrix-valued polynomial of total degree `degree`, coefficients in [-1, 1].
template <int Dim>
struct RandomMatrixPolynomial {
  std::vector<std::array<int, Dim>> exponents;
  std::vector<Mat<Dim>> coef;

  RandomMatrixPolynomial(int degree, std::mt19937& gen) {
    std::uniform_real_distribution<double> u(-1, 1);
    std::array<int, Dim> a{};
    auto rec = [&](auto&& self, int i, int left) -> void {
      if (i == Dim) {
        exponents.push_back(a);
        return;
      }
      for (int e = 0; e <= left; ++e) {
        a[i] = e;
        self(self, i + 1, left - e);
      }
    };
    rec(rec, 0, degree);
    for (std::size_t m = 0; m < exponents.size(); ++m) {
      Mat<Dim> C;
      for (int i = 0; i < Dim; ++i)
        for (int j = 0; j < Dim; ++j) C(i, j) = u(gen);
      coef.push_back(C);
    }
  }

  Mat<Dim> operator()(const Point<Dim>& x) const {
    Mat<Dim> s = Mat<Dim>::Zero();
    for (std::size_t m = 0; m < exponents.size(); ++m) {
      double v = 1;
      for (int i = 0; i < Dim; ++i) v *= std::pow(x[i], exponents[m][i]);
      s += v * coef[m];
    }
    return s;
  }
};

/// Worst relative residual of projecting the nt-trace of each stress shape
/// function onto P^{k-1} of each reference facet.
template <int Dim>
double facet_degree_residual(const StressElement<Dim>& el) {
  const int k = el.order();
  const auto q = facet_quadrature<Dim>(2 * k + 4);
  const int nfp = poly_dim(Dim - 1, k - 1);
  const Eigen::Map<const Eigen::VectorXd> w(q.weights.data(), static_cast<Eigen::Index>(q.size()));
  Eigen::MatrixXd R(q.size(), nfp);
  std::vector<double> r;
  for (std::size_t p = 0; p < q.size(); ++p) {
    facet_dubiner<Dim>(k - 1, q.points[p], r);
    for (int a = 0; a < nfp; ++a) R(p, a) = r[a];
  }
  const Eigen::MatrixXd G = R.transpose() * w.asDiagonal() * R;
  double worst = 0;
  for (int j = 0; j <= Dim; ++j) {
    const auto t = reference_tangents<Dim>(j);
    const Point<Dim> n = reference_normal<Dim>(j);
    for (int l = 0; l < Dim - 1; ++l) {
      Eigen::MatrixXd F(q.size(), el.size());
      for (std::size_t p = 0; p < q.size(); ++p) {
        const auto vals = el.values(reference_facet_point<Dim>(j, q.points[p]));
        for (int b = 0; b < el.size(); ++b) F(p, b) = t[l].dot(vals[b] * n);
      }
      const Eigen::MatrixXd res = F - R * G.ldlt().solve(R.transpose() * w.asDiagonal() * F);
      for (int b = 0; b < el.size(); ++b) {
        const double rn = std::sqrt((res.col(b).array().square() * w.array()).sum());
        const double fn = std::sqrt((F.col(b).array().square() * w.array()).sum());
        worst = std::max(worst, rn / std::max(1.0, fn));
      }
    }
  }
  return worst;
}

/// Largest nt-trace of a bubble on any reference facet.
template <int Dim>
double bubble_nt_trace(const StressElement<Dim>& el) {
  const auto q = facet_quadrature<Dim>(2 * el.order() + 2);
  double worst = 0;
  for (int j = 0; j <= Dim; ++j) {
    const Point<Dim> n = reference_normal<Dim>(j);
    for (std::size_t p = 0; p < q.size(); ++p) {
      const auto vals = el.values(reference_facet_point<Dim>(j, q.points[p]));
      for (int b = el.num_facet_functions(); b < el.size(); ++b) {
        const Point<Dim> tn = vals[b] * n;
        worst = std::max(worst, (tn - n.dot(tn) * n).norm());
      }
    }
  }
  return worst;
}

/// Facet identity for M(tau_hat) on a random affine cell and random
/// trace-free tau_hat: |c t^T tau n - t_hat^T tau_hat n_hat| over all facets
/// and tangents, with c = det(F^F)^2 (2D) or det(F^F) det(F^E) (3D).
template <int Dim>
double facet_covariance_defect(std::mt19937& gen) {
  std::uniform_real_distribution<double> u(-1, 1);
  const auto g = random_affine_cell<Dim>(gen);
  Mat<Dim> tau_hat;
  for (int i = 0; i < Dim; ++i)
    for (int j = 0; j < Dim; ++j) tau_hat(i, j) = u(gen);
  tau_hat -= tau_hat.trace() / Dim * Mat<Dim>::Identity();
  const Mat<Dim> tau = map_stress(g, tau_hat);
  double worst = std::abs(tau.trace());
  for (int j = 0; j <= Dim; ++j) {
    const Point<Dim> n_hat = reference_normal<Dim>(j);
    const Point<Dim> n_raw = g.invF.transpose() * n_hat;
    const Point<Dim> n = n_raw.normalized();
    for (const auto& t_raw : reference_tangents<Dim>(j)) {
      const Point<Dim> t_hat = t_raw.normalized();
      const Point<Dim> Ft = g.F * t_hat;
      const double detF_E = Ft.norm();
      const double detF_F = Dim == 2 ? detF_E : g.detF * n_raw.norm();
      const double c = Dim == 2 ? detF_F * detF_F : detF_F * detF_E;
      worst = std::max(worst, std::abs(c * Ft.normalized().dot(tau * n) - t_hat.dot(tau_hat * n_hat)));
    }
  }
  return worst;
}

/// Physical-cell DOFs of a family of matrix fields: fields(x) returns the
/// values of all members at x. Facet DOFs are nt moments against the facet
/// edge vectors of the physical cell and P^{k-1}(F); interior DOFs are
/// int_T sigma : F psi_b F^{-1} dx over the reference bubbles psi_b.
/// Column m holds the DOFs of member m.
template <int Dim, class Fields>
Eigen::MatrixXd physical_stress_dofs(const StressElement<Dim>& el, const CellGeometry<Dim>& g, Fields fields,
                                     int members, int degree) {
  const int k = el.order();
  Eigen::MatrixXd dofs = Eigen::MatrixXd::Zero(el.size(), members);
  std::array<Point<Dim>, Dim + 1> x;
  for (int i = 0; i <= Dim; ++i) x[i] = g.map(reference_vertex<Dim>(i));
  const auto fq = facet_quadrature<Dim>(degree);
  std::vector<double> r;
  for (int j = 0; j <= Dim; ++j) {
    std::array<Point<Dim>, Dim> v;
    for (int i = 0; i < Dim; ++i) v[i] = x[(j + 1 + i) % (Dim + 1)];
    std::array<Point<Dim>, Dim - 1> t;
    for (int q = 0; q < Dim - 1; ++q) t[q] = v[q + 1] - v[0];
    Point<Dim> n;
    double meas;
    if constexpr (Dim == 2) {
      n = Point<2>(t[0][1], -t[0][0]);
      meas = t[0].norm();
    } else {
      n = t[0].cross(t[1]);
      meas = 0.5 * n.norm();
    }
    n.normalize();
    for (std::size_t p = 0; p < fq.size(); ++p) {
      Point<Dim> xp = v[0];
      for (int i = 0; i < Dim - 1; ++i) xp += fq.points[p][i] * (v[i + 1] - v[0]);
      const std::vector<Mat<Dim>> vals = fields(xp);
      facet_dubiner<Dim>(k - 1, fq.points[p], r);
      for (int m = 0; m < members; ++m) {
        const Point<Dim> sn = vals[m] * n;
        for (int q = 0; q < Dim - 1; ++q) {
          const double mom = t[q].dot(sn) * fq.weights[p] * meas;
          for (int a = 0; a < el.num_facet_polys(); ++a) dofs(el.facet_index(j, q, a), m) += mom * r[a];
        }
      }
    }
  }
  const auto vq = simplex_quadrature<Dim>(degree);
  const int nf = el.num_facet_functions();
  for (std::size_t p = 0; p < vq.size(); ++p) {
    const std::vector<Mat<Dim>> vals = fields(g.map(vq.points[p]));
    const auto psi = el.values(vq.points[p]);
    for (int b = nf; b < el.size(); ++b) {
      const Mat<Dim> eta = vq.weights[p] * std::abs(g.detF) * (g.F * psi[b] * g.invF);
      for (int m = 0; m < members; ++m) dofs(b, m) += vals[m].cwiseProduct(eta).sum();
    }
  }
  return dofs;
}

/// Commuting identity M^{-1}(I_T sigma) = I_That(M^{-1} sigma) for a random
/// polynomial sigma of degree k+2 on a random affine cell. Both sides are
/// computed independently (physical DOFs of the mapped basis versus the
/// reference DOFs of the pulled-back field). Returns the reference L2 norm
/// of the difference relative to that of I_That(M^{-1} sigma).
template <int Dim>
double commuting_defect(const StressElement<Dim>& el, const Eigen::MatrixXd& ref_dof_matrix, std::mt19937& gen) {
  const int k = el.order();
  const auto g = random_affine_cell<Dim>(gen);
  const RandomMatrixPolynomial<Dim> sigma(k + 2, gen);
  const int deg = 2 * k + 4;
  const Eigen::MatrixXd Dp = physical_stress_dofs<Dim>(
      el, g,
      [&](const Point<Dim>& y) {
        auto v = el.values(g.pullback(y));
        for (auto& s : v) s = map_stress(g, s);
        return v;
      },
      el.size(), deg);
  const Eigen::MatrixXd rhs =
      physical_stress_dofs<Dim>(el, g, [&](const Point<Dim>& y) { return std::vector<Mat<Dim>>{sigma(y)}; }, 1, deg);
  const Eigen::VectorXd c_phys = Dp.fullPivLu().solve(rhs.col(0));
  const Eigen::VectorXd c_ref = ref_dof_matrix.fullPivLu().solve(apply_stress_reference_dofs<Dim>(
      el, [&](const Point<Dim>& xh) { return pullback_stress(g, sigma(g.map(xh))); }, 4));
  const auto q = simplex_quadrature<Dim>(2 * k);
  double e = 0, nrm = 0;
  for (std::size_t p = 0; p < q.size(); ++p) {
    const auto vals = el.values(q.points[p]);
    Mat<Dim> d = Mat<Dim>::Zero(), ref = Mat<Dim>::Zero();
    for (int b = 0; b < el.size(); ++b) {
      d += (c_phys[b] - c_ref[b]) * vals[b];
      ref += c_ref[b] * vals[b];
    }
    e += q.weights[p] * d.squaredNorm();
    nrm += q.weights[p] * ref.squaredNorm();
  }
  return std::sqrt(e / nrm);
}

}  // namespace check

inline double stress_dimension_formula(int dim, int k) {
  // 3/2 (k+1)(k+2) - 3 and 8/6 (k+1)(k+2)(k+3) - 8(k+1), in exact integers
  return dim == 2 ? 3 * (k + 1) * (k + 2) / 2 - 3 : 8 * (k + 1) * (k + 2) * (k + 3) / 6 - 8 * (k + 1);
}

/// Reference element checks for one (Dim, k): dimensions, unisolvency,
/// trace-freeness, facet-trace degree, bubbles and BDM unisolvency.
template <int Dim>
std::vector<CheckResult> element_structure_checks(int k, unsigned seed = 20240611) {
  std::vector<CheckResult> out;
  const auto el = stress_basis<Dim>(k);
  out.push_back({"stress dimension |size - formula|", std::abs(el.size() - stress_dimension_formula(Dim, k)), 0});
  out.push_back({"bubble count |size - formula|",
                 std::abs(el.num_bubbles() - (Dim == 2 ? 3.0 * k * (k + 1) / 2 : 8.0 * k * (k + 1) * (k + 2) / 6)),
                 0});
  const Eigen::MatrixXd D = stress_dof_matrix(el);
  out.push_back({"stress DOF matrix reciprocal condition", reciprocal_condition(D), 1e-12, false});
  out.push_back({"facet DOFs of bubbles",
                 D.topRightCorner(el.num_facet_functions(), el.num_bubbles()).cwiseAbs().maxCoeff(), 1e-14});

  std::mt19937 gen(seed + 17 * k + Dim);
  double tr = 0;
  for (int rep = 0; rep < 100; ++rep)
    for (const auto& v : el.values(check::random_reference_point<Dim>(gen))) tr = std::max(tr, std::abs(v.trace()));
  out.push_back({"trace-free shape functions", tr, 1e-14});
  out.push_back({"facet nt-trace degree <= k-1 (projection residual)", check::facet_degree_residual(el), 1e-12});
  out.push_back({"bubble nt-trace on facets", check::bubble_nt_trace(el), 1e-14});

  const auto bdm = bdm_basis<Dim>(k);
  const double bdm_dim = Dim == 2 ? (k + 1) * (k + 2) : (k + 1) * (k + 2) * (k + 3) / 2;
  out.push_back({"BDM dimension |size - formula|", std::abs(bdm.size() - bdm_dim), 0});
  out.push_back({"BDM DOF matrix reciprocal condition", reciprocal_condition(bdm.dof_matrix()), 1e-12, false});
  return out;
}

/// Covariance of facet moments and the commuting interpolation identity on
/// random affine cells.
template <int Dim>
std::vector<CheckResult> element_mapping_checks(int k, int cells = 100, unsigned seed = 20240611) {
  std::vector<CheckResult> out;
  const auto el = stress_basis<Dim>(k);
  const Eigen::MatrixXd D = stress_dof_matrix(el);
  std::mt19937 gen(seed + 31 * k + Dim);
  double cov = 0, com = 0;
  for (int c = 0; c < cells; ++c) cov = std::max(cov, check::facet_covariance_defect<Dim>(gen));
  for (int c = 0; c < cells; ++c) com = std::max(com, check::commuting_defect<Dim>(el, D, gen));
  out.push_back({"facet covariance identity (" + std::to_string(cells) + " affine cells)", cov, 1e-12});
  out.push_back({"commuting interpolation, relative (" + std::to_string(cells) + " affine cells)", com, 1e-12});
  return out;
}

/// Both suites; this is what `mcs element-check` reports.
template <int Dim>
std::vector<CheckResult> element_checks(int k, int cells = 100, unsigned seed = 20240611) {
  auto out = element_structure_checks<Dim>(k, seed);
  const auto m = element_mapping_checks<Dim>(k, cells, seed);
  out.insert(out.end(), m.begin(), m.end());
  return out;
}

}  // namespace mcs
