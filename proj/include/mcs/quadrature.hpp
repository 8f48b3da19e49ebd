#pragma once

// Quadrature on the reference simplex {x_i >= 0, sum x_i <= 1} of dimension
// 1, 2 or 3, built from collapsed (Duffy) tensor products of Gauss-Legendre
// rules. Weights are positive and sum to 1/Dim!.

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

namespace mcs {

template <int Dim>
using Point = Eigen::Matrix<double, Dim, 1>;

template <int Dim>
struct QuadratureRule {
  std::vector<Point<Dim>> points;
  std::vector<double> weights;
  int exactness_degree = 0;

  [[nodiscard]] std::size_t size() const { return weights.size(); }
};

/// n-point Gauss-Legendre rule mapped to [0, 1].
inline void gauss_legendre_01(int n, std::vector<double>& x, std::vector<double>& w) {
  x.assign(n, 0.0);
  w.assign(n, 0.0);
  for (int i = 0; i < n; ++i) {
    double z = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 1.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = z;
      for (int m = 2; m <= n; ++m) {
        const double p2 = ((2.0 * m - 1.0) * z * p1 - (m - 1.0) * p0) / m;
        p0 = p1;
        p1 = p2;
      }
      if (n == 1) {
        p1 = z;
        p0 = 1.0;
      }
      dp = n * (z * p1 - p0) / (z * z - 1.0);
      const double dz = p1 / dp;
      z -= dz;
      if (std::abs(dz) < 1e-16) break;
    }
    // recompute derivative at the converged node
    double p0 = 1.0, p1 = z;
    for (int m = 2; m <= n; ++m) {
      const double p2 = ((2.0 * m - 1.0) * z * p1 - (m - 1.0) * p0) / m;
      p0 = p1;
      p1 = p2;
    }
    dp = n * (z * p1 - p0) / (z * z - 1.0);
    x[i] = 0.5 * (1.0 - z);
    w[i] = 1.0 / ((1.0 - z * z) * dp * dp);  // (2 / ((1-z^2) p'^2)) / 2
  }
}

template <int Dim>
QuadratureRule<Dim> simplex_quadrature(int degree) {
  static_assert(Dim >= 1 && Dim <= 3);
  if (degree < 0) throw std::invalid_argument("simplex_quadrature: negative degree");
  QuadratureRule<Dim> rule;
  rule.exactness_degree = degree;
  auto npts = [](int deg) { return std::max(1, (deg + 2) / 2); };  // ceil((deg+1)/2)
  std::vector<double> x0, w0, x1, w1, x2, w2;
  if constexpr (Dim == 1) {
    gauss_legendre_01(npts(degree), x0, w0);
    for (std::size_t i = 0; i < x0.size(); ++i) {
      rule.points.push_back(Point<1>(x0[i]));
      rule.weights.push_back(w0[i]);
    }
  } else if constexpr (Dim == 2) {
    gauss_legendre_01(npts(degree), x0, w0);
    gauss_legendre_01(npts(degree + 1), x1, w1);
    for (std::size_t j = 0; j < x1.size(); ++j)
      for (std::size_t i = 0; i < x0.size(); ++i) {
        const double eta = x1[j];
        rule.points.push_back(Point<2>(x0[i] * (1.0 - eta), eta));
        rule.weights.push_back(w0[i] * w1[j] * (1.0 - eta));
      }
  } else {
    gauss_legendre_01(npts(degree), x0, w0);
    gauss_legendre_01(npts(degree + 1), x1, w1);
    gauss_legendre_01(npts(degree + 2), x2, w2);
    for (std::size_t l = 0; l < x2.size(); ++l)
      for (std::size_t j = 0; j < x1.size(); ++j)
        for (std::size_t i = 0; i < x0.size(); ++i) {
          const double eta = x1[j], zeta = x2[l];
          rule.points.push_back(
              Point<3>(x0[i] * (1.0 - eta) * (1.0 - zeta), eta * (1.0 - zeta), zeta));
          rule.weights.push_back(w0[i] * w1[j] * w2[l] * (1.0 - eta) * (1.0 - zeta) * (1.0 - zeta));
        }
  }
  return rule;
}

/// Barycentric coordinates (lambda_0 = 1 - sum x, lambda_i = x_i) of a
/// reference point.
template <int Dim, class T>
std::array<T, Dim + 1> barycentric(const std::array<T, Dim>& x) {
  std::array<T, Dim + 1> lam;
  T s = T(1.0);
  for (int i = 0; i < Dim; ++i) {
    lam[i + 1] = x[i];
    s = s - x[i];
  }
  lam[0] = s;
  return lam;
}

}  // namespace mcs
