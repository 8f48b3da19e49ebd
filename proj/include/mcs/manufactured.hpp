#pragma once

// Polynomial manufactured Stokes solutions on the unit square and cube.
//   d = 2: psi = g(x)g(y),        u = (-d_y psi, d_x psi),   p = x^5 + y^5 - 1/3
//   d = 3: psi = g(x)g(y)g(z),    u = curl(psi, psi, psi),   p = x^5 + y^5 + z^5 - 1/2
// with g(t) = t^2 (t-1)^2, sigma = nu grad u and f = -div sigma + grad p.
// All derivatives are exact polynomial expressions.

#include "mcs/mesh.hpp"

#include <array>
#include <cmath>
#include <stdexcept>

namespace mcs {

/// n-th derivative of g(t) = t^4 - 2t^3 + t^2.
inline double g_derivative(int n, double t) {
  switch (n) {
    case 0: return t * t * (t - 1) * (t - 1);
    case 1: return 4 * t * t * t - 6 * t * t + 2 * t;
    case 2: return 12 * t * t - 12 * t + 2;
    case 3: return 24 * t - 12;
    case 4: return 24;
    default: return 0;
  }
}

template <int Dim>
struct ManufacturedCase {
  double nu = 1;

  explicit ManufacturedCase(double viscosity) : nu(viscosity) {
    if (!(viscosity > 0)) throw std::invalid_argument("ManufacturedCase: viscosity must be positive");
  }

  /// Partial derivative of psi with orders a[i] in direction i.
  static double psi(const std::array<int, Dim>& a, const Point<Dim>& x) {
    double v = 1;
    for (int i = 0; i < Dim; ++i) v *= g_derivative(a[i], x[i]);
    return v;
  }

  // u_i = sum_j C(i, j) d_j psi with a fixed coefficient matrix C
  static double coef(int i, int j) {
    if constexpr (Dim == 2) {
      static constexpr double C[2][2] = {{0, -1}, {1, 0}};
      return C[i][j];
    } else {
      static constexpr double C[3][3] = {{0, 1, -1}, {-1, 0, 1}, {1, -1, 0}};
      return C[i][j];
    }
  }

  static std::array<int, Dim> unit(int j) {
    std::array<int, Dim> a{};
    a[j] = 1;
    return a;
  }

  [[nodiscard]] Point<Dim> u(const Point<Dim>& x) const {
    Point<Dim> v = Point<Dim>::Zero();
    for (int i = 0; i < Dim; ++i)
      for (int j = 0; j < Dim; ++j)
        if (coef(i, j) != 0) v[i] += coef(i, j) * psi(unit(j), x);
    return v;
  }

  /// (i, m) = d_m u_i
  [[nodiscard]] Mat<Dim> grad_u(const Point<Dim>& x) const {
    Mat<Dim> G = Mat<Dim>::Zero();
    for (int i = 0; i < Dim; ++i)
      for (int j = 0; j < Dim; ++j) {
        if (coef(i, j) == 0) continue;
        for (int m = 0; m < Dim; ++m) {
          auto a = unit(j);
          ++a[m];
          G(i, m) += coef(i, j) * psi(a, x);
        }
      }
    return G;
  }

  [[nodiscard]] Mat<Dim> sigma(const Point<Dim>& x) const { return nu * grad_u(x); }

  [[nodiscard]] Point<Dim> laplace_u(const Point<Dim>& x) const {
    Point<Dim> L = Point<Dim>::Zero();
    for (int i = 0; i < Dim; ++i)
      for (int j = 0; j < Dim; ++j) {
        if (coef(i, j) == 0) continue;
        for (int m = 0; m < Dim; ++m) {
          auto a = unit(j);
          a[m] += 2;
          L[i] += coef(i, j) * psi(a, x);
        }
      }
    return L;
  }

  [[nodiscard]] double p(const Point<Dim>& x) const {
    double s = 0;
    for (int i = 0; i < Dim; ++i) s += std::pow(x[i], 5);
    return s - Dim / 6.0;
  }

  [[nodiscard]] Point<Dim> grad_p(const Point<Dim>& x) const {
    Point<Dim> g;
    for (int i = 0; i < Dim; ++i) g[i] = 5 * std::pow(x[i], 4);
    return g;
  }

  [[nodiscard]] Point<Dim> f(const Point<Dim>& x) const { return -nu * laplace_u(x) + grad_p(x); }

  /// Polynomial degree of the load.
  static constexpr int load_degree() { return Dim == 2 ? 5 : 9; }
  /// Polynomial degree of u.
  static constexpr int velocity_degree() { return Dim == 2 ? 7 : 11; }
};

template <int Dim>
ManufacturedCase<Dim> manufactured_case(double nu) {
  return ManufacturedCase<Dim>(nu);
}

}  // namespace mcs
