#pragma once

// Reference simplex data: vertices V_0 = 0, V_i = e_i; facet j is opposite
// V_j; normals and tangents follow the fixed choice used by the stress
// element (they are not normalized to an orthonormal frame in 3D).

#include "mcs/polynomials.hpp"
#include "mcs/quadrature.hpp"

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace mcs {

template <int Dim>
Point<Dim> reference_vertex(int i) {
  Point<Dim> v = Point<Dim>::Zero();
  if (i > 0) v[i - 1] = 1.0;
  return v;
}

template <int Dim>
Point<Dim> reference_normal(int j) {
  Point<Dim> n = Point<Dim>::Zero();
  if (j == 0) {
    n.setConstant(1.0 / std::sqrt(double(Dim)));
  } else {
    n[j - 1] = -1.0;
  }
  return n;
}

template <int Dim>
std::array<Point<Dim>, Dim - 1> reference_tangents(int j) {
  std::array<Point<Dim>, Dim - 1> t;
  if constexpr (Dim == 2) {
    const Point<2> table[3] = {Point<2>(-1, 1) / std::sqrt(2.0), Point<2>(0, -1), Point<2>(1, 0)};
    t[0] = table[j];
  } else {
    const double r = 1.0 / std::sqrt(2.0);
    const Point<3> table[4][2] = {{Point<3>(-r, r, 0), Point<3>(0, r, -r)},
                                  {Point<3>(0, -1, 0), Point<3>(0, 0, -1)},
                                  {Point<3>(1, 0, 0), Point<3>(0, 0, -1)},
                                  {Point<3>(1, 0, 0), Point<3>(0, -1, 0)}};
    t[0] = table[j][0];
    t[1] = table[j][1];
  }
  return t;
}

template <int Dim>
double reference_facet_measure(int j) {
  if constexpr (Dim == 2) return j == 0 ? std::sqrt(2.0) : 1.0;
  else return j == 0 ? std::sqrt(3.0) / 2.0 : 0.5;
}

/// Barycentric coordinates of the reference point x.
template <int Dim, class T>
std::array<T, Dim + 1> reference_barycentric(const Eigen::Matrix<T, Dim, 1>& x) {
  std::array<T, Dim> a;
  for (int i = 0; i < Dim; ++i) a[i] = x[i];
  return barycentric<Dim, T>(a);
}

inline std::array<double, 1> to_array(const Point<1>& p) { return {p[0]}; }
inline std::array<double, 2> to_array(const Point<2>& p) { return {p[0], p[1]}; }
inline std::array<double, 3> to_array(const Point<3>& p) { return {p[0], p[1], p[2]}; }

/// Point on reference facet j with facet barycentrics (1 - sum s, s...),
/// assigned to the cell barycentrics lambda_{j+1}, lambda_{j+2}, ... (mod Dim+1).
template <int Dim>
Point<Dim> reference_facet_point(int j, const Point<Dim - 1>& s) {
  std::array<double, Dim + 1> lam{};
  double s0 = 1.0;
  for (int i = 0; i < Dim - 1; ++i) s0 -= s[i];
  lam[(j + 1) % (Dim + 1)] = s0;
  for (int i = 0; i < Dim - 1; ++i) lam[(j + 2 + i) % (Dim + 1)] = s[i];
  Point<Dim> x;
  for (int i = 0; i < Dim; ++i) x[i] = lam[i + 1];
  return x;
}

/// Dubiner basis of P^k on a (Dim-1)-simplex at facet coordinates s.
template <int Dim>
void facet_dubiner(int k, const Point<Dim - 1>& s, std::vector<double>& out) {
  const auto mu = barycentric<Dim - 1, double>(to_array(s));
  dubiner_all<Dim - 1>(k, mu.data(), out);
}

/// Quadrature of a given degree on a facet, in facet coordinates, with the
/// weights scaled so that they sum to 1 (multiply by the facet measure).
template <int Dim>
QuadratureRule<Dim - 1> facet_quadrature(int degree) {
  auto q = simplex_quadrature<Dim - 1>(degree);
  const double scale = Dim == 3 ? 2.0 : 1.0;
  for (auto& w : q.weights) w *= scale;
  return q;
}

}  // namespace mcs
