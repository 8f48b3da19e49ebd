#pragma once

// Transformations from the reference cell: the stress map
//   M(tau_hat) = det(F)^{-1} F^{-T} tau_hat F^T,
// which keeps trace-free matrices trace-free and scales normal-tangential
// traces by a facet-dependent constant, and the contravariant Piola map
//   P(v_hat) = det(F)^{-1} F v_hat.

#include "mcs/mesh.hpp"

#include <Eigen/Dense>

namespace mcs {

template <int Dim>
Mat<Dim> map_stress(const CellGeometry<Dim>& g, const Mat<Dim>& tau_hat) {
  return g.invF.transpose() * tau_hat * g.F.transpose() / g.detF;
}

template <int Dim>
Mat<Dim> pullback_stress(const CellGeometry<Dim>& g, const Mat<Dim>& tau) {
  return g.detF * g.F.transpose() * tau * g.invF.transpose();
}

/// Divergence of M(tau_hat) from the reference divergence of tau_hat.
template <int Dim>
Point<Dim> map_stress_div(const CellGeometry<Dim>& g, const Point<Dim>& div_hat) {
  return g.invF.transpose() * div_hat / g.detF;
}

/// x -> M(tau_hat)(x) for a reference field tau_hat(xhat).
template <int Dim, class Fn>
auto map_stress(const CellGeometry<Dim>& g, Fn tau_hat) {
  return [g, tau_hat](const Point<Dim>& x) -> Mat<Dim> { return map_stress(g, Mat<Dim>(tau_hat(g.pullback(x)))); };
}

template <int Dim>
Point<Dim> map_piola(const CellGeometry<Dim>& g, const Point<Dim>& v_hat) {
  return g.F * v_hat / g.detF;
}

template <int Dim>
Point<Dim> pullback_piola(const CellGeometry<Dim>& g, const Point<Dim>& v) {
  return g.detF * g.invF * v;
}

/// Physical gradient (row i = gradient of component i) of P(v_hat).
template <int Dim>
Mat<Dim> map_piola_grad(const CellGeometry<Dim>& g, const Mat<Dim>& grad_hat) {
  return g.F * grad_hat * g.invF / g.detF;
}

template <int Dim>
double map_piola_div(const CellGeometry<Dim>& g, double div_hat) {
  return div_hat / g.detF;
}

template <int Dim, class Fn>
auto map_piola(const CellGeometry<Dim>& g, Fn v_hat) {
  return [g, v_hat](const Point<Dim>& x) -> Point<Dim> { return map_piola(g, Point<Dim>(v_hat(g.pullback(x)))); };
}

}  // namespace mcs
