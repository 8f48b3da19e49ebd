#pragma once

// Canonical interpolants into the global MCS spaces and the L2 projection
// into the pressure space. Results are field-local coefficient vectors.

#include "mcs/space.hpp"

#include <Eigen/Dense>

#include <utility>
#include <vector>

namespace mcs {

/// Gathers the local coefficients of cell c from a field-local vector.
inline Eigen::VectorXd gather(const Eigen::VectorXd& x, const std::vector<int>& idx) {
  Eigen::VectorXd out(idx.size());
  for (std::size_t i = 0; i < idx.size(); ++i) out[i] = x[idx[i]];
  return out;
}

/// Stress interpolant: global facet moments of sigma, then bubble moments of
/// the remainder on every cell (tested against the bubbles themselves).
template <int Dim, class Fn>
Eigen::VectorXd interpolate_stress(const McsSpace<Dim>& V, Fn sigma, int extra_degree = 4,
                                   int threads = default_threads()) {
  const auto& m = V.mesh();
  const auto& el = V.stress_element();
  const auto& d = V.dofs();
  const int k = V.order();
  const int nsp = el.num_facet_polys(), ns = el.dofs_per_facet();
  Eigen::VectorXd x = Eigen::VectorXd::Zero(d.num_stress());

  const auto fq = facet_quadrature<Dim>(2 * k + extra_degree);
  parallel_for(m.num_facets(), threads, [&](int f) {
    const auto& fg = V.facet(f);
    std::vector<double> r;
    for (std::size_t p = 0; p < fq.size(); ++p) {
      const Point<Dim> tn = sigma(fg.map(fq.points[p])) * fg.normal;
      facet_dubiner<Dim>(k - 1, fq.points[p], r);
      const double w = fq.weights[p] * fg.measure;
      for (int l = 0; l < Dim - 1; ++l) {
        const double v = w * fg.tangents[l].dot(tn);
        for (int c = 0; c < nsp; ++c) x[f * ns + l * nsp + c] += v * r[c];
      }
    }
  });

  const auto vq = simplex_quadrature<Dim>(2 * k + extra_degree);
  const StressTable ref = V.stress_reference(vq.points, false);
  const int nfun = el.num_facet_functions(), nb = el.num_bubbles();
  Eigen::MatrixXd G = Eigen::MatrixXd::Zero(nb, nb);
  for (std::size_t p = 0; p < vq.size(); ++p) {
    const auto blk = ref.val.block(p * Dim * Dim, nfun, Dim * Dim, nb);
    G += vq.weights[p] * blk.transpose() * blk;
  }
  const Eigen::LLT<Eigen::MatrixXd> llt(G);
  parallel_for(m.num_cells(), threads, [&](int c) {
    const auto& g = V.geometry(c);
    Eigen::VectorXd native(nfun);
    for (int j = 0; j <= Dim; ++j) {
      const int f = m.cell_facet(c, j);
      native.segment(j * ns, ns) = V.stress_transform(c, j) * x.segment(f * ns, ns);
    }
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(nb);
    for (std::size_t p = 0; p < vq.size(); ++p) {
      const Mat<Dim> s_hat = pullback_stress(g, sigma(g.map(vq.points[p])));
      Eigen::Matrix<double, Dim * Dim, 1> res;
      for (int r = 0; r < Dim; ++r)
        for (int s = 0; s < Dim; ++s) res[r * Dim + s] = s_hat(r, s);
      res -= ref.val.block(p * Dim * Dim, 0, Dim * Dim, nfun) * native;
      rhs += vq.weights[p] * ref.val.block(p * Dim * Dim, nfun, Dim * Dim, nb).transpose() * res;
    }
    x.segment(d.num_stress_facet + c * nb, nb) = llt.solve(rhs);
  });
  return x;
}

/// BDM interpolant: global normal facet moments, then the interior moments of
/// the Piola pullback (the reference basis is dual to its DOFs, so facet
/// functions do not contribute to the interior moments).
template <int Dim, class Fn>
Eigen::VectorXd interpolate_velocity(const McsSpace<Dim>& V, Fn u, int extra_degree = 4,
                                     int threads = default_threads()) {
  const auto& m = V.mesh();
  const auto& el = V.velocity_element();
  const auto& d = V.dofs();
  const int k = V.order();
  const int nv = el.dofs_per_facet(), nb = el.num_bubbles(), nfun = el.num_facet_functions();
  Eigen::VectorXd x = Eigen::VectorXd::Zero(d.num_velocity());
  const auto fq = facet_quadrature<Dim>(2 * k + extra_degree);
  parallel_for(m.num_facets(), threads, [&](int f) {
    const auto& fg = V.facet(f);
    std::vector<double> r;
    for (std::size_t p = 0; p < fq.size(); ++p) {
      const double un = u(fg.map(fq.points[p])).dot(fg.normal) * fq.weights[p] * fg.measure;
      facet_dubiner<Dim>(k, fq.points[p], r);
      for (int c = 0; c < nv; ++c) x[f * nv + c] += un * r[c];
    }
  });
  if (nb > 0)
    parallel_for(m.num_cells(), threads, [&](int c) {
      const auto& g = V.geometry(c);
      const Eigen::VectorXd all = apply_bdm_reference_dofs<Dim>(
          el, [&](const Point<Dim>& xh) { return Point<Dim>(pullback_piola(g, u(g.map(xh)))); }, extra_degree);
      x.segment(d.num_velocity_facet + c * nb, nb) = all.segment(nfun, nb);
    });
  return x;
}

/// Integral and measure of a scalar function over the mesh.
template <int Dim, class Fn>
std::pair<double, double> integrate_scalar(const McsSpace<Dim>& V, Fn p, int degree) {
  const auto q = simplex_quadrature<Dim>(degree);
  double integral = 0, volume = 0;
  for (int c = 0; c < V.mesh().num_cells(); ++c) {
    const auto& g = V.geometry(c);
    for (std::size_t i = 0; i < q.size(); ++i) integral += q.weights[i] * g.detF * p(g.map(q.points[i]));
    for (double w : q.weights) volume += g.detF * w;
  }
  return {integral, volume};
}

/// Cellwise L2 projection of p - mean(p) onto discontinuous P^{k-1}.
template <int Dim, class Fn>
Eigen::VectorXd project_pressure(const McsSpace<Dim>& V, Fn p, int extra_degree = 4) {
  const int k = V.order();
  const auto q = simplex_quadrature<Dim>(2 * k + extra_degree);
  const auto [integral, volume] = integrate_scalar(V, p, 2 * k + extra_degree);
  const double mean = integral / volume;
  const Eigen::MatrixXd R = V.pressure_table(q.points);
  const Eigen::Map<const Eigen::VectorXd> w(q.weights.data(), q.size());
  const Eigen::MatrixXd M = R.transpose() * w.asDiagonal() * R;
  const Eigen::LLT<Eigen::MatrixXd> llt(M);
  const int np = V.pressure_element().size();
  Eigen::VectorXd x(V.dofs().num_pressure);
  for (int c = 0; c < V.mesh().num_cells(); ++c) {
    const auto& g = V.geometry(c);
    Eigen::VectorXd vals(q.size());
    for (std::size_t i = 0; i < q.size(); ++i) vals[i] = q.weights[i] * (p(g.map(q.points[i])) - mean);
    x.segment(c * np, np) = llt.solve(R.transpose() * vals);
  }
  return x;
}

}  // namespace mcs
