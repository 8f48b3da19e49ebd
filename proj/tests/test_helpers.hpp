#pragma once

#include "mcs/mesh.hpp"

#include <random>

namespace mcs::testutil {

/// Structured mesh with interior vertices moved randomly by up to
/// `amount` times the grid spacing, so that cells are genuinely affine.
template <int Dim>
Mesh<Dim> perturbed_mesh(int n, double amount, unsigned seed = 7) {
  const Mesh<Dim> base = build_structured_mesh<Dim>(n);
  std::mt19937 gen(seed);
  std::uniform_real_distribution<double> U(-amount / n, amount / n);
  auto verts = base.vertices();
  for (auto& v : verts) {
    bool interior = true;
    for (int i = 0; i < Dim; ++i) interior = interior && v[i] > 1e-12 && v[i] < 1 - 1e-12;
    if (interior)
      for (int i = 0; i < Dim; ++i) v[i] += U(gen);
  }
  return Mesh<Dim>::from_cells(verts, base.cells());
}

}  // namespace mcs::testutil
