#pragma once

// Simplicial meshes with facet topology and affine cell geometry.
//
// Orientation convention: a facet is stored as the ascending tuple of its
// global vertex indices. That tuple alone fixes the facet tangent frame, the
// facet normal and the parametrization used for facet moments, so both
// neighbours of an interior facet see the same frame. Each (cell, local facet)
// pair additionally records whether the global normal points out of the cell.

#include "mcs/quadrature.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

namespace mcs {

template <int Dim>
using Mat = Eigen::Matrix<double, Dim, Dim>;

template <int Dim>
struct CellGeometry {
  Mat<Dim> F;      // gradient of the affine map x = F xhat + b
  Point<Dim> b;
  double detF = 0;
  Mat<Dim> invF;
  double diam = 0;

  [[nodiscard]] Point<Dim> map(const Point<Dim>& xhat) const { return F * xhat + b; }
  [[nodiscard]] Point<Dim> pullback(const Point<Dim>& x) const { return invF * (x - b); }
};

template <int Dim>
struct FacetGeometry {
  std::array<Point<Dim>, Dim> vertices;  // ascending global vertex order
  Point<Dim> normal;                     // unit, global orientation
  std::array<Point<Dim>, Dim - 1> tangents;
  double measure = 0;
  double detF_F = 0;  // |F| / |reference (Dim-1)-simplex|
  double detF_E = 0;  // d=3: length of the first facet edge; d=2: equals detF_F
  double diam = 0;

  /// Point of the facet with facet barycentrics (1 - sum s, s_1, ...).
  [[nodiscard]] Point<Dim> map(const Point<Dim - 1>& s) const {
    Point<Dim> x = vertices[0];
    for (int i = 0; i < Dim - 1; ++i) x += s[i] * (vertices[i + 1] - vertices[0]);
    return x;
  }
};

template <int Dim>
class Mesh {
 public:
  static_assert(Dim == 2 || Dim == 3);
  using Vertex = Point<Dim>;
  using Cell = std::array<int, Dim + 1>;
  using Facet = std::array<int, Dim>;

  struct FacetSide {
    int cell = -1;
    int local_facet = -1;  // index of the opposite local vertex
  };

  Mesh() = default;

  /// Builds topology from a vertex and cell list. Cells are reordered to
  /// positive orientation (swap of the last two vertices if needed).
  static Mesh from_cells(std::vector<Vertex> vertices, std::vector<Cell> cells) {
    Mesh m;
    m.vertices_ = std::move(vertices);
    m.cells_ = std::move(cells);
    for (auto& c : m.cells_) {
      for (int v : c)
        if (v < 0 || v >= static_cast<int>(m.vertices_.size()))
          throw std::invalid_argument("Mesh: cell references a missing vertex");
      const double det = m.signed_det(c);
      if (std::abs(det) <= 1e-14 * std::pow(m.cell_diam(c), Dim))
        throw std::invalid_argument("Mesh: degenerate cell");
      if (det < 0) std::swap(c[Dim - 1], c[Dim]);
    }
    m.build_topology();
    return m;
  }

  [[nodiscard]] int num_vertices() const { return static_cast<int>(vertices_.size()); }
  [[nodiscard]] int num_cells() const { return static_cast<int>(cells_.size()); }
  [[nodiscard]] int num_facets() const { return static_cast<int>(facets_.size()); }

  [[nodiscard]] const std::vector<Vertex>& vertices() const { return vertices_; }
  [[nodiscard]] const std::vector<Cell>& cells() const { return cells_; }
  [[nodiscard]] const std::vector<Facet>& facets() const { return facets_; }
  [[nodiscard]] const Vertex& vertex(int i) const { return vertices_[i]; }
  [[nodiscard]] const Cell& cell(int c) const { return cells_[c]; }
  [[nodiscard]] const Facet& facet(int f) const { return facets_[f]; }

  /// Adjacent cells of a facet, ascending by cell index (first = master).
  [[nodiscard]] const std::vector<FacetSide>& facet_cells(int f) const { return facet_cells_[f]; }
  [[nodiscard]] bool is_boundary(int f) const { return facet_cells_[f].size() == 1; }
  [[nodiscard]] int cell_facet(int c, int j) const { return cell_facets_[c][j]; }
  /// +1 if the global normal of local facet j points out of cell c.
  [[nodiscard]] int outward_sign(int c, int j) const { return outward_[c][j]; }

  [[nodiscard]] int num_boundary_facets() const {
    return static_cast<int>(std::count_if(facet_cells_.begin(), facet_cells_.end(),
                                          [](const auto& s) { return s.size() == 1; }));
  }
  [[nodiscard]] int num_interior_facets() const { return num_facets() - num_boundary_facets(); }

  /// Largest cell diameter.
  [[nodiscard]] double h() const {
    double h = 0;
    for (const auto& c : cells_) h = std::max(h, cell_diam(c));
    return h;
  }

  [[nodiscard]] double cell_diam(const Cell& c) const {
    double d = 0;
    for (int i = 0; i <= Dim; ++i)
      for (int j = i + 1; j <= Dim; ++j) d = std::max(d, (vertices_[c[i]] - vertices_[c[j]]).norm());
    return d;
  }

 private:
  [[nodiscard]] double signed_det(const Cell& c) const {
    Mat<Dim> F;
    for (int i = 0; i < Dim; ++i) F.col(i) = vertices_[c[i + 1]] - vertices_[c[0]];
    return F.determinant();
  }

  void build_topology() {
    std::map<Facet, std::vector<FacetSide>> found;
    for (int c = 0; c < num_cells(); ++c)
      for (int j = 0; j <= Dim; ++j) found[local_facet_key(cells_[c], j)].push_back({c, j});
    facets_.clear();
    facet_cells_.clear();
    cell_facets_.assign(cells_.size(), {});
    outward_.assign(cells_.size(), {});
    for (auto& [key, sides] : found) {
      if (sides.size() > 2) throw std::invalid_argument("Mesh: facet shared by more than two cells");
      const int f = static_cast<int>(facets_.size());
      facets_.push_back(key);
      std::sort(sides.begin(), sides.end(), [](auto a, auto b) { return a.cell < b.cell; });
      facet_cells_.push_back(sides);
      const Vertex n = facet_normal(key);
      for (const auto& s : sides) {
        cell_facets_[s.cell][s.local_facet] = f;
        const Vertex& opposite = vertices_[cells_[s.cell][s.local_facet]];
        outward_[s.cell][s.local_facet] = n.dot(vertices_[key[0]] - opposite) > 0 ? 1 : -1;
      }
    }
  }

  static Facet local_facet_key(const Cell& c, int j) {
    Facet key;
    int p = 0;
    for (int i = 0; i <= Dim; ++i)
      if (i != j) key[p++] = c[i];
    std::sort(key.begin(), key.end());
    return key;
  }

  [[nodiscard]] Vertex facet_normal(const Facet& key) const {
    const Vertex e1 = vertices_[key[1]] - vertices_[key[0]];
    if constexpr (Dim == 2) {
      return Vertex(e1[1], -e1[0]).normalized();
    } else {
      const Vertex e2 = vertices_[key[2]] - vertices_[key[0]];
      return e1.cross(e2).normalized();
    }
  }

  std::vector<Vertex> vertices_;
  std::vector<Cell> cells_;
  std::vector<Facet> facets_;
  std::vector<std::vector<FacetSide>> facet_cells_;
  std::vector<std::array<int, Dim + 1>> cell_facets_;
  std::vector<std::array<int, Dim + 1>> outward_;
};

template <int Dim>
CellGeometry<Dim> cell_geometry(const Mesh<Dim>& m, int c) {
  if (c < 0 || c >= m.num_cells()) throw std::out_of_range("cell_geometry: bad cell index");
  const auto& cell = m.cell(c);
  CellGeometry<Dim> g;
  g.b = m.vertex(cell[0]);
  for (int i = 0; i < Dim; ++i) g.F.col(i) = m.vertex(cell[i + 1]) - g.b;
  g.detF = g.F.determinant();
  g.diam = m.cell_diam(cell);
  if (!(g.detF > 1e-14 * std::pow(g.diam, Dim)))
    throw std::runtime_error("cell_geometry: degenerate or inverted cell " + std::to_string(c));
  g.invF = g.F.inverse();
  return g;
}

/// Geometry of a simplex given directly by its vertices (used for isolated
/// reference-to-physical checks outside a mesh).
template <int Dim>
CellGeometry<Dim> simplex_geometry(const std::array<Point<Dim>, Dim + 1>& v) {
  CellGeometry<Dim> g;
  g.b = v[0];
  for (int i = 0; i < Dim; ++i) g.F.col(i) = v[i + 1] - v[0];
  g.detF = g.F.determinant();
  for (int i = 0; i <= Dim; ++i)
    for (int j = i + 1; j <= Dim; ++j) g.diam = std::max(g.diam, (v[i] - v[j]).norm());
  if (std::abs(g.detF) <= 1e-14 * std::pow(g.diam, Dim))
    throw std::runtime_error("simplex_geometry: degenerate simplex");
  g.invF = g.F.inverse();
  return g;
}

template <int Dim>
FacetGeometry<Dim> facet_geometry(const Mesh<Dim>& m, int f) {
  if (f < 0 || f >= m.num_facets()) throw std::out_of_range("facet_geometry: bad facet index");
  FacetGeometry<Dim> g;
  const auto& key = m.facet(f);
  for (int i = 0; i < Dim; ++i) g.vertices[i] = m.vertex(key[i]);
  const Point<Dim> e1 = g.vertices[1] - g.vertices[0];
  for (int i = 0; i < Dim; ++i)
    for (int j = i + 1; j < Dim; ++j) g.diam = std::max(g.diam, (g.vertices[i] - g.vertices[j]).norm());
  if constexpr (Dim == 2) {
    g.measure = e1.norm();
    if (!(g.measure > 1e-14)) throw std::runtime_error("facet_geometry: degenerate facet");
    g.tangents[0] = e1 / g.measure;
    g.normal = Point<2>(g.tangents[0][1], -g.tangents[0][0]);
    g.detF_F = g.measure;
    g.detF_E = g.measure;
  } else {
    const Point<3> e2 = g.vertices[2] - g.vertices[0];
    const Point<3> c = e1.cross(e2);
    g.measure = 0.5 * c.norm();
    if (!(g.measure > 1e-14 * g.diam * g.diam)) throw std::runtime_error("facet_geometry: degenerate facet");
    g.normal = c.normalized();
    g.tangents[0] = e1.normalized();
    g.tangents[1] = g.normal.cross(g.tangents[0]);
    g.detF_F = 2.0 * g.measure;
    g.detF_E = e1.norm();
  }
  return g;
}

/// Unit square / cube split into n^d squares/cubes, each cut into 2 triangles
/// or 6 Kuhn tetrahedra sharing the main diagonal.
template <int Dim>
Mesh<Dim> build_structured_mesh(int n) {
  if (n < 1) throw std::invalid_argument("build_structured_mesh: n must be >= 1");
  using Vertex = typename Mesh<Dim>::Vertex;
  using Cell = typename Mesh<Dim>::Cell;
  std::vector<Vertex> verts;
  std::vector<Cell> cells;
  const int s = n + 1;
  if constexpr (Dim == 2) {
    auto id = [s](int i, int j) { return j * s + i; };
    for (int j = 0; j <= n; ++j)
      for (int i = 0; i <= n; ++i) verts.emplace_back(double(i) / n, double(j) / n);
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n; ++i) {
        cells.push_back({id(i, j), id(i + 1, j), id(i + 1, j + 1)});
        cells.push_back({id(i, j), id(i + 1, j + 1), id(i, j + 1)});
      }
  } else {
    auto id = [s](int i, int j, int l) { return (l * s + j) * s + i; };
    for (int l = 0; l <= n; ++l)
      for (int j = 0; j <= n; ++j)
        for (int i = 0; i <= n; ++i) verts.emplace_back(double(i) / n, double(j) / n, double(l) / n);
    const std::array<std::array<int, 3>, 6> perms{{{0, 1, 2}, {0, 2, 1}, {1, 0, 2}, {1, 2, 0}, {2, 0, 1}, {2, 1, 0}}};
    for (int l = 0; l < n; ++l)
      for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i)
          for (const auto& p : perms) {
            std::array<int, 3> pos{i, j, l};
            Cell c;
            c[0] = id(pos[0], pos[1], pos[2]);
            for (int step = 0; step < 3; ++step) {
              ++pos[p[step]];
              c[step + 1] = id(pos[0], pos[1], pos[2]);
            }
            cells.push_back(c);
          }
  }
  return Mesh<Dim>::from_cells(std::move(verts), std::move(cells));
}

/// Red refinement: 4 children per triangle (edge midpoints), 8 per
/// tetrahedron. Tetrahedra are split along the diagonal joining the midpoints
/// of edges (x0,x2) and (x1,x3), with the vertices ordered by ascending
/// coordinate sum; on Kuhn tetrahedra this reproduces the Freudenthal
/// triangulation of the refined grid, so children stay congruent.
template <int Dim>
Mesh<Dim> uniform_refine(const Mesh<Dim>& m) {
  using Vertex = typename Mesh<Dim>::Vertex;
  using Cell = typename Mesh<Dim>::Cell;
  std::vector<Vertex> verts = m.vertices();
  std::map<std::pair<int, int>, int> mid;
  auto midpoint = [&](int a, int b) {
    const auto key = std::minmax(a, b);
    auto it = mid.find(key);
    if (it != mid.end()) return it->second;
    const int id = static_cast<int>(verts.size());
    verts.push_back(0.5 * (m.vertex(a) + m.vertex(b)));
    mid.emplace(key, id);
    return id;
  };
  std::vector<Cell> cells;
  cells.reserve(m.num_cells() * (Dim == 2 ? 4 : 8));
  for (const auto& c : m.cells()) {
    if constexpr (Dim == 2) {
      const int m01 = midpoint(c[0], c[1]), m02 = midpoint(c[0], c[2]), m12 = midpoint(c[1], c[2]);
      cells.push_back({c[0], m01, m02});
      cells.push_back({m01, c[1], m12});
      cells.push_back({m02, m12, c[2]});
      cells.push_back({m01, m12, m02});
    } else {
      std::array<int, 4> x = c;
      std::stable_sort(x.begin(), x.end(), [&](int a, int b) {
        return m.vertex(a).sum() < m.vertex(b).sum();
      });
      const int x01 = midpoint(x[0], x[1]), x02 = midpoint(x[0], x[2]), x03 = midpoint(x[0], x[3]);
      const int x12 = midpoint(x[1], x[2]), x13 = midpoint(x[1], x[3]), x23 = midpoint(x[2], x[3]);
      cells.push_back({x[0], x01, x02, x03});
      cells.push_back({x01, x[1], x12, x13});
      cells.push_back({x02, x12, x[2], x23});
      cells.push_back({x03, x13, x23, x[3]});
      cells.push_back({x01, x02, x03, x13});
      cells.push_back({x01, x02, x12, x13});
      cells.push_back({x02, x03, x13, x23});
      cells.push_back({x02, x12, x13, x23});
    }
  }
  return Mesh<Dim>::from_cells(std::move(verts), std::move(cells));
}

/// Plain-text dump: header "dim nvertices ncells", then one vertex per line,
/// then one cell (vertex indices) per line.
template <int Dim>
void write_ascii(const Mesh<Dim>& m, std::ostream& os) {
  os << Dim << ' ' << m.num_vertices() << ' ' << m.num_cells() << '\n';
  os.precision(17);
  for (const auto& v : m.vertices()) {
    for (int i = 0; i < Dim; ++i) os << (i ? " " : "") << v[i];
    os << '\n';
  }
  for (const auto& c : m.cells()) {
    for (int i = 0; i <= Dim; ++i) os << (i ? " " : "") << c[i];
    os << '\n';
  }
}

}  // namespace mcs
