#pragma once

// Global MCS spaces on a mesh: Sigma_h (stress), V_h = BDM^k (velocity),
// Q_h = discontinuous P^{k-1} (pressure), their DOF numbering, and physical
// basis tables.
//
// Facet DOFs are defined globally. For a facet with ascending vertex tuple
// (v_0, ..., v_{d-1}), unit normal n_F and orthonormal tangents e_l (both
// fixed by that tuple), and the Dubiner basis r_c in the facet barycentrics of
// (v_0, ..., v_{d-1}):
//   stress:   int_F e_l^T tau n_F r_c ds,  r_c in P^{k-1}(F)
//   velocity: int_F v.n_F r_c ds,          r_c in P^k(F)
// On every cell the mapped reference facet functions of local facet j are
// recombined by a small matrix X_j so that they become dual to these
// functionals. Interior (bubble) functions are used unchanged. Both
// neighbours of a facet therefore produce the same trace.

#include "mcs/bdm_element.hpp"
#include "mcs/mapping.hpp"
#include "mcs/mesh.hpp"
#include "mcs/parallel.hpp"
#include "mcs/reference.hpp"
#include "mcs/scalar_elements.hpp"
#include "mcs/stress_element.hpp"

#include <Eigen/Dense>

#include <array>
#include <stdexcept>
#include <vector>

namespace mcs {

/// Basis values at a list of points, one column per basis function.
/// Stress rows: value entry (r, c) of point p at p*d*d + r*d + c; divergence
/// component i at p*d + i.
struct StressTable {
  Eigen::MatrixXd val;
  Eigen::MatrixXd div;
};

/// Velocity rows: value p*d + i; gradient (i, m) = d_m v_i at p*d*d + i*d + m;
/// divergence at p.
struct VelocityTable {
  Eigen::MatrixXd val;
  Eigen::MatrixXd grad;
  Eigen::MatrixXd div;
};

/// Global numbering. Field-local indices: facet DOFs first (grouped by
/// facet), then interior DOFs grouped by cell. In the assembled system the
/// fields follow each other as [stress | velocity | pressure | multiplier].
struct DofMap {
  int stress_per_facet = 0, stress_per_cell = 0;
  int velocity_per_facet = 0, velocity_per_cell = 0;
  int pressure_per_cell = 0;
  int num_stress_facet = 0, num_stress_interior = 0;
  int num_velocity_facet = 0, num_velocity_interior = 0;
  int num_pressure = 0;

  std::vector<std::vector<int>> stress, velocity, pressure;  // per cell, field-local
  std::vector<int> boundary_velocity;                        // field-local

  [[nodiscard]] int num_stress() const { return num_stress_facet + num_stress_interior; }
  [[nodiscard]] int num_velocity() const { return num_velocity_facet + num_velocity_interior; }
  [[nodiscard]] int stress_offset() const { return 0; }
  [[nodiscard]] int velocity_offset() const { return num_stress(); }
  [[nodiscard]] int pressure_offset() const { return num_stress() + num_velocity(); }
  [[nodiscard]] int multiplier() const { return pressure_offset() + num_pressure; }
  [[nodiscard]] int size() const { return multiplier() + 1; }
};

template <int Dim>
class McsSpace {
 public:
  // the space keeps a reference to the mesh
  McsSpace(Mesh<Dim>&&, int, int = 1) = delete;
  McsSpace(const Mesh<Dim>& mesh, int k, int threads = default_threads())
      : mesh_(&mesh), k_(k), sigma_(k), vel_(k), pres_(k - 1) {
    const int nc = mesh.num_cells(), nf = mesh.num_facets();
    geom_.resize(nc);
    for (int c = 0; c < nc; ++c) geom_[c] = cell_geometry(mesh, c);
    fgeom_.resize(nf);
    for (int f = 0; f < nf; ++f) fgeom_[f] = facet_geometry(mesh, f);
    build_dofmap();
    sx_.resize(nc);
    vx_.resize(nc);
    parallel_for(nc, threads, [&](int c) { build_transforms(c); });
  }

  [[nodiscard]] const Mesh<Dim>& mesh() const { return *mesh_; }
  [[nodiscard]] int order() const { return k_; }
  [[nodiscard]] const StressElement<Dim>& stress_element() const { return sigma_; }
  [[nodiscard]] const BdmElement<Dim>& velocity_element() const { return vel_; }
  [[nodiscard]] const PressureElement<Dim>& pressure_element() const { return pres_; }
  [[nodiscard]] const DofMap& dofs() const { return dofs_; }
  [[nodiscard]] const CellGeometry<Dim>& geometry(int c) const { return geom_[c]; }
  [[nodiscard]] const FacetGeometry<Dim>& facet(int f) const { return fgeom_[f]; }
  [[nodiscard]] const Eigen::MatrixXd& stress_transform(int c, int j) const { return sx_[c][j]; }
  [[nodiscard]] const Eigen::MatrixXd& velocity_transform(int c, int j) const { return vx_[c][j]; }

  // ---- reference tables (native element ordering, no mapping)

  [[nodiscard]] StressTable stress_reference(const std::vector<Point<Dim>>& pts, bool with_div) const {
    const int n = sigma_.size(), np = static_cast<int>(pts.size());
    StressTable t;
    t.val.resize(np * Dim * Dim, n);
    if (with_div) t.div.resize(np * Dim, n);
    std::vector<Mat<Dim>> vals;
    std::vector<Point<Dim>> divs;
    for (int p = 0; p < np; ++p) {
      if (with_div) {
        sigma_.values_div(pts[p], vals, divs);
      } else {
        vals = sigma_.values(pts[p]);
      }
      for (int i = 0; i < n; ++i) {
        for (int r = 0; r < Dim; ++r)
          for (int s = 0; s < Dim; ++s) t.val(p * Dim * Dim + r * Dim + s, i) = vals[i](r, s);
        if (with_div)
          for (int r = 0; r < Dim; ++r) t.div(p * Dim + r, i) = divs[i][r];
      }
    }
    return t;
  }

  [[nodiscard]] VelocityTable velocity_reference(const std::vector<Point<Dim>>& pts, bool with_grad) const {
    const int n = vel_.size(), np = static_cast<int>(pts.size());
    VelocityTable t;
    t.val.resize(np * Dim, n);
    if (with_grad) {
      t.grad.resize(np * Dim * Dim, n);
      t.div.resize(np, n);
    }
    std::vector<Point<Dim>> vals;
    std::vector<Mat<Dim>> grads;
    for (int p = 0; p < np; ++p) {
      if (with_grad) {
        vel_.values_grads(pts[p], vals, grads);
      } else {
        vals = vel_.values(pts[p]);
      }
      for (int i = 0; i < n; ++i) {
        for (int r = 0; r < Dim; ++r) t.val(p * Dim + r, i) = vals[i][r];
        if (with_grad) {
          for (int r = 0; r < Dim; ++r)
            for (int m = 0; m < Dim; ++m) t.grad(p * Dim * Dim + r * Dim + m, i) = grads[i](r, m);
          t.div(p, i) = grads[i].trace();
        }
      }
    }
    return t;
  }

  [[nodiscard]] Eigen::MatrixXd pressure_table(const std::vector<Point<Dim>>& pts) const {
    Eigen::MatrixXd t(pts.size(), pres_.size());
    for (std::size_t p = 0; p < pts.size(); ++p) {
      const auto v = pres_.values(pts[p]);
      for (int i = 0; i < pres_.size(); ++i) t(p, i) = v[i];
    }
    return t;
  }

  // ---- physical tables of the global basis restricted to cell c

  [[nodiscard]] StressTable stress_physical(int c, const StressTable& ref) const {
    StressTable t = map_stress_table(geom_[c], ref);
    apply_transform(t.val, sx_[c], sigma_.dofs_per_facet());
    if (t.div.size()) apply_transform(t.div, sx_[c], sigma_.dofs_per_facet());
    return t;
  }

  [[nodiscard]] VelocityTable velocity_physical(int c, const VelocityTable& ref) const {
    VelocityTable t = map_velocity_table(geom_[c], ref);
    apply_transform(t.val, vx_[c], vel_.dofs_per_facet());
    if (t.grad.size()) {
      apply_transform(t.grad, vx_[c], vel_.dofs_per_facet());
      apply_transform(t.div, vx_[c], vel_.dofs_per_facet());
    }
    return t;
  }

  /// Reference coordinates in cell c of physical points.
  [[nodiscard]] std::vector<Point<Dim>> pullback(int c, const std::vector<Point<Dim>>& xs) const {
    std::vector<Point<Dim>> out;
    out.reserve(xs.size());
    for (const auto& x : xs) out.push_back(geom_[c].pullback(x));
    return out;
  }

  /// Physical points of a facet quadrature rule (facet coordinates s).
  [[nodiscard]] std::vector<Point<Dim>> facet_points(int f, const QuadratureRule<Dim - 1>& q) const {
    std::vector<Point<Dim>> out;
    out.reserve(q.size());
    for (const auto& s : q.points) out.push_back(fgeom_[f].map(s));
    return out;
  }

 private:
  static StressTable map_stress_table(const CellGeometry<Dim>& g, const StressTable& ref) {
    StressTable t;
    const int n = static_cast<int>(ref.val.cols());
    const int np = static_cast<int>(ref.val.rows()) / (Dim * Dim);
    t.val.resize(ref.val.rows(), n);
    const Mat<Dim> A = g.invF.transpose() / g.detF;
    const Mat<Dim> B = g.F.transpose();
    for (int i = 0; i < n; ++i)
      for (int p = 0; p < np; ++p) {
        const Eigen::Map<const Eigen::Matrix<double, Dim, Dim, Eigen::RowMajor>> th(&ref.val(p * Dim * Dim, i));
        Eigen::Map<Eigen::Matrix<double, Dim, Dim, Eigen::RowMajor>> tv(&t.val(p * Dim * Dim, i));
        tv = A * th * B;
      }
    if (ref.div.size()) {
      t.div.resize(ref.div.rows(), n);
      for (int i = 0; i < n; ++i)
        for (int p = 0; p < np; ++p) t.div.col(i).template segment<Dim>(p * Dim) = A * ref.div.col(i).template segment<Dim>(p * Dim);
    }
    return t;
  }

  static VelocityTable map_velocity_table(const CellGeometry<Dim>& g, const VelocityTable& ref) {
    VelocityTable t;
    const int n = static_cast<int>(ref.val.cols());
    const int np = static_cast<int>(ref.val.rows()) / Dim;
    const Mat<Dim> P = g.F / g.detF;
    t.val.resize(ref.val.rows(), n);
    for (int i = 0; i < n; ++i)
      for (int p = 0; p < np; ++p) t.val.col(i).template segment<Dim>(p * Dim) = P * ref.val.col(i).template segment<Dim>(p * Dim);
    if (ref.grad.size()) {
      t.grad.resize(ref.grad.rows(), n);
      for (int i = 0; i < n; ++i)
        for (int p = 0; p < np; ++p) {
          const Eigen::Map<const Eigen::Matrix<double, Dim, Dim, Eigen::RowMajor>> gh(&ref.grad(p * Dim * Dim, i));
          Eigen::Map<Eigen::Matrix<double, Dim, Dim, Eigen::RowMajor>> gv(&t.grad(p * Dim * Dim, i));
          gv = P * gh * g.invF;
        }
      t.div = ref.div / g.detF;
    }
    return t;
  }

  static void apply_transform(Eigen::MatrixXd& m, const std::array<Eigen::MatrixXd, Dim + 1>& X, int per_facet) {
    for (int j = 0; j <= Dim; ++j) {
      const Eigen::MatrixXd block = m.middleCols(j * per_facet, per_facet) * X[j];
      m.middleCols(j * per_facet, per_facet) = block;
    }
  }

  void build_dofmap() {
    const auto& m = *mesh_;
    const int nc = m.num_cells(), nf = m.num_facets();
    DofMap& d = dofs_;
    d.stress_per_facet = sigma_.dofs_per_facet();
    d.stress_per_cell = sigma_.num_bubbles();
    d.velocity_per_facet = vel_.dofs_per_facet();
    d.velocity_per_cell = vel_.num_bubbles();
    d.pressure_per_cell = pres_.size();
    d.num_stress_facet = nf * d.stress_per_facet;
    d.num_stress_interior = nc * d.stress_per_cell;
    d.num_velocity_facet = nf * d.velocity_per_facet;
    d.num_velocity_interior = nc * d.velocity_per_cell;
    d.num_pressure = nc * d.pressure_per_cell;
    d.stress.assign(nc, {});
    d.velocity.assign(nc, {});
    d.pressure.assign(nc, {});
    for (int c = 0; c < nc; ++c) {
      for (int j = 0; j <= Dim; ++j) {
        const int f = m.cell_facet(c, j);
        for (int b = 0; b < d.stress_per_facet; ++b) d.stress[c].push_back(f * d.stress_per_facet + b);
      }
      for (int b = 0; b < d.stress_per_cell; ++b) d.stress[c].push_back(d.num_stress_facet + c * d.stress_per_cell + b);
      for (int j = 0; j <= Dim; ++j) {
        const int f = m.cell_facet(c, j);
        for (int b = 0; b < d.velocity_per_facet; ++b) d.velocity[c].push_back(f * d.velocity_per_facet + b);
      }
      for (int b = 0; b < d.velocity_per_cell; ++b)
        d.velocity[c].push_back(d.num_velocity_facet + c * d.velocity_per_cell + b);
      for (int b = 0; b < d.pressure_per_cell; ++b) d.pressure[c].push_back(c * d.pressure_per_cell + b);
    }
    for (int f = 0; f < nf; ++f)
      if (m.is_boundary(f))
        for (int b = 0; b < d.velocity_per_facet; ++b) d.boundary_velocity.push_back(f * d.velocity_per_facet + b);
  }

  void build_transforms(int c) {
    const auto& g = geom_[c];
    const auto fq = facet_quadrature<Dim>(2 * k_ + 2);
    const int ns = sigma_.dofs_per_facet(), nsp = sigma_.num_facet_polys();
    const int nv = vel_.dofs_per_facet();
    std::vector<double> r;
    for (int j = 0; j <= Dim; ++j) {
      const int f = mesh_->cell_facet(c, j);
      const auto& fg = fgeom_[f];
      const auto ref_pts = pullback(c, facet_points(f, fq));
      const StressTable st = map_stress_table(g, stress_reference(ref_pts, false));
      const VelocityTable vt = map_velocity_table(g, velocity_reference(ref_pts, false));
      Eigen::MatrixXd Ds = Eigen::MatrixXd::Zero(ns, ns), Dv = Eigen::MatrixXd::Zero(nv, nv);
      for (std::size_t p = 0; p < fq.size(); ++p) {
        const double w = fq.weights[p] * fg.measure;
        const Point<Dim - 1>& s = fq.points[p];
        facet_dubiner<Dim>(k_ - 1, s, r);
        for (int a = 0; a < ns; ++a) {
          const int col = j * ns + a;
          const Eigen::Map<const Eigen::Matrix<double, Dim, Dim, Eigen::RowMajor>> tau(&st.val(p * Dim * Dim, col));
          const Point<Dim> tn = tau * fg.normal;
          for (int l = 0; l < Dim - 1; ++l) {
            const double v = w * fg.tangents[l].dot(tn);
            for (int cc = 0; cc < nsp; ++cc) Ds(l * nsp + cc, a) += v * r[cc];
          }
        }
        facet_dubiner<Dim>(k_, s, r);
        for (int a = 0; a < nv; ++a) {
          const double vn = w * vt.val.col(j * nv + a).template segment<Dim>(p * Dim).dot(fg.normal);
          for (int cc = 0; cc < nv; ++cc) Dv(cc, a) += vn * r[cc];
        }
      }
      Eigen::FullPivLU<Eigen::MatrixXd> lus(Ds), luv(Dv);
      if (lus.rank() != ns || luv.rank() != nv)
        throw std::runtime_error("McsSpace: singular facet transform on cell " + std::to_string(c));
      sx_[c][j] = lus.inverse();
      vx_[c][j] = luv.inverse();
    }
  }

  const Mesh<Dim>* mesh_;
  int k_;
  StressElement<Dim> sigma_;
  BdmElement<Dim> vel_;
  PressureElement<Dim> pres_;
  std::vector<CellGeometry<Dim>> geom_;
  std::vector<FacetGeometry<Dim>> fgeom_;
  DofMap dofs_;
  std::vector<std::array<Eigen::MatrixXd, Dim + 1>> sx_, vx_;
};

}  // namespace mcs
