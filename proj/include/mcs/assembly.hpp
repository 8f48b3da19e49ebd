#pragma once

// Bilinear forms of the MCS Stokes discretization, the bordered saddle-point
// system, finite element functions and the discrete norms.
//
//   a(sigma, tau) = (nu^-1 dev sigma, dev tau)
//   b1(v, q)      = (div v, q)
//   b2(tau, v)    = sum_T (div tau, v)_T - sum_F ([tau_nn], v_n)_F        (divergence form)
//                 = -sum_T (tau, grad v)_T + sum_F (tau_nt, [v_t])_F      (gradient form)
//
// Facet jumps are taken with the global facet normal n_F: [w] = sum over the
// adjacent cells of s_T w_T, where s_T = +1 if n_F points out of T. On
// boundary facets the jump is the one-sided trace.

#include "mcs/interpolation.hpp"
#include "mcs/linsolve.hpp"
#include "mcs/parallel.hpp"
#include "mcs/space.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace mcs {

enum class B2Form { Divergence, Gradient };

namespace detail {

// Runs fn(i, triplets) for i in [0, n) in parallel chunks and concatenates
// the per-item triplets in index order (independent of the thread count).
template <class Fn>
std::vector<Triplet> collect_triplets(int n, int threads, Fn&& fn, int chunk = 256) {
  std::vector<Triplet> all;
  std::vector<std::vector<Triplet>> local;
  for (int start = 0; start < n; start += chunk) {
    const int m = std::min(chunk, n - start);
    local.assign(m, {});
    parallel_for(m, threads, [&](int i) { fn(start + i, local[i]); });
    for (auto& l : local) all.insert(all.end(), l.begin(), l.end());
  }
  return all;
}

template <class Rows, class Cols>
void add_block(std::vector<Triplet>& out, const Rows& rows, const Cols& cols, const Eigen::MatrixXd& M) {
  for (Eigen::Index j = 0; j < M.cols(); ++j)
    for (Eigen::Index i = 0; i < M.rows(); ++i) out.emplace_back(rows[i], cols[j], M(i, j));
}

template <int Dim>
Eigen::MatrixXd deviator(const Eigen::MatrixXd& val) {
  Eigen::MatrixXd out = val;
  const Eigen::Index np = val.rows() / (Dim * Dim);
  for (Eigen::Index p = 0; p < np; ++p) {
    Eigen::RowVectorXd tr = Eigen::RowVectorXd::Zero(val.cols());
    for (int r = 0; r < Dim; ++r) tr += val.row(p * Dim * Dim + r * Dim + r);
    for (int r = 0; r < Dim; ++r) out.row(p * Dim * Dim + r * Dim + r) -= tr / Dim;
  }
  return out;
}

// Quadrature weights times |det F| repeated `rep` times per point.
inline Eigen::VectorXd weights(const std::vector<double>& w, double detF, int rep) {
  Eigen::VectorXd out(w.size() * rep);
  for (std::size_t p = 0; p < w.size(); ++p) out.segment(p * rep, rep).setConstant(w[p] * detF);
  return out;
}

inline std::vector<int> range(int begin, int count) {
  std::vector<int> r(count);
  for (int i = 0; i < count; ++i) r[i] = begin + i;
  return r;
}

template <int Dim>
Point<Dim> tangential(const Point<Dim>& v, const Point<Dim>& n) {
  return v - v.dot(n) * n;
}

}  // namespace detail

/// Reference basis tables of all three elements at one volume rule.
template <int Dim>
struct ReferenceTables {
  QuadratureRule<Dim> rule;
  StressTable stress;
  VelocityTable velocity;
  Eigen::MatrixXd pressure;

  ReferenceTables(const McsSpace<Dim>& V, int degree)
      : rule(simplex_quadrature<Dim>(degree)),
        stress(V.stress_reference(rule.points, true)),
        velocity(V.velocity_reference(rule.points, true)),
        pressure(V.pressure_table(rule.points)) {}
};

template <int Dim>
int volume_degree(const McsSpace<Dim>& V) {
  return 2 * V.order() + 2;
}

template <int Dim>
int facet_degree(const McsSpace<Dim>& V) {
  return 2 * V.order() + 1;
}

/// a(sigma, tau) on the stress DOFs (field-local indices).
template <int Dim>
SparseMatrix assemble_a(const McsSpace<Dim>& V, double nu, int threads = default_threads()) {
  if (!(nu > 0)) throw std::invalid_argument("assemble_a: viscosity must be positive");
  const ReferenceTables<Dim> ref(V, volume_degree(V));
  const auto& d = V.dofs();
  auto t = detail::collect_triplets(V.mesh().num_cells(), threads, [&](int c, std::vector<Triplet>& out) {
    const Eigen::MatrixXd S = detail::deviator<Dim>(V.stress_physical(c, ref.stress).val);
    const Eigen::VectorXd w = detail::weights(ref.rule.weights, V.geometry(c).detF, Dim * Dim);
    detail::add_block(out, d.stress[c], d.stress[c], (S.transpose() * w.asDiagonal() * S) / nu);
  });
  return compile(d.num_stress(), d.num_stress(), t);
}

/// b1(v, q): rows pressure, columns velocity.
template <int Dim>
SparseMatrix assemble_b1(const McsSpace<Dim>& V, int threads = default_threads()) {
  const ReferenceTables<Dim> ref(V, volume_degree(V));
  const auto& d = V.dofs();
  auto t = detail::collect_triplets(V.mesh().num_cells(), threads, [&](int c, std::vector<Triplet>& out) {
    const Eigen::MatrixXd div = V.velocity_physical(c, ref.velocity).div;
    const Eigen::VectorXd w = detail::weights(ref.rule.weights, V.geometry(c).detF, 1);
    detail::add_block(out, d.pressure[c], d.velocity[c], ref.pressure.transpose() * w.asDiagonal() * div);
  });
  return compile(d.num_pressure, d.num_velocity(), t);
}

/// b2(tau, v): rows velocity, columns stress, in either representation.
template <int Dim>
SparseMatrix assemble_b2(const McsSpace<Dim>& V, B2Form form = B2Form::Gradient, int threads = default_threads()) {
  const ReferenceTables<Dim> ref(V, volume_degree(V));
  const auto& m = V.mesh();
  const auto& d = V.dofs();
  auto t = detail::collect_triplets(m.num_cells(), threads, [&](int c, std::vector<Triplet>& out) {
    const double J = V.geometry(c).detF;
    if (form == B2Form::Gradient) {
      const Eigen::MatrixXd S = V.stress_physical(c, ref.stress).val;
      const Eigen::MatrixXd G = V.velocity_physical(c, ref.velocity).grad;
      const Eigen::VectorXd w = detail::weights(ref.rule.weights, J, Dim * Dim);
      detail::add_block(out, d.velocity[c], d.stress[c], -(G.transpose() * w.asDiagonal() * S));
    } else {
      const Eigen::MatrixXd Sdiv = V.stress_physical(c, ref.stress).div;
      const Eigen::MatrixXd Vv = V.velocity_physical(c, ref.velocity).val;
      const Eigen::VectorXd w = detail::weights(ref.rule.weights, J, Dim);
      detail::add_block(out, d.velocity[c], d.stress[c], Vv.transpose() * w.asDiagonal() * Sdiv);
    }
  });

  const auto fq = facet_quadrature<Dim>(facet_degree(V));
  const int ns = d.stress_per_facet, nvf = d.velocity_per_facet;
  auto tf = detail::collect_triplets(m.num_facets(), threads, [&](int f, std::vector<Triplet>& out) {
    const auto& fg = V.facet(f);
    const auto pts = V.facet_points(f, fq);
    const auto& sides = m.facet_cells(f);
    const int master = sides[0].cell, jm = sides[0].local_facet;
    if (form == B2Form::Gradient) {
      // only the stress functions of this facet have a nonzero nt-trace here
      const Eigen::MatrixXd S =
          V.stress_physical(master, V.stress_reference(V.pullback(master, pts), false)).val.middleCols(jm * ns, ns);
      const std::vector<int> cols = detail::range(f * ns, ns);
      for (const auto& side : sides) {
        const int c = side.cell;
        const double sign = m.outward_sign(c, side.local_facet);
        const Eigen::MatrixXd Vv = V.velocity_physical(c, V.velocity_reference(V.pullback(c, pts), false)).val;
        Eigen::MatrixXd M = Eigen::MatrixXd::Zero(Vv.cols(), ns);
        for (std::size_t p = 0; p < fq.size(); ++p) {
          Eigen::Matrix<double, Dim, Eigen::Dynamic> tnt(Dim, ns);
          for (int a = 0; a < ns; ++a) {
            const Eigen::Map<const Eigen::Matrix<double, Dim, Dim, Eigen::RowMajor>> tau(&S(p * Dim * Dim, a));
            tnt.col(a) = detail::tangential<Dim>(tau * fg.normal, fg.normal);
          }
          M += (sign * fq.weights[p] * fg.measure) * Vv.middleRows(p * Dim, Dim).transpose() * tnt;
        }
        detail::add_block(out, d.velocity[c], cols, M);
      }
    } else {
      // only the velocity functions of this facet have a nonzero normal trace
      const Eigen::MatrixXd Vv =
          V.velocity_physical(master, V.velocity_reference(V.pullback(master, pts), false)).val.middleCols(jm * nvf, nvf);
      const std::vector<int> rows = detail::range(f * nvf, nvf);
      for (const auto& side : sides) {
        const int c = side.cell;
        const double sign = m.outward_sign(c, side.local_facet);
        const Eigen::MatrixXd S = V.stress_physical(c, V.stress_reference(V.pullback(c, pts), false)).val;
        Eigen::MatrixXd M = Eigen::MatrixXd::Zero(nvf, S.cols());
        for (std::size_t p = 0; p < fq.size(); ++p) {
          Eigen::RowVectorXd tnn(S.cols());
          for (Eigen::Index a = 0; a < S.cols(); ++a) {
            const Eigen::Map<const Eigen::Matrix<double, Dim, Dim, Eigen::RowMajor>> tau(&S(p * Dim * Dim, a));
            tnn[a] = fg.normal.dot(tau * fg.normal);
          }
          const Eigen::VectorXd vn = Vv.middleRows(p * Dim, Dim).transpose() * fg.normal;
          M -= (sign * fq.weights[p] * fg.measure) * vn * tnn;
        }
        detail::add_block(out, rows, d.stress[c], M);
      }
    }
  });
  t.insert(t.end(), tf.begin(), tf.end());
  return compile(d.num_velocity(), d.num_stress(), t);
}

/// (f, v) for all velocity basis functions.
template <int Dim, class Load>
Eigen::VectorXd assemble_load(const McsSpace<Dim>& V, Load f, int degree, int threads = default_threads()) {
  const auto q = simplex_quadrature<Dim>(degree);
  const VelocityTable ref = V.velocity_reference(q.points, false);
  const auto& d = V.dofs();
  const int nc = V.mesh().num_cells();
  std::vector<Eigen::VectorXd> local(nc);
  parallel_for(nc, threads, [&](int c) {
    const auto& g = V.geometry(c);
    Eigen::VectorXd fv(q.size() * Dim);
    for (std::size_t p = 0; p < q.size(); ++p)
      fv.segment<Dim>(p * Dim) = q.weights[p] * g.detF * Point<Dim>(f(g.map(q.points[p])));
    local[c] = V.velocity_physical(c, ref).val.transpose() * fv;
  });
  Eigen::VectorXd F = Eigen::VectorXd::Zero(d.num_velocity());
  for (int c = 0; c < nc; ++c)
    for (std::size_t i = 0; i < d.velocity[c].size(); ++i) F[d.velocity[c][i]] += local[c][i];
  return F;
}

/// Integrals of the pressure basis functions (multiplier column).
template <int Dim>
Eigen::VectorXd pressure_mean_vector(const McsSpace<Dim>& V) {
  const auto q = simplex_quadrature<Dim>(volume_degree(V));
  const Eigen::MatrixXd R = V.pressure_table(q.points);
  const Eigen::Map<const Eigen::VectorXd> w(q.weights.data(), q.size());
  const Eigen::VectorXd ref = R.transpose() * w;
  // Modes i >= 1 are orthogonal to the constant. Their quadrature means are
  // roundoff; storing them would tie the multiplier to every cell interior
  // and make the condensed matrix dense, so they become structural zeros.
  for (int i = 1; i < ref.size(); ++i)
    if (std::abs(ref[i]) > 1e-12 * std::abs(ref[0]))
      throw std::logic_error("pressure_mean_vector: pressure mode " + std::to_string(i) + " has nonzero mean");
  const auto& d = V.dofs();
  Eigen::VectorXd m = Eigen::VectorXd::Zero(d.num_pressure);
  for (int c = 0; c < V.mesh().num_cells(); ++c) m[d.pressure[c][0]] = V.geometry(c).detF * ref[0];
  return m;
}

/// Bordered saddle-point system in the ordering [stress | velocity |
/// pressure | multiplier]. Boundary normal velocity DOFs are eliminated
/// symmetrically (identity rows/columns, zero right-hand side).
template <int Dim>
struct SaddleSystem {
  const McsSpace<Dim>* space = nullptr;
  SparseMatrix matrix;
  Eigen::VectorXd rhs;
  std::vector<char> constrained;  // per system index
};

template <int Dim>
SparseMatrix assemble_saddle_matrix(const McsSpace<Dim>& V, double nu, B2Form form, int threads,
                                    std::vector<char>* constrained_out = nullptr) {
  const auto& d = V.dofs();
  const int oV = d.velocity_offset(), oP = d.pressure_offset(), lam = d.multiplier(), n = d.size();
  std::vector<char> constrained(n, 0);
  for (int i : d.boundary_velocity) constrained[oV + i] = 1;

  std::vector<Triplet> t;
  auto append = [&](const SparseMatrix& B, int ro, int co, bool transpose) {
    for (int k = 0; k < B.outerSize(); ++k)
      for (SparseMatrix::InnerIterator it(B, k); it; ++it) {
        const int r = ro + static_cast<int>(transpose ? it.col() : it.row());
        const int c = co + static_cast<int>(transpose ? it.row() : it.col());
        if (!constrained[r] && !constrained[c]) t.emplace_back(r, c, it.value());
      }
  };
  {
    const SparseMatrix A = assemble_a(V, nu, threads);
    t.reserve(A.nonZeros() * 3);
    append(A, 0, 0, false);
  }
  {
    const SparseMatrix B2 = assemble_b2(V, form, threads);
    append(B2, oV, 0, false);
    append(B2, 0, oV, true);
  }
  {
    const SparseMatrix B1 = assemble_b1(V, threads);
    append(B1, oP, oV, false);
    append(B1, oV, oP, true);
  }
  const Eigen::VectorXd mv = pressure_mean_vector(V);
  for (int i = 0; i < d.num_pressure; ++i) {
    if (mv[i] == 0) continue;
    t.emplace_back(oP + i, lam, mv[i]);
    t.emplace_back(lam, oP + i, mv[i]);
  }
  for (int i = 0; i < n; ++i)
    if (constrained[i]) t.emplace_back(i, i, 1.0);
  if (constrained_out) *constrained_out = std::move(constrained);
  return compile(n, n, t);
}

/// Full MCS system for viscosity nu and load f; `load_degree` is the
/// quadrature degree of (f, v).
template <int Dim, class Load>
SaddleSystem<Dim> assemble_system(const McsSpace<Dim>& V, double nu, Load f, int load_degree,
                                  B2Form form = B2Form::Gradient, int threads = default_threads()) {
  if (!(nu > 0)) throw std::invalid_argument("assemble_system: viscosity must be positive");
  SaddleSystem<Dim> sys;
  sys.space = &V;
  sys.matrix = assemble_saddle_matrix(V, nu, form, threads, &sys.constrained);
  const auto& d = V.dofs();
  sys.rhs = Eigen::VectorXd::Zero(d.size());
  sys.rhs.segment(d.velocity_offset(), d.num_velocity()) =
      -assemble_load(V, f, std::max(load_degree, volume_degree(V)), threads);
  for (int i = 0; i < d.size(); ++i)
    if (sys.constrained[i]) sys.rhs[i] = 0;
  return sys;
}

// ---------------------------------------------------------------- functions

enum class Field { Stress, Velocity, Pressure };

/// Coefficients of a stress, velocity or pressure field in the global basis.
template <int Dim>
struct FeFunction {
  Field field = Field::Velocity;
  const McsSpace<Dim>* space = nullptr;
  Eigen::VectorXd coef;

  FeFunction() = default;
  FeFunction(Field fld, const McsSpace<Dim>& V, Eigen::VectorXd c) : field(fld), space(&V), coef(std::move(c)) {
    const auto& d = V.dofs();
    const Eigen::Index expect = fld == Field::Stress ? d.num_stress() : fld == Field::Velocity ? d.num_velocity() : d.num_pressure;
    if (coef.size() != expect) throw std::invalid_argument("FeFunction: coefficient length does not match the DOF map");
  }

  [[nodiscard]] const std::vector<int>& cell_dofs(int c) const {
    const auto& d = space->dofs();
    return field == Field::Stress ? d.stress[c] : field == Field::Velocity ? d.velocity[c] : d.pressure[c];
  }

  /// Values at reference points of cell c: stress rows p*d*d + r*d + s,
  /// velocity rows p*d + i, pressure rows p.
  [[nodiscard]] Eigen::VectorXd values(int c, const std::vector<Point<Dim>>& ref) const {
    const Eigen::VectorXd loc = gather(coef, cell_dofs(c));
    switch (field) {
      case Field::Stress:
        return space->stress_physical(c, space->stress_reference(ref, false)).val * loc;
      case Field::Velocity:
        return space->velocity_physical(c, space->velocity_reference(ref, false)).val * loc;
      default:
        return space->pressure_table(ref) * loc;
    }
  }

  /// Velocity gradients (rows p*d*d + i*d + m = d_m u_i) and divergences.
  void gradients(int c, const std::vector<Point<Dim>>& ref, Eigen::VectorXd& grad, Eigen::VectorXd& div) const {
    if (field != Field::Velocity) throw std::logic_error("FeFunction: gradients need a velocity field");
    const Eigen::VectorXd loc = gather(coef, cell_dofs(c));
    const VelocityTable t = space->velocity_physical(c, space->velocity_reference(ref, true));
    grad = t.grad * loc;
    div = t.div * loc;
  }
};

template <int Dim>
struct McsSolution {
  FeFunction<Dim> sigma, u, p;
  double multiplier = 0;
};

template <int Dim>
McsSolution<Dim> split_solution(const McsSpace<Dim>& V, const Eigen::VectorXd& x) {
  const auto& d = V.dofs();
  if (x.size() != d.size()) throw std::invalid_argument("split_solution: size mismatch");
  McsSolution<Dim> s;
  s.sigma = FeFunction<Dim>(Field::Stress, V, x.segment(0, d.num_stress()));
  s.u = FeFunction<Dim>(Field::Velocity, V, x.segment(d.velocity_offset(), d.num_velocity()));
  s.p = FeFunction<Dim>(Field::Pressure, V, x.segment(d.pressure_offset(), d.num_pressure));
  s.multiplier = x[d.multiplier()];
  return s;
}

// ---------------------------------------------------------------- norms

/// L2 norm (stress: Frobenius, pressure: absolute value).
template <int Dim>
double l2_norm(const FeFunction<Dim>& fn) {
  const auto& V = *fn.space;
  const auto q = simplex_quadrature<Dim>(volume_degree(V));
  const int rep = fn.field == Field::Stress ? Dim * Dim : fn.field == Field::Velocity ? Dim : 1;
  double s = 0;
  for (int c = 0; c < V.mesh().num_cells(); ++c) {
    const Eigen::VectorXd v = fn.values(c, q.points);
    s += detail::weights(q.weights, V.geometry(c).detF, rep).dot(v.cwiseAbs2());
  }
  return std::sqrt(s);
}

template <int Dim>
double discrete_norm_Sigma(const FeFunction<Dim>& tau) {
  if (tau.field != Field::Stress) throw std::invalid_argument("discrete_norm_Sigma: not a stress field");
  return l2_norm(tau);
}

template <int Dim>
double discrete_norm_Q(const FeFunction<Dim>& q) {
  if (q.field != Field::Pressure) throw std::invalid_argument("discrete_norm_Q: not a pressure field");
  return l2_norm(q);
}

/// Broken H1 seminorm plus h_F^-1 weighted tangential jumps (one-sided on
/// the boundary).
template <int Dim>
double discrete_norm_V(const FeFunction<Dim>& v) {
  if (v.field != Field::Velocity) throw std::invalid_argument("discrete_norm_V: not a velocity field");
  const auto& V = *v.space;
  const auto& m = V.mesh();
  const auto q = simplex_quadrature<Dim>(volume_degree(V));
  double s = 0;
  for (int c = 0; c < m.num_cells(); ++c) {
    Eigen::VectorXd g, div;
    v.gradients(c, q.points, g, div);
    s += detail::weights(q.weights, V.geometry(c).detF, Dim * Dim).dot(g.cwiseAbs2());
  }
  const auto fq = facet_quadrature<Dim>(2 * V.order() + 2);
  for (int f = 0; f < m.num_facets(); ++f) {
    const auto& fg = V.facet(f);
    const auto pts = V.facet_points(f, fq);
    Eigen::VectorXd jump = Eigen::VectorXd::Zero(fq.size() * Dim);
    for (const auto& side : m.facet_cells(f))
      jump += m.outward_sign(side.cell, side.local_facet) * v.values(side.cell, V.pullback(side.cell, pts));
    for (std::size_t p = 0; p < fq.size(); ++p) {
      const Point<Dim> jt = detail::tangential<Dim>(jump.segment<Dim>(p * Dim), fg.normal);
      s += fq.weights[p] * fg.measure / fg.diam * jt.squaredNorm();
    }
  }
  return std::sqrt(s);
}

/// max |div u_h| over the points of a degree-2k rule on every cell.
template <int Dim>
double divergence_residual(const FeFunction<Dim>& u) {
  const auto& V = *u.space;
  const auto q = simplex_quadrature<Dim>(2 * V.order());
  double worst = 0;
  for (int c = 0; c < V.mesh().num_cells(); ++c) {
    Eigen::VectorXd g, div;
    u.gradients(c, q.points, g, div);
    worst = std::max(worst, div.cwiseAbs().maxCoeff());
  }
  return worst;
}

// ---------------------------------------------------------------- consistency

/// Exact fields that may depend on the cell (to represent discontinuous
/// perturbations); f is the load.
template <int Dim>
struct ExactFields {
  std::function<Mat<Dim>(int, const Point<Dim>&)> sigma;
  std::function<Point<Dim>(int, const Point<Dim>&)> u;
  std::function<Mat<Dim>(int, const Point<Dim>&)> grad_u;
  std::function<double(int, const Point<Dim>&)> p;
  std::function<Point<Dim>(const Point<Dim>&)> f;
};

/// Residual of the discrete equations with the exact fields inserted, one
/// entry per system row (multiplier row and eliminated rows set to zero):
///   stress rows:   a(sigma, tau_h) + b2(tau_h, u)
///   velocity rows: b2(sigma, v_h) + b1(v_h, p) + (f, v_h)
///   pressure rows: b1(u, q_h)
/// b2 uses the gradient form, so u and sigma enter through volume integrals
/// and tangential facet traces.
template <int Dim>
Eigen::VectorXd consistency_residual_vector(const McsSpace<Dim>& V, double nu, const ExactFields<Dim>& ex,
                                            int degree, int threads = default_threads()) {
  const auto& m = V.mesh();
  const auto& d = V.dofs();
  const int nc = m.num_cells();
  const auto q = simplex_quadrature<Dim>(std::max(degree, volume_degree(V)));
  const StressTable sref = V.stress_reference(q.points, false);
  const VelocityTable vref = V.velocity_reference(q.points, true);
  const Eigen::MatrixXd pref = V.pressure_table(q.points);
  struct Local {
    Eigen::VectorXd s, v, p;
  };
  std::vector<Local> cell(nc);
  parallel_for(nc, threads, [&](int c) {
    const auto& g = V.geometry(c);
    const int nq = static_cast<int>(q.size());
    Eigen::VectorXd sig(nq * Dim * Dim), sfull(nq * Dim * Dim), gu(nq * Dim * Dim), fv(nq * Dim), pv(nq), divu(nq);
    for (int p = 0; p < nq; ++p) {
      const Point<Dim> x = g.map(q.points[p]);
      const Mat<Dim> s = ex.sigma(c, x), G = ex.grad_u(c, x);
      const Mat<Dim> ds = s - s.trace() / Dim * Mat<Dim>::Identity();
      for (int r = 0; r < Dim; ++r)
        for (int t = 0; t < Dim; ++t) {
          sig[p * Dim * Dim + r * Dim + t] = ds(r, t);
          sfull[p * Dim * Dim + r * Dim + t] = s(r, t);
          gu[p * Dim * Dim + r * Dim + t] = G(r, t);
        }
      fv.segment<Dim>(p * Dim) = ex.f(x);
      pv[p] = ex.p(c, x);
      divu[p] = G.trace();
    }
    const Eigen::VectorXd w2 = detail::weights(q.weights, g.detF, Dim * Dim);
    const Eigen::VectorXd w1 = detail::weights(q.weights, g.detF, Dim);
    const Eigen::VectorXd w0 = detail::weights(q.weights, g.detF, 1);
    const Eigen::MatrixXd S = V.stress_physical(c, sref).val;
    const VelocityTable vt = V.velocity_physical(c, vref);
    cell[c].s = detail::deviator<Dim>(S).transpose() * w2.asDiagonal() * (sig / nu) - S.transpose() * w2.asDiagonal() * gu;
    cell[c].v = -vt.grad.transpose() * w2.asDiagonal() * sfull + vt.div.transpose() * w0.asDiagonal() * pv +
                vt.val.transpose() * w1.asDiagonal() * fv;
    cell[c].p = pref.transpose() * w0.asDiagonal() * divu;
  });

  Eigen::VectorXd r = Eigen::VectorXd::Zero(d.size());
  for (int c = 0; c < nc; ++c) {
    for (std::size_t i = 0; i < d.stress[c].size(); ++i) r[d.stress[c][i]] += cell[c].s[i];
    for (std::size_t i = 0; i < d.velocity[c].size(); ++i) r[d.velocity_offset() + d.velocity[c][i]] += cell[c].v[i];
    for (std::size_t i = 0; i < d.pressure[c].size(); ++i) r[d.pressure_offset() + d.pressure[c][i]] += cell[c].p[i];
  }

  const auto fq = facet_quadrature<Dim>(std::max(degree, facet_degree(V)));
  const int ns = d.stress_per_facet;
  for (int f = 0; f < m.num_facets(); ++f) {
    const auto& fg = V.facet(f);
    const auto pts = V.facet_points(f, fq);
    const auto& sides = m.facet_cells(f);
    const int master = sides[0].cell, jm = sides[0].local_facet;
    const Eigen::MatrixXd S =
        V.stress_physical(master, V.stress_reference(V.pullback(master, pts), false)).val.middleCols(jm * ns, ns);
    for (std::size_t p = 0; p < fq.size(); ++p) {
      const double w = fq.weights[p] * fg.measure;
      Point<Dim> ujump = Point<Dim>::Zero();
      for (const auto& side : sides) ujump += m.outward_sign(side.cell, side.local_facet) * ex.u(side.cell, pts[p]);
      ujump = detail::tangential<Dim>(ujump, fg.normal);
      for (int a = 0; a < ns; ++a) {
        const Eigen::Map<const Eigen::Matrix<double, Dim, Dim, Eigen::RowMajor>> tau(&S(p * Dim * Dim, a));
        r[f * ns + a] += w * (tau * fg.normal).dot(ujump);
      }
    }
    for (const auto& side : sides) {
      const int c = side.cell;
      const double sign = m.outward_sign(c, side.local_facet);
      const Eigen::MatrixXd Vv = V.velocity_physical(c, V.velocity_reference(V.pullback(c, pts), false)).val;
      for (std::size_t p = 0; p < fq.size(); ++p) {
        const Point<Dim> snt = detail::tangential<Dim>(ex.sigma(master, pts[p]) * fg.normal, fg.normal);
        const Eigen::VectorXd contrib = (sign * fq.weights[p] * fg.measure) * Vv.middleRows(p * Dim, Dim).transpose() * snt;
        for (std::size_t i = 0; i < d.velocity[c].size(); ++i) r[d.velocity_offset() + d.velocity[c][i]] += contrib[i];
      }
    }
  }
  for (int i : d.boundary_velocity) r[d.velocity_offset() + i] = 0;
  r[d.multiplier()] = 0;
  return r;
}

template <int Dim>
double consistency_residual(const McsSpace<Dim>& V, double nu, const ExactFields<Dim>& ex, int degree,
                            int threads = default_threads()) {
  return consistency_residual_vector(V, nu, ex, degree, threads).cwiseAbs().maxCoeff();
}

}  // namespace mcs
