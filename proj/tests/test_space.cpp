#include "mcs/interpolation.hpp"
#include "mcs/space.hpp"
#include "test_helpers.hpp"

#include <gtest/gtest.h>

#include <random>

namespace {

using namespace mcs;

template <int Dim>
Mat<Dim> random_trace_free(std::mt19937& gen) {
  std::uniform_real_distribution<double> U(-1, 1);
  Mat<Dim> A;
  for (int i = 0; i < Dim; ++i)
    for (int j = 0; j < Dim; ++j) A(i, j) = U(gen);
  A.diagonal().array() -= A.trace() / Dim;
  return A;
}

// Random polynomial field sum_alpha x^alpha C_alpha with |alpha| <= deg.
template <int Dim, class Coef>
struct PolyField {
  std::vector<std::pair<std::array<int, Dim>, Coef>> terms;

  template <class Make>
  PolyField(int deg, Make make) {
    std::array<int, Dim> a{};
    while (true) {
      int s = 0;
      for (int v : a) s += v;
      if (s <= deg) terms.push_back({a, make()});
      int i = 0;
      while (i < Dim && ++a[i] > deg) a[i++] = 0;
      if (i == Dim) break;
    }
  }
  Coef operator()(const Point<Dim>& x) const {
    Coef out = terms[0].second * 0.0;
    for (const auto& [a, C] : terms) {
      double m = 1;
      for (int i = 0; i < Dim; ++i) m *= std::pow(x[i], a[i]);
      out += m * C;
    }
    return out;
  }
};

template <int Dim>
Eigen::VectorXd random_vector(int n, unsigned seed) {
  std::mt19937 gen(seed);
  std::uniform_real_distribution<double> U(-1, 1);
  Eigen::VectorXd x(n);
  for (int i = 0; i < n; ++i) x[i] = U(gen);
  return x;
}

template <int Dim>
void check_counts(int n, int k) {
  const auto mesh = build_structured_mesh<Dim>(n);
  const McsSpace<Dim> V(mesh, k);
  const auto& d = V.dofs();
  const StressElement<Dim> se(k);
  const BdmElement<Dim> ve(k);
  EXPECT_EQ(d.num_stress(), mesh.num_facets() * se.dofs_per_facet() + mesh.num_cells() * se.num_bubbles());
  EXPECT_EQ(d.num_velocity(), mesh.num_facets() * ve.dofs_per_facet() + mesh.num_cells() * ve.num_bubbles());
  EXPECT_EQ(d.num_pressure, mesh.num_cells() * poly_dim(Dim, k - 1));
  EXPECT_EQ(static_cast<int>(d.boundary_velocity.size()), mesh.num_boundary_facets() * ve.dofs_per_facet());
  EXPECT_EQ(d.size(), d.num_stress() + d.num_velocity() + d.num_pressure + 1);
  for (int c = 0; c < mesh.num_cells(); ++c) {
    EXPECT_EQ(static_cast<int>(d.stress[c].size()), se.size());
    EXPECT_EQ(static_cast<int>(d.velocity[c].size()), ve.size());
  }
}

TEST(Space, Counts2D) {
  check_counts<2>(3, 1);
  check_counts<2>(2, 3);
}

TEST(Space, Counts3D) { check_counts<3>(2, 2); }

// Both neighbours of every interior facet must see the same tangential part
// of sigma n and the same normal velocity, for arbitrary coefficients.
template <int Dim>
void check_continuity(int k) {
  const auto mesh = testutil::perturbed_mesh<Dim>(3, 0.2);
  const McsSpace<Dim> V(mesh, k);
  const auto& d = V.dofs();
  const Eigen::VectorXd xs = random_vector<Dim>(d.num_stress(), 1);
  const Eigen::VectorXd xv = random_vector<Dim>(d.num_velocity(), 2);
  const auto fq = facet_quadrature<Dim>(2 * k + 1);
  double worst_nt = 0, worst_n = 0, scale = 0;
  for (int f = 0; f < mesh.num_facets(); ++f) {
    if (mesh.is_boundary(f)) continue;
    const auto& fg = V.facet(f);
    const auto pts = V.facet_points(f, fq);
    std::array<Eigen::VectorXd, 2> s, v;
    for (int side = 0; side < 2; ++side) {
      const int c = mesh.facet_cells(f)[side].cell;
      const auto ref = V.pullback(c, pts);
      s[side] = V.stress_physical(c, V.stress_reference(ref, false)).val * gather(xs, d.stress[c]);
      v[side] = V.velocity_physical(c, V.velocity_reference(ref, false)).val * gather(xv, d.velocity[c]);
    }
    for (std::size_t p = 0; p < fq.size(); ++p) {
      Point<Dim> tn[2];
      double vn[2];
      for (int side = 0; side < 2; ++side) {
        const Eigen::Map<const Eigen::Matrix<double, Dim, Dim, Eigen::RowMajor>> S(&s[side][p * Dim * Dim]);
        const Point<Dim> sn = S * fg.normal;
        tn[side] = sn - sn.dot(fg.normal) * fg.normal;
        vn[side] = v[side].template segment<Dim>(p * Dim).dot(fg.normal);
        scale = std::max(scale, sn.norm());
      }
      worst_nt = std::max(worst_nt, (tn[0] - tn[1]).norm());
      worst_n = std::max(worst_n, std::abs(vn[0] - vn[1]));
    }
  }
  EXPECT_GT(scale, 1e-3);
  EXPECT_LT(worst_nt, 1e-10 * scale);
  EXPECT_LT(worst_n, 1e-10 * scale);
}

TEST(Space, NormalTangentialAndNormalContinuity2D) {
  for (int k = 1; k <= 3; ++k) check_continuity<2>(k);
}

TEST(Space, NormalTangentialAndNormalContinuity3D) {
  for (int k = 1; k <= 2; ++k) check_continuity<3>(k);
}

// Interpolation reproduces fields that already lie in the discrete spaces.
template <int Dim>
void check_reproduction(int k) {
  const auto mesh = testutil::perturbed_mesh<Dim>(2, 0.2, 11);
  const McsSpace<Dim> V(mesh, k, 2);
  const auto& d = V.dofs();
  std::mt19937 gen(5);
  std::uniform_real_distribution<double> U(-1, 1);
  const PolyField<Dim, Mat<Dim>> sigma(k - 1, [&] { return random_trace_free<Dim>(gen); });
  const PolyField<Dim, Point<Dim>> u(k, [&] { return Point<Dim>(Point<Dim>::NullaryExpr([&] { return U(gen); })); });
  const Eigen::VectorXd xs = interpolate_stress(V, sigma);
  const Eigen::VectorXd xv = interpolate_velocity(V, u);
  const auto q = simplex_quadrature<Dim>(3);
  double es = 0, ev = 0;
  for (int c = 0; c < mesh.num_cells(); ++c) {
    const Eigen::VectorXd s = V.stress_physical(c, V.stress_reference(q.points, false)).val * gather(xs, d.stress[c]);
    const Eigen::VectorXd v = V.velocity_physical(c, V.velocity_reference(q.points, false)).val * gather(xv, d.velocity[c]);
    for (std::size_t p = 0; p < q.size(); ++p) {
      const Point<Dim> x = V.geometry(c).map(q.points[p]);
      const Eigen::Map<const Eigen::Matrix<double, Dim, Dim, Eigen::RowMajor>> S(&s[p * Dim * Dim]);
      es = std::max(es, (S - sigma(x)).norm());
      ev = std::max(ev, (v.template segment<Dim>(p * Dim) - u(x)).norm());
    }
  }
  EXPECT_LT(es, 1e-10) << "k=" << k;
  EXPECT_LT(ev, 1e-10) << "k=" << k;
}

TEST(Space, InterpolationReproducesDiscreteFields2D) {
  for (int k = 1; k <= 4; ++k) check_reproduction<2>(k);
}

TEST(Space, InterpolationReproducesDiscreteFields3D) {
  for (int k = 1; k <= 3; ++k) check_reproduction<3>(k);
}

// div of the velocity interpolant equals the cellwise L2 projection of div u.
template <int Dim>
void check_commuting_div(int k) {
  const auto mesh = testutil::perturbed_mesh<Dim>(2, 0.2, 3);
  const McsSpace<Dim> V(mesh, k, 2);
  const auto& d = V.dofs();
  const auto u = [](const Point<Dim>& x) {
    Point<Dim> v;
    v[0] = std::sin(2 * x[0] + x[1]);
    v[1] = std::exp(x[0] * x[1]);
    if constexpr (Dim == 3) v[2] = std::cos(x[2] + x[0]);
    return v;
  };
  const auto div_u = [](const Point<Dim>& x) {
    double s = 2 * std::cos(2 * x[0] + x[1]) + x[0] * std::exp(x[0] * x[1]);
    if constexpr (Dim == 3) s -= std::sin(x[2] + x[0]);
    return s;
  };
  const Eigen::VectorXd xv = interpolate_velocity(V, u, 8);
  const auto q = simplex_quadrature<Dim>(2 * k + 8);
  const Eigen::MatrixXd R = V.pressure_table(q.points);
  double worst = 0;
  for (int c = 0; c < mesh.num_cells(); ++c) {
    const auto& g = V.geometry(c);
    const Eigen::VectorXd dv = V.velocity_physical(c, V.velocity_reference(q.points, true)).div * gather(xv, d.velocity[c]);
    // moments against P^{k-1}: (div I u - div u, r) must vanish
    Eigen::VectorXd mom = Eigen::VectorXd::Zero(R.cols());
    for (std::size_t p = 0; p < q.size(); ++p)
      mom += q.weights[p] * g.detF * (dv[p] - div_u(g.map(q.points[p]))) * R.row(p).transpose();
    worst = std::max(worst, mom.cwiseAbs().maxCoeff());
  }
  EXPECT_LT(worst, 1e-11) << "k=" << k;
}

TEST(Space, VelocityInterpolantCommutesWithDivergence) {
  for (int k = 1; k <= 3; ++k) check_commuting_div<2>(k);
  for (int k = 1; k <= 2; ++k) check_commuting_div<3>(k);
}

TEST(Space, PressureProjectionHasZeroMean) {
  const auto mesh = testutil::perturbed_mesh<2>(3, 0.2);
  const McsSpace<2> V(mesh, 2);
  const Eigen::VectorXd xp = project_pressure(V, [](const Point<2>& x) { return std::exp(x[0]) + x[1]; });
  const auto q = simplex_quadrature<2>(4);
  const Eigen::MatrixXd R = V.pressure_table(q.points);
  double mean = 0;
  for (int c = 0; c < mesh.num_cells(); ++c) {
    const Eigen::VectorXd v = R * xp.segment(c * R.cols(), R.cols());
    for (std::size_t p = 0; p < q.size(); ++p) mean += q.weights[p] * V.geometry(c).detF * v[p];
  }
  EXPECT_NEAR(mean, 0.0, 1e-13);
}

TEST(Space, RejectsOrderZero) {
  const auto mesh = build_structured_mesh<2>(1);
  EXPECT_THROW(McsSpace<2>(mesh, 0), std::invalid_argument);
}

}  // namespace
