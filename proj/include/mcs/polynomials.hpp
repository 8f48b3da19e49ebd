#pragma once

// Scalar polynomial families on [-1,1] and on simplices: Legendre, Jacobi
// with beta = 0, their homogeneous ("scaled") versions and Dubiner bases
// written in barycentric coordinates.
//
// Every evaluator is a template over the scalar type so that the same code
// produces values (T = double) or values plus first derivatives
// (T = Dual<N>).

#include <algorithm>
#include <array>
#include <cstddef>
#include <vector>

namespace mcs {

/// Forward-mode dual number carrying a value and N partial derivatives.
template <int N>
struct Dual {
  double v = 0.0;
  std::array<double, N> d{};

  constexpr Dual() = default;
  constexpr Dual(double value) : v(value) {}  // NOLINT: implicit on purpose
  constexpr Dual(double value, const std::array<double, N>& deriv) : v(value), d(deriv) {}

  static constexpr Dual variable(double value, int direction) {
    Dual r(value);
    r.d[direction] = 1.0;
    return r;
  }

  constexpr Dual& operator+=(const Dual& o) {
    v += o.v;
    for (int i = 0; i < N; ++i) d[i] += o.d[i];
    return *this;
  }
  constexpr Dual& operator-=(const Dual& o) {
    v -= o.v;
    for (int i = 0; i < N; ++i) d[i] -= o.d[i];
    return *this;
  }
  constexpr Dual& operator*=(const Dual& o) {
    for (int i = 0; i < N; ++i) d[i] = d[i] * o.v + v * o.d[i];
    v *= o.v;
    return *this;
  }
  constexpr Dual& operator*=(double s) {
    v *= s;
    for (int i = 0; i < N; ++i) d[i] *= s;
    return *this;
  }
  constexpr Dual& operator/=(double s) { return *this *= (1.0 / s); }
};

template <int N>
constexpr Dual<N> operator+(Dual<N> a, const Dual<N>& b) { return a += b; }
template <int N>
constexpr Dual<N> operator-(Dual<N> a, const Dual<N>& b) { return a -= b; }
template <int N>
constexpr Dual<N> operator*(Dual<N> a, const Dual<N>& b) { return a *= b; }
template <int N>
constexpr Dual<N> operator*(Dual<N> a, double s) { return a *= s; }
template <int N>
constexpr Dual<N> operator*(double s, Dual<N> a) { return a *= s; }
template <int N>
constexpr Dual<N> operator/(Dual<N> a, double s) { return a /= s; }
template <int N>
constexpr Dual<N> operator+(Dual<N> a, double s) { a.v += s; return a; }
template <int N>
constexpr Dual<N> operator+(double s, Dual<N> a) { a.v += s; return a; }
template <int N>
constexpr Dual<N> operator-(Dual<N> a, double s) { a.v -= s; return a; }
template <int N>
constexpr Dual<N> operator-(double s, const Dual<N>& a) { return Dual<N>(s) - a; }
template <int N>
constexpr Dual<N> operator-(Dual<N> a) { return a *= -1.0; }

inline double value_of(double x) { return x; }
template <int N>
double value_of(const Dual<N>& x) { return x.v; }

/// Number of polynomials of total degree <= k in `dim` variables.
constexpr int poly_dim(int dim, int k) {
  if (k < 0) return 0;
  int num = 1, den = 1;
  for (int i = 1; i <= dim; ++i) {
    num *= k + i;
    den *= i;
  }
  return num / den;
}

// ---------------------------------------------------------------------------
// Legendre

/// Legendre polynomials l_0..l_n at x, written to out[0..n].
template <class T>
void legendre_all(int n, const T& x, T* out) {
  out[0] = T(1.0);
  if (n >= 1) out[1] = x;
  for (int m = 1; m < n; ++m)
    out[m + 1] = ((2.0 * m + 1.0) * x * out[m] - double(m) * out[m - 1]) / double(m + 1);
}

template <class T>
T legendre(int i, const T& x) {
  std::vector<T> buf(i + 1);
  legendre_all(i, x, buf.data());
  return buf[i];
}

/// Homogeneous Legendre polynomials y^i l_i(x/y), i = 0..n; polynomial in
/// (x, y), so y = 0 is allowed.
template <class T>
void scaled_legendre_all(int n, const T& x, const T& y, T* out) {
  out[0] = T(1.0);
  if (n >= 1) out[1] = x;
  if (n < 2) return;
  const T y2 = y * y;
  for (int m = 1; m < n; ++m)
    out[m + 1] = ((2.0 * m + 1.0) * x * out[m] - double(m) * y2 * out[m - 1]) / double(m + 1);
}

template <class T>
T scaled_legendre(int i, const T& x, const T& y) {
  std::vector<T> buf(i + 1);
  scaled_legendre_all(i, x, y, buf.data());
  return buf[i];
}

// ---------------------------------------------------------------------------
// Jacobi, weight (1-x)^alpha (1+x)^0, normalized by P_n(1) = binom(n+alpha, n)

/// Homogeneous Jacobi polynomials y^i P_i^{(alpha,0)}(x/y), i = 0..n.
template <class T>
void scaled_jacobi_all(int n, int alpha, const T& x, const T& y, T* out) {
  const double a = alpha;
  out[0] = T(1.0);
  if (n >= 1) out[1] = ((a + 2.0) * x + a * y) / 2.0;
  if (n < 2) return;
  const T y2 = y * y;
  for (int m = 2; m <= n; ++m) {
    const double s = 2.0 * m + a;
    const double c1 = 2.0 * m * (m + a) * (s - 2.0);
    const double cx = (s - 1.0) * s * (s - 2.0);
    const double cy = (s - 1.0) * a * a;
    const double c2 = 2.0 * (m + a - 1.0) * (m - 1.0) * s;
    out[m] = ((cx * x + cy * y) * out[m - 1] - c2 * y2 * out[m - 2]) / c1;
  }
}

template <class T>
void jacobi_all(int n, int alpha, const T& x, T* out) {
  scaled_jacobi_all(n, alpha, x, T(1.0), out);
}

template <class T>
T jacobi(int i, int alpha, const T& x) {
  std::vector<T> buf(i + 1);
  jacobi_all(i, alpha, x, buf.data());
  return buf[i];
}

template <class T>
T scaled_jacobi(int i, int alpha, const T& x, const T& y) {
  std::vector<T> buf(i + 1);
  scaled_jacobi_all(i, alpha, x, y, buf.data());
  return buf[i];
}

// ---------------------------------------------------------------------------
// Dubiner bases in barycentric coordinates.
//
// 2D:  r_ij(la, lb, lc)     = l_i^S(lb - la, la + lb) p_j^{2i+1}(lc - la - lb)
// 3D:  r_ijl(la, lb, lc, ld) = l_i^S(lb - la, la + lb)
//                              p_j^{2i+1,S}(lc - la - lb, la + lb + lc)
//                              p_l^{2i+2j+2}(ld - la - lb - lc)

template <class T>
T dubiner_2d(int i, int j, const T& la, const T& lb, const T& lc) {
  std::vector<T> buf(std::max(i, j) + 1);
  scaled_legendre_all(i, lb - la, la + lb, buf.data());
  const T li = buf[i];
  jacobi_all(j, 2 * i + 1, lc - la - lb, buf.data());
  return li * buf[j];
}

template <class T>
T dubiner_3d(int i, int j, int l, const T& la, const T& lb, const T& lc, const T& ld) {
  std::vector<T> buf(std::max({i, j, l}) + 1);
  scaled_legendre_all(i, lb - la, la + lb, buf.data());
  const T li = buf[i];
  scaled_jacobi_all(j, 2 * i + 1, lc - la - lb, la + lb + lc, buf.data());
  const T pj = buf[j];
  jacobi_all(l, 2 * i + 2 * j + 2, ld - la - lb - lc, buf.data());
  return li * pj * buf[l];
}

/// Multi-indices of the Dubiner family of total degree <= k, in the fixed
/// enumeration used by every evaluator below: outer loop on total degree,
/// then lexicographic.
inline std::vector<std::array<int, 3>> dubiner_indices(int dim, int k) {
  std::vector<std::array<int, 3>> idx;
  for (int deg = 0; deg <= k; ++deg) {
    if (dim == 1) {
      idx.push_back({deg, 0, 0});
    } else if (dim == 2) {
      for (int i = deg; i >= 0; --i) idx.push_back({i, deg - i, 0});
    } else {
      for (int i = deg; i >= 0; --i)
        for (int j = deg - i; j >= 0; --j) idx.push_back({i, j, deg - i - j});
    }
  }
  return idx;
}

/// All Dubiner polynomials of degree <= k on a `Dim`-simplex, evaluated at the
/// barycentric tuple `lam` (Dim + 1 entries, in the order the family is
/// built from). Output order follows dubiner_indices(Dim, k).
template <int Dim, class T>
void dubiner_all(int k, const T* lam, std::vector<T>& out) {
  const auto n = static_cast<std::size_t>(poly_dim(Dim, k));
  out.resize(n);
  if (k < 0) return;
  std::vector<T> leg(k + 1), jac(k + 1), jac2(k + 1);
  if constexpr (Dim == 1) {
    scaled_legendre_all(k, lam[1] - lam[0], lam[0] + lam[1], leg.data());
    for (int i = 0; i <= k; ++i) out[i] = leg[i];
  } else if constexpr (Dim == 2) {
    scaled_legendre_all(k, lam[1] - lam[0], lam[0] + lam[1], leg.data());
    const T xj = lam[2] - lam[0] - lam[1];
    // value table indexed by (i, j)
    std::vector<T> table(static_cast<std::size_t>((k + 1) * (k + 1)));
    for (int i = 0; i <= k; ++i) {
      jacobi_all(k - i, 2 * i + 1, xj, jac.data());
      for (int j = 0; j <= k - i; ++j) table[i * (k + 1) + j] = leg[i] * jac[j];
    }
    std::size_t p = 0;
    for (int deg = 0; deg <= k; ++deg)
      for (int i = deg; i >= 0; --i) out[p++] = table[i * (k + 1) + (deg - i)];
  } else {
    static_assert(Dim == 3, "Dubiner bases are provided for dimensions 1..3");
    scaled_legendre_all(k, lam[1] - lam[0], lam[0] + lam[1], leg.data());
    const T xj = lam[2] - lam[0] - lam[1];
    const T yj = lam[0] + lam[1] + lam[2];
    const T xl = lam[3] - lam[0] - lam[1] - lam[2];
    const int s = k + 1;
    std::vector<T> table(static_cast<std::size_t>(s * s * s));
    for (int i = 0; i <= k; ++i) {
      scaled_jacobi_all(k - i, 2 * i + 1, xj, yj, jac.data());
      for (int j = 0; j <= k - i; ++j) {
        jacobi_all(k - i - j, 2 * i + 2 * j + 2, xl, jac2.data());
        const T lij = leg[i] * jac[j];
        for (int l = 0; l <= k - i - j; ++l) table[(i * s + j) * s + l] = lij * jac2[l];
      }
    }
    std::size_t p = 0;
    for (int deg = 0; deg <= k; ++deg)
      for (int i = deg; i >= 0; --i)
        for (int j = deg - i; j >= 0; --j) out[p++] = table[(i * s + j) * s + (deg - i - j)];
  }
}

}  // namespace mcs
