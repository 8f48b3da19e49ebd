#pragma once

// Sparse direct solve (UMFPACK LU through Eigen) with a relative residual
// contract, plus small sparse helpers.

#include <Eigen/Sparse>
#include <Eigen/UmfPackSupport>

#include <cmath>
#include <cstdio>
#include <iomanip>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

namespace mcs {

using SparseMatrix = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;

/// Compressed matrix from triplets; duplicate entries are summed.
inline SparseMatrix compile(int rows, int cols, const std::vector<Triplet>& t) {
  SparseMatrix A(rows, cols);
  A.setFromTriplets(t.begin(), t.end());
  A.makeCompressed();
  return A;
}

/// max |A - A^T| relative to max |A|.
inline double symmetry_defect(const SparseMatrix& A) {
  if (A.rows() != A.cols()) return INFINITY;
  const SparseMatrix At = A.transpose();
  const SparseMatrix D = A - At;
  double dmax = 0, amax = 0;
  for (int k = 0; k < D.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(D, k); it; ++it) dmax = std::max(dmax, std::abs(it.value()));
  for (int k = 0; k < A.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(A, k); it; ++it) amax = std::max(amax, std::abs(it.value()));
  return amax > 0 ? dmax / amax : 0.0;
}

/// Matrix Market coordinate export (general real).
inline void write_matrix_market(const SparseMatrix& A, std::ostream& os) {
  os << "%%MatrixMarket matrix coordinate real general\n";
  os << A.rows() << ' ' << A.cols() << ' ' << A.nonZeros() << '\n';
  os << std::setprecision(17);
  for (int k = 0; k < A.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(A, k); it; ++it)
      os << it.row() + 1 << ' ' << it.col() + 1 << ' ' << it.value() << '\n';
}

struct SolveInfo {
  double residual = 0;  // ||Ax - b|| / ||b||
  int refinements = 0;
};

/// LU factorization that can be reused for several right-hand sides. Every
/// solve is checked against the residual tolerance after a few steps of
/// iterative refinement; failures throw instead of returning a bad vector.
namespace detail {
inline std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3e", v);
  return buf;
}
}  // namespace detail

class LinearSolver {
 public:
  explicit LinearSolver(double tolerance = 1e-10, int max_refinements = 4)
      : tol_(tolerance), max_ref_(max_refinements) {}
  // the factorization keeps a reference to A_
  LinearSolver(const LinearSolver&) = delete;
  LinearSolver& operator=(const LinearSolver&) = delete;

  void factorize(const SparseMatrix& A) {
    if (A.rows() != A.cols()) throw std::invalid_argument("solve: matrix is not square");
    A_ = A;
    A_.makeCompressed();
    lu_.compute(A_);
    if (lu_.info() != Eigen::Success) throw std::runtime_error("solve: matrix is singular (LU factorization failed)");
    // an exactly zero pivot is reported as a failed factorization; near
    // singularity shows up in the residual check of solve()
  }

  [[nodiscard]] Eigen::VectorXd solve(const Eigen::VectorXd& b, SolveInfo* info = nullptr) const {
    if (b.size() != A_.rows()) throw std::invalid_argument("solve: size mismatch");
    const double bn = b.norm();
    if (bn == 0) {
      if (info) *info = {};
      return Eigen::VectorXd::Zero(b.size());
    }
    Eigen::VectorXd x = lu_.solve(b);
    Eigen::VectorXd r = b - A_ * x;
    double res = r.norm() / bn;
    int steps = 0;
    while (res > 1e-3 * tol_ && steps < max_ref_ && std::isfinite(res)) {
      const Eigen::VectorXd xn = x + lu_.solve(r);
      const Eigen::VectorXd rn = b - A_ * xn;
      const double resn = rn.norm() / bn;
      ++steps;
      if (!(resn < res)) break;
      x = xn;
      r = rn;
      res = resn;
    }
    if (!std::isfinite(res) || !x.allFinite()) throw std::runtime_error("solve: non-finite solution (singular matrix)");
    if (res > tol_)
      throw std::runtime_error("solve: relative residual " + detail::sci(res) + " violates tolerance " + detail::sci(tol_));
    if (info) *info = {res, steps};
    return x;
  }

 private:
  double tol_;
  int max_ref_;
  SparseMatrix A_;
  Eigen::UmfPackLU<SparseMatrix> lu_;
};

inline Eigen::VectorXd solve(const SparseMatrix& A, const Eigen::VectorXd& b, SolveInfo* info = nullptr,
                             double tolerance = 1e-10) {
  LinearSolver s(tolerance);
  s.factorize(A);
  return s.solve(b, info);
}

}  // namespace mcs
