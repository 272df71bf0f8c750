#include "shift_invert.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace evtes::detail {

EigenPairs shift_invert_arnoldi(const SpMat& A, std::complex<double> sigma, int nev, Eigen::VectorXcd start,
                                const ArnoldiOptions& opt) {
  const auto n = A.rows();
  if (nev < 1 || n < 1) throw ArnoldiFailure{"no eigenvalues requested", 0, 0.0};
  const int m = static_cast<int>(std::min<Eigen::Index>(std::max(opt.krylov_dim, 2 * nev + 8), n));
  if (nev > m) throw ArnoldiFailure{"more eigenvalues requested than the problem size", 0, 0.0};

  SpMat shifted = A;
  for (Eigen::Index i = 0; i < n; ++i) shifted.coeffRef(i, i) -= sigma;
  shifted.makeCompressed();
  Eigen::SparseLU<SpMat, Eigen::COLAMDOrdering<int>> lu;
  lu.analyzePattern(shifted);
  lu.factorize(shifted);
  if (lu.info() != Eigen::Success) throw ArnoldiFailure{"sparse LU factorization failed: " + lu.lastErrorMessage(), 0, 0.0};

  if (start.size() != n || start.norm() == 0.0) start = Eigen::VectorXcd::Ones(n);
  Eigen::VectorXcd v = start / start.norm();
  Eigen::MatrixXcd V(n, m + 1);
  Eigen::MatrixXcd H(m + 1, m);
  double best = std::numeric_limits<double>::infinity();

  for (int restart = 0; restart <= opt.max_restarts; ++restart) {
    V.setZero();
    H.setZero();
    V.col(0) = v;
    int k = m;
    for (int j = 0; j < m; ++j) {
      Eigen::VectorXcd w = lu.solve(V.col(j));
      for (int pass = 0; pass < 2; ++pass) {
        const Eigen::VectorXcd h = V.leftCols(j + 1).adjoint() * w;
        w -= V.leftCols(j + 1) * h;
        H.col(j).head(j + 1) += h;
      }
      const double beta = w.norm();
      H(j + 1, j) = beta;
      if (beta < 1e-14 * H.col(j).head(j + 1).norm()) {
        k = j + 1;  // invariant subspace
        break;
      }
      V.col(j + 1) = w / beta;
    }

    Eigen::ComplexEigenSolver<Eigen::MatrixXcd> ces(H.topLeftCorner(k, k));
    const auto& theta = ces.eigenvalues();
    std::vector<int> order(static_cast<std::size_t>(k));
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) { return std::abs(theta[a]) > std::abs(theta[b]); });

    EigenPairs out;
    out.restarts = restart;
    Eigen::VectorXcd next = Eigen::VectorXcd::Zero(n);
    bool all_ok = true;
    const int take = std::min(nev, k);
    for (int r = 0; r < take; ++r) {
      const int idx = order[static_cast<std::size_t>(r)];
      Eigen::VectorXcd y = ces.eigenvectors().col(idx);
      y /= y.norm();
      Eigen::VectorXcd x = V.leftCols(k) * y;
      x /= x.norm();
      // Arnoldi relation: ||OP x - theta x|| = |h_{k+1,k} y_k|.
      const double res = k < m || k == n ? 0.0 : std::abs(H(k, k - 1) * y[k - 1]) / std::abs(theta[idx]);
      out.values.push_back(sigma + 1.0 / theta[idx]);
      out.vectors.push_back(x);
      out.residuals.push_back(res);
      if (!(res < opt.tol)) all_ok = false;
      next += x;
    }
    const double worst = *std::max_element(out.residuals.begin(), out.residuals.end());
    best = std::min(best, worst);
    if (all_ok && take == nev) return out;
    if (!std::isfinite(next.norm()) || next.norm() == 0.0)
      throw ArnoldiFailure{"Arnoldi restart vector degenerated", restart, best};
    v = next / next.norm();
  }
  throw ArnoldiFailure{"shift-invert Arnoldi did not converge", opt.max_restarts, best};
}

}  // namespace evtes::detail
