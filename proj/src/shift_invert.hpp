#pragma once

// Shift-invert Arnoldi for the few eigenvalues of a sparse complex matrix
// nearest a target. Internal to the library.

#include <Eigen/Eigenvalues>
#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include <complex>
#include <string>
#include <vector>

namespace evtes::detail {

using SpMat = Eigen::SparseMatrix<std::complex<double>>;

struct EigenPairs {
  std::vector<std::complex<double>> values;
  std::vector<Eigen::VectorXcd> vectors;
  std::vector<double> residuals;
  int restarts = 0;
};

struct ArnoldiOptions {
  int krylov_dim = 24;
  int max_restarts = 30;
  double tol = 1e-11;  // ||OP x - theta x|| / |theta| with OP = (A - sigma)^-1
};

struct ArnoldiFailure {
  std::string reason;
  int restarts = 0;
  double best_residual = 0.0;
};

/// Throws ArnoldiFailure on factorization failure or non-convergence.
EigenPairs shift_invert_arnoldi(const SpMat& A, std::complex<double> sigma, int nev, Eigen::VectorXcd start,
                                const ArnoldiOptions& opt = {});

}  // namespace evtes::detail
