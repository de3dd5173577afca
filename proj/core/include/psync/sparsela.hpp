#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "psync/sparse.hpp"

namespace psync {

// Symmetric permutation: perm[new] = old, iperm[old] = new. Factorizations
// work on (P A P^T)(i,j) = A(perm[i], perm[j]).
struct Ordering {
  std::vector<int> perm;
  std::vector<int> iperm;

  static Ordering identity(int n);
  bool valid() const;
};

// Fill-reducing ordering (approximate minimum degree) for a symmetric
// sparsity pattern.
Ordering fill_order(const SparseComplex& pattern);

// Symbolic Cholesky analysis of pattern(H) plus the full diagonal, shared
// across repeated numeric factorizations with different diagonal shifts.
// Immutable after construction and safe to share between threads.
class CholSymbolic {
 public:
  CholSymbolic(const SparseHermitian& H, Ordering ord);

  int n() const { return n_; }
  long long nnz_L() const { return static_cast<long long>(Li_.size()); }
  const Ordering& ordering() const { return ord_; }

  // Internal layout, consumed by cholesky() and CholFactor.
  int n_ = 0;
  Ordering ord_;
  // permuted upper-triangle scatter lists per column: row index + source
  // position in H's value array (-1 for a structurally absent diagonal)
  std::vector<int> up_ptr_, up_row_, up_src_;
  // row patterns of L in elimination (topological) order
  std::vector<int> rowptr_, rowpat_;
  // final structure of L (column compressed, diagonal first)
  std::vector<int> Lp_, Li_;
};

// Numeric Cholesky factor L with P (H - diag(shift)) P^T = L L^H, diagonal
// of L strictly positive real. Immutable; solves may run concurrently.
class CholFactor {
 public:
  int n() const { return sym_->n(); }
  long long nnz_L() const { return sym_->nnz_L(); }
  const CholSymbolic& symbolic() const { return *sym_; }
  std::span<const double> shift() const { return shift_; }

  // (H - diag(shift))^{-1} rhs via P^T L^-H L^-1 P rhs.
  std::vector<cplx> solve(std::span<const cplx> rhs) const;

  // max |P(H-diag(shift))P^T - LL^H| entry; verification helper.
  double factor_defect(const SparseHermitian& H) const;

  // Internal layout, filled by cholesky().
  std::shared_ptr<const CholSymbolic> sym_;
  std::vector<cplx> Lx_;
  std::vector<double> shift_;
};

// Attempts the factorization of H - diag(shift). An indefinite matrix is an
// expected outcome and yields nullopt: any pivot <= 1e-14 times the running
// max pivot (or nonfinite) counts as failure. NaN/Inf inputs throw instead.
std::optional<CholFactor> cholesky(const SparseHermitian& H, std::span<const double> shift,
                                   std::shared_ptr<const CholSymbolic> sym = nullptr);
std::optional<CholFactor> cholesky(const SparseHermitian& H, double shift = 0.0,
                                   std::shared_ptr<const CholSymbolic> sym = nullptr);

struct EigResult {
  std::vector<cplx> vector;   // unit 2-norm
  double rayleigh = 0.0;      // v^H H v
  double residual_norm = 0.0; // ||H v - rayleigh v||
  int iterations = 0;
  bool converged = false;
};

// Minimum eigenpair of H by shifted inverse iteration: z <- (H - aI)^{-1} z
// with normalization, starting from a seeded unit-Gaussian vector. Requires
// H - alpha I positive definite; when the factorization of H itself fails
// (numerically singular PSD case) the shift is nudged to -1e-10 tr(H)/n.
EigResult min_eigvec(const SparseHermitian& H, double alpha = 0.0, double tol = 1e-8,
                     int maxit = 500, uint64_t seed = 0);

// Inverse bisection (Cholesky success/failure test) lower bound:
//   mu <= lambda_min(H - diag(y)) <= mu + eps.
// Requires H positive definite. eps <= 0 selects the default
// max(1e-12, 1e-9 max(1, ||H||_inf)). `v_init` tightens the initial upper
// bound via its Rayleigh quotient (all-ones when empty).
double min_eig_lower_bound(const SparseHermitian& H, std::span<const double> y, double eps = 0.0,
                           std::span<const cplx> v_init = {});

}  // namespace psync
