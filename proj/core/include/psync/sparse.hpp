#pragma once

#include <complex>
#include <span>
#include <vector>

namespace psync {

using cplx = std::complex<double>;

struct Triplet {
  int row = 0;
  int col = 0;
  cplx value;
};

// Column-compressed complex sparse matrix. Indices are sorted within each
// column and deduplicated (duplicates are summed on construction); entries
// that sum to exactly zero are dropped.
class SparseComplex {
 public:
  SparseComplex() = default;
  SparseComplex(int nrows, int ncols);

  static SparseComplex from_triplets(int nrows, int ncols, std::vector<Triplet> triplets);

  int rows() const { return nrows_; }
  int cols() const { return ncols_; }
  int nnz() const { return static_cast<int>(rowind_.size()); }

  std::span<const int> col_ptr() const { return colptr_; }
  std::span<const int> row_ind() const { return rowind_; }
  std::span<const cplx> values() const { return values_; }
  std::span<cplx> values() { return values_; }

  // Entry lookup by binary search; zero when absent.
  cplx coeff(int row, int col) const;

  // y = A x
  void multiply(std::span<const cplx> x, std::span<cplx> y) const;
  std::vector<cplx> operator*(std::span<const cplx> x) const;

  SparseComplex transpose() const;
  SparseComplex adjoint() const;

  // A + B, exact zeros kept out of the result.
  static SparseComplex add(const SparseComplex& a, const SparseComplex& b);

  // Drops entries with |value| <= tol (absolute).
  void prune(double tol);

  double max_abs() const;
  // Max absolute row sum.
  double inf_norm() const;

  bool has_nonfinite() const;

 private:
  int nrows_ = 0;
  int ncols_ = 0;
  std::vector<int> colptr_{0};
  std::vector<int> rowind_;
  std::vector<cplx> values_;
};

// Square sparse complex matrix maintained Hermitian with an exactly
// symmetric pattern; both triangles are stored.
class SparseHermitian {
 public:
  SparseHermitian() = default;
  explicit SparseHermitian(SparseComplex mat);

  // Builds from triplets, then prunes entries below prune_rel * max|entry|.
  // The triplet stream must describe a Hermitian matrix to within roundoff;
  // the constructor enforces exact conjugate symmetry.
  static SparseHermitian from_triplets(int n, std::vector<Triplet> triplets,
                                       double prune_rel = 0.0);

  int n() const { return mat_.rows(); }
  const SparseComplex& mat() const { return mat_; }

  static SparseHermitian add(const SparseHermitian& a, const SparseHermitian& b);

  std::vector<cplx> operator*(std::span<const cplx> x) const { return mat_ * x; }

  // x^H A x, real part (exact for Hermitian A).
  double quad_form(std::span<const cplx> x) const;
  double trace() const;
  double inf_norm() const { return mat_.inf_norm(); }
  double max_abs() const { return mat_.max_abs(); }

  // Max |A - A^H| entry relative to max|entry|; diagnostic.
  double hermitian_defect() const;

 private:
  SparseComplex mat_;
};

// Small dense-vector helpers shared across modules.
namespace vec {

double norm2(std::span<const cplx> x);
// <a, b> with conjugation on a.
cplx dot(std::span<const cplx> a, std::span<const cplx> b);
void scale(std::span<cplx> x, cplx s);
bool has_nonfinite(std::span<const cplx> x);
bool has_nonfinite(std::span<const double> x);

}  // namespace vec

}  // namespace psync
