#include "psync/sparse.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <stdexcept>

#include "psync/errors.hpp"

namespace psync {

SparseComplex::SparseComplex(int nrows, int ncols) : nrows_(nrows), ncols_(ncols) {
  colptr_.assign(static_cast<size_t>(ncols) + 1, 0);
}

SparseComplex SparseComplex::from_triplets(int nrows, int ncols,
                                           std::vector<Triplet> triplets) {
  for (const auto& t : triplets) {
    if (t.row < 0 || t.row >= nrows || t.col < 0 || t.col >= ncols)
      throw std::out_of_range("triplet index out of range");
  }
  // Stable sort keeps duplicate contributions in generation order, so the
  // sums for entries (i,j) and (j,i) of a Hermitian stream are exact
  // conjugates of each other.
  std::stable_sort(triplets.begin(), triplets.end(), [](const Triplet& a, const Triplet& b) {
    return a.col != b.col ? a.col < b.col : a.row < b.row;
  });

  SparseComplex m(nrows, ncols);
  m.rowind_.reserve(triplets.size());
  m.values_.reserve(triplets.size());
  size_t i = 0;
  for (int c = 0; c < ncols; ++c) {
    while (i < triplets.size() && triplets[i].col == c) {
      int r = triplets[i].row;
      cplx v = triplets[i].value;
      ++i;
      while (i < triplets.size() && triplets[i].col == c && triplets[i].row == r) {
        v += triplets[i].value;
        ++i;
      }
      if (v != cplx(0.0, 0.0)) {
        m.rowind_.push_back(r);
        m.values_.push_back(v);
      }
    }
    m.colptr_[static_cast<size_t>(c) + 1] = static_cast<int>(m.rowind_.size());
  }
  return m;
}

cplx SparseComplex::coeff(int row, int col) const {
  auto first = rowind_.begin() + colptr_[col];
  auto last = rowind_.begin() + colptr_[static_cast<size_t>(col) + 1];
  auto it = std::lower_bound(first, last, row);
  if (it == last || *it != row) return {};
  return values_[static_cast<size_t>(it - rowind_.begin())];
}

void SparseComplex::multiply(std::span<const cplx> x, std::span<cplx> y) const {
  if (static_cast<int>(x.size()) != ncols_ || static_cast<int>(y.size()) != nrows_)
    throw std::invalid_argument("multiply: dimension mismatch");
  std::fill(y.begin(), y.end(), cplx{});
  for (int c = 0; c < ncols_; ++c) {
    const cplx xc = x[c];
    if (xc == cplx{}) continue;
    for (int p = colptr_[c]; p < colptr_[static_cast<size_t>(c) + 1]; ++p)
      y[rowind_[p]] += values_[p] * xc;
  }
}

std::vector<cplx> SparseComplex::operator*(std::span<const cplx> x) const {
  std::vector<cplx> y(nrows_);
  multiply(x, y);
  return y;
}

SparseComplex SparseComplex::transpose() const {
  SparseComplex t(ncols_, nrows_);
  t.colptr_.assign(static_cast<size_t>(nrows_) + 1, 0);
  for (int r : rowind_) ++t.colptr_[static_cast<size_t>(r) + 1];
  for (int i = 0; i < nrows_; ++i) t.colptr_[i + 1] += t.colptr_[i];
  t.rowind_.resize(rowind_.size());
  t.values_.resize(values_.size());
  std::vector<int> cursor(t.colptr_.begin(), t.colptr_.end() - 1);
  for (int c = 0; c < ncols_; ++c)
    for (int p = colptr_[c]; p < colptr_[static_cast<size_t>(c) + 1]; ++p) {
      int pos = cursor[rowind_[p]]++;
      t.rowind_[pos] = c;
      t.values_[pos] = values_[p];
    }
  return t;
}

SparseComplex SparseComplex::adjoint() const {
  SparseComplex a = transpose();
  for (auto& v : a.values_) v = std::conj(v);
  return a;
}

SparseComplex SparseComplex::add(const SparseComplex& a, const SparseComplex& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw std::invalid_argument("add: dimension mismatch");
  SparseComplex m(a.rows(), a.cols());
  m.rowind_.reserve(a.nnz() + b.nnz());
  m.values_.reserve(a.nnz() + b.nnz());
  for (int c = 0; c < a.cols(); ++c) {
    int pa = a.colptr_[c], ea = a.colptr_[static_cast<size_t>(c) + 1];
    int pb = b.colptr_[c], eb = b.colptr_[static_cast<size_t>(c) + 1];
    while (pa < ea || pb < eb) {
      int ra = pa < ea ? a.rowind_[pa] : a.rows();
      int rb = pb < eb ? b.rowind_[pb] : a.rows();
      int r = std::min(ra, rb);
      cplx v{};
      if (ra == r) v += a.values_[pa++];
      if (rb == r) v += b.values_[pb++];
      if (v != cplx{}) {
        m.rowind_.push_back(r);
        m.values_.push_back(v);
      }
    }
    m.colptr_[static_cast<size_t>(c) + 1] = static_cast<int>(m.rowind_.size());
  }
  return m;
}

void SparseComplex::prune(double tol) {
  std::vector<int> newptr(colptr_.size(), 0);
  size_t out = 0;
  for (int c = 0; c < ncols_; ++c) {
    for (int p = colptr_[c]; p < colptr_[static_cast<size_t>(c) + 1]; ++p) {
      if (std::abs(values_[p]) > tol) {
        rowind_[out] = rowind_[p];
        values_[out] = values_[p];
        ++out;
      }
    }
    newptr[static_cast<size_t>(c) + 1] = static_cast<int>(out);
  }
  rowind_.resize(out);
  values_.resize(out);
  colptr_ = std::move(newptr);
}

double SparseComplex::max_abs() const {
  double m = 0.0;
  for (const cplx& v : values_) m = std::max(m, std::abs(v));
  return m;
}

double SparseComplex::inf_norm() const {
  std::vector<double> rowsum(nrows_, 0.0);
  for (int c = 0; c < ncols_; ++c)
    for (int p = colptr_[c]; p < colptr_[static_cast<size_t>(c) + 1]; ++p)
      rowsum[rowind_[p]] += std::abs(values_[p]);
  double m = 0.0;
  for (double s : rowsum) m = std::max(m, s);
  return m;
}

bool SparseComplex::has_nonfinite() const {
  for (const cplx& v : values_)
    if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) return true;
  return false;
}

SparseHermitian::SparseHermitian(SparseComplex mat) : mat_(std::move(mat)) {
  if (mat_.rows() != mat_.cols()) throw std::invalid_argument("SparseHermitian: not square");
}

SparseHermitian SparseHermitian::from_triplets(int n, std::vector<Triplet> triplets,
                                               double prune_rel) {
  SparseComplex m = SparseComplex::from_triplets(n, n, std::move(triplets));
  if (prune_rel > 0.0) m.prune(prune_rel * m.max_abs());
  SparseHermitian h(std::move(m));
  if (h.hermitian_defect() > 1e-12)
    throw NumericalError("SparseHermitian: triplet stream is not Hermitian");
  return h;
}

SparseHermitian SparseHermitian::add(const SparseHermitian& a, const SparseHermitian& b) {
  return SparseHermitian(SparseComplex::add(a.mat(), b.mat()));
}

double SparseHermitian::quad_form(std::span<const cplx> x) const {
  std::vector<cplx> hx = mat_ * x;
  return vec::dot(x, hx).real();
}

double SparseHermitian::trace() const {
  double t = 0.0;
  for (int i = 0; i < n(); ++i) t += mat_.coeff(i, i).real();
  return t;
}

double SparseHermitian::hermitian_defect() const {
  const double scale = std::max(1e-300, mat_.max_abs());
  double worst = 0.0;
  auto cp = mat_.col_ptr();
  auto ri = mat_.row_ind();
  auto va = mat_.values();
  for (int c = 0; c < n(); ++c)
    for (int p = cp[c]; p < cp[c + 1]; ++p)
      worst = std::max(worst, std::abs(va[p] - std::conj(mat_.coeff(c, ri[p]))));
  return worst / scale;
}

namespace vec {

double norm2(std::span<const cplx> x) {
  double s = 0.0;
  for (const cplx& v : x) s += std::norm(v);
  return std::sqrt(s);
}

cplx dot(std::span<const cplx> a, std::span<const cplx> b) {
  cplx s{};
  for (size_t i = 0; i < a.size(); ++i) s += std::conj(a[i]) * b[i];
  return s;
}

void scale(std::span<cplx> x, cplx s) {
  for (cplx& v : x) v *= s;
}

bool has_nonfinite(std::span<const cplx> x) {
  for (const cplx& v : x)
    if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) return true;
  return false;
}

bool has_nonfinite(std::span<const double> x) {
  for (double v : x)
    if (!std::isfinite(v)) return true;
  return false;
}

}  // namespace vec

}  // namespace psync
