#include "psync/sparsela.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

#include <Eigen/OrderingMethods>
#include <Eigen/SparseCore>

#include "psync/errors.hpp"

namespace psync {

Ordering Ordering::identity(int n) {
  Ordering o;
  o.perm.resize(n);
  o.iperm.resize(n);
  for (int i = 0; i < n; ++i) o.perm[i] = o.iperm[i] = i;
  return o;
}

bool Ordering::valid() const {
  const int n = static_cast<int>(perm.size());
  if (static_cast<int>(iperm.size()) != n) return false;
  std::vector<char> seen(n, 0);
  for (int i = 0; i < n; ++i) {
    if (perm[i] < 0 || perm[i] >= n || seen[perm[i]]) return false;
    seen[perm[i]] = 1;
    if (iperm[perm[i]] != i) return false;
  }
  return true;
}

Ordering fill_order(const SparseComplex& pattern) {
  if (pattern.rows() != pattern.cols())
    throw std::invalid_argument("fill_order: pattern must be square");
  const int n = pattern.rows();
  using SpMat = Eigen::SparseMatrix<double, Eigen::ColMajor, int>;
  std::vector<Eigen::Triplet<double>> tr;
  tr.reserve(pattern.nnz() + n);
  auto cp = pattern.col_ptr();
  auto ri = pattern.row_ind();
  for (int c = 0; c < n; ++c)
    for (int p = cp[c]; p < cp[c + 1]; ++p) tr.emplace_back(ri[p], c, 1.0);
  for (int i = 0; i < n; ++i) tr.emplace_back(i, i, 1.0);
  SpMat m(n, n);
  m.setFromTriplets(tr.begin(), tr.end());
  m.makeCompressed();

  Eigen::AMDOrdering<int> amd;
  Eigen::PermutationMatrix<Eigen::Dynamic, Eigen::Dynamic, int> perm;
  amd(m, perm);

  Ordering o;
  o.perm.resize(n);
  o.iperm.resize(n);
  for (int i = 0; i < n; ++i) o.perm[i] = perm.indices()(i);
  for (int i = 0; i < n; ++i) o.iperm[o.perm[i]] = i;
  return o;
}

CholSymbolic::CholSymbolic(const SparseHermitian& H, Ordering ord)
    : n_(H.n()), ord_(std::move(ord)) {
  if (static_cast<int>(ord_.perm.size()) != n_ || !ord_.valid())
    throw std::invalid_argument("CholSymbolic: invalid ordering");
  const auto& A = H.mat();
  auto cp = A.col_ptr();
  auto ri = A.row_ind();

  // Permuted upper-triangle scatter lists, diagonal forced present.
  std::vector<std::vector<std::pair<int, int>>> up(n_);  // col -> (row, src)
  for (int c = 0; c < n_; ++c) {
    for (int p = cp[c]; p < cp[c + 1]; ++p) {
      const int i = ord_.iperm[ri[p]];
      const int j = ord_.iperm[c];
      if (i <= j) up[j].push_back({i, p});
    }
  }
  for (int j = 0; j < n_; ++j) {
    bool has_diag = false;
    for (auto& [i, src] : up[j])
      if (i == j) has_diag = true;
    if (!has_diag) up[j].push_back({j, -1});
    std::sort(up[j].begin(), up[j].end());
  }
  up_ptr_.assign(n_ + 1, 0);
  for (int j = 0; j < n_; ++j) up_ptr_[j + 1] = up_ptr_[j] + static_cast<int>(up[j].size());
  up_row_.resize(up_ptr_[n_]);
  up_src_.resize(up_ptr_[n_]);
  for (int j = 0; j < n_; ++j)
    for (size_t t = 0; t < up[j].size(); ++t) {
      up_row_[up_ptr_[j] + t] = up[j][t].first;
      up_src_[up_ptr_[j] + t] = up[j][t].second;
    }

  // Elimination tree (Liu) with path compression.
  std::vector<int> parent(n_, -1), ancestor(n_, -1);
  for (int k = 0; k < n_; ++k) {
    for (int p = up_ptr_[k]; p < up_ptr_[k + 1]; ++p) {
      int j = up_row_[p];
      while (j != -1 && j < k) {
        const int next = ancestor[j];
        ancestor[j] = k;
        if (next == -1) parent[j] = k;
        j = next;
      }
    }
  }

  // Row patterns of L in topological order via ereach, and column counts.
  rowptr_.assign(n_ + 1, 0);
  std::vector<int> colcount(n_, 1);  // diagonal
  std::vector<int> stamp(n_, -1), stack(n_), path(n_);
  std::vector<int> pat;
  pat.reserve(16 * static_cast<size_t>(n_));
  for (int k = 0; k < n_; ++k) {
    int top = n_;
    stamp[k] = k;
    for (int p = up_ptr_[k]; p < up_ptr_[k + 1]; ++p) {
      int i = up_row_[p];
      if (i >= k) continue;
      int len = 0;
      while (stamp[i] != k) {
        stamp[i] = k;
        path[len++] = i;
        i = parent[i];
      }
      while (len > 0) stack[--top] = path[--len];
    }
    for (int t = top; t < n_; ++t) {
      pat.push_back(stack[t]);
      ++colcount[stack[t]];
    }
    rowptr_[k + 1] = static_cast<int>(pat.size());
  }
  rowpat_ = std::move(pat);

  Lp_.assign(n_ + 1, 0);
  for (int j = 0; j < n_; ++j) Lp_[j + 1] = Lp_[j] + colcount[j];
  Li_.resize(Lp_[n_]);
  std::vector<int> cursor(n_);
  for (int j = 0; j < n_; ++j) {
    Li_[Lp_[j]] = j;  // diagonal first
    cursor[j] = Lp_[j] + 1;
  }
  for (int k = 0; k < n_; ++k)
    for (int p = rowptr_[k]; p < rowptr_[k + 1]; ++p) Li_[cursor[rowpat_[p]]++] = k;
}

std::optional<CholFactor> cholesky(const SparseHermitian& H, std::span<const double> shift,
                                   std::shared_ptr<const CholSymbolic> sym) {
  const int n = H.n();
  if (static_cast<int>(shift.size()) != n)
    throw std::invalid_argument("cholesky: |shift| != n");
  if (H.mat().has_nonfinite() || vec::has_nonfinite(shift))
    throw std::invalid_argument("cholesky: nonfinite input");
  if (!sym) sym = std::make_shared<CholSymbolic>(H, fill_order(H.mat()));

  const CholSymbolic& S = *sym;
  auto hv = H.mat().values();
  std::vector<cplx> Lx(S.Li_.size());
  std::vector<int> cursor(n);
  for (int j = 0; j < n; ++j) cursor[j] = S.Lp_[j] + 1;
  std::vector<cplx> x(n, cplx{});
  double max_pivot = 0.0;

  for (int k = 0; k < n; ++k) {
    double d = 0.0;
    for (int p = S.up_ptr_[k]; p < S.up_ptr_[k + 1]; ++p) {
      const int i = S.up_row_[p];
      const cplx val = S.up_src_[p] >= 0 ? hv[S.up_src_[p]] : cplx{};
      if (i == k)
        d = val.real() - shift[S.ord_.perm[k]];
      else
        x[i] = val;
    }
    for (int t = S.rowptr_[k]; t < S.rowptr_[k + 1]; ++t) {
      const int j = S.rowpat_[t];
      cplx yj = x[j];
      x[j] = cplx{};
      yj /= Lx[S.Lp_[j]].real();
      const int end = cursor[j];
      for (int p = S.Lp_[j] + 1; p < end; ++p) x[S.Li_[p]] -= Lx[p] * yj;
      d -= std::norm(yj);
      Lx[cursor[j]++] = std::conj(yj);
    }
    if (!std::isfinite(d) || d <= 1e-14 * max_pivot || d <= 0.0) return std::nullopt;
    max_pivot = std::max(max_pivot, d);
    Lx[S.Lp_[k]] = std::sqrt(d);
  }

  CholFactor f;
  f.sym_ = std::move(sym);
  f.Lx_ = std::move(Lx);
  f.shift_.assign(shift.begin(), shift.end());
  return f;
}

std::optional<CholFactor> cholesky(const SparseHermitian& H, double shift,
                                   std::shared_ptr<const CholSymbolic> sym) {
  std::vector<double> s(H.n(), shift);
  return cholesky(H, s, std::move(sym));
}

std::vector<cplx> CholFactor::solve(std::span<const cplx> rhs) const {
  const CholSymbolic& S = *sym_;
  const int n = S.n_;
  if (static_cast<int>(rhs.size()) != n)
    throw std::invalid_argument("solve: dimension mismatch");
  std::vector<cplx> z(n);
  for (int i = 0; i < n; ++i) z[i] = rhs[S.ord_.perm[i]];
  // L y = z
  for (int j = 0; j < n; ++j) {
    const cplx yj = z[j] / Lx_[S.Lp_[j]].real();
    z[j] = yj;
    for (int p = S.Lp_[j] + 1; p < S.Lp_[j + 1]; ++p) z[S.Li_[p]] -= Lx_[p] * yj;
  }
  // L^H w = y
  for (int j = n - 1; j >= 0; --j) {
    cplx s = z[j];
    for (int p = S.Lp_[j] + 1; p < S.Lp_[j + 1]; ++p)
      s -= std::conj(Lx_[p]) * z[S.Li_[p]];
    z[j] = s / Lx_[S.Lp_[j]].real();
  }
  std::vector<cplx> out(n);
  for (int i = 0; i < n; ++i) out[S.ord_.perm[i]] = z[i];
  return out;
}

double CholFactor::factor_defect(const SparseHermitian& H) const {
  const CholSymbolic& S = *sym_;
  const int n = S.n_;
  // (L L^H)(:,j) = sum_p L(:,p) conj(L(j,p)); verification helper, O(n^2).
  double worst = 0.0;
  std::vector<cplx> acc(n);
  for (int j = 0; j < n; ++j) {
    std::fill(acc.begin(), acc.end(), cplx{});
    for (int p = 0; p <= j; ++p) {
      cplx ljp{};
      for (int q = S.Lp_[p]; q < S.Lp_[p + 1]; ++q)
        if (S.Li_[q] == j) {
          ljp = Lx_[q];
          break;
        }
      if (ljp == cplx{}) continue;
      const cplx c = std::conj(ljp);
      for (int q = S.Lp_[p]; q < S.Lp_[p + 1]; ++q) acc[S.Li_[q]] += Lx_[q] * c;
    }
    for (int i = 0; i < n; ++i) {
      cplx aij = H.mat().coeff(S.ord_.perm[i], S.ord_.perm[j]);
      if (i == j) aij -= shift_[S.ord_.perm[i]];
      worst = std::max(worst, std::abs(acc[i] - aij));
    }
  }
  return worst;
}

EigResult min_eigvec(const SparseHermitian& H, double alpha, double tol, int maxit,
                     uint64_t seed) {
  const int n = H.n();
  if (n == 0) throw std::invalid_argument("min_eigvec: empty matrix");
  auto sym = std::make_shared<CholSymbolic>(H, fill_order(H.mat()));
  std::optional<CholFactor> factor = cholesky(H, alpha, sym);
  if (!factor && alpha == 0.0) {
    // PSD-but-singular case (noiseless measurements): nudge the shift.
    alpha = -1e-10 * H.trace() / n;
    factor = cholesky(H, alpha, sym);
  }
  if (!factor) throw NumericalError("min_eigvec: H - alpha I is not positive definite");

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<cplx> z(n);
  for (auto& v : z) v = cplx(gauss(rng), gauss(rng));
  vec::scale(z, 1.0 / vec::norm2(z));

  EigResult res;
  std::vector<cplx> hz(n);
  for (int it = 1; it <= maxit; ++it) {
    z = factor->solve(z);
    const double nz = vec::norm2(z);
    if (!(nz > 0.0) || !std::isfinite(nz))
      throw NumericalError("min_eigvec: inverse iteration broke down");
    vec::scale(z, 1.0 / nz);

    H.mat().multiply(z, hz);
    const double ray = vec::dot(z, hz).real();
    double rn = 0.0;
    for (int i = 0; i < n; ++i) rn += std::norm(hz[i] - ray * z[i]);
    rn = std::sqrt(rn);

    res.vector = z;
    res.rayleigh = ray;
    res.residual_norm = rn;
    res.iterations = it;
    if (rn <= tol * std::max(1.0, std::abs(ray))) {
      res.converged = true;
      break;
    }
  }
  return res;
}

double min_eig_lower_bound(const SparseHermitian& H, std::span<const double> y, double eps,
                           std::span<const cplx> v_init) {
  const int n = H.n();
  if (static_cast<int>(y.size()) != n)
    throw std::invalid_argument("min_eig_lower_bound: |y| != n");
  if (H.mat().has_nonfinite() || vec::has_nonfinite(y))
    throw std::invalid_argument("min_eig_lower_bound: nonfinite input");
  if (eps <= 0.0) eps = std::max(1e-12, 1e-9 * std::max(1.0, H.inf_norm()));

  double mu = 0.0;
  for (double yi : y) mu = std::min(mu, -yi);  // mu = -max_i{0, y_i}

  std::vector<cplx> ones;
  std::span<const cplx> v = v_init;
  if (v.empty()) {
    ones.assign(n, cplx(1.0, 0.0));
    v = ones;
  }
  std::vector<cplx> hv = H.mat() * v;
  double num = vec::dot(v, hv).real();
  double den = 0.0;
  for (int i = 0; i < n; ++i) {
    num -= y[i] * std::norm(v[i]);
    den += std::norm(v[i]);
  }
  double gamma = num / den;

  auto sym = std::make_shared<CholSymbolic>(H, fill_order(H.mat()));
  std::vector<double> shift(n);
  while (gamma - mu > eps) {
    const double alpha = 0.5 * (mu + gamma);
    for (int i = 0; i < n; ++i) shift[i] = y[i] + alpha;
    if (cholesky(H, shift, sym))
      mu = alpha;
    else
      gamma = alpha;
  }
  return mu;
}

}  // namespace psync
