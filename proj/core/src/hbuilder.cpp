#include "psync/hbuilder.hpp"

#include <cmath>
#include <stdexcept>

#include "psync/errors.hpp"

namespace psync {

namespace detail {

SparseHermitian weighted_gram(int n, std::span<const SparseRow> rows,
                              std::span<const double> w, double prune_rel) {
  size_t budget = 0;
  for (size_t r = 0; r < rows.size(); ++r)
    if (w[r] > 0.0) budget += rows[r].cols.size() * rows[r].cols.size();
  std::vector<Triplet> tr;
  tr.reserve(budget);
  for (size_t r = 0; r < rows.size(); ++r) {
    if (w[r] == 0.0) continue;
    const auto& row = rows[r];
    for (size_t a = 0; a < row.cols.size(); ++a) {
      const cplx ca = std::conj(row.vals[a]) * w[r];
      for (size_t bidx = 0; bidx < row.cols.size(); ++bidx)
        tr.push_back({row.cols[a], row.cols[bidx], ca * row.vals[bidx]});
    }
  }
  return SparseHermitian::from_triplets(n, std::move(tr), prune_rel);
}

namespace {

void check_u(std::span<const double> u) {
  for (double ui : u)
    if (!(ui > 0.0)) throw std::invalid_argument("magnitude vector must be strictly positive");
}

// Rows of C = diag(d) Y diag(u) - diag(conj(b)) D, where row k of D is
// e_{sel(k)}^T and d_k = u_{sel(k)}.
std::vector<SparseRow> scaled_rows(const SparseComplex& Y, std::span<const double> u,
                                   std::span<const cplx> b, std::span<const int> sel) {
  const int nrows = Y.rows();
  std::vector<SparseRow> rows(nrows);
  auto cp = Y.col_ptr();
  auto ri = Y.row_ind();
  auto va = Y.values();
  for (int c = 0; c < Y.cols(); ++c)
    for (int p = cp[c]; p < cp[c + 1]; ++p) {
      const int k = ri[p];
      rows[k].cols.push_back(c);
      rows[k].vals.push_back(u[sel[k]] * va[p] * u[c]);
    }
  for (int k = 0; k < nrows; ++k) {
    const int j = sel[k];
    const cplx bb = std::conj(b[k]);
    auto& row = rows[k];
    bool hit = false;
    for (size_t a = 0; a < row.cols.size(); ++a)
      if (row.cols[a] == j) {
        row.vals[a] -= bb;
        hit = true;
        break;
      }
    if (!hit && bb != cplx{}) {
      row.cols.push_back(j);
      row.vals.push_back(-bb);
    }
  }
  return rows;
}

}  // namespace
}  // namespace detail

SparseHermitian h_bus(const Network& net, const Admittances& adm, std::span<const double> u,
                      std::span<const cplx> b, std::span<const double> w) {
  detail::check_u(u);
  const int n = net.n();
  if (static_cast<int>(b.size()) != n || static_cast<int>(w.size()) != n)
    throw std::invalid_argument("h_bus: dimension mismatch");
  std::vector<int> sel(n);
  for (int i = 0; i < n; ++i) sel[i] = i;
  auto rows = detail::scaled_rows(adm.Ybus, u, b, sel);
  return detail::weighted_gram(n, rows, w);
}

SparseHermitian h_branch(const Network& net, const Admittances& adm, std::span<const double> u,
                         std::span<const cplx> b_from, std::span<const double> w_from,
                         std::span<const cplx> b_to, std::span<const double> w_to) {
  detail::check_u(u);
  const int n = net.n();
  const int l = net.l();
  if (static_cast<int>(b_from.size()) != l || static_cast<int>(b_to.size()) != l ||
      static_cast<int>(w_from.size()) != l || static_cast<int>(w_to.size()) != l)
    throw std::invalid_argument("h_branch: dimension mismatch");

  std::vector<int> sel_f(l), sel_t(l);
  for (int k = 0; k < l; ++k) {
    sel_f[k] = net.from_index(k);
    sel_t[k] = net.to_index(k);
  }
  auto rows = detail::scaled_rows(adm.Yf, u, b_from, sel_f);
  auto rows_to = detail::scaled_rows(adm.Yt, u, b_to, sel_t);
  rows.insert(rows.end(), rows_to.begin(), rows_to.end());
  std::vector<double> w(w_from.begin(), w_from.end());
  w.insert(w.end(), w_to.begin(), w_to.end());
  return detail::weighted_gram(n, rows, w);
}

SparseHermitian h_pmu(std::span<const double> u, std::span<const cplx> b,
                      std::span<const double> w, int reference_bus) {
  detail::check_u(u);
  const int n = static_cast<int>(u.size());
  if (static_cast<int>(b.size()) != n || static_cast<int>(w.size()) != n)
    throw std::invalid_argument("h_pmu: dimension mismatch");
  if (reference_bus < 0 || reference_bus >= n)
    throw std::out_of_range("h_pmu: reference bus out of range");
  std::vector<detail::SparseRow> rows(n);
  for (int i = 0; i < n; ++i) {
    if (i == reference_bus) {
      rows[i].cols.push_back(i);
      rows[i].vals.push_back(u[i] - b[i]);
    } else {
      rows[i].cols.push_back(i);
      rows[i].vals.push_back(u[i]);
      rows[i].cols.push_back(reference_bus);
      rows[i].vals.push_back(-b[i]);
    }
  }
  return detail::weighted_gram(n, rows, w);
}

PhaseSyncProblem assemble(const Network& net, const Admittances& adm,
                          std::span<const double> u, const MeasurementSet& set,
                          int reference_bus) {
  detail::check_u(u);
  const int n = net.n();
  const int l = net.l();
  if (static_cast<int>(u.size()) != n) throw std::invalid_argument("assemble: |u| != n");

  std::vector<cplx> b_bus(n), b_from(l), b_to(l), b_pmu(n);
  std::vector<double> w_bus(n, 0.0), w_from(l, 0.0), w_to(l, 0.0), w_pmu(n, 0.0);
  double c = 0.0;
  bool any_bus = false, any_branch = false, any_pmu = false;

  for (const auto& m : set.items()) {
    const int k = m.kind.index;
    switch (m.kind.kind) {
      case MeasKind::VmSq: {
        const double r = u[k] * u[k] - m.value.real();
        c += m.weight * r * r;
        break;
      }
      case MeasKind::BusPQ:
        b_bus[k] = m.value;
        w_bus[k] = m.weight;
        any_bus =  any_bus || m.weight > 0.0;
        break;
      case MeasKind::BranchPQFrom:
        b_from[k] = m.value;
        w_from[k] = m.weight;
        any_branch = any_branch || m.weight > 0.0;
        break;
      case MeasKind::BranchPQTo:
        b_to[k] = m.value;
        w_to[k] = m.weight;
        any_branch = any_branch || m.weight > 0.0;
        break;
      case MeasKind::Phasor:
        b_pmu[k] = m.value;
        w_pmu[k] = m.weight;
        any_pmu = any_pmu || m.weight > 0.0;
        break;
    }
  }

  SparseHermitian H(SparseComplex(n, n));
  if (any_bus) H = SparseHermitian::add(H, h_bus(net, adm, u, b_bus, w_bus));
  if (any_branch)
    H = SparseHermitian::add(H, h_branch(net, adm, u, b_from, w_from, b_to, w_to));
  if (any_pmu) H = SparseHermitian::add(H, h_pmu(u, b_pmu, w_pmu, reference_bus));

  PhaseSyncProblem prob;
  prob.H = std::move(H);
  prob.c = c;
  prob.u.assign(u.begin(), u.end());
  prob.reference_bus = reference_bus;
  return prob;
}

}  // namespace psync
