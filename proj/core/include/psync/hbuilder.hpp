#pragma once

#include <span>
#include <vector>

#include "psync/measurement.hpp"
#include "psync/netmodel.hpp"
#include "psync/sparse.hpp"

namespace psync {

// The fixed-magnitude angle subproblem in phase-synchronization form:
// for every unit-modulus x,  cost(u .* x) = c + x^H H x.
struct PhaseSyncProblem {
  SparseHermitian H;
  double c = 0.0;            // constant from the square-voltage terms
  std::vector<double> u;     // per-unit magnitudes the problem was built at
  int reference_bus = 0;
};

// H_bus(u) = C^H diag(w) C with C = diag(u) Ybus diag(u) - diag(conj(b)).
// Missing bus measurements are encoded by w_k = 0 and skipped entirely.
SparseHermitian h_bus(const Network& net, const Admittances& adm, std::span<const double> u,
                      std::span<const cplx> b, std::span<const double> w);

// Both branch ends:
//   C_from = diag(D_from u) Yf diag(u) - diag(conj(b_from)) D_from
// where D_from picks the from-bus of each branch; the to side analogously.
SparseHermitian h_branch(const Network& net, const Admittances& adm, std::span<const double> u,
                         std::span<const cplx> b_from, std::span<const double> w_from,
                         std::span<const cplx> b_to, std::span<const double> w_to);

// Phasor terms referenced to `reference_bus` (x_ref = 1):
//   C = diag(u) - b e_ref^T.
SparseHermitian h_pmu(std::span<const double> u, std::span<const cplx> b,
                      std::span<const double> w, int reference_bus);

// Assembles H(u) = H_bus + H_from + H_to + H_pmu and the constant
// c(u) = sum_volt w |u_k^2 - b_k|^2 from one measurement set.
PhaseSyncProblem assemble(const Network& net, const Admittances& adm,
                          std::span<const double> u, const MeasurementSet& set,
                          int reference_bus = 0);

namespace detail {
// Gram product H = sum_r w_r row_r^H row_r over sparse rows; rows with
// w_r = 0 are skipped. Cancellations below prune_rel * max|entry| are pruned.
struct SparseRow {
  std::vector<int> cols;
  std::vector<cplx> vals;
};
SparseHermitian weighted_gram(int n, std::span<const SparseRow> rows,
                              std::span<const double> w, double prune_rel = 1e-14);
}  // namespace detail

}  // namespace psync
