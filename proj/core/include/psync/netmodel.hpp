#pragma once

#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "psync/sparse.hpp"

namespace psync {

struct BusRecord {
  int id = 0;             // external bus id, unique
  double Gs = 0.0;        // shunt conductance, MW at 1 pu voltage
  double Bs = 0.0;        // shunt susceptance, MVAr at 1 pu voltage
  double Vm = 1.0;        // stored voltage magnitude, pu
  double Va = 0.0;        // stored voltage angle, degrees
  double base_kV = 0.0;
};

struct BranchRecord {
  int from_bus = 0;       // external ids
  int to_bus = 0;
  double r = 0.0;         // series resistance, pu
  double x = 0.0;         // series reactance, pu
  double b = 0.0;         // total charging susceptance, pu
  double tau = 1.0;       // tap ratio (1 when the case stores 0)
  double shift_deg = 0.0; // phase shift, degrees
  int from_idx = -1;      // resolved internal indices
  int to_idx = -1;
};

// Parsed network. Bus ids are remapped to contiguous 0-based internal
// indices in bus-table order; out-of-service branches are dropped before
// counting l. Parallel branches are allowed.
struct Network {
  std::vector<BusRecord> buses;
  std::vector<BranchRecord> branches;  // in-service only
  double base_MVA = 100.0;
  std::unordered_map<int, int> id_to_index;

  int n() const { return static_cast<int>(buses.size()); }
  int l() const { return static_cast<int>(branches.size()); }

  int index_of(int bus_id) const;  // throws ValidationError for unknown ids
  int from_index(int k) const { return branches[k].from_idx; }
  int to_index(int k) const { return branches[k].to_idx; }

  // Voltage phasors from the stored Vm/Va columns.
  std::vector<cplx> case_voltage() const;
  // True when the stored angle profile carries no information (all equal).
  bool flat_profile() const;

  // Validates endpoint resolution, (r,x) != (0,0), Vm > 0, connectivity of
  // the in-service graph. Throws ValidationError.
  void validate() const;
};

// Parses a MATPOWER-style case: baseMVA, bus and branch tables. Generator,
// cost and any other tables are read and discarded. Throws ParseError with
// a line number for malformed rows and ValidationError for model defects.
Network parse_case(std::string_view text);
Network parse_case_file(const std::string& path);

struct Admittances {
  SparseComplex Ybus;  // n x n
  SparseComplex Yf;    // l x n, row k lives on columns alpha(k), beta(k)
  SparseComplex Yt;    // l x n
};

// Standard pi-model branch admittances plus shunt diagonal:
//   y_s = 1/(r + jx), t = tau e^{j shift}
//   y_ff = (y_s + jb/2)/(t conj(t)),  y_ft = -y_s/conj(t)
//   y_tf = -y_s/t,                    y_tt = y_s + jb/2
//   Ybus = Df^T Yf + Dt^T Yt + diag((Gs + jBs)/base_MVA)
Admittances build_admittances(const Network& net);

}  // namespace psync
