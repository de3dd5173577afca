#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "psync/netmodel.hpp"
#include "psync/sparse.hpp"

namespace psync {

// Complex power kinds always represent a real/reactive pair carried by one
// record with a single shared weight.
enum class MeasKind { VmSq, BusPQ, BranchPQFrom, BranchPQTo, Phasor };

struct MeasurementKind {
  MeasKind kind = MeasKind::VmSq;
  int index = 0;  // internal bus index, or branch index for branch kinds
};

struct Measurement {
  MeasurementKind kind;
  cplx value;                   // per unit; VmSq uses the real part only
  double weight = 1.0;          // w_i >= 0; 0 encodes a missing measurement
  std::optional<double> sigma;  // noise standard deviation when known
};

// A set of measurements against one network. At most one record per
// (kind, index) is allowed.
class MeasurementSet {
 public:
  explicit MeasurementSet(const Network& net) : net_(&net) {}

  void add(Measurement m);
  std::span<const Measurement> items() const { return ms_; }
  const Network& net() const { return *net_; }
  size_t size() const { return ms_.size(); }

  std::optional<uint64_t> rng_seed;

 private:
  const Network* net_;
  std::vector<Measurement> ms_;
};

// One real-valued scalar inside a measurement record.
enum class ScalarPart { Re, Im };

// Exact measurement functions of the complex voltage vector:
//   VmSq          |v_k|^2
//   BusPQ         v_k conj((Ybus v)_k)
//   BranchPQFrom  v_alpha(k) conj((Yf v)_k)
//   BranchPQTo    v_beta(k) conj((Yt v)_k)
//   Phasor        v_k
cplx evaluate(const Network& net, const Admittances& adm, std::span<const cplx> v,
              MeasurementKind kind);

// The Hermitian matrix A with v^* A v equal to the requested real scalar of
// a quadratic measurement. Phasor kinds are linear and rejected.
SparseHermitian hermitian_A(const Network& net, const Admittances& adm,
                            MeasurementKind kind, ScalarPart part = ScalarPart::Re);

enum class WeightRule { Unit, InverseVariance };

// Exact evaluation plus independent Gaussian noise on every real scalar (a
// complex pair receives two independent draws). Deterministic per seed.
MeasurementSet simulate(const Network& net, const Admittances& adm,
                        std::span<const cplx> v_gnd, std::span<const MeasurementKind> plan,
                        double sigma_noise, uint64_t seed,
                        WeightRule weights = WeightRule::Unit);

// Sum over scalars of w_i (h_i(v) - b_i)^2; complex pairs contribute two
// squared residuals sharing one weight. Phasor residuals assume the state is
// referenced so that the reference-bus angle is zero.
double cost(const Network& net, const Admittances& adm, std::span<const cplx> v,
            const MeasurementSet& set);

// Measurement plans: lists of kinds in a fixed deterministic order.
std::vector<MeasurementKind> bus_pqv_plan(const Network& net);       // all VmSq + all BusPQ
std::vector<MeasurementKind> power_only_plan(const Network& net);    // bus + branch PQ
// Number of real scalar measurements in a plan (VmSq counts 1, pairs 2).
int plan_scalar_count(std::span<const MeasurementKind> plan);

// JSON array of {"type","index","value","weight","sigma"}. Split real or
// reactive records ("bus_p"/"bus_q", ...) are merged into pairs; a lone half
// or unequal weights within a pair fail validation.
MeasurementSet load_measurements_json(const Network& net, const std::string& json_text);
std::string save_measurements_json(const MeasurementSet& set);

}  // namespace psync
