#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "psync/estimator.hpp"
#include "psync/measurement.hpp"
#include "psync/netmodel.hpp"

namespace psync {

enum class GroundTruthMode { Case, Random, File };

// Ground-truth voltage profile. Case mode reads the stored Vm/Va columns and
// rejects flat profiles; Random draws Vm ~ U[0.95, 1.05] and Va ~ U[-30, 30]
// degrees with the reference angle fixed to zero.
std::vector<cplx> ground_truth(const Network& net, GroundTruthMode mode, uint64_t seed,
                               std::span<const cplx> file_profile = {}, int reference = 0);

struct TrialConfig {
  double sigma_noise = 0.0;
  double delta_u = 0.0;  // magnitude-error half-width; u0 = |v_gnd| + U[-du, du]
  int trials = 1;
  uint64_t seed = 0;
  InitMode init = InitMode::Spectral;
  GnMode gn_mode = GnMode::AnglesOnly;
  int iterations = 1;
  bool certify = false;
  std::vector<MeasurementKind> plan;  // empty selects the full PQV bus plan
  GroundTruthMode gt_mode = GroundTruthMode::Case;
  std::vector<cplx> gt_profile;
  int reference = 0;
  int workers = 0;  // 0 = hardware concurrency
};

struct TrialResult {
  int trial = -1;
  std::vector<double> ang_err_deg;  // per iteration, reference-aligned max
  std::vector<double> costs;
  std::vector<double> lbs;
  std::vector<double> cert_ratios;
  std::vector<double> deltas;
  bool failed = false;
  std::string error;
};

// Seeded Monte-Carlo trials: per trial, noise is drawn with a seed split
// from the master seed, magnitudes are perturbed when delta_u > 0, the
// estimator runs, and reference-aligned angular errors are recorded.
// Deterministic for a fixed master seed; trials run on a worker pool and are
// returned ordered by trial index. Per-trial failures are recorded, not fatal.
std::vector<TrialResult> run_trials(const Network& net, const Admittances& adm,
                                    const TrialConfig& cfg);

// max_k |wrap((theta_est_k - theta_est_ref) - (theta_gnd_k - theta_gnd_ref))|
// in degrees; invariant under global rotation of either input.
double max_angular_error_deg(std::span<const double> theta_est,
                             std::span<const double> theta_gnd, int reference);

struct FitSample {
  double sigma = 0.0;
  double delta_u = 0.0;
  double ang_err = 0.0;
};

// ang ~ beta1 sigma^p (one-variable) or beta1 sigma^p + beta2 du^q.
struct PowerLawFit {
  double beta1 = 0.0, p = 0.0;
  double beta2 = 0.0, q = 0.0;
  bool two_var = false;
  double evaluate(double sigma, double du = 0.0) const;
};

// Log-least-squares fit; requires >= 10 strictly positive samples.
PowerLawFit power_law_fit(std::span<const FitSample> samples, bool two_var);
// Scales the leading coefficients up until no sample exceeds the curve.
PowerLawFit adjust_envelope(PowerLawFit fit, std::span<const FitSample> samples);

// Fully specified three-bus problem: impedances j0.03/j0.08/j0.03 pu, zero
// charging, base 100 MVA, perfect magnitudes 0.85 pu, and the fixed noisy
// P/Q injection measurements. Bus 1 is the angle reference.
struct ThreeBusFixture {
  std::shared_ptr<Network> net;
  Admittances adm;
  MeasurementSet set;
  std::vector<double> u;
};
ThreeBusFixture three_bus_fixture();

struct TimingReport {
  int n = 0;
  int l = 0;
  int m = 0;  // real scalar power measurements in the plan
  double init_ms = 0.0;
  double cert_ms = 0.0;
  double per_iteration_ms = 0.0;
  double init_per_it_ratio = 0.0;
  double cert_per_it_ratio = 0.0;
  int trials = 0;
};

// Mean spectral-initialization, certification and Gauss-Newton per-iteration
// times over seeded trials. The full plan takes all bus PQ plus both-end
// branch PQ pairs; magnitudes are fixed at the ground truth.
TimingReport bench_timing(const Network& net, const Admittances& adm, double sigma_noise,
                          int trials, bool full_plan, uint64_t seed,
                          GroundTruthMode gt_mode = GroundTruthMode::Case);

// Aggregated sweep table with one row per (sigma, delta_u, iteration):
// columns sigma, delta_u, iter, median_ang_err_deg, max_ang_err_deg,
// median_cert, min_cert.
std::string sweep_csv(const Network& net, const Admittances& adm, TrialConfig base,
                      std::span<const double> sigma_grid);

double median(std::vector<double> v);
uint64_t split_seed(uint64_t master, uint64_t index);

}  // namespace psync
