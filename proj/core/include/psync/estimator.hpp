#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "psync/hbuilder.hpp"
#include "psync/measurement.hpp"
#include "psync/netmodel.hpp"
#include "psync/sparsela.hpp"

namespace psync {

// Polar state. theta[reference] is held at exactly zero.
struct VoltageState {
  std::vector<double> u;      // per-unit magnitudes, strictly positive
  std::vector<double> theta;  // radians
  int reference = 0;

  std::vector<cplx> voltage() const;       // u_i e^{j theta_i}
  std::vector<cplx> unit_phasors() const;  // e^{j theta_i}
};

// Dual certificate for a feasible x of min x^H H x s.t. |x_i| = 1:
//   lb = 1^T y + n min{0, mu} <= opt,  delta = n max{0, -mu}.
struct Certificate {
  std::vector<double> y;
  double mu = 0.0;
  double lb = 0.0;
  double delta = 0.0;
  double cost_at_x = 0.0;

  // lb / cost, the certified global-optimality ratio (<= 1).
  double ratio() const;
};

struct SpectralInit {
  std::vector<cplx> x0;  // unit modulus, rotated so x0[reference] = 1
  EigResult eig;
};

// Projection of the minimum eigenvector of H onto the unit-modulus set.
// Entries below 1e-14 in magnitude project to 1.
SpectralInit spectral_init(const PhaseSyncProblem& prob, uint64_t seed = 0,
                           double eig_tol = 1e-8, int eig_maxit = 500);

enum class GnMode { AnglesOnly, Full };

// One Gauss-Newton update of theta (and u when mode is Full) with the
// reference angle eliminated. Residuals stack sqrt(w_i)(h_i - b_i) over all
// real scalar measurements; the normal equations are solved sparsely with
// one step of iterative refinement. Rank-deficient or ill-conditioned
// systems throw NumericalError naming the smallest singular value.
VoltageState gn_step(const Network& net, const Admittances& adm, const MeasurementSet& set,
                     const VoltageState& state, GnMode mode, bool lm_damping = false);

// Theorem-2 certificate at a unit-modulus x: y = Re{conj(x) .* (Hx)}, mu
// from the inverse bisection. eps <= 0 selects a tolerance fine enough to
// resolve duality gaps near 1e-7 of the cost.
Certificate certify(const PhaseSyncProblem& prob, std::span<const cplx> x, double eps = 0.0);

// Local-convergence diagnostics: lambda = lambda_min(J^T J) at the state,
// sigma = 2 sigma_max(sum_i w_i [h_i - b_i] A_i), guaranteed = sigma < lambda/2.
struct Diagnostics {
  double lambda = 0.0;
  double sigma = 0.0;
  bool guaranteed = false;
};
Diagnostics diagnostics(const Network& net, const Admittances& adm, const MeasurementSet& set,
                        const VoltageState& state);

enum class InitMode { Spectral, Cold, File };

struct EstimateConfig {
  InitMode init = InitMode::Spectral;
  GnMode gn_mode = GnMode::AnglesOnly;
  int iterations = 1;
  bool certify = false;         // certificate at every iterate, including 0
  bool lm_damping = false;
  std::vector<double> u0;       // initial magnitudes (required)
  std::vector<cplx> x_init;     // initial phasors when init == File
  int reference = 0;
  uint64_t seed = 0;
  double eig_tol = 1e-8;
  int eig_maxit = 500;
};

struct IterationRecord {
  std::vector<double> theta;  // radians
  std::vector<double> u;
  double cost = 0.0;          // x^H H(u) x
  std::optional<Certificate> cert;
  std::optional<double> ang_err_deg;  // filled by the harness when truth is known
};

struct EstimateReport {
  std::vector<IterationRecord> iterations;  // index = iteration number
  bool converged = false;
  bool init_converged = true;
  std::map<std::string, double> timing_ms;
};

// init -> iterate -> certify-per-iteration. Cold start sets theta = 0.
// Full mode reassembles H(u) after every magnitude update.
EstimateReport estimate(const Network& net, const Admittances& adm, const MeasurementSet& set,
                        const EstimateConfig& config);

// JSON rendering of a report per the documented schema.
std::string report_to_json(const EstimateReport& report, const Diagnostics* diag = nullptr);

}  // namespace psync
