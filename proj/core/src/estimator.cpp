#include "psync/estimator.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numbers>
#include <random>

#include <Eigen/Dense>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>
#include <nlohmann/json.hpp>

#include "psync/errors.hpp"

namespace psync {

namespace {

using SpMatD = Eigen::SparseMatrix<double>;
using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

struct LsSystem {
  Eigen::VectorXd r;               // weighted residuals
  std::vector<Eigen::Triplet<double>> jt;  // weighted Jacobian triplets
  int rows = 0;
  int cols = 0;
};

// Stacks sqrt(w_i) (h_i - b_i) and the analytic polar Jacobian over all real
// scalar measurements in set order (pairs contribute P then Q rows).
LsSystem build_ls(const Network& net, const Admittances& adm, const MeasurementSet& set,
                  const VoltageState& st, GnMode mode) {
  const int n = net.n();
  const int ref = st.reference;
  const int ncols = mode == GnMode::Full ? 2 * n - 1 : n - 1;
  auto theta_col = [&](int t) { return t < ref ? t : t - 1; };
  auto u_col = [&](int t) { return n - 1 + t; };

  std::vector<cplx> v = st.voltage();
  std::vector<cplx> i_bus = adm.Ybus * v;
  std::vector<cplx> i_f = adm.Yf * v;
  std::vector<cplx> i_t = adm.Yt * v;
  // row access: column k of the transpose is row k of the original
  SparseComplex YbusT = adm.Ybus.transpose();
  SparseComplex YfT = adm.Yf.transpose();
  SparseComplex YtT = adm.Yt.transpose();

  int rows = 0;
  for (const auto& m : set.items()) rows += m.kind.kind == MeasKind::VmSq ? 1 : 2;

  LsSystem ls;
  ls.rows = rows;
  ls.cols = ncols;
  ls.r.resize(rows);
  ls.jt.reserve(static_cast<size_t>(rows) * 8);

  int row = 0;
  for (const auto& m : set.items()) {
    const double sw = std::sqrt(m.weight);
    const int k = m.kind.index;
    switch (m.kind.kind) {
      case MeasKind::VmSq: {
        const double uk = st.u[k];
        ls.r(row) = sw * (uk * uk - m.value.real());
        if (mode == GnMode::Full) ls.jt.emplace_back(row, u_col(k), sw * 2.0 * uk);
        ++row;
        break;
      }
      case MeasKind::Phasor: {
        const double uk = st.u[k], ck = std::cos(st.theta[k]), sk = std::sin(st.theta[k]);
        ls.r(row) = sw * (uk * ck - m.value.real());
        ls.r(row + 1) = sw * (uk * sk - m.value.imag());
        if (k != ref) {
          ls.jt.emplace_back(row, theta_col(k), sw * (-uk * sk));
          ls.jt.emplace_back(row + 1, theta_col(k), sw * (uk * ck));
        }
        if (mode == GnMode::Full) {
          ls.jt.emplace_back(row, u_col(k), sw * ck);
          ls.jt.emplace_back(row + 1, u_col(k), sw * sk);
        }
        row += 2;
        break;
      }
      default: {
        // quadratic power measurement s = v_o conj((Y v)_k)
        const SparseComplex* YT = &YbusT;
        int owner = k;
        cplx ik = i_bus[k];
        if (m.kind.kind == MeasKind::BranchPQFrom) {
          YT = &YfT;
          owner = net.from_index(k);
          ik = i_f[k];
        } else if (m.kind.kind == MeasKind::BranchPQTo) {
          YT = &YtT;
          owner = net.to_index(k);
          ik = i_t[k];
        }
        const cplx s = v[owner] * std::conj(ik);
        ls.r(row) = sw * (s.real() - m.value.real());
        ls.r(row + 1) = sw * (s.imag() - m.value.imag());

        auto cp = YT->col_ptr();
        auto ri = YT->row_ind();
        auto va = YT->values();
        bool saw_owner = false;
        for (int p = cp[k]; p < cp[k + 1]; ++p) {
          const int t = ri[p];
          const cplx g = v[owner] * std::conj(va[p] * v[t]);
          cplx dth = cplx(0.0, -1.0) * g;
          cplx du = g / st.u[t];
          if (t == owner) {
            saw_owner = true;
            dth += cplx(0.0, 1.0) * s;
            du += s / st.u[owner];
          }
          if (t != ref) {
            ls.jt.emplace_back(row, theta_col(t), sw * dth.real());
            ls.jt.emplace_back(row + 1, theta_col(t), sw * dth.imag());
          }
          if (mode == GnMode::Full) {
            ls.jt.emplace_back(row, u_col(t), sw * du.real());
            ls.jt.emplace_back(row + 1, u_col(t), sw * du.imag());
          }
        }
        if (!saw_owner) {
          // Y(k, owner) structurally zero; the owner still enters through v_o.
          const cplx dth = cplx(0.0, 1.0) * s;
          const cplx du = s / st.u[owner];
          if (owner != ref) {
            ls.jt.emplace_back(row, theta_col(owner), sw * dth.real());
            ls.jt.emplace_back(row + 1, theta_col(owner), sw * dth.imag());
          }
          if (mode == GnMode::Full) {
            ls.jt.emplace_back(row, u_col(owner), sw * du.real());
            ls.jt.emplace_back(row + 1, u_col(owner), sw * du.imag());
          }
        }
        row += 2;
        break;
      }
    }
  }
  if (!ls.r.allFinite()) throw NumericalError("gauss-newton: nonfinite residual");
  return ls;
}

Eigen::VectorXd solve_normal_equations(const SpMatD& J, const Eigen::VectorXd& rhs,
                                       double damping) {
  SpMatD N = (SpMatD(J.transpose()) * J).pruned();
  if (damping > 0.0) {
    SpMatD I(N.rows(), N.cols());
    I.setIdentity();
    N += damping * I;
  }
  Eigen::SimplicialLDLT<SpMatD> ldlt(N);
  bool deficient = ldlt.info() != Eigen::Success;
  double dmin = 0.0, dmax = 0.0;
  if (!deficient) {
    Eigen::VectorXd D = ldlt.vectorD();
    dmin = D.minCoeff();
    dmax = D.maxCoeff();
    deficient = dmin <= 0.0 || dmin <= 1e-14 * dmax;
  }
  if (deficient && damping == 0.0) {
    double smin = 0.0;
    if (N.cols() <= 1500) {
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Eigen::MatrixXd(N),
                                                        Eigen::EigenvaluesOnly);
      smin = std::sqrt(std::max(0.0, es.eigenvalues().minCoeff()));
    } else {
      smin = std::sqrt(std::max(0.0, dmin));
    }
    throw NumericalError(
        "gauss-newton: normal equations rank-deficient or ill-conditioned "
        "(smallest singular value of the weighted Jacobian ~ " +
        std::to_string(smin) + ")");
  }
  Eigen::VectorXd g = J.transpose() * rhs;
  Eigen::VectorXd d = ldlt.solve(g);
  d += ldlt.solve(g - N * d);  // one round of iterative refinement
  return d;
}

VoltageState apply_step(const VoltageState& st, const Eigen::VectorXd& d, GnMode mode) {
  const int n = static_cast<int>(st.u.size());
  const int ref = st.reference;
  VoltageState out = st;
  for (int t = 0; t < n; ++t) {
    if (t == ref) continue;
    out.theta[t] += d(t < ref ? t : t - 1);
  }
  if (mode == GnMode::Full)
    for (int t = 0; t < n; ++t) {
      out.u[t] += d(n - 1 + t);
      if (!(out.u[t] > 0.0))
        throw NumericalError("gauss-newton: step drove a magnitude nonpositive (bus " +
                             std::to_string(t) + "); consider damping");
    }
  return out;
}

}  // namespace

std::vector<cplx> VoltageState::voltage() const {
  std::vector<cplx> v(u.size());
  for (size_t i = 0; i < u.size(); ++i) v[i] = std::polar(u[i], theta[i]);
  return v;
}

std::vector<cplx> VoltageState::unit_phasors() const {
  std::vector<cplx> x(theta.size());
  for (size_t i = 0; i < theta.size(); ++i) x[i] = std::polar(1.0, theta[i]);
  return x;
}

double Certificate::ratio() const {
  if (cost_at_x == 0.0) return 1.0;
  return lb / cost_at_x;
}

SpectralInit spectral_init(const PhaseSyncProblem& prob, uint64_t seed, double eig_tol,
                           int eig_maxit) {
  SpectralInit out;
  out.eig = min_eigvec(prob.H, 0.0, eig_tol, eig_maxit, seed);
  const auto& v = out.eig.vector;
  out.x0.resize(v.size());
  for (size_t i = 0; i < v.size(); ++i) {
    const double a = std::abs(v[i]);
    out.x0[i] = a < 1e-14 ? cplx(1.0, 0.0) : v[i] / a;
  }
  const cplx phase = std::conj(out.x0[prob.reference_bus]);
  for (auto& xi : out.x0) xi *= phase;
  out.x0[prob.reference_bus] = 1.0;
  return out;
}

VoltageState gn_step(const Network& net, const Admittances& adm, const MeasurementSet& set,
                     const VoltageState& state, GnMode mode, bool lm_damping) {
  if (static_cast<int>(state.u.size()) != net.n() ||
      static_cast<int>(state.theta.size()) != net.n())
    throw std::invalid_argument("gn_step: state dimension mismatch");

  LsSystem ls = build_ls(net, adm, set, state, mode);
  SpMatD J(ls.rows, ls.cols);
  J.setFromTriplets(ls.jt.begin(), ls.jt.end());

  if (!lm_damping) {
    Eigen::VectorXd d = solve_normal_equations(J, -ls.r, 0.0);
    return apply_step(state, d, mode);
  }

  // Levenberg-Marquardt: accept the first damped step that lowers the
  // residual sum, escalating the damping otherwise.
  const double cost0 = ls.r.squaredNorm();
  SpMatD N = (SpMatD(J.transpose()) * J).pruned();
  double lambda = 1e-6 * N.diagonal().mean();
  for (int attempt = 0; attempt < 12; ++attempt) {
    Eigen::VectorXd d;
    try {
      d = solve_normal_equations(J, -ls.r, lambda);
    } catch (const NumericalError&) {
      lambda = std::max(lambda * 10.0, 1e-12);
      continue;
    }
    VoltageState trial = apply_step(state, d, mode);
    const double cost1 = build_ls(net, adm, set, trial, mode).r.squaredNorm();
    if (cost1 < cost0) return trial;
    lambda = std::max(lambda * 10.0, 1e-12);
  }
  throw NumericalError("gauss-newton: damping failed to produce a descent step");
}

Certificate certify(const PhaseSyncProblem& prob, std::span<const cplx> x, double eps) {
  const int n = prob.H.n();
  if (static_cast<int>(x.size()) != n) throw std::invalid_argument("certify: |x| != n");
  for (const cplx& xi : x)
    if (std::abs(std::abs(xi) - 1.0) > 1e-9)
      throw std::invalid_argument("certify: x is not unit-modulus");

  std::vector<cplx> hx = prob.H.mat() * x;
  Certificate cert;
  cert.y.resize(n);
  double ysum = 0.0;
  for (int i = 0; i < n; ++i) {
    cert.y[i] = (std::conj(x[i]) * hx[i]).real();
    ysum += cert.y[i];
  }
  cert.cost_at_x = vec::dot(x, hx).real();
  if (std::abs(ysum - cert.cost_at_x) > 1e-9 * std::max(1.0, std::abs(cert.cost_at_x)))
    throw NumericalError("certify: 1^T y != x^H H x beyond tolerance");

  if (eps <= 0.0) {
    eps = std::max(1e-12, 1e-9 * std::max(1.0, prob.H.inf_norm()));
    if (cert.cost_at_x > 0.0)
      eps = std::max(1e-12, std::min(eps, 1e-7 * cert.cost_at_x / n));
  }
  cert.mu = min_eig_lower_bound(prob.H, cert.y, eps, x);
  cert.lb = ysum + n * std::min(0.0, cert.mu);
  cert.delta = n * std::max(0.0, -cert.mu);
  return cert;
}

Diagnostics diagnostics(const Network& net, const Admittances& adm, const MeasurementSet& set,
                        const VoltageState& state) {
  const int n = net.n();
  LsSystem ls = build_ls(net, adm, set, state, GnMode::Full);
  SpMatD J(ls.rows, ls.cols);
  J.setFromTriplets(ls.jt.begin(), ls.jt.end());
  SpMatD N = (SpMatD(J.transpose()) * J).pruned();

  Diagnostics d;
  if (n <= 2000) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Eigen::MatrixXd(N),
                                                      Eigen::EigenvaluesOnly);
    d.lambda = es.eigenvalues().minCoeff();
  } else {
    std::vector<Triplet> tr;
    tr.reserve(N.nonZeros());
    for (int c = 0; c < N.outerSize(); ++c)
      for (SpMatD::InnerIterator it(N, c); it; ++it)
        tr.push_back({static_cast<int>(it.row()), c, cplx(it.value(), 0.0)});
    SparseHermitian Nh = SparseHermitian::from_triplets(N.rows(), std::move(tr));
    d.lambda = min_eigvec(Nh, 0.0, 1e-10, 1000, 7).rayleigh;
  }

  // M = sum_i w_i [h_i - b_i] A_i over the quadratic scalars; a complex pair
  // with residual c = (h - b) contributes w (conj(c) M + c M^H)/2 where M is
  // the single-column matrix behind its A_P/A_Q split.
  std::vector<cplx> v = state.voltage();
  std::vector<cplx> i_bus = adm.Ybus * v;
  std::vector<cplx> i_f = adm.Yf * v;
  std::vector<cplx> i_t = adm.Yt * v;
  SparseComplex YbusT = adm.Ybus.transpose();
  SparseComplex YfT = adm.Yf.transpose();
  SparseComplex YtT = adm.Yt.transpose();

  std::vector<Triplet> mt;
  for (const auto& m : set.items()) {
    const int k = m.kind.index;
    switch (m.kind.kind) {
      case MeasKind::VmSq: {
        const double r = std::norm(v[k]) - m.value.real();
        if (m.weight * r != 0.0) mt.push_back({k, k, m.weight * r});
        break;
      }
      case MeasKind::Phasor:
        break;  // linear: no quadratic form behind it
      default: {
        const SparseComplex* YT = &YbusT;
        int col = k;
        cplx ik = i_bus[k];
        if (m.kind.kind == MeasKind::BranchPQFrom) {
          YT = &YfT;
          col = net.from_index(k);
          ik = i_f[k];
        } else if (m.kind.kind == MeasKind::BranchPQTo) {
          YT = &YtT;
          col = net.to_index(k);
          ik = i_t[k];
        }
        const cplx c = v[col] * std::conj(ik) - m.value;
        auto cp = YT->col_ptr();
        auto ri = YT->row_ind();
        auto va = YT->values();
        for (int p = cp[k]; p < cp[k + 1]; ++p) {
          const int t = ri[p];
          const cplx mk = std::conj(va[p]);  // M(t, col)
          mt.push_back({t, col, 0.5 * m.weight * std::conj(c) * mk});
          mt.push_back({col, t, 0.5 * m.weight * c * std::conj(mk)});
        }
        break;
      }
    }
  }
  SparseHermitian M = SparseHermitian::from_triplets(n, std::move(mt));

  std::mt19937_64 rng(1234);
  std::normal_distribution<double> gauss;
  std::vector<cplx> z(n);
  for (auto& zi : z) zi = cplx(gauss(rng), gauss(rng));
  double nz = vec::norm2(z);
  double sigma = 0.0;
  if (nz > 0.0 && M.mat().nnz() > 0) {
    vec::scale(z, 1.0 / nz);
    double prev = -1.0;
    for (int it = 0; it < 2000; ++it) {
      std::vector<cplx> mz = M.mat() * z;
      sigma = vec::norm2(mz);
      if (sigma == 0.0) break;
      vec::scale(mz, 1.0 / sigma);
      z = std::move(mz);
      if (std::abs(sigma - prev) <= 1e-10 * std::max(1.0, sigma)) break;
      prev = sigma;
    }
  }
  d.sigma = 2.0 * sigma;
  d.guaranteed = d.lambda > 0.0 && d.sigma < d.lambda / 2.0;
  return d;
}

EstimateReport estimate(const Network& net, const Admittances& adm, const MeasurementSet& set,
                        const EstimateConfig& config) {
  const int n = net.n();
  if (static_cast<int>(config.u0.size()) != n)
    throw std::invalid_argument("estimate: config.u0 must have one magnitude per bus");
  if (config.reference < 0 || config.reference >= n)
    throw std::out_of_range("estimate: reference bus out of range");

  EstimateReport rep;
  auto t_total = Clock::now();

  auto t0 = Clock::now();
  PhaseSyncProblem prob = assemble(net, adm, config.u0, set, config.reference);
  rep.timing_ms["assemble"] = ms_since(t0);

  VoltageState state;
  state.u = config.u0;
  state.theta.assign(n, 0.0);
  state.reference = config.reference;

  t0 = Clock::now();
  if (config.init == InitMode::Spectral) {
    SpectralInit init = spectral_init(prob, config.seed, config.eig_tol, config.eig_maxit);
    rep.init_converged = init.eig.converged;
    for (int i = 0; i < n; ++i) state.theta[i] = std::arg(init.x0[i]);
    state.theta[config.reference] = 0.0;
  } else if (config.init == InitMode::File) {
    if (static_cast<int>(config.x_init.size()) != n)
      throw std::invalid_argument("estimate: init=File needs x_init");
    const cplx phase = std::abs(config.x_init[config.reference]) > 0.0
                           ? std::conj(config.x_init[config.reference]) /
                                 std::abs(config.x_init[config.reference])
                           : cplx(1.0, 0.0);
    for (int i = 0; i < n; ++i) state.theta[i] = std::arg(config.x_init[i] * phase);
    state.theta[config.reference] = 0.0;
  }
  rep.timing_ms["init"] = ms_since(t0);

  double cert_ms = 0.0;
  auto record = [&](const VoltageState& st, const PhaseSyncProblem& pr) {
    IterationRecord rec;
    rec.theta = st.theta;
    rec.u = st.u;
    std::vector<cplx> x = st.unit_phasors();
    rec.cost = pr.H.quad_form(x);
    if (config.certify) {
      auto tc = Clock::now();
      rec.cert = certify(pr, x);
      cert_ms += ms_since(tc);
    }
    rep.iterations.push_back(std::move(rec));
  };
  record(state, prob);

  double gn_ms = 0.0;
  for (int it = 1; it <= config.iterations; ++it) {
    auto tg = Clock::now();
    VoltageState next = gn_step(net, adm, set, state, config.gn_mode, config.lm_damping);
    gn_ms += ms_since(tg);
    if (config.gn_mode == GnMode::Full)
      prob = assemble(net, adm, next.u, set, config.reference);

    double dtheta = 0.0;
    for (int i = 0; i < n; ++i) dtheta = std::max(dtheta, std::abs(next.theta[i] - state.theta[i]));
    state = std::move(next);
    record(state, prob);

    const double c0 = rep.iterations[rep.iterations.size() - 2].cost;
    const double c1 = rep.iterations.back().cost;
    if (dtheta < 1e-10 || std::abs(c0 - c1) < 1e-12 * std::max(1.0, c0)) {
      rep.converged = true;
      break;
    }
  }
  rep.timing_ms["gn_total"] = gn_ms;
  if (!rep.iterations.empty() && rep.iterations.size() > 1)
    rep.timing_ms["gn_per_iteration"] = gn_ms / (static_cast<double>(rep.iterations.size()) - 1);
  if (config.certify) rep.timing_ms["certify_total"] = cert_ms;
  rep.timing_ms["total"] = ms_since(t_total);
  return rep;
}

std::string report_to_json(const EstimateReport& report, const Diagnostics* diag) {
  using nlohmann::json;
  constexpr double kRadToDeg = 180.0 / std::numbers::pi;
  json root;
  root["iterations"] = json::array();
  for (const auto& it : report.iterations) {
    json rec;
    json theta = json::array();
    for (double t : it.theta) theta.push_back(t * kRadToDeg);
    rec["theta_deg"] = std::move(theta);
    rec["u"] = it.u;
    rec["cost"] = it.cost;
    if (it.cert) {
      rec["lb"] = it.cert->lb;
      rec["cert_ratio"] = it.cert->ratio();
      rec["delta"] = it.cert->delta;
    }
    if (it.ang_err_deg) rec["ang_err_deg"] = *it.ang_err_deg;
    root["iterations"].push_back(std::move(rec));
  }
  if (diag) {
    root["diagnostics"] = {
        {"lambda", diag->lambda}, {"sigma", diag->sigma}, {"guaranteed", diag->guaranteed}};
  }
  root["timing_ms"] = report.timing_ms;
  root["converged"] = report.converged;
  return root.dump(2);
}

}  // namespace psync
