#include "psync/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>
#include <thread>

#include <Eigen/Dense>

#include "psync/errors.hpp"
#include "psync/hbuilder.hpp"
#include "psync/sparsela.hpp"

namespace psync {

namespace {

constexpr double kRadToDeg = 180.0 / std::numbers::pi;
constexpr double kDegToRad = std::numbers::pi / 180.0;

double wrap_pi(double a) {
  while (a > std::numbers::pi) a -= 2.0 * std::numbers::pi;
  while (a <= -std::numbers::pi) a += 2.0 * std::numbers::pi;
  return a;
}

}  // namespace

uint64_t split_seed(uint64_t master, uint64_t index) {
  // splitmix64 over the (master, index) pair
  uint64_t z = master + 0x9E3779B97F4A7C15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const size_t h = v.size() / 2;
  return v.size() % 2 ? v[h] : 0.5 * (v[h - 1] + v[h]);
}

std::vector<cplx> ground_truth(const Network& net, GroundTruthMode mode, uint64_t seed,
                               std::span<const cplx> file_profile, int reference) {
  const int n = net.n();
  switch (mode) {
    case GroundTruthMode::Case: {
      if (net.flat_profile())
        throw ValidationError(
            "stored case voltage profile is flat; use the random or file ground-truth mode");
      return net.case_voltage();
    }
    case GroundTruthMode::Random: {
      std::mt19937_64 rng(seed);
      std::uniform_real_distribution<double> vm(0.95, 1.05);
      std::uniform_real_distribution<double> va(-30.0, 30.0);
      std::vector<cplx> v(n);
      for (int i = 0; i < n; ++i) {
        const double m = vm(rng);
        const double a = va(rng);
        v[i] = std::polar(m, i == reference ? 0.0 : a * kDegToRad);
      }
      return v;
    }
    case GroundTruthMode::File: {
      if (static_cast<int>(file_profile.size()) != n)
        throw ValidationError("ground-truth profile length != n");
      return {file_profile.begin(), file_profile.end()};
    }
  }
  throw std::logic_error("unreachable");
}

double max_angular_error_deg(std::span<const double> theta_est,
                             std::span<const double> theta_gnd, int reference) {
  double worst = 0.0;
  for (size_t k = 0; k < theta_est.size(); ++k) {
    const double d = wrap_pi((theta_est[k] - theta_est[reference]) -
                             (theta_gnd[k] - theta_gnd[reference]));
    worst = std::max(worst, std::abs(d));
  }
  return worst * kRadToDeg;
}

namespace {

TrialResult one_trial(const Network& net, const Admittances& adm, const TrialConfig& cfg,
                      std::span<const cplx> v_gnd, std::span<const MeasurementKind> power_plan,
                      std::span<const MeasurementKind> exact_plan,
                      std::span<const double> theta_gnd, int trial) {
  TrialResult res;
  res.trial = trial;
  try {
    const uint64_t seed = split_seed(cfg.seed, static_cast<uint64_t>(trial));
    MeasurementSet set = simulate(net, adm, v_gnd, power_plan, cfg.sigma_noise, seed);
    if (!exact_plan.empty()) {
      MeasurementSet exact = simulate(net, adm, v_gnd, exact_plan, 0.0, seed);
      for (const auto& m : exact.items()) set.add(m);
    }

    EstimateConfig ec;
    ec.init = cfg.init;
    ec.gn_mode = cfg.gn_mode;
    ec.iterations = cfg.iterations;
    ec.certify = cfg.certify;
    ec.reference = cfg.reference;
    ec.seed = seed;
    ec.u0.resize(net.n());
    for (int i = 0; i < net.n(); ++i) ec.u0[i] = std::abs(v_gnd[i]);
    if (cfg.delta_u > 0.0) {
      std::mt19937_64 rng(split_seed(seed, 0x75u));
      std::uniform_real_distribution<double> eu(-cfg.delta_u, cfg.delta_u);
      for (int i = 0; i < net.n(); ++i) ec.u0[i] = std::max(1e-6, ec.u0[i] + eu(rng));
    }

    EstimateReport rep = estimate(net, adm, set, ec);
    for (const auto& it : rep.iterations) {
      res.ang_err_deg.push_back(max_angular_error_deg(it.theta, theta_gnd, cfg.reference));
      res.costs.push_back(it.cost);
      if (it.cert) {
        res.lbs.push_back(it.cert->lb);
        res.cert_ratios.push_back(it.cert->ratio());
        res.deltas.push_back(it.cert->delta);
      }
    }
  } catch (const std::exception& e) {
    res.failed = true;
    res.error = e.what();
  }
  return res;
}

}  // namespace

std::vector<TrialResult> run_trials(const Network& net, const Admittances& adm,
                                    const TrialConfig& cfg) {
  if (cfg.trials < 1) throw std::invalid_argument("run_trials: trials must be >= 1");
  if (cfg.sigma_noise < 0.0 || cfg.delta_u < 0.0)
    throw std::invalid_argument("run_trials: sigma and delta_u must be nonnegative");

  std::vector<MeasurementKind> plan =
      cfg.plan.empty() ? bus_pqv_plan(net) : cfg.plan;
  // Power kinds carry the trial noise; magnitude (and phasor) records stay
  // exact, matching the perfect-magnitude measurement protocol.
  std::vector<MeasurementKind> power_plan, exact_plan;
  for (const auto& mk : plan)
    (mk.kind == MeasKind::VmSq || mk.kind == MeasKind::Phasor ? exact_plan : power_plan)
        .push_back(mk);

  std::vector<cplx> v_gnd = ground_truth(net, cfg.gt_mode, split_seed(cfg.seed, 0xB00Bu),
                                         cfg.gt_profile, cfg.reference);
  std::vector<double> theta_gnd(net.n());
  for (int i = 0; i < net.n(); ++i) theta_gnd[i] = std::arg(v_gnd[i]);

  std::vector<TrialResult> results(cfg.trials);
  const int hw = static_cast<int>(std::thread::hardware_concurrency());
  const int workers =
      std::max(1, std::min(cfg.workers > 0 ? cfg.workers : std::max(1, hw), cfg.trials));

  std::atomic<int> next{0};
  auto work = [&]() {
    for (int t = next.fetch_add(1); t < cfg.trials; t = next.fetch_add(1))
      results[t] = one_trial(net, adm, cfg, v_gnd, power_plan, exact_plan, theta_gnd, t);
  };
  std::vector<std::thread> pool;
  for (int w = 1; w < workers; ++w) pool.emplace_back(work);
  work();
  for (auto& th : pool) th.join();
  return results;
}

double PowerLawFit::evaluate(double sigma, double du) const {
  double v = beta1 * std::pow(sigma, p);
  if (two_var) v += beta2 * std::pow(du, q);
  return v;
}

PowerLawFit power_law_fit(std::span<const FitSample> samples, bool two_var) {
  if (samples.size() < 10)
    throw std::invalid_argument("power_law_fit: need at least 10 samples");
  for (const auto& s : samples)
    if (!(s.ang_err > 0.0) || !(s.sigma > 0.0) || (two_var && !(s.delta_u > 0.0)))
      throw std::invalid_argument("power_law_fit: samples must be strictly positive");

  PowerLawFit fit;
  fit.two_var = two_var;
  const int m = static_cast<int>(samples.size());

  if (!two_var) {
    // linear regression of log y on log sigma
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (const auto& s : samples) {
      const double lx = std::log(s.sigma), ly = std::log(s.ang_err);
      sx += lx;
      sy += ly;
      sxx += lx * lx;
      sxy += lx * ly;
    }
    const double denom = m * sxx - sx * sx;
    fit.p = (m * sxy - sx * sy) / denom;
    fit.beta1 = std::exp((sy - fit.p * sx) / m);
    return fit;
  }

  // Gauss-Newton on (log b1, p, log b2, q) minimizing log-space residuals.
  Eigen::Vector4d th;
  double my = 0, ms = 0, md = 0;
  for (const auto& s : samples) {
    my += s.ang_err;
    ms += s.sigma;
    md += s.delta_u;
  }
  my /= m;
  ms /= m;
  md /= m;
  th << std::log(0.5 * my / ms), 1.0, std::log(0.5 * my / md), 1.0;

  auto loss = [&](const Eigen::Vector4d& t) {
    double acc = 0.0;
    for (const auto& s : samples) {
      const double model =
          std::exp(t(0)) * std::pow(s.sigma, t(1)) + std::exp(t(2)) * std::pow(s.delta_u, t(3));
      const double r = std::log(model) - std::log(s.ang_err);
      acc += r * r;
    }
    return acc;
  };

  double cur = loss(th);
  for (int it = 0; it < 200; ++it) {
    Eigen::Matrix4d JtJ = Eigen::Matrix4d::Zero();
    Eigen::Vector4d Jtr = Eigen::Vector4d::Zero();
    for (const auto& s : samples) {
      const double t1 = std::exp(th(0)) * std::pow(s.sigma, th(1));
      const double t2 = std::exp(th(2)) * std::pow(s.delta_u, th(3));
      const double model = t1 + t2;
      const double r = std::log(model) - std::log(s.ang_err);
      Eigen::Vector4d g;
      g << t1 / model, t1 * std::log(s.sigma) / model, t2 / model,
          t2 * std::log(s.delta_u) / model;
      JtJ += g * g.transpose();
      Jtr += g * r;
    }
    Eigen::Vector4d step = (JtJ + 1e-12 * Eigen::Matrix4d::Identity()).ldlt().solve(-Jtr);
    double scale = 1.0;
    bool accepted = false;
    for (int h = 0; h < 30; ++h, scale *= 0.5) {
      Eigen::Vector4d cand = th + scale * step;
      const double c = loss(cand);
      if (c < cur) {
        th = cand;
        cur = c;
        accepted = true;
        break;
      }
    }
    if (!accepted || step.norm() < 1e-12) break;
  }
  fit.beta1 = std::exp(th(0));
  fit.p = th(1);
  fit.beta2 = std::exp(th(2));
  fit.q = th(3);
  return fit;
}

PowerLawFit adjust_envelope(PowerLawFit fit, std::span<const FitSample> samples) {
  double factor = 1.0;
  for (const auto& s : samples)
    factor = std::max(factor, s.ang_err / fit.evaluate(s.sigma, s.delta_u));
  factor *= 1.0 + 1e-12;
  fit.beta1 *= factor;
  if (fit.two_var) fit.beta2 *= factor;
  return fit;
}

ThreeBusFixture three_bus_fixture() {
  auto net = std::make_shared<Network>();
  net->base_MVA = 100.0;
  for (int i = 0; i < 3; ++i) {
    BusRecord b;
    b.id = i + 1;
    b.Vm = 0.85;
    b.Va = 0.0;
    b.base_kV = 345.0;
    net->id_to_index[b.id] = i;
    net->buses.push_back(b);
  }
  auto line = [&](int f, int t, double x) {
    BranchRecord br;
    br.from_bus = f;
    br.to_bus = t;
    br.r = 0.0;
    br.x = x;
    br.b = 0.0;
    br.from_idx = f - 1;
    br.to_idx = t - 1;
    net->branches.push_back(br);
  };
  line(1, 2, 0.03);
  line(2, 3, 0.08);
  line(1, 3, 0.03);
  net->validate();

  ThreeBusFixture fx{net, build_admittances(*net), MeasurementSet(*net), {0.85, 0.85, 0.85}};
  const double P[3] = {-46.066, 14.485, 10.686};   // MW
  const double Q[3] = {273.22, 238.86, 153.4};     // MVAr
  for (int i = 0; i < 3; ++i) {
    fx.set.add({{MeasKind::VmSq, i}, cplx(0.85 * 0.85, 0.0), 1.0, 0.0});
    fx.set.add({{MeasKind::BusPQ, i}, cplx(P[i] / 100.0, Q[i] / 100.0), 1.0, std::nullopt});
  }
  return fx;
}

TimingReport bench_timing(const Network& net, const Admittances& adm, double sigma_noise,
                          int trials, bool full_plan, uint64_t seed, GroundTruthMode gt_mode) {
  using Clock = std::chrono::steady_clock;
  auto ms = [](Clock::time_point a, Clock::time_point b) {
    return std::chrono::duration<double, std::milli>(b - a).count();
  };

  std::vector<MeasurementKind> plan = full_plan ? power_only_plan(net) : bus_pqv_plan(net);
  std::vector<MeasurementKind> power_plan;
  for (const auto& mk : plan)
    if (mk.kind != MeasKind::VmSq) power_plan.push_back(mk);

  std::vector<cplx> v_gnd = ground_truth(net, gt_mode, split_seed(seed, 0xB00Bu));
  std::vector<double> u(net.n());
  for (int i = 0; i < net.n(); ++i) u[i] = std::abs(v_gnd[i]);

  TimingReport rep;
  rep.n = net.n();
  rep.l = net.l();
  rep.m = plan_scalar_count(power_plan);
  rep.trials = trials;

  constexpr int kGnStepsPerTrial = 3;
  for (int t = 0; t < trials; ++t) {
    const uint64_t s = split_seed(seed, static_cast<uint64_t>(t));
    MeasurementSet set = simulate(net, adm, v_gnd, power_plan, sigma_noise, s);
    PhaseSyncProblem prob = assemble(net, adm, u, set, 0);

    auto t0 = Clock::now();
    SpectralInit init = spectral_init(prob, s);
    auto t1 = Clock::now();
    rep.init_ms += ms(t0, t1);

    VoltageState st;
    st.u = u;
    st.theta.resize(net.n());
    for (int i = 0; i < net.n(); ++i) st.theta[i] = std::arg(init.x0[i]);
    st.theta[0] = 0.0;
    st.reference = 0;

    t0 = Clock::now();
    for (int g = 0; g < kGnStepsPerTrial; ++g) st = gn_step(net, adm, set, st, GnMode::Full);
    t1 = Clock::now();
    rep.per_iteration_ms += ms(t0, t1) / kGnStepsPerTrial;

    std::vector<cplx> x = st.unit_phasors();
    t0 = Clock::now();
    certify(prob, x);
    t1 = Clock::now();
    rep.cert_ms += ms(t0, t1);
  }
  rep.init_ms /= trials;
  rep.cert_ms /= trials;
  rep.per_iteration_ms /= trials;
  rep.init_per_it_ratio = rep.init_ms / rep.per_iteration_ms;
  rep.cert_per_it_ratio = rep.cert_ms / rep.per_iteration_ms;
  return rep;
}

std::string sweep_csv(const Network& net, const Admittances& adm, TrialConfig base,
                      std::span<const double> sigma_grid) {
  std::ostringstream out;
  out << "sigma,delta_u,iter,median_ang_err_deg,max_ang_err_deg,median_cert,min_cert\n";
  out.precision(10);
  for (double sigma : sigma_grid) {
    TrialConfig cfg = base;
    cfg.sigma_noise = sigma;
    auto results = run_trials(net, adm, cfg);
    const size_t iters = [&] {
      size_t k = 0;
      for (const auto& r : results)
        if (!r.failed) k = std::max(k, r.ang_err_deg.size());
      return k;
    }();
    for (size_t it = 0; it < iters; ++it) {
      std::vector<double> errs, certs;
      for (const auto& r : results) {
        if (r.failed || it >= r.ang_err_deg.size()) continue;
        errs.push_back(r.ang_err_deg[it]);
        if (it < r.cert_ratios.size()) certs.push_back(r.cert_ratios[it]);
      }
      if (errs.empty()) continue;
      out << sigma << ',' << base.delta_u << ',' << it << ',' << median(errs) << ','
          << *std::max_element(errs.begin(), errs.end()) << ',';
      if (!certs.empty())
        out << median(certs) << ',' << *std::min_element(certs.begin(), certs.end());
      else
        out << ',';
      out << '\n';
    }
  }
  return out.str();
}

}  // namespace psync
