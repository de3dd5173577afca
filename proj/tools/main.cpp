// psync: power system state estimation with spectral initialization and
// optimality certification. Subcommands: estimate, benchmark, sweep, fixture.
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "psync/errors.hpp"
#include "psync/estimator.hpp"
#include "psync/harness.hpp"
#include "psync/hbuilder.hpp"
#include "psync/matrixmarket.hpp"
#include "psync/measurement.hpp"
#include "psync/netmodel.hpp"

namespace {

using namespace psync;

constexpr double kRadToDeg = 180.0 / std::numbers::pi;

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void emit(const std::string& out_path, const std::string& text) {
  if (out_path.empty() || out_path == "-") {
    std::cout << text << '\n';
    return;
  }
  std::ofstream f(out_path);
  if (!f) throw std::runtime_error("cannot open " + out_path + " for writing");
  f << text;
  std::cerr << "wrote " << out_path << '\n';
}

GroundTruthMode pick_gt(const Network& net, const std::string& mode) {
  if (mode == "case") return GroundTruthMode::Case;
  if (mode == "random") return GroundTruthMode::Random;
  // auto: prefer the stored operating point, fall back to a random profile
  if (net.flat_profile()) {
    std::cerr << "note: stored voltage profile is flat, using a random ground truth\n";
    return GroundTruthMode::Random;
  }
  return GroundTruthMode::Case;
}

std::vector<MeasurementKind> pick_plan(const Network& net, const std::string& plan) {
  std::vector<MeasurementKind> p = bus_pqv_plan(net);
  if (plan == "all") {
    for (int k = 0; k < net.l(); ++k) p.push_back({MeasKind::BranchPQFrom, k});
    for (int k = 0; k < net.l(); ++k) p.push_back({MeasKind::BranchPQTo, k});
  }
  return p;
}

struct EstimateArgs {
  std::string case_path;
  std::string measurements;
  bool simulate_flag = false;
  double sigma = 0.02;
  double delta_u = 0.0;
  uint64_t seed = 0;
  std::string init = "spectral";
  int iters = 1;
  bool certify_flag = false;
  std::string gn = "auto";
  std::string gt = "auto";
  std::string plan = "bus";
  std::string out;
  std::string dump_h;
  bool diagnostics_flag = false;
};

int cmd_estimate(const EstimateArgs& a) {
  Network net = parse_case_file(a.case_path);
  Admittances adm = build_admittances(net);

  MeasurementSet set(net);
  std::vector<double> u0(net.n(), 1.0);
  std::vector<double> theta_gnd;
  bool have_truth = false;

  if (!a.measurements.empty()) {
    set = load_measurements_json(net, slurp(a.measurements));
    for (const auto& m : set.items())
      if (m.kind.kind == MeasKind::VmSq && m.value.real() > 0.0)
        u0[m.kind.index] = std::sqrt(m.value.real());
  } else {
    GroundTruthMode gt = pick_gt(net, a.gt);
    std::vector<cplx> v_gnd = ground_truth(net, gt, split_seed(a.seed, 0xB00Bu));
    theta_gnd.resize(net.n());
    for (int i = 0; i < net.n(); ++i) theta_gnd[i] = std::arg(v_gnd[i]);
    have_truth = true;

    std::vector<MeasurementKind> plan = pick_plan(net, a.plan);
    std::vector<MeasurementKind> power, exact;
    for (const auto& mk : plan)
      (mk.kind == MeasKind::VmSq ? exact : power).push_back(mk);
    set = simulate(net, adm, v_gnd, power, a.sigma, split_seed(a.seed, 1));
    MeasurementSet vm = simulate(net, adm, v_gnd, exact, 0.0, 0);
    for (const auto& m : vm.items()) set.add(m);

    for (int i = 0; i < net.n(); ++i) u0[i] = std::abs(v_gnd[i]);
    if (a.delta_u > 0.0) {
      std::mt19937_64 rng(split_seed(a.seed, 2));
      std::uniform_real_distribution<double> eu(-a.delta_u, a.delta_u);
      for (auto& ui : u0) ui = std::max(1e-6, ui + eu(rng));
    }
  }

  EstimateConfig cfg;
  cfg.init = a.init == "cold" ? InitMode::Cold : InitMode::Spectral;
  cfg.gn_mode = a.gn == "full" || (a.gn == "auto" && a.delta_u > 0.0) ? GnMode::Full
                                                                      : GnMode::AnglesOnly;
  cfg.iterations = a.iters;
  cfg.certify = a.certify_flag;
  cfg.u0 = u0;
  cfg.seed = a.seed;

  if (!a.dump_h.empty()) {
    PhaseSyncProblem prob = assemble(net, adm, u0, set, 0);
    write_matrix_market(a.dump_h, prob.H);
    std::cerr << "wrote " << a.dump_h << '\n';
  }

  EstimateReport rep = estimate(net, adm, set, cfg);
  if (have_truth)
    for (auto& it : rep.iterations)
      it.ang_err_deg = max_angular_error_deg(it.theta, theta_gnd, 0);

  if (a.diagnostics_flag) {
    VoltageState last;
    last.u = rep.iterations.back().u;
    last.theta = rep.iterations.back().theta;
    last.reference = 0;
    Diagnostics d = diagnostics(net, adm, set, last);
    emit(a.out, report_to_json(rep, &d));
  } else {
    emit(a.out, report_to_json(rep));
  }
  return 0;
}

int cmd_benchmark(const std::string& case_path, int trials, double sigma,
                  const std::string& plan, const std::string& gt, uint64_t seed) {
  Network net = parse_case_file(case_path);
  Admittances adm = build_admittances(net);
  TimingReport rep =
      bench_timing(net, adm, sigma, trials, plan == "all", seed, pick_gt(net, gt));
  std::printf("n=%d l=%d m=%d trials=%d\n", rep.n, rep.l, rep.m, rep.trials);
  std::printf("init     %10.2f ms\n", rep.init_ms);
  std::printf("cert     %10.2f ms\n", rep.cert_ms);
  std::printf("per-it   %10.2f ms\n", rep.per_iteration_ms);
  std::printf("init/per-it %7.2f\ncert/per-it %7.2f\n", rep.init_per_it_ratio,
              rep.cert_per_it_ratio);
  return 0;
}

int cmd_sweep(const std::string& case_path, const std::string& grid, double delta_u,
              int trials, int iters, bool certify_flag, const std::string& gt,
              uint64_t seed, const std::string& out) {
  Network net = parse_case_file(case_path);
  Admittances adm = build_admittances(net);

  // "a:b:steps" -> log-spaced sigma values from a to b inclusive
  double lo = 0, hi = 0;
  int steps = 0;
  if (std::sscanf(grid.c_str(), "%lf:%lf:%d", &lo, &hi, &steps) != 3 || steps < 1 ||
      lo <= 0 || hi < lo)
    throw std::runtime_error("--sigma-grid expects a:b:steps with 0 < a <= b");
  std::vector<double> sigmas(steps);
  for (int i = 0; i < steps; ++i)
    sigmas[i] = steps == 1 ? lo
                           : std::exp(std::log(lo) +
                                      (std::log(hi) - std::log(lo)) * i / (steps - 1.0));

  TrialConfig cfg;
  cfg.delta_u = delta_u;
  cfg.trials = trials;
  cfg.seed = seed;
  cfg.iterations = iters;
  cfg.certify = certify_flag;
  cfg.gn_mode = delta_u > 0.0 ? GnMode::Full : GnMode::AnglesOnly;
  cfg.gt_mode = pick_gt(net, gt);
  emit(out, sweep_csv(net, adm, cfg, sigmas));
  return 0;
}

int cmd_fixture() {
  ThreeBusFixture fx = three_bus_fixture();
  PhaseSyncProblem prob = assemble(*fx.net, fx.adm, fx.u, fx.set, 0);
  std::printf("three-bus fixture: n=3, base 100 MVA, u = (0.85, 0.85, 0.85)\n");
  std::printf("Ybus[0][1] = %g%+gj (expect 0+33.333j)\n",
              fx.adm.Ybus.coeff(0, 1).real(), fx.adm.Ybus.coeff(0, 1).imag());

  EstimateConfig spectral;
  spectral.init = InitMode::Spectral;
  spectral.iterations = 10;
  spectral.certify = true;
  spectral.u0 = fx.u;
  EstimateReport rs = estimate(*fx.net, fx.adm, fx.set, spectral);

  EstimateConfig cold = spectral;
  cold.init = InitMode::Cold;
  cold.iterations = 60;
  EstimateReport rc = estimate(*fx.net, fx.adm, fx.set, cold);

  std::printf("\n%-6s %-14s %-14s\n", "iter", "spectral cost", "cold cost");
  const size_t rows = std::max(rs.iterations.size(), rc.iterations.size());
  for (size_t i = 0; i < rows; ++i) {
    std::printf("%-6zu ", i);
    if (i < rs.iterations.size())
      std::printf("%-14.6f ", rs.iterations[i].cost);
    else
      std::printf("%-14s ", "");
    if (i < rc.iterations.size())
      std::printf("%-14.6f", rc.iterations[i].cost);
    std::printf("\n");
  }
  const auto& fs = rs.iterations.back();
  const auto& fc = rc.iterations.back();
  std::printf("\nspectral final: cost=%.6f cert=%.6f theta=(%.3f, %.3f, %.3f) deg\n",
              fs.cost, fs.cert ? fs.cert->ratio() : 0.0, fs.theta[0] * kRadToDeg,
              fs.theta[1] * kRadToDeg, fs.theta[2] * kRadToDeg);
  std::printf("cold     final: cost=%.6f theta=(%.3f, %.3f, %.3f) deg\n", fc.cost,
              fc.theta[0] * kRadToDeg, fc.theta[1] * kRadToDeg, fc.theta[2] * kRadToDeg);
  if (fc.cost > fs.cost)
    std::printf("cold start stalled at a spurious stationary point (cost gap %.6f)\n",
                fc.cost - fs.cost);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"power system state estimation via phase synchronization"};
  app.require_subcommand(1);

  EstimateArgs ea;
  auto* est = app.add_subcommand("estimate", "estimate a case and report per-iteration results");
  est->add_option("case", ea.case_path, "MATPOWER-style case file")->required();
  auto* meas = est->add_option("--measurements", ea.measurements, "measurement JSON file");
  est->add_flag("--simulate", ea.simulate_flag, "synthesize measurements from a ground truth")
      ->excludes(meas);
  est->add_option("--sigma", ea.sigma, "power measurement noise std, pu (simulate)");
  est->add_option("--delta-u", ea.delta_u, "magnitude error half-width, pu (simulate)");
  est->add_option("--seed", ea.seed, "master RNG seed");
  est->add_option("--init", ea.init, "spectral|cold")->check(CLI::IsMember({"spectral", "cold"}));
  est->add_option("--iters", ea.iters, "Gauss-Newton iterations");
  est->add_flag("--certify", ea.certify_flag, "certificate at every iterate");
  est->add_option("--gn", ea.gn, "angles|full|auto")->check(CLI::IsMember({"angles", "full", "auto"}));
  est->add_option("--gt", ea.gt, "ground truth: case|random|auto")
      ->check(CLI::IsMember({"case", "random", "auto"}));
  est->add_option("--plan", ea.plan, "measurement plan: bus|all")
      ->check(CLI::IsMember({"bus", "all"}));
  est->add_option("--out", ea.out, "report JSON path (default stdout)");
  est->add_option("--dump-h", ea.dump_h, "write H(u) in Matrix Market format");
  est->add_flag("--diagnostics", ea.diagnostics_flag, "include convergence diagnostics");

  std::string b_case, b_plan = "all", b_gt = "auto";
  int b_trials = 10;
  double b_sigma = 0.02;
  uint64_t b_seed = 0;
  auto* ben = app.add_subcommand("benchmark", "time init/cert/GN on a case");
  ben->add_option("case", b_case, "MATPOWER-style case file")->required();
  ben->add_option("--trials", b_trials, "number of trials");
  ben->add_option("--sigma", b_sigma, "noise std, pu");
  ben->add_option("--plan", b_plan, "bus|all")->check(CLI::IsMember({"bus", "all"}));
  ben->add_option("--gt", b_gt, "case|random|auto")->check(CLI::IsMember({"case", "random", "auto"}));
  ben->add_option("--seed", b_seed, "master RNG seed");

  std::string s_case, s_grid, s_gt = "auto", s_out;
  double s_du = 0.0;
  int s_trials = 20, s_iters = 1;
  bool s_cert = false;
  uint64_t s_seed = 0;
  auto* swp = app.add_subcommand("sweep", "noise sweep, CSV output");
  swp->add_option("case", s_case, "MATPOWER-style case file")->required();
  swp->add_option("--sigma-grid", s_grid, "a:b:steps, log-spaced")->required();
  swp->add_option("--delta-u", s_du, "magnitude error half-width, pu");
  swp->add_option("--trials", s_trials, "trials per sigma");
  swp->add_option("--iters", s_iters, "Gauss-Newton iterations");
  swp->add_flag("--certify", s_cert, "record certificates");
  swp->add_option("--gt", s_gt, "case|random|auto")->check(CLI::IsMember({"case", "random", "auto"}));
  swp->add_option("--seed", s_seed, "master RNG seed");
  swp->add_option("--out", s_out, "CSV path (default stdout)");

  std::string f_name;
  auto* fix = app.add_subcommand("fixture", "run a built-in fixture");
  fix->add_option("name", f_name, "fixture name (three-bus)")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (est->parsed()) return cmd_estimate(ea);
    if (ben->parsed()) return cmd_benchmark(b_case, b_trials, b_sigma, b_plan, b_gt, b_seed);
    if (swp->parsed())
      return cmd_sweep(s_case, s_grid, s_du, s_trials, s_iters, s_cert, s_gt, s_seed, s_out);
    if (fix->parsed()) {
      if (f_name != "three-bus") {
        std::cerr << "unknown fixture '" << f_name << "'\n";
        return 2;
      }
      return cmd_fixture();
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
