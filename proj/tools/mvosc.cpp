// mvosc: command-line front end for the mean-field oscillator toolkit.
//
// Exit codes: 0 success (including "no cycle"), 1 bad input or config,
// 2 numerical failure, 3 verification failure.

#include "artifacts.hpp"

#include "mvosc/acceptance.hpp"
#include "mvosc/config.hpp"
#include "mvosc/isochron.hpp"
#include "mvosc/orbit.hpp"
#include "mvosc/particles.hpp"
#include "mvosc/pde.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdio>
#include <iostream>
#include <optional>
#include <random>
#include <string>
#include <vector>

using namespace mvosc;
using namespace mvosc::tools;

namespace {

enum Exit { kOk = 0, kInput = 1, kNumerical = 2, kVerification = 3 };

struct Options {
  std::string config_path;
  std::vector<std::string> overrides;
  std::optional<double> ratio1;
  std::optional<int> threads;
  std::string out;
  std::string space = "reduced";
  bool bates = false;
  bool dump = false;
  std::vector<int> criteria;
};

RunConfig resolve(const Options& o) {
  RunConfig c = o.config_path.empty() ? parse_config_text("") : parse_config_file(o.config_path);
  for (const auto& s : o.overrides) apply_override(c, s);
  if (o.ratio1) c.set_ratio(0, *o.ratio1);
  if (o.threads) c.particles.sim.threads = *o.threads;
  if (!o.out.empty()) c.output.dir = o.out;
  validate(c);
  return c;
}

Vec z0_of(const RunConfig& c) { return Eigen::Map<const Vec>(c.orbit.z0.data(), 2); }

std::vector<double> cat(std::initializer_list<double> head, const Vec& tail = Vec()) {
  std::vector<double> v(head);
  v.insert(v.end(), tail.data(), tail.data() + tail.size());
  return v;
}

void report_written(const OutputDir& out) {
  for (const auto& f : out.written) std::cout << "wrote " << f << "\n";
}

SpectralSystem pde_system(const RunConfig& c, bool cycle_step) {
  SolverConfig s = c.solver.solver;
  if (cycle_step) s.dt = c.orbit.pde_dt;
  return SpectralSystem(c.model_spec(), s);
}

// ------------------------------------------------------------------ reduced

int cmd_reduced(const RunConfig& c) {
  OutputDir out(c, "reduced");
  const ReducedFlow flow = c.reduced_flow();
  const int stride = std::max(1, static_cast<int>(std::llround(c.orbit.record_dt / c.orbit.orbit.dt)));
  const Trajectory tr = integrate_reduced(z0_of(c), c.orbit.horizon, c.orbit.orbit.dt, flow, 1.0, stride);
  CsvWriter csv(out, "reduced.csv", {"t", "z1", "z2"}, {"time_scale=slow"});
  for (std::size_t i = 0; i < tr.t.size(); ++i) csv.row(cat({tr.t[i]}, tr.x[i]));
  phase_portrait_script(out, "reduced_phase.py", out.file("reduced.csv"), "z1", "z2", "reduced mean dynamics");
  report_written(out);
  return kOk;
}

// ---------------------------------------------------------------------- pde

int cmd_pde(const RunConfig& c) {
  OutputDir out(c, "pde");
  const SpectralSystem sys = pde_system(c, false);
  const bool coeffs = c.solver.coefficients;
  std::vector<std::string> cols = {"t", "m1", "m2", "mass", "dualnorm_p_minus_rho"};
  if (coeffs) cols = cols + indexed("c", sys.n_modes(), 0);
  std::string modes = "modes:";
  for (int p = 0; p < sys.n_modes(); ++p) {
    modes += " (";
    for (int i = 0; i < sys.dim(); ++i) modes += (i ? "," : "") + std::to_string(sys.indices()[p][i]);
    modes += ")";
  }
  CsvWriter csv(out, "pde.csv", cols, {"time_scale=fast", coeffs ? modes : "coefficients omitted"});
  auto emit = [&](double t, const Vec& u) {
    std::vector<double> row = cat({t, u(sys.n_modes()), u(sys.n_modes() + 1), sys.mass(u), sys.dual_norm_to_rho(u)});
    if (coeffs) row.insert(row.end(), u.data(), u.data() + sys.n_modes());
    csv.row(row);
  };
  Vec u = sys.rho_state(z0_of(c));
  emit(0.0, u);
  const int n = sys.steps_for(c.solver.horizon);
  sys.flow(u, c.solver.horizon, n, [&](int s, double t, const Vec& v) {
    if (s % c.solver.stride == 0 || s == n) emit(t, v);
  });
  mean_trajectory_script(out, "pde_means.py", out.file("pde.csv"), {"m1", "m2"}, "spectral PDE means");
  phase_portrait_script(out, "pde_phase.py", out.file("pde.csv"), "m1", "m2", "spectral PDE mean portrait");
  report_written(out);
  return kOk;
}

// ---------------------------------------------------------------- particles

int cmd_particles(const RunConfig& c, bool dump) {
  OutputDir out(c, "particles");
  const ModelSpec m = c.model_spec();
  const SimConfig& sim = c.particles.sim;
  Ensemble e = sample_reference(m, sim.n, sim.seed, z0_of(c));
  std::optional<CsvWriter> dump_csv;
  if (dump) dump_csv.emplace(out, "particles_dump.csv", std::vector<std::string>{"t", "i", "x1", "x2"});
  const auto rec = simulate(e, m, sim, [&](const Ensemble& en) {
    if (dump_csv)
      for (int i = 0; i < en.n; ++i) dump_csv->row({en.t, double(i), en.at(i, 0), en.at(i, 1)});
  });
  {
    CsvWriter csv(out, "particles.csv", {"t", "m1", "m2", "var1", "var2"}, {"time_scale=fast"});
    for (const auto& r : rec) csv.row(cat({r.t}, Vec((Vec(4) << r.mean, r.variance).finished())));
  }
  const fs::path meta = out.path("particles_meta.txt");
  {
    std::ofstream os(meta);
    require(static_cast<bool>(os), ErrorKind::io, "cannot write " + meta.string());
    os << out.echo() << "scheme = euler-maruyama\nrng = " << e.rng_name() << "\nseed = " << sim.seed
       << "\nN = " << sim.n << "\nh = " << sim.h << "\nsteps = " << e.counter << "\n";
    out.written.push_back(meta.string());
  }
  mean_trajectory_script(out, "particles_means.py", out.file("particles.csv"), {"m1", "m2"}, "particle means");
  report_written(out);
  return kOk;
}

// -------------------------------------------------------------------- cycle

/// The reduced cycle, or nullopt after reporting the attracting fixed point.
std::optional<LimitCycle> reduced_cycle(const RunConfig& c, const ReducedFlow& flow, OutputDir& out) {
  const CycleResult cr = find_cycle_reduced(z0_of(c), flow, c.orbit.orbit);
  if (cr.found) {
    LimitCycle cyc = cr.cycle;
    cyc.delta = c.model.delta;
    return cyc;
  }
  std::cout << "no cycle: " << cr.message << "\n";
  if (cr.fixed_point) {
    const FixedPoint& fp = *cr.fixed_point;
    std::printf("attractor: fixed point (%.9f, %.9f), trace %.9f, det %.9f, %s\n", fp.z(0), fp.z(1), fp.trace,
                fp.det, fp.stable ? "stable" : "unstable");
    CsvWriter csv(out, "fixed_point.csv", {"z1", "z2", "trace", "det", "stable"});
    csv.row({fp.z(0), fp.z(1), fp.trace, fp.det, fp.stable ? 1.0 : 0.0});
  }
  return std::nullopt;
}

void write_reduced_cycle(OutputDir& out, const LimitCycle& cyc) {
  char note[256];
  std::snprintf(note, sizeof note,
                "period=%.12e section_anchor=(%.12e,%.12e) section_normal=(%.12e,%.12e) shooting_residual=%.3e",
                cyc.period, cyc.section.anchor(0), cyc.section.anchor(1), cyc.section.normal(0),
                cyc.section.normal(1), cyc.shooting_residual);
  CsvWriter csv(out, "cycle_reduced.csv", {"phase", "z1", "z2"}, {"time_scale=slow", note});
  for (int j = 0; j < cyc.size(); ++j) csv.row(cat({cyc.phase_of(j)}, cyc.samples[j]));
  phase_portrait_script(out, "cycle_reduced.py", out.file("cycle_reduced.csv"), "z1", "z2", "reduced limit cycle");
}

void write_pde_cycle(OutputDir& out, const SpectralSystem& sys, const PdeCycleResult& pr) {
  const LimitCycle& cyc = pr.cycle;
  char note[256];
  std::snprintf(note, sizeof note, "period=%.12e delta=%.6g periodicity_residual=%.3e min_density=%.3e periods=%d",
                cyc.period, cyc.delta, cyc.periodicity_residual, pr.min_density, pr.periods_used);
  CsvWriter csv(out, "cycle_pde.csv",
                std::vector<std::string>{"phase", "m1", "m2", "mass", "dualnorm_p_minus_rho"} +
                    indexed("c", sys.n_modes(), 0),
                {"time_scale=fast", note});
  for (int j = 0; j < cyc.size(); ++j) {
    const Vec& u = cyc.samples[j];
    std::vector<double> row = cat({cyc.phase_of(j), u(sys.n_modes()), u(sys.n_modes() + 1), sys.mass(u),
                                   sys.dual_norm_to_rho(u)});
    row.insert(row.end(), u.data(), u.data() + sys.n_modes());
    csv.row(row);
  }
  phase_portrait_script(out, "cycle_pde.py", out.file("cycle_pde.csv"), "m1", "m2", "PDE periodic solution (means)");
}

int cmd_cycle(const RunConfig& c, const std::string& space) {
  OutputDir out(c, "cycle --space " + space);
  const ReducedFlow flow = c.reduced_flow();
  const auto cyc = reduced_cycle(c, flow, out);
  if (!cyc) {
    report_written(out);
    return kOk;
  }
  std::printf("reduced cycle: period %.9f (slow time)\n", cyc->period);
  write_reduced_cycle(out, *cyc);
  if (space == "pde") {
    const SpectralSystem sys = pde_system(c, true);
    const PdeCycleResult pr = find_cycle_pde(sys, *cyc, c.orbit.orbit);
    std::printf("PDE cycle: period %.9f (fast time), period*delta %.9f, periodicity residual %.3e, min density %.3e\n",
                pr.cycle.period, pr.cycle.period * c.model.delta, pr.cycle.periodicity_residual, pr.min_density);
    write_pde_cycle(out, sys, pr);
  }
  report_written(out);
  return kOk;
}

// ------------------------------------------------------------------ floquet

void write_matrix(OutputDir& out, const std::string& name, const Mat& a) {
  CsvWriter csv(out, name, indexed("col", static_cast<int>(a.cols())));
  for (int i = 0; i < a.rows(); ++i) {
    const Vec r = a.row(i).transpose();
    csv.row(std::vector<double>(r.data(), r.data() + r.size()));
  }
}

void write_floquet(OutputDir& out, const std::string& tag, const FloquetData& fd) {
  {
    CsvWriter csv(out, "floquet_" + tag + "_multipliers.csv", {"index", "re", "im", "modulus", "center"});
    for (int j = 0; j < fd.multipliers.size(); ++j)
      csv.row({double(j), fd.multipliers(j).real(), fd.multipliers(j).imag(), std::abs(fd.multipliers(j)),
               j == fd.center_index ? 1.0 : 0.0});
  }
  {
    CsvWriter csv(out, "floquet_" + tag + "_summary.csv", {"quantity", "value"},
                  {"quantity codes: 0 period, 1 rate, 2 multiplier_one_error, 3 tangent_angle, "
                   "4 commutation_residual, 5 idempotence_residual, 6 liouville_residual, 7 c_alpha, 8 C_alpha"});
    const double vals[] = {fd.period,
                           fd.rate,
                           fd.multiplier_one_error,
                           fd.tangent_angle,
                           fd.commutation_residual,
                           fd.idempotence_residual,
                           fd.liouville_residual,
                           fd.c_alpha,
                           fd.C_alpha};
    for (int i = 0; i < 9; ++i) csv.row({double(i), vals[i]});
  }
  write_matrix(out, "floquet_" + tag + "_monodromy.csv", fd.monodromy);
  write_matrix(out, "floquet_" + tag + "_pc.csv", fd.pc);
  write_matrix(out, "floquet_" + tag + "_ps.csv", fd.ps);
  multiplier_script(out, "floquet_" + tag + ".py", out.file("floquet_" + tag + "_multipliers.csv"),
                    tag + " Floquet multipliers");
  std::printf("%s Floquet: period %.9f, rate %.6g, |second multiplier| %.6g, commutation %.2e, idempotence %.2e\n",
              tag.c_str(), fd.period, fd.rate, std::abs(fd.second_multiplier()), fd.commutation_residual,
              fd.idempotence_residual);
}

int cmd_floquet(const RunConfig& c, const std::string& space, bool bates) {
  OutputDir out(c, "floquet --space " + space);
  const ReducedFlow flow = c.reduced_flow();
  const auto cyc = reduced_cycle(c, flow, out);
  if (!cyc) {
    report_written(out);
    return kOk;
  }
  const FloquetData rfd = floquet_reduced(*cyc, flow);
  write_floquet(out, "reduced", rfd);
  if (space == "pde") {
    const SpectralSystem sys = pde_system(c, true);
    const PdeCycleResult pr = find_cycle_pde(sys, *cyc, c.orbit.orbit);
    write_floquet(out, "pde", pde_monodromy(pr.cycle, sys));
  }
  if (bates) {
    SolverConfig s = c.solver.solver;
    s.dt = c.orbit.pde_dt;
    const BatesReport rep = check_bates_hypotheses(c.model_spec(), s, *cyc, flow, rfd);
    char note[256];
    std::snprintf(note, sizeof note,
                  "tau=%.9g defect_slope=%.4f cross_cs_slope=%.4f cross_sc_slope=%.4f stable_ok=%d center_ok=%d",
                  rep.tau, rep.defect_slope, rep.cross_cs_slope, rep.cross_sc_slope, rep.stable_ok, rep.center_ok);
    CsvWriter csv(out, "bates.csv",
                  {"delta", "defect_max", "defect_min", "cross_cs_max", "cross_sc_max", "stable_max", "center_min"},
                  {note});
    for (const auto& d : rep.per_delta)
      csv.row({d.delta, d.defect_max, d.defect_min, d.cross_cs_max, d.cross_sc_max, d.stable_max, d.center_min});
    std::printf("invariance: tau %.6g, slopes defect %.3f, cross %.3f / %.3f\n", rep.tau, rep.defect_slope,
                rep.cross_cs_slope, rep.cross_sc_slope);
  }
  report_written(out);
  return kOk;
}

// ----------------------------------------------------------------- isochron

int cmd_isochron(const RunConfig& c, const std::string& space) {
  OutputDir out(c, "isochron --space " + space);
  const ReducedFlow flow = c.reduced_flow();
  const auto cyc = reduced_cycle(c, flow, out);
  if (!cyc) {
    report_written(out);
    return kOk;
  }
  const IsochronSection& ic = c.isochron;
  const FloquetData rfd = floquet_reduced(*cyc, flow);
  std::mt19937_64 rng(ic.seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  int outside = 0;

  if (space == "reduced") {
    write_reduced_cycle(out, *cyc);
    const ReducedPhaseMap pm = make_phase_map(*cyc, flow, rfd, ic.iso);
    const IsochronGrid g = isochron_grid(pm, ic.window[0], ic.window[1], ic.window[2], ic.window[3], ic.nx, ic.ny);
    {
      CsvWriter csv(out, "isochron_grid.csv", {"x", "y", "phase"}, {"NaN marks states outside the basin"});
      for (int j = 0; j < ic.ny; ++j)
        for (int i = 0; i < ic.nx; ++i) csv.row({g.xs[i], g.ys[j], g.theta(j, i)});
    }
    isochron_script(out, "isochron.py", out.file("isochron_grid.csv"), out.file("cycle_reduced.csv"), ic.nx, ic.ny);
    CsvWriter csv(out, "isochron_scan.csv", {"x1", "x2", "phase", "landing_distance", "periods"});
    for (int k = 0; k < ic.scan_states; ++k) {
      const double u = unif(rng) * cyc->period, ang = 2 * kPi * unif(rng);
      const double rad = ic.scan_radius * std::sqrt(unif(rng));
      Vec x = cycle_state(*cyc, flow, u);
      x(0) += rad * std::cos(ang);
      x(1) += rad * std::sin(ang);
      try {
        const PhaseResult r = pm.evaluate(x);
        csv.row({x(0), x(1), r.phase, r.landing_distance, double(r.periods)});
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::outside_basin) throw;
        ++outside;
        csv.row({x(0), x(1), std::nan(""), std::nan(""), std::nan("")});
      }
    }
  } else {
    const SpectralSystem sys = pde_system(c, true);
    const PdeCycleResult pr = find_cycle_pde(sys, *cyc, c.orbit.orbit);
    const FloquetData pfd = pde_monodromy(pr.cycle, sys);
    const PdePhaseMap pm = make_phase_map(pr.cycle, sys, pfd, ic.iso);
    CsvWriter csv(out, "isochron_scan_pde.csv",
                  {"base_phase", "m1", "m2", "perturbation_norm", "phase", "landing_distance", "periods"});
    std::normal_distribution<double> n01;
    for (int k = 0; k < ic.scan_states; ++k) {
      const double u = unif(rng) * pr.cycle.period;
      Vec v(sys.size());
      for (int i = 0; i < v.size(); ++i) v(i) = n01(rng);
      v(0) = 0.0;  // keep the mass
      const double size = ic.scan_radius * unif(rng);
      const Vec x = cycle_state(pr.cycle, sys, u) + v * (size / sys.norm(v));
      const double mx = x(sys.n_modes()), my = x(sys.n_modes() + 1);
      try {
        const PhaseResult r = pm.evaluate(x);
        csv.row({u, mx, my, size, r.phase, r.landing_distance, double(r.periods)});
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::outside_basin) throw;
        ++outside;
        csv.row({u, mx, my, size, std::nan(""), std::nan(""), std::nan("")});
      }
    }
  }
  std::printf("phase scan: %d states, %d outside the basin\n", ic.scan_states, outside);
  report_written(out);
  return kOk;
}

// ------------------------------------------------------------------ compare

int cmd_compare(const RunConfig& c) {
  OutputDir out(c, "compare");
  const ModelSpec m = c.model_spec();
  const SpectralSystem sys(m, c.solver.solver);
  const ReducedFlow flow(m, c.orbit.orbit);
  const SimConfig& sim = c.particles.sim;
  mvosc::detail::set_threads(sim.threads);

  const Vec a0 = z0_of(c);
  Vec u = sys.rho_state(a0), z = a0;
  Ensemble e = sample_reference(m, sim.n, sim.seed, a0);
  const double rec = c.solver.solver.dt * c.solver.stride;
  const int n = std::max(1, static_cast<int>(std::ceil(c.solver.horizon / rec - 1e-9)));
  const double dt = c.solver.horizon / n;
  const int psteps = std::max(1, static_cast<int>(std::ceil(dt / sim.h - 1e-9)));

  CsvWriter csv(out, "compare.csv",
                {"t", "m_reduced1", "m_reduced2", "m_pde1", "m_pde2", "m_particles1", "m_particles2",
                 "err_pde_reduced", "err_particles_pde", "err_particles_reduced"},
                {"time_scale=fast", "errors are Euclidean norms of mean differences"});
  double sup[3] = {0.0, 0.0, 0.0};
  auto emit = [&](double t) {
    const Vec mp = u.tail(2), mn = empirical_mean(e);
    const double errs[3] = {(mp - z).norm(), (mn - mp).norm(), (mn - z).norm()};
    for (int k = 0; k < 3; ++k) sup[k] = std::max(sup[k], errs[k]);
    csv.row({t, z(0), z(1), mp(0), mp(1), mn(0), mn(1), errs[0], errs[1], errs[2]});
  };
  emit(0.0);
  for (int s = 1; s <= n; ++s) {
    u = sys.flow(u, dt);
    z = flow.flow(z, dt * m.delta);
    for (int k = 0; k < psteps; ++k) em_step(e, m, dt / psteps);
    e.t = s * dt;
    emit(s * dt);
  }
  std::printf("sup errors over t in [0, %.6g]: pde-reduced %.6e, particles-pde %.6e, particles-reduced %.6e\n",
              c.solver.horizon, sup[0], sup[1], sup[2]);
  mean_trajectory_script(out, "compare.py", out.file("compare.csv"),
                         {"m_reduced1", "m_pde1", "m_particles1", "m_reduced2", "m_pde2", "m_particles2"},
                         "mean trajectories: reduced, PDE, particles");
  report_written(out);
  return kOk;
}

// ------------------------------------------------------------------- verify

int cmd_verify(const RunConfig& c, std::vector<int> ids) {
  OutputDir out(c, "verify");
  acceptance::Setup setup;
  setup.fhn = c.fhn();
  setup.ratio1 = c.ratio(0);
  setup.ratio2 = c.ratio(1);
  setup.delta = c.model.delta;
  setup.orbit = c.orbit.orbit;
  setup.pde_dt = c.orbit.pde_dt;
  setup.pde_n_max = c.solver.solver.n_max;
  setup.z0 = z0_of(c);
  acceptance::Suite suite(setup);
  if (ids.empty())
    for (int i = 1; i <= acceptance::Suite::count; ++i) ids.push_back(i);

  nlohmann::json report;
  report["config"] = serialize(c);
  report["criteria"] = nlohmann::json::array();
  bool all = true;
  for (int id : ids) {
    const acceptance::CriterionResult r = suite.run(id);
    acceptance::print(std::cout, r);
    std::cout.flush();
    all = all && r.passed;
    nlohmann::json j{{"id", r.id},         {"title", r.title},   {"passed", r.passed},
                     {"seconds", r.seconds}, {"budget_s", r.budget}, {"error", r.error}};
    j["values"] = nlohmann::json::array();
    for (const auto& v : r.values)
      j["values"].push_back({{"name", v.name}, {"value", v.value}, {"bound", v.bound}, {"ok", v.ok}});
    report["criteria"].push_back(j);
  }
  report["passed"] = all;
  const fs::path p = out.path("verify_report.json");
  std::ofstream os(p);
  require(static_cast<bool>(os), ErrorKind::io, "cannot write " + p.string());
  os << report.dump(2) << "\n";
  out.written.push_back(p.string());
  report_written(out);
  std::cout << (all ? "all criteria passed" : "verification FAILED") << "\n";
  return all ? kOk : kVerification;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mvosc: mean-field oscillators, reduced dynamics, spectral PDE, particles and isochrons"};
  app.require_subcommand(1);
  Options o;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config_path, "TOML run configuration")->check(CLI::ExistingFile);
    sub->add_option("--set", o.overrides, "override a config entry, e.g. --set model.delta=0.025");
    sub->add_option("--ratio1", o.ratio1, "noise ratio sigma_1^2/k_1 (overrides model.sigma[0])");
    sub->add_option("--threads", o.threads, "worker cap for particle updates")->check(CLI::NonNegativeNumber);
    sub->add_option("--out", o.out, "output directory (default: output.dir, $MVOSC_OUTPUT_DIR, .)");
  };
  auto with_space = [&](CLI::App* sub, bool pde_ok = true) {
    auto* opt = sub->add_option("--space", o.space, "reduced or pde");
    opt->check(CLI::IsMember(pde_ok ? std::vector<std::string>{"reduced", "pde"}
                                    : std::vector<std::string>{"reduced"}));
  };

  auto* reduced = app.add_subcommand("reduced", "integrate the reduced mean ODE (slow time)");
  auto* pde = app.add_subcommand("pde", "integrate the spectral PDE (fast time)");
  auto* particles = app.add_subcommand("particles", "simulate the particle ensemble (fast time)");
  auto* cycle = app.add_subcommand("cycle", "find the reduced or PDE limit cycle");
  auto* floquet = app.add_subcommand("floquet", "monodromy, multipliers and projections");
  auto* isochron = app.add_subcommand("isochron", "phase scans and isochron grids");
  auto* compare = app.add_subcommand("compare", "reduced vs PDE vs particle mean trajectories");
  auto* verify = app.add_subcommand("verify", "run the acceptance suite and write a report");
  for (auto* s : {reduced, pde, particles, cycle, floquet, isochron, compare, verify}) common(s);
  with_space(cycle);
  with_space(floquet);
  with_space(isochron);
  particles->add_flag("--dump", o.dump, "also write every particle at the recorded times");
  floquet->add_flag("--bates", o.bates, "also measure approximate invariance over delta in {0.1, 0.05, 0.025}");
  verify->add_option("--criteria", o.criteria, "subset of criteria to run (1..9)")->check(CLI::Range(1, 9));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kInput;
  }

  try {
    const RunConfig c = resolve(o);
    if (*reduced) return cmd_reduced(c);
    if (*pde) return cmd_pde(c);
    if (*particles) return cmd_particles(c, o.dump);
    if (*cycle) return cmd_cycle(c, o.space);
    if (*floquet) return cmd_floquet(c, o.space, o.bates);
    if (*isochron) return cmd_isochron(c, o.space);
    if (*compare) return cmd_compare(c);
    if (*verify) return cmd_verify(c, o.criteria);
  } catch (const Error& e) {
    std::cerr << "mvosc: " << e.what() << "\n";
    return e.is_validation() ? kInput : kNumerical;
  } catch (const std::exception& e) {
    std::cerr << "mvosc: " << e.what() << "\n";
    return kNumerical;
  }
  return kOk;
}
