// Command-line front end: simulate trajectories, reconstruct potentials,
// detect closed orbits, measure coverage, and run the packaged scenarios.

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>

#include <json.hpp>

#include "hamrec/csv.hpp"
#include "hamrec/harness.hpp"
#include "hamrec/periodicity.hpp"
#include "hamrec/reconstruction.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace hamrec;

namespace {

constexpr int kExitPass = 0;
constexpr int kExitFail = 1;
constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;

std::string slurp(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ConfigError(0, "cannot open config file '" + path + "'");
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

void write_json_file(const fs::path& p, const json& j) {
  std::ofstream os(p, std::ios::binary);
  os << j.dump(2) << "\n";
}

FourierSeries2D load_series(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open series file '" + path + "'");
  return read_series_csv<2>(is);
}

void print_report(const ScenarioReport& rep) {
  std::cout << "scenario " << scenario_name(rep.config.scenario) << " seed " << rep.config.seed
            << (rep.pass ? " PASS" : " FAIL") << "  (" << rep.seconds << " s)\n";
  for (const auto& [name, ok] : rep.checks)
    std::cout << "  [" << (ok ? "ok" : "FAIL") << "] " << name << "\n";
}

struct CommonFlags {
  std::optional<std::string> config_path;
  std::optional<std::uint64_t> seed;
  std::optional<double> dt;
  std::optional<double> t_final;
  std::optional<int> k_max;
  std::optional<std::string> mode;
  std::optional<std::string> out_dir;

  void attach(CLI::App* cmd) {
    cmd->add_option("--config", config_path, "key = value config file");
    cmd->add_option("--seed", seed, "random seed");
    cmd->add_option("--dt", dt, "integration step");
    cmd->add_option("--t-final", t_final, "time horizon");
    cmd->add_option("--kmax", k_max, "band limit");
    cmd->add_option("--mode", mode, "observation mode: exact | positions-only")
        ->check(CLI::IsMember({"exact", "positions-only"}));
    cmd->add_option("--out-dir", out_dir, "output directory");
  }

  ScenarioConfig merge() const {
    ScenarioConfig c;
    if (config_path) c = parse_config(slurp(*config_path));
    if (seed) c.seed = *seed;
    if (dt) c.dt = *dt;
    if (t_final) c.t_final = *t_final;
    if (k_max) c.k_max = *k_max;
    if (mode) c.mode = *mode == "exact" ? ObservationMode::exact : ObservationMode::positions_only;
    if (out_dir) c.output_dir = *out_dir;
    return c;
  }
};

int cmd_simulate(const CommonFlags& flags, const std::string& system, double amplitude,
                 double energy_factor, std::optional<double> energy,
                 const std::string& potential_path, std::size_t out_stride) {
  ScenarioConfig c = flags.merge();
  const fs::path dir(c.output_dir);
  fs::create_directories(dir);
  json meta;
  meta["system"] = system;
  meta["seed"] = c.seed;

  std::mt19937_64 rng(c.seed ^ 0x9e3779b97f4a7c15ULL);
  std::uniform_real_distribution<double> unif(0.0, kTwoPi);

  if (system == "torus" || system == "conformal") {
    const int kmax = c.k_max.value_or(3);
    FourierSeries2D series = potential_path.empty()
                                 ? FourierSeries2D::random(c.seed, kmax, amplitude)
                                 : load_series(potential_path);
    const Vec2 q0{unif(rng), unif(rng)};
    const double theta = unif(rng);
    Trajectory<2> traj;
    if (system == "torus") {
      const double c0 = series.sup_bound();
      const double e = energy.value_or(energy_factor * c0);
      if (!(e >= series.evaluate(q0)))
        throw GateError("simulate: energy below the potential at the start point");
      const double pmag = std::sqrt(e - series.evaluate(q0));
      traj = integrate<2>({q0, {pmag * std::cos(theta), pmag * std::sin(theta)}}, series,
                          c.dt.value_or(1e-3), c.t_final.value_or(100.0), c.drift_tol);
      meta["C0_l1"] = c0;
      meta["energy"] = e;
    } else {
      const double e = energy.value_or(1.0);
      const double pmag = std::sqrt(e * std::exp(-series.evaluate(q0)));
      traj = integrate_conformal({q0, {pmag * std::cos(theta), pmag * std::sin(theta)}}, series,
                                 c.dt.value_or(1e-4), c.t_final.value_or(50.0), c.drift_tol);
      meta["energy"] = e;
    }
    meta["drift"] = traj.max_drift;
    {
      std::ofstream os(dir / "trajectory.csv", std::ios::binary);
      write_trajectory_csv<2>(os, traj, out_stride);
    }
    std::ofstream ps(dir / "potential.csv", std::ios::binary);
    write_series_csv<2>(ps, series);
  } else if (system == "t3") {
    const double golden = 0.5 * (1.0 + std::sqrt(5.0));
    const Vec3 q0{unif(rng), unif(rng), unif(rng)};
    const Vec3 omega{1.0, golden, 1.0 + golden};
    const FourierSeries3D zero(c.k_max.value_or(2));
    const auto traj = integrate<3>({q0, scale(omega, 0.5)}, zero, c.dt.value_or(1e-3),
                                   c.t_final.value_or(200.0), c.drift_tol);
    meta["drift"] = traj.max_drift;
    std::ofstream os(dir / "trajectory.csv", std::ios::binary);
    write_trajectory_csv<3>(os, traj, out_stride);
  } else if (system == "sphere") {
    const double e = energy.value_or(1.0);
    const double speed = 2.0 * std::sqrt(e);
    std::uniform_real_distribution<double> unif01(0.0, 1.0);
    const double z = 2.0 * unif01(rng) - 1.0;
    const double az = kTwoPi * unif01(rng);
    const double st = std::sqrt(std::max(0.0, 1.0 - z * z));
    SphereState s0{{st * std::cos(az), st * std::sin(az), z}, {-std::sin(az), std::cos(az), 0.0}};
    s0.v = scale(s0.v, speed);
    s0 = sphere_renormalize(s0, speed);
    const auto traj = integrate_sphere(s0, c.dt.value_or(1e-4), c.t_final.value_or(10.0));
    meta["energy"] = e;
    std::ofstream os(dir / "trajectory.csv", std::ios::binary);
    write_sphere_trajectory_csv(os, traj, out_stride);
  } else {
    throw ConfigError(0, "unknown system '" + system + "'");
  }
  write_json_file(dir / "summary.json", meta);
  std::cout << "simulate " << system << " -> " << (dir / "trajectory.csv").string() << "\n";
  return kExitPass;
}

int cmd_reconstruct(const CommonFlags& flags, const std::string& traj_path,
                    const std::string& truth_path, std::size_t stride, double rank_tol) {
  ScenarioConfig c = flags.merge();
  const fs::path dir(c.output_dir);
  fs::create_directories(dir);

  std::ifstream ts(traj_path, std::ios::binary);
  if (!ts) throw std::runtime_error("cannot open trajectory '" + traj_path + "'");
  Trajectory<2> traj = read_trajectory_csv(ts);

  FourierSeries2D truth;
  const bool have_truth = !truth_path.empty();
  if (have_truth) {
    truth = load_series(truth_path);
    traj.potential = truth;
  } else if (c.mode == ObservationMode::exact) {
    throw ConfigError(0, "exact mode needs --truth (the observed field's potential)");
  }

  const auto obs = observe<2>(traj, c.mode, stride);
  const auto samples = extract_force<2>(obs);
  const int kmax = c.k_max.value_or(3);
  const auto fit = fit_potential<2>(samples, kmax, rank_tol);
  const auto diag = key_set_diagnostic<2>(samples, kmax, rank_tol);

  std::vector<Vec2> qs;
  for (const auto& s : obs.samples) qs.push_back(s.q);
  const auto cov = coverage_metrics(qs, c.grid_n, c.circle_radius);

  json j;
  j["residual_rms"] = fit.residual_rms;
  j["condition"] = diag.condition;
  j["sigma_min"] = diag.sigma_min;
  j["rank_deficient"] = fit.rank_deficient;
  j["verdict_key"] = diag.key;
  j["occupancy"] = cov.occupancy;
  j["crossing_count"] = cov.crossing_count;
  if (have_truth) {
    j["sup_error"] = sup_norm_error(fit.fitted, truth, 256);
    j["coef_rel_error"] = coefficient_rel_error(fit.fitted, truth);
  }
  {
    std::ofstream os(dir / "potential_fit.csv", std::ios::binary);
    write_series_csv<2>(os, fit.fitted);
  }
  {
    std::ofstream os(dir / "reconstruction.csv", std::ios::binary);
    os << "k1,k2,a_true,b_true,a_fit,b_fit,abs_err\n";
    os << "0,0," << fmt_double(truth.mean()) << ",0," << fmt_double(fit.fitted.mean()) << ",0,"
       << fmt_double(std::abs(fit.fitted.mean() - truth.mean())) << "\n";
    for (const auto& k : canonical_wave_vectors<2>(std::max(kmax, truth.k_max()))) {
      const auto [at, bt] = truth.coefficient(k);
      const auto [af, bf] = fit.fitted.coefficient(k);
      os << k[0] << ',' << k[1] << ',' << fmt_double(at) << ',' << fmt_double(bt) << ','
         << fmt_double(af) << ',' << fmt_double(bf) << ','
         << fmt_double(std::max(std::abs(af - at), std::abs(bf - bt))) << '\n';
    }
  }
  write_json_file(dir / "summary.json", j);
  std::cout << "reconstruct -> " << (dir / "summary.json").string() << " (verdict "
            << (diag.key ? "key" : "not key") << ")\n";
  return kExitPass;
}

int cmd_detect_orbits(const CommonFlags& flags, const std::string& system, int count,
                      double energy, double eps_close, std::optional<double> period_floor,
                      double t_max, double p1, double p2) {
  ScenarioConfig c = flags.merge();
  const fs::path dir(c.output_dir);
  fs::create_directories(dir);

  std::ofstream os(dir / "orbits.csv", std::ios::binary);
  os << "seed,q1,q2,p1,p2,closed,period,closure_gap\n";
  int closed = 0;
  if (system == "sphere") {
    const double speed = 2.0 * std::sqrt(energy);
    const SphereSystem sys{speed, c.dt.value_or(1e-4)};
    const double floor = period_floor.value_or(std::max(0.5, 10.0 * sys.dt));
    std::mt19937_64 rng(c.seed ^ 0x9e3779b97f4a7c15ULL);
    std::uniform_real_distribution<double> unif01(0.0, 1.0);
    for (int i = 0; i < count; ++i) {
      const double z = 2.0 * unif01(rng) - 1.0;
      const double az = kTwoPi * unif01(rng);
      const double pol = std::acos(std::clamp(z, -1.0, 1.0));
      const double st = std::sin(pol);
      const Vec3 x{st * std::cos(az), st * std::sin(az), z};
      const Vec3 e_az{-std::sin(az), std::cos(az), 0.0};
      const Vec3 e_pol{std::cos(pol) * std::cos(az), std::cos(pol) * std::sin(az), -std::sin(pol)};
      const double psi = kTwoPi * unif01(rng);
      Vec3 v{};
      for (int d = 0; d < 3; ++d)
        v[d] = speed * (std::cos(psi) * e_az[d] + std::sin(psi) * e_pol[d]);
      const auto rec = detect_closed_orbit(sys, sphere_renormalize({x, v}, speed), eps_close,
                                           floor, t_max);
      if (rec) ++closed;
      os << i << ',' << fmt_double(az) << ',' << fmt_double(pol) << ','
         << fmt_double(dot(v, e_az) / 2.0) << ',' << fmt_double(dot(v, e_pol) / 2.0) << ','
         << (rec ? 1 : 0) << ',' << fmt_double(rec ? rec->period : 0.0) << ','
         << fmt_double(rec ? rec->closure_gap : 0.0) << '\n';
    }
  } else if (system == "torus") {
    const FourierSeries2D free_potential;
    const TorusSystem sys{free_potential, c.dt.value_or(1e-3)};
    const double floor = period_floor.value_or(0.5);
    const PhaseState s0{{0.0, 0.0}, {p1, p2}};
    const auto rec = detect_closed_orbit(sys, s0, eps_close, floor, t_max);
    if (rec) ++closed;
    os << 0 << ",0,0," << fmt_double(p1) << ',' << fmt_double(p2) << ',' << (rec ? 1 : 0) << ','
       << fmt_double(rec ? rec->period : 0.0) << ',' << fmt_double(rec ? rec->closure_gap : 0.0)
       << '\n';
    count = 1;
  } else {
    throw ConfigError(0, "unknown system '" + system + "'");
  }
  std::cout << "detect-orbits " << system << ": " << closed << "/" << count << " closed -> "
            << (dir / "orbits.csv").string() << "\n";
  return kExitPass;
}

int cmd_coverage(const CommonFlags& flags, const std::string& traj_path, double radius) {
  ScenarioConfig c = flags.merge();
  const fs::path dir(c.output_dir);
  fs::create_directories(dir);
  std::ifstream ts(traj_path, std::ios::binary);
  if (!ts) throw std::runtime_error("cannot open trajectory '" + traj_path + "'");
  const Trajectory<2> traj = read_trajectory_csv(ts);
  const auto cov = coverage_metrics(traj.q, c.grid_n, radius);
  json j;
  j["occupancy"] = cov.occupancy;
  j["q_star"] = {cov.q_star.q1, cov.q_star.q2};
  j["crossing_count"] = cov.crossing_count;
  write_json_file(dir / "summary.json", j);
  std::cout << "coverage: occupancy " << cov.occupancy << ", crossings " << cov.crossing_count
            << " -> " << (dir / "summary.json").string() << "\n";
  return kExitPass;
}

int cmd_scenario(const CommonFlags& flags, const std::string& name) {
  ScenarioConfig c = flags.merge();
  if (!name.empty()) {
    const auto s = scenario_from_name(name);
    if (!s) throw ConfigError(0, "unknown scenario '" + name + "'");
    c.scenario = *s;
  }
  const auto rep = run_scenario(c);
  print_report(rep);
  return rep.pass ? kExitPass : kExitFail;
}

int cmd_batch(const CommonFlags& flags) {
  const ScenarioConfig base = flags.merge();
  bool all_pass = true;
  for (Scenario s : {Scenario::torus_reconstruct, Scenario::sphere_closed, Scenario::low_energy,
                     Scenario::t3_underdetermined, Scenario::gronwall_check,
                     Scenario::conformal_reconstruct}) {
    ScenarioConfig c = base;
    c.scenario = s;
    c.output_dir = (fs::path(base.output_dir) / scenario_name(s)).string();
    const auto rep = run_scenario(c);
    print_report(rep);
    all_pass = all_pass && rep.pass;
  }
  return all_pass ? kExitPass : kExitFail;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"hamrec: trajectory simulation and potential reconstruction on compact surfaces"};
  app.require_subcommand(1);

  CommonFlags sim_flags, rec_flags, det_flags, cov_flags, scen_flags, batch_flags;

  auto* sim = app.add_subcommand("simulate", "integrate a trajectory and write CSV");
  sim_flags.attach(sim);
  std::string sim_system = "torus";
  double sim_amplitude = 0.02, sim_factor = 2.0;
  std::optional<double> sim_energy;
  std::string sim_potential;
  std::size_t sim_stride = 1;
  sim->add_option("--system", sim_system, "torus | conformal | t3 | sphere")
      ->check(CLI::IsMember({"torus", "conformal", "t3", "sphere"}));
  sim->add_option("--amplitude", sim_amplitude, "random potential coefficient amplitude");
  sim->add_option("--energy-factor", sim_factor, "E = factor * C0");
  sim->add_option("--energy", sim_energy, "explicit energy (overrides the factor)");
  sim->add_option("--potential", sim_potential, "potential CSV instead of a seeded one");
  sim->add_option("--out-stride", sim_stride, "write every n-th sample");

  auto* rec = app.add_subcommand("reconstruct", "fit a band-limited potential to a trajectory");
  rec_flags.attach(rec);
  std::string rec_traj, rec_truth;
  std::size_t rec_stride = 10;
  double rec_rank_tol = 1e-10;
  rec->add_option("--traj", rec_traj, "trajectory CSV")->required();
  rec->add_option("--truth", rec_truth, "true potential CSV (enables exact mode and errors)");
  rec->add_option("--stride", rec_stride, "observation thinning stride");
  rec->add_option("--rank-tol", rec_rank_tol, "singular value truncation threshold");

  auto* det = app.add_subcommand("detect-orbits", "closed-orbit detection");
  det_flags.attach(det);
  std::string det_system = "sphere";
  int det_count = 100;
  double det_energy = 1.0, det_eps = 1e-6, det_tmax = 20.0, det_p1 = 0.5, det_p2 = 0.5;
  std::optional<double> det_floor;
  det->add_option("--system", det_system, "sphere | torus")
      ->check(CLI::IsMember({"sphere", "torus"}));
  det->add_option("--count", det_count, "ensemble size (sphere)");
  det->add_option("--energy", det_energy, "energy level");
  det->add_option("--eps-close", det_eps, "closure tolerance");
  det->add_option("--period-floor", det_floor, "minimum period");
  det->add_option("--t-max", det_tmax, "detection horizon");
  det->add_option("--p1", det_p1, "torus momentum p1");
  det->add_option("--p2", det_p2, "torus momentum p2");

  auto* cov = app.add_subcommand("coverage", "occupancy and circle crossings of a trajectory");
  cov_flags.attach(cov);
  std::string cov_traj;
  double cov_radius = 0.5;
  cov->add_option("--traj", cov_traj, "trajectory CSV")->required();
  cov->add_option("--radius", cov_radius, "crossing circle radius");

  auto* scen = app.add_subcommand("scenario", "run one packaged scenario");
  scen_flags.attach(scen);
  std::string scen_name;
  scen->add_option("--name", scen_name, "scenario name (or set it in --config)");

  auto* batch = app.add_subcommand("batch", "run all scenarios into per-name directories");
  batch_flags.attach(batch);

  try {
    app.parse(argc, argv);
    if (sim->parsed())
      return cmd_simulate(sim_flags, sim_system, sim_amplitude, sim_factor, sim_energy,
                          sim_potential, sim_stride);
    if (rec->parsed())
      return cmd_reconstruct(rec_flags, rec_traj, rec_truth, rec_stride, rec_rank_tol);
    if (det->parsed())
      return cmd_detect_orbits(det_flags, det_system, det_count, det_energy, det_eps, det_floor,
                               det_tmax, det_p1, det_p2);
    if (cov->parsed()) return cmd_coverage(cov_flags, cov_traj, cov_radius);
    if (scen->parsed()) return cmd_scenario(scen_flags, scen_name);
    if (batch->parsed()) return cmd_batch(batch_flags);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitPass : kExitConfig;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const GateError& e) {
    std::cerr << "refused: " << e.what() << "\n";
    return kExitConfig;
  } catch (const DriftError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFail;
  }
  return kExitConfig;
}
