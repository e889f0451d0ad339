#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "hamrec/dynamics.hpp"

namespace hamrec {

enum class Scenario {
  torus_reconstruct,
  sphere_closed,
  low_energy,
  t3_underdetermined,
  gronwall_check,
  conformal_reconstruct,
};

const char* scenario_name(Scenario s);
std::optional<Scenario> scenario_from_name(const std::string& name);

/// One experiment's knobs. Optional fields resolve to scenario-specific
/// defaults; `energy`, when set, overrides energy_factor * C0.
struct ScenarioConfig {
  Scenario scenario = Scenario::torus_reconstruct;
  std::uint64_t seed = 1;
  std::optional<double> dt;
  std::optional<double> t_final;
  std::optional<int> k_max;
  std::optional<double> amplitude;
  std::optional<double> energy_factor;
  std::optional<double> energy;
  ObservationMode mode = ObservationMode::exact;
  std::string output_dir = "out";
  double drift_tol = 1e-6;
  double eps_close = 1e-6;
  std::optional<double> detect_horizon;
  std::size_t stride = 10;
  std::size_t grid_n = 64;
  double circle_radius = 0.5;
  double rank_tol = 1e-10;

  bool operator==(const ScenarioConfig&) const = default;
};

/// Parse error naming the offending 1-based line (0 when not line-bound).
struct ConfigError : std::runtime_error {
  ConfigError(int line_, const std::string& what_)
      : std::runtime_error(line_ > 0 ? "config line " + std::to_string(line_) + ": " + what_
                                     : what_),
        line(line_) {}
  int line;
};

/// Refusal of a run whose energy violates the scenario's gate.
struct GateError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// `key = value` per line, `#` comments, case-sensitive keys; unknown
/// keys and non-numeric values are rejected with the line number.
ScenarioConfig parse_config(const std::string& text);

/// Full-precision echo; parse_config(emit_config(c)) == c.
std::string emit_config(const ScenarioConfig& c);

/// Fill unset optionals with the scenario's defaults.
ScenarioConfig resolve_defaults(ScenarioConfig c);

struct ScenarioReport {
  ScenarioConfig config;  // resolved
  std::map<std::string, double> metrics;
  std::vector<std::pair<std::string, bool>> checks;
  bool pass = false;
  double seconds = 0.0;  // wall clock, console-only (artifacts stay byte-stable)
};

/// Runs one scenario deterministically in (scenario, seed, parameters),
/// writing CSV artifacts, a summary.json and the resolved config echo
/// into output_dir. Throws GateError when E < C0 outside the low-energy
/// scenario (which instead requires energy_factor < 1); DriftError
/// propagates as a numerical failure.
ScenarioReport run_scenario(const ScenarioConfig& cfg);

/// Pendulum libration period by quadrature of T = closed-path integral
/// of dq1 / (2 sqrt(E - U)), with the inverse-sqrt endpoint singularity
/// removed by the elliptic substitution. Valid for |E| < eps.
double pendulum_period_quadrature(double energy, double eps, int n = 4096);

}  // namespace hamrec
