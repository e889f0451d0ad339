#pragma once

#include <cstddef>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "hamrec/geometry.hpp"
#include "hamrec/potential.hpp"

namespace hamrec {

// Kinetic convention used artifact-wide: H = <p,p> + U(q) with no 1/2,
// so qdot = 2p and qddot = -2 grad U.

template <std::size_t N>
struct PhasePoint {
  Vec<N> q{};
  Vec<N> p{};
};

using PhaseState = PhasePoint<2>;

template <std::size_t N>
struct PhaseDeriv {
  Vec<N> dq{};
  Vec<N> dp{};
};

template <std::size_t N>
inline double hamiltonian(const PhasePoint<N>& s, const FourierSeries<N>& u) {
  return dot(s.p, s.p) + u.evaluate(s.q);
}

template <std::size_t N>
inline PhaseDeriv<N> vector_field(const PhasePoint<N>& s, const FourierSeries<N>& u) {
  return {scale(s.p, 2.0), scale(u.gradient(s.q), -1.0)};
}

/// Hamilton's equations of H = e^rho (p1^2 + p2^2):
/// qdot = 2 e^rho p, pdot = -e^rho |p|^2 grad(rho).
inline PhaseDeriv<2> conformal_vector_field(const PhaseState& s, const FourierSeries2D& rho) {
  const auto [r, g] = rho.eval_with_gradient(s.q);
  const double er = std::exp(r);
  return {scale(s.p, 2.0 * er), scale(g, -er * dot(s.p, s.p))};
}

/// Thrown when the recorded relative energy drift exceeds the gate;
/// carries the step at which the integration was rejected.
struct DriftError : std::runtime_error {
  DriftError(std::size_t step_, double time_, double drift_)
      : std::runtime_error("energy drift " + std::to_string(drift_) +
                           " exceeded tolerance at t = " + std::to_string(time_) +
                           " (step " + std::to_string(step_) + "); reduce dt"),
        step(step_),
        time(time_),
        drift(drift_) {}
  std::size_t step;
  double time;
  double drift;
};

/// Fixed-step trajectory samples. Positions are stored wrapped; the
/// unwrapped lift is kept alongside for finite differencing across the
/// torus seam. `max_drift` is max_i |H_i - H_0| / max(1, |H_0|).
template <std::size_t N>
struct Trajectory {
  FourierSeries<N> potential;
  double dt = 0.0;
  double energy0 = 0.0;
  double max_drift = 0.0;
  bool conformal = false;  // potential field holds rho when set
  std::vector<double> t;
  std::vector<Vec<N>> q;       // wrapped
  std::vector<Vec<N>> q_lift;  // unwrapped
  std::vector<Vec<N>> p;
  std::vector<double> energy;

  std::size_t size() const { return t.size(); }
  PhasePoint<N> state(std::size_t i) const { return {q[i], p[i]}; }
};

/// Kick-drift-kick (Stormer-Verlet) integration of qdot = 2p,
/// pdot = -grad U. Second order, symplectic, time reversible; free
/// motion is integrated exactly. Throws DriftError past drift_tol.
template <std::size_t N>
Trajectory<N> integrate(const PhasePoint<N>& s0, const FourierSeries<N>& u, double dt,
                        double t_final, double drift_tol = 1e-6);

/// Fixed-step classical RK4 for the conformal system (non-separable, so
/// no symplectic splitting is claimed); drift gated identically.
Trajectory<2> integrate_conformal(const PhaseState& s0, const FourierSeries2D& rho,
                                  double dt, double t_final, double drift_tol = 1e-6);

// ---- observation channel ------------------------------------------------

enum class ObservationMode { exact, positions_only };

template <std::size_t N>
struct Observation {
  double t = 0.0;
  Vec<N> q{};         // wrapped configuration sample
  Vec<N> velocity{};  // qdot
  Vec<N> acceleration{};
};

template <std::size_t N>
struct ObservationSeries {
  ObservationMode mode = ObservationMode::exact;
  double spacing = 0.0;  // stride * dt
  bool conformal = false;
  std::vector<Observation<N>> samples;
};

/// Samples the trajectory every `stride` steps. Exact mode reads the
/// simulation's own field (velocity 2p, acceleration -2 grad U, or the
/// conformal closed form). Positions-only differences the unwrapped
/// lift at spacing stride*dt and drops the endpoints.
template <std::size_t N>
ObservationSeries<N> observe(const Trajectory<N>& traj, ObservationMode mode,
                             std::size_t stride = 1);

// ---- trajectory CSV ------------------------------------------------------

template <std::size_t N>
void write_trajectory_csv(std::ostream& os, const Trajectory<N>& traj, std::size_t stride = 1);

/// Reads the 2-torus layout t,q1,q2,p1,p2,energy back; the unwrapped
/// lift is rebuilt by accumulating minimal per-step displacements.
Trajectory<2> read_trajectory_csv(std::istream& is);

// ---- sphere geodesic trajectories ----------------------------------------

struct SphereTrajectory {
  double dt = 0.0;
  double energy0 = 0.0;  // H = <p,p> = |v|^2 / 4
  std::vector<double> t;
  std::vector<Vec3> x;
  std::vector<Vec3> v;
};

/// Embedded great-circle flow with per-step renormalization of |x| and
/// re-tangentialized, speed-locked velocity.
SphereTrajectory integrate_sphere(const SphereState& s0, double dt, double t_final);

void write_sphere_trajectory_csv(std::ostream& os, const SphereTrajectory& traj,
                                 std::size_t stride = 1);

// ---- system adapters (shared stepping interface for orbit detection) -----

/// Natural system on the flat 2-torus.
struct TorusSystem {
  using State = PhaseState;
  static constexpr std::size_t phase_dim = 4;

  FourierSeries2D potential;
  double dt = 1e-3;

  State step(const State& s, double h) const;
  Vec<4> field(const State& s) const;
  Vec<4> displacement(const State& from, const State& to) const;  // torus metric on q
  double distance(const State& from, const State& to) const;
};

/// Free geodesic flow on the unit sphere at fixed speed.
struct SphereSystem {
  using State = SphereState;
  static constexpr std::size_t phase_dim = 6;

  double speed = 2.0;
  double dt = 1e-4;

  State step(const State& s, double h) const;
  Vec<6> field(const State& s) const;
  Vec<6> displacement(const State& from, const State& to) const;
  double distance(const State& from, const State& to) const;
};

}  // namespace hamrec
