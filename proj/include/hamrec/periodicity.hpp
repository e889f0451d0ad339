#pragma once

#include <array>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "hamrec/dynamics.hpp"

namespace hamrec {

/// Codimension-one disk transversal to the flow, centered at `base`
/// with unit normal along F(base).
template <class System>
struct PoincareSection {
  typename System::State base;
  std::array<double, System::phase_dim> normal;
  double radius = 0.1;
};

/// Builds a section at x0. The transversality probe samples the disk on
/// a 5-point-per-axis grid over the normal's orthogonal complement and
/// requires <F(y), normal> > 0 everywhere; the radius is halved (at most
/// 10 times) until the probe passes. Throws on a singular base point or
/// if transversality is unachievable.
template <class System>
PoincareSection<System> build_section(const System& sys, const typename System::State& x0,
                                      double radius = 0.1);

template <class System>
struct ReturnEvent {
  typename System::State state;
  double time;
};

/// First return of the flow through the section disk: marches at the
/// system step, watches the signed offset along the normal for an
/// upward zero crossing inside the disk, and refines the crossing time
/// by bisection on step subintervals to 1e-10. none if no return before
/// t_max.
template <class System>
std::optional<ReturnEvent<System>> first_return(const System& sys,
                                                const PoincareSection<System>& section,
                                                const typename System::State& start,
                                                double t_max);

template <class State>
struct ClosedOrbitRecord {
  State initial;
  double period = 0.0;
  double closure_gap = 0.0;
  int returns_used = 0;  // refined return candidates inspected
};

/// Searches the first phase-space recurrence within eps_close at time
/// >= period_floor (torus metric on q, Euclidean on p), refining the
/// candidate return through the section at the start point and
/// re-verifying closure over one further period. Absence (none) is a
/// valid result; a singular start cannot close and yields none.
template <class System>
std::optional<ClosedOrbitRecord<typename System::State>> detect_closed_orbit(
    const System& sys, const typename System::State& start, double eps_close,
    double period_floor, double t_max);

/// Heuristic minimum-period floor (min speed over max force),
///   T_m = 2 sqrt(E - sup U) / (2 sup|grad U| + 1e-12),
/// clamped below by 10*dt; force-free systems get `default_floor`.
/// Requires E above the certified sup bound of U.
double minimum_period_floor(const FourierSeries2D& u, double energy, double dt,
                            double default_floor = 0.5);

struct FamilyDetectionError : std::runtime_error {
  FamilyDetectionError(double s_, const std::string& what_)
      : std::runtime_error(what_), s(s_) {}
  double s;
};

struct PeriodFamilyReport {
  std::vector<double> s;
  std::vector<double> arc;     // accumulated phase-space arc length
  std::vector<double> period;  // detected along the family
  double max_log_slope = 0.0;  // empirical C2 = max |d log T / d arc|
  bool bound_holds = true;     // T(s) <= T(0) exp(C2 * arc)
};

/// Detects the closed orbit through family(s) for every s on the grid,
/// differences log-periods along the accumulated arc length, reports
/// the maximum slope as the empirical Gronwall constant, and checks the
/// exponential period bound for self-consistency. A failed detection
/// throws FamilyDetectionError naming the offending s.
template <class System>
PeriodFamilyReport period_lipschitz_check(
    const System& sys, const std::vector<double>& s_grid,
    const std::function<typename System::State(double)>& family, double eps_close,
    double period_floor, double t_max);

}  // namespace hamrec
