#include "hamrec/dynamics.hpp"

#include <cmath>
#include <cstdlib>
#include <istream>
#include <ostream>
#include <sstream>

#include "hamrec/csv.hpp"

namespace hamrec {

namespace {

template <std::size_t N>
void push_sample(Trajectory<N>& traj, double t, const Vec<N>& q_lift, const Vec<N>& p,
                 double h_val) {
  traj.t.push_back(t);
  traj.q_lift.push_back(q_lift);
  traj.q.push_back(wrap_point(q_lift));
  traj.p.push_back(p);
  traj.energy.push_back(h_val);
}

template <std::size_t N>
void check_drift(Trajectory<N>& traj, double h_val, std::size_t step, double t,
                 double drift_tol) {
  const double drift = std::abs(h_val - traj.energy0) / std::max(1.0, std::abs(traj.energy0));
  if (drift > traj.max_drift) traj.max_drift = drift;
  if (drift > drift_tol) throw DriftError(step, t, drift);
}

}  // namespace

template <std::size_t N>
Trajectory<N> integrate(const PhasePoint<N>& s0, const FourierSeries<N>& u, double dt,
                        double t_final, double drift_tol) {
  if (!(dt > 0.0)) throw std::invalid_argument("integrate: dt must be positive");
  if (!(t_final >= dt)) throw std::invalid_argument("integrate: horizon shorter than one step");
  if (!all_finite(s0.q) || !all_finite(s0.p))
    throw std::invalid_argument("integrate: non-finite initial state");

  const std::size_t steps = std::size_t(std::llround(t_final / dt));
  Trajectory<N> traj;
  traj.potential = u;
  traj.dt = dt;

  Vec<N> q_lift = s0.q;
  Vec<N> p = s0.p;
  auto [u0, g] = u.eval_with_gradient(wrap_point(q_lift));
  traj.energy0 = dot(p, p) + u0;
  traj.t.reserve(steps + 1);
  traj.q.reserve(steps + 1);
  traj.q_lift.reserve(steps + 1);
  traj.p.reserve(steps + 1);
  traj.energy.reserve(steps + 1);
  push_sample(traj, 0.0, q_lift, p, traj.energy0);

  for (std::size_t i = 1; i <= steps; ++i) {
    Vec<N> p_half = p;
    for (std::size_t d = 0; d < N; ++d) p_half[d] -= 0.5 * dt * g[d];
    for (std::size_t d = 0; d < N; ++d) q_lift[d] += dt * 2.0 * p_half[d];
    const auto ug = u.eval_with_gradient(wrap_point(q_lift));
    g = ug.second;
    p = p_half;
    for (std::size_t d = 0; d < N; ++d) p[d] -= 0.5 * dt * g[d];

    const double t = double(i) * dt;
    const double h_val = dot(p, p) + ug.first;
    push_sample(traj, t, q_lift, p, h_val);
    check_drift(traj, h_val, i, t, drift_tol);
  }
  return traj;
}

template Trajectory<2> integrate<2>(const PhasePoint<2>&, const FourierSeries<2>&, double,
                                    double, double);
template Trajectory<3> integrate<3>(const PhasePoint<3>&, const FourierSeries<3>&, double,
                                    double, double);

Trajectory<2> integrate_conformal(const PhaseState& s0, const FourierSeries2D& rho,
                                  double dt, double t_final, double drift_tol) {
  if (!(dt > 0.0)) throw std::invalid_argument("integrate_conformal: dt must be positive");
  if (!(t_final >= dt))
    throw std::invalid_argument("integrate_conformal: horizon shorter than one step");

  const auto deriv = [&rho](const Vec2& q_lift, const Vec2& p) -> PhaseDeriv<2> {
    const auto [r, g] = rho.eval_with_gradient(wrap_point(q_lift));
    const double er = std::exp(r);
    return {scale(p, 2.0 * er), scale(g, -er * dot(p, p))};
  };

  const std::size_t steps = std::size_t(std::llround(t_final / dt));
  Trajectory<2> traj;
  traj.potential = rho;
  traj.conformal = true;
  traj.dt = dt;

  Vec2 q_lift = s0.q;
  Vec2 p = s0.p;
  traj.energy0 = std::exp(rho.evaluate(wrap_point(q_lift))) * dot(p, p);
  push_sample(traj, 0.0, q_lift, p, traj.energy0);

  for (std::size_t i = 1; i <= steps; ++i) {
    const auto k1 = deriv(q_lift, p);
    const auto k2 = deriv(add(q_lift, scale(k1.dq, 0.5 * dt)), add(p, scale(k1.dp, 0.5 * dt)));
    const auto k3 = deriv(add(q_lift, scale(k2.dq, 0.5 * dt)), add(p, scale(k2.dp, 0.5 * dt)));
    const auto k4 = deriv(add(q_lift, scale(k3.dq, dt)), add(p, scale(k3.dp, dt)));
    for (std::size_t d = 0; d < 2; ++d) {
      q_lift[d] += dt / 6.0 * (k1.dq[d] + 2.0 * k2.dq[d] + 2.0 * k3.dq[d] + k4.dq[d]);
      p[d] += dt / 6.0 * (k1.dp[d] + 2.0 * k2.dp[d] + 2.0 * k3.dp[d] + k4.dp[d]);
    }
    const double t = double(i) * dt;
    const double h_val = std::exp(rho.evaluate(wrap_point(q_lift))) * dot(p, p);
    push_sample(traj, t, q_lift, p, h_val);
    check_drift(traj, h_val, i, t, drift_tol);
  }
  return traj;
}

template <std::size_t N>
ObservationSeries<N> observe(const Trajectory<N>& traj, ObservationMode mode,
                             std::size_t stride) {
  if (stride == 0) throw std::invalid_argument("observe: zero stride");
  ObservationSeries<N> obs;
  obs.mode = mode;
  obs.spacing = traj.dt * double(stride);
  obs.conformal = traj.conformal;

  if (mode == ObservationMode::exact) {
    for (std::size_t i = 0; i < traj.size(); i += stride) {
      Observation<N> o;
      o.t = traj.t[i];
      o.q = traj.q[i];
      if (traj.conformal) {
        if constexpr (N == 2) {
          const auto [r, g] = traj.potential.eval_with_gradient(traj.q[i]);
          const double er = std::exp(r);
          o.velocity = scale(traj.p[i], 2.0 * er);
          // qddot = (grad rho . qdot) qdot - (|qdot|^2 / 2) grad rho
          const double gv = dot(g, o.velocity);
          const double v2 = dot(o.velocity, o.velocity);
          for (std::size_t d = 0; d < N; ++d)
            o.acceleration[d] = gv * o.velocity[d] - 0.5 * v2 * g[d];
        }
      } else {
        o.velocity = scale(traj.p[i], 2.0);
        o.acceleration = scale(traj.potential.gradient(traj.q[i]), -2.0);
      }
      obs.samples.push_back(o);
    }
    return obs;
  }

  // positions-only: central differences of the unwrapped lift at the
  // observation spacing; first and last observed samples dropped
  if (traj.size() < 2 * stride + 1)
    throw std::invalid_argument("observe: too few samples for positions-only differencing");
  const double h = obs.spacing;
  for (std::size_t i = stride; i + stride < traj.size(); i += stride) {
    Observation<N> o;
    o.t = traj.t[i];
    o.q = traj.q[i];
    const Vec<N>& qm = traj.q_lift[i - stride];
    const Vec<N>& q0 = traj.q_lift[i];
    const Vec<N>& qp = traj.q_lift[i + stride];
    for (std::size_t d = 0; d < N; ++d) {
      o.velocity[d] = (qp[d] - qm[d]) / (2.0 * h);
      o.acceleration[d] = (qp[d] - 2.0 * q0[d] + qm[d]) / (h * h);
    }
    obs.samples.push_back(o);
  }
  return obs;
}

template ObservationSeries<2> observe<2>(const Trajectory<2>&, ObservationMode, std::size_t);
template ObservationSeries<3> observe<3>(const Trajectory<3>&, ObservationMode, std::size_t);

template <std::size_t N>
void write_trajectory_csv(std::ostream& os, const Trajectory<N>& traj, std::size_t stride) {
  os << 't';
  for (std::size_t d = 0; d < N; ++d) os << ",q" << (d + 1);
  for (std::size_t d = 0; d < N; ++d) os << ",p" << (d + 1);
  os << ",energy\n";
  for (std::size_t i = 0; i < traj.size(); i += stride) {
    os << fmt_double(traj.t[i]);
    for (std::size_t d = 0; d < N; ++d) os << ',' << fmt_double(traj.q[i][d]);
    for (std::size_t d = 0; d < N; ++d) os << ',' << fmt_double(traj.p[i][d]);
    os << ',' << fmt_double(traj.energy[i]) << '\n';
  }
}

template void write_trajectory_csv<2>(std::ostream&, const Trajectory<2>&, std::size_t);
template void write_trajectory_csv<3>(std::ostream&, const Trajectory<3>&, std::size_t);

Trajectory<2> read_trajectory_csv(std::istream& is) {
  Trajectory<2> traj;
  std::string line;
  bool header = true;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    if (header) {
      header = false;
      continue;
    }
    std::istringstream ls(line);
    std::string cell;
    double row[6];
    for (double& v : row) {
      if (!std::getline(ls, cell, ',')) throw std::runtime_error("trajectory csv: short row");
      v = std::strtod(cell.c_str(), nullptr);
    }
    traj.t.push_back(row[0]);
    traj.q.push_back({row[1], row[2]});
    traj.p.push_back({row[3], row[4]});
    traj.energy.push_back(row[5]);
  }
  if (traj.t.empty()) throw std::runtime_error("trajectory csv: no samples");
  traj.dt = traj.t.size() > 1 ? traj.t[1] - traj.t[0] : 0.0;
  traj.energy0 = traj.energy.front();
  traj.q_lift.reserve(traj.q.size());
  traj.q_lift.push_back(traj.q.front());
  for (std::size_t i = 1; i < traj.q.size(); ++i) {
    const Vec2 d = torus_delta(traj.q[i - 1], traj.q[i]);
    traj.q_lift.push_back(add(traj.q_lift[i - 1], d));
  }
  for (double h : traj.energy)
    traj.max_drift = std::max(traj.max_drift, std::abs(h - traj.energy0) /
                                                  std::max(1.0, std::abs(traj.energy0)));
  return traj;
}

// ---- sphere ---------------------------------------------------------------

namespace {

SphereState sphere_kdk_step(const SphereState& s, double h, double speed) {
  SphereState n = s;
  Vec3 a = scale(n.x, -dot(n.v, n.v));
  n.v = add(n.v, scale(a, 0.5 * h));
  n.x = add(n.x, scale(n.v, h));
  a = scale(n.x, -dot(n.v, n.v));
  n.v = add(n.v, scale(a, 0.5 * h));
  return sphere_renormalize(n, speed);
}

}  // namespace

SphereTrajectory integrate_sphere(const SphereState& s0, double dt, double t_final) {
  if (!(dt > 0.0)) throw std::invalid_argument("integrate_sphere: dt must be positive");
  SphereState s = sphere_renormalize(s0, norm(s0.v));
  const double speed = norm(s.v);
  const std::size_t steps = std::size_t(std::llround(t_final / dt));

  SphereTrajectory traj;
  traj.dt = dt;
  traj.energy0 = 0.25 * speed * speed;
  traj.t.reserve(steps + 1);
  traj.x.reserve(steps + 1);
  traj.v.reserve(steps + 1);
  traj.t.push_back(0.0);
  traj.x.push_back(s.x);
  traj.v.push_back(s.v);
  for (std::size_t i = 1; i <= steps; ++i) {
    s = sphere_kdk_step(s, dt, speed);
    traj.t.push_back(double(i) * dt);
    traj.x.push_back(s.x);
    traj.v.push_back(s.v);
  }
  return traj;
}

void write_sphere_trajectory_csv(std::ostream& os, const SphereTrajectory& traj,
                                 std::size_t stride) {
  os << "t,x,y,z,vx,vy,vz,energy\n";
  for (std::size_t i = 0; i < traj.t.size(); i += stride) {
    os << fmt_double(traj.t[i]);
    for (double c : traj.x[i]) os << ',' << fmt_double(c);
    for (double c : traj.v[i]) os << ',' << fmt_double(c);
    os << ',' << fmt_double(0.25 * dot(traj.v[i], traj.v[i])) << '\n';
  }
}

// ---- system adapters -------------------------------------------------------

TorusSystem::State TorusSystem::step(const State& s, double h) const {
  State n;
  Vec2 g = potential.gradient(s.q);
  Vec2 p_half = {s.p[0] - 0.5 * h * g[0], s.p[1] - 0.5 * h * g[1]};
  n.q = wrap_point(Vec2{s.q[0] + h * 2.0 * p_half[0], s.q[1] + h * 2.0 * p_half[1]});
  g = potential.gradient(n.q);
  n.p = {p_half[0] - 0.5 * h * g[0], p_half[1] - 0.5 * h * g[1]};
  return n;
}

Vec<4> TorusSystem::field(const State& s) const {
  const Vec2 g = potential.gradient(s.q);
  return {2.0 * s.p[0], 2.0 * s.p[1], -g[0], -g[1]};
}

Vec<4> TorusSystem::displacement(const State& from, const State& to) const {
  const Vec2 dq = torus_delta(from.q, to.q);
  return {dq[0], dq[1], to.p[0] - from.p[0], to.p[1] - from.p[1]};
}

double TorusSystem::distance(const State& from, const State& to) const {
  return norm(displacement(from, to));
}

SphereSystem::State SphereSystem::step(const State& s, double h) const {
  return sphere_kdk_step(s, h, speed);
}

Vec<6> SphereSystem::field(const State& s) const {
  const double v2 = dot(s.v, s.v);
  return {s.v[0], s.v[1], s.v[2], -v2 * s.x[0], -v2 * s.x[1], -v2 * s.x[2]};
}

Vec<6> SphereSystem::displacement(const State& from, const State& to) const {
  return {to.x[0] - from.x[0], to.x[1] - from.x[1], to.x[2] - from.x[2],
          to.v[0] - from.v[0], to.v[1] - from.v[1], to.v[2] - from.v[2]};
}

double SphereSystem::distance(const State& from, const State& to) const {
  return norm(displacement(from, to));
}

}  // namespace hamrec
