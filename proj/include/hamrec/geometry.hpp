#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <stdexcept>

namespace hamrec {

inline constexpr double kPi = 3.14159265358979323846264338327950288;
inline constexpr double kTwoPi = 2.0 * kPi;

template <std::size_t N>
using Vec = std::array<double, N>;

using Vec2 = Vec<2>;
using Vec3 = Vec<3>;

// ---- small fixed-size vector helpers ----------------------------------

template <std::size_t N>
inline double dot(const Vec<N>& a, const Vec<N>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < N; ++i) s += a[i] * b[i];
  return s;
}

template <std::size_t N>
inline double norm(const Vec<N>& a) {
  return std::sqrt(dot(a, a));
}

template <std::size_t N>
inline Vec<N> add(Vec<N> a, const Vec<N>& b) {
  for (std::size_t i = 0; i < N; ++i) a[i] += b[i];
  return a;
}

template <std::size_t N>
inline Vec<N> sub(Vec<N> a, const Vec<N>& b) {
  for (std::size_t i = 0; i < N; ++i) a[i] -= b[i];
  return a;
}

template <std::size_t N>
inline Vec<N> scale(Vec<N> a, double c) {
  for (std::size_t i = 0; i < N; ++i) a[i] *= c;
  return a;
}

template <std::size_t N>
inline bool all_finite(const Vec<N>& a) {
  for (double x : a)
    if (!std::isfinite(x)) return false;
  return true;
}

// ---- flat torus R^n / (2pi Z)^n ----------------------------------------

/// Reduce an angle into the fundamental interval [0, 2pi). Idempotent.
inline double wrap_angle(double x) {
  if (!std::isfinite(x)) throw std::domain_error("wrap_angle: non-finite input");
  double r = std::fmod(x, kTwoPi);
  if (r < 0.0) r += kTwoPi;
  if (r >= kTwoPi) r = 0.0;  // guard against fmod landing on the seam
  return r;
}

/// Minimal representative of (to - from) mod 2pi in the half-open
/// interval [-pi, pi). Ties at the cut go to -pi.
inline double angle_delta(double from, double to) {
  double d = std::remainder(to - from, kTwoPi);
  if (d >= kPi) d = -kPi;
  return d;
}

template <std::size_t N>
inline Vec<N> wrap_point(Vec<N> q) {
  for (std::size_t i = 0; i < N; ++i) q[i] = wrap_angle(q[i]);
  return q;
}

template <std::size_t N>
inline Vec<N> torus_delta(const Vec<N>& from, const Vec<N>& to) {
  Vec<N> d{};
  for (std::size_t i = 0; i < N; ++i) d[i] = angle_delta(from[i], to[i]);
  return d;
}

template <std::size_t N>
inline double torus_distance(const Vec<N>& a, const Vec<N>& b) {
  return norm(torus_delta(a, b));
}

/// A configuration point on the flat 2-torus, components in [0, 2pi).
struct TorusPoint {
  double q1 = 0.0;
  double q2 = 0.0;

  Vec2 arr() const { return {q1, q2}; }
  static TorusPoint from(const Vec2& v) { return {v[0], v[1]}; }
};

inline TorusPoint wrap_to_fundamental_domain(double raw1, double raw2) {
  return {wrap_angle(raw1), wrap_angle(raw2)};
}

inline TorusPoint wrap_to_fundamental_domain(const Vec2& raw) {
  return wrap_to_fundamental_domain(raw[0], raw[1]);
}

/// Minimal-length representative of b - a; its Euclidean norm is the
/// flat-torus geodesic distance.
inline Vec2 torus_displacement(const TorusPoint& a, const TorusPoint& b) {
  return torus_delta(a.arr(), b.arr());
}

inline double torus_distance(const TorusPoint& a, const TorusPoint& b) {
  return norm(torus_displacement(a, b));
}

// ---- Jacobi (Maupertuis) conformal factor ------------------------------

/// Conformal factor E - u of the Jacobi metric at potential value u.
/// Zero exactly on the Hill boundary {U = E}; E < u is outside the
/// domain of possible motions and rejected.
inline double jacobi_metric_factor(double energy, double potential_value) {
  if (!(energy >= potential_value))
    throw std::domain_error(
        "jacobi_metric_factor: E < U, outside the domain of possible motions "
        "(low-energy regime)");
  return energy - potential_value;
}

// ---- round unit sphere, embedded in R^3 --------------------------------

/// A point of the unit sphere kept normalized in the R^3 embedding.
struct SpherePoint {
  double x = 1.0;
  double y = 0.0;
  double z = 0.0;

  Vec3 arr() const { return {x, y, z}; }

  static SpherePoint normalized(double x, double y, double z) {
    const double r = std::sqrt(x * x + y * y + z * z);
    if (!(r > 0.0) || !std::isfinite(r))
      throw std::domain_error("SpherePoint: cannot normalize zero/non-finite vector");
    return {x / r, y / r, z / r};
  }
};

struct SphereState {
  Vec3 x{1.0, 0.0, 0.0};  // position, |x| = 1
  Vec3 v{0.0, 0.0, 0.0};  // velocity, tangent: <x, v> = 0
};

struct SphereDeriv {
  Vec3 dx;
  Vec3 dv;
};

/// Great-circle geodesic field (v, -|v|^2 x) for the free flow on the
/// round sphere. Requires |x| = 1 and tangency <x, v> = 0 within 1e-10.
inline SphereDeriv sphere_geodesic_field(const SphereState& s) {
  const double r2 = dot(s.x, s.x);
  if (std::abs(r2 - 1.0) > 1e-9)
    throw std::invalid_argument("sphere_geodesic_field: position off the unit sphere");
  const double tang = dot(s.x, s.v);
  if (std::abs(tang) > 1e-10 * std::max(1.0, norm(s.v)))
    throw std::invalid_argument("sphere_geodesic_field: velocity not tangent");
  const double v2 = dot(s.v, s.v);
  return {s.v, scale(s.x, -v2)};
}

/// Project back onto the sphere bundle: |x| = 1, v tangent, |v| = speed.
inline SphereState sphere_renormalize(SphereState s, double speed) {
  const double r = norm(s.x);
  s.x = scale(s.x, 1.0 / r);
  s.v = sub(s.v, scale(s.x, dot(s.x, s.v)));
  const double vn = norm(s.v);
  if (vn > 0.0 && speed > 0.0) s.v = scale(s.v, speed / vn);
  return s;
}

}  // namespace hamrec
