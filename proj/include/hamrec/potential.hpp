#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <iosfwd>
#include <random>
#include <stdexcept>
#include <utility>
#include <vector>

#include "hamrec/geometry.hpp"

namespace hamrec {

template <std::size_t N>
struct Harmonic {
  std::array<int, N> k{};
  double a = 0.0;  // cosine amplitude
  double b = 0.0;  // sine amplitude
};

/// True when the first nonzero component of k is positive. One of each
/// {k, -k} pair is canonical; k = 0 never is (it is the mean term).
template <std::size_t N>
inline bool is_canonical(const std::array<int, N>& k) {
  for (int ki : k) {
    if (ki > 0) return true;
    if (ki < 0) return false;
  }
  return false;
}

/// Canonical wave vectors with |k|_inf <= k_max in lexicographic order.
template <std::size_t N>
std::vector<std::array<int, N>> canonical_wave_vectors(int k_max);

/// Number of canonical wave vectors: ((2K+1)^N - 1) / 2.
template <std::size_t N>
inline std::size_t canonical_count(int k_max) {
  std::size_t full = 1;
  for (std::size_t i = 0; i < N; ++i) full *= std::size_t(2 * k_max + 1);
  return (full - 1) / 2;
}

/// Band-limited real trigonometric series on the N-torus,
///   U(q) = mean + sum_k [ a_k cos(k.q) + b_k sin(k.q) ],
/// stored over canonical wave vectors only (cos is even, sin odd).
template <std::size_t N>
class FourierSeries {
 public:
  FourierSeries() = default;
  explicit FourierSeries(int k_max) : k_max_(k_max) {
    if (k_max < 0) throw std::invalid_argument("FourierSeries: negative band limit");
  }

  /// Seeded series with all canonical coefficients drawn independently
  /// uniform in [-amplitude, amplitude]; mean fixed to zero.
  static FourierSeries random(std::uint64_t seed, int k_max, double amplitude) {
    if (k_max < 1)
      throw std::invalid_argument("FourierSeries::random: band limit must be >= 1");
    if (!(amplitude >= 0.0))
      throw std::invalid_argument("FourierSeries::random: negative amplitude");
    FourierSeries s(k_max);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unif(-amplitude, amplitude);
    for (const auto& k : canonical_wave_vectors<N>(k_max)) {
      const double a = unif(rng);
      const double b = unif(rng);
      s.terms_.push_back({k, a, b});
    }
    return s;
  }

  int k_max() const { return k_max_; }
  double mean() const { return mean_; }
  void set_mean(double m) { mean_ = m; }
  const std::vector<Harmonic<N>>& terms() const { return terms_; }
  bool is_zero() const {
    if (mean_ != 0.0) return false;
    for (const auto& t : terms_)
      if (t.a != 0.0 || t.b != 0.0) return false;
    return true;
  }

  /// Insert or update the coefficient pair of wave vector k; k is folded
  /// onto its canonical representative (b flips sign with k).
  void set_coefficient(std::array<int, N> k, double a, double b) {
    bool zero = true;
    for (int ki : k) zero = zero && ki == 0;
    if (zero) {
      if (b != 0.0)
        throw std::invalid_argument("FourierSeries: the k = 0 term has no sine part");
      mean_ = a;
      return;
    }
    if (!is_canonical(k)) {
      for (auto& ki : k) ki = -ki;
      b = -b;
    }
    for (int ki : k)
      if (std::abs(ki) > k_max_) k_max_ = std::abs(ki);
    auto it = std::lower_bound(terms_.begin(), terms_.end(), k,
                               [](const Harmonic<N>& h, const std::array<int, N>& key) {
                                 return h.k < key;
                               });
    if (it != terms_.end() && it->k == k) {
      it->a = a;
      it->b = b;
    } else {
      terms_.insert(it, {k, a, b});
    }
  }

  /// Coefficient pair stored for k (canonicalized lookup); (0, 0) if absent.
  std::pair<double, double> coefficient(std::array<int, N> k) const {
    double sign = 1.0;
    if (!is_canonical(k)) {
      for (auto& ki : k) ki = -ki;
      sign = -1.0;
    }
    auto it = std::lower_bound(terms_.begin(), terms_.end(), k,
                               [](const Harmonic<N>& h, const std::array<int, N>& key) {
                                 return h.k < key;
                               });
    if (it != terms_.end() && it->k == k) return {it->a, sign * it->b};
    return {0.0, 0.0};
  }

  double evaluate(const Vec<N>& q) const {
    double u = mean_;
    for (const auto& t : terms_) {
      double phase = 0.0;
      for (std::size_t i = 0; i < N; ++i) phase += t.k[i] * q[i];
      u += t.a * std::cos(phase) + t.b * std::sin(phase);
    }
    return u;
  }

  Vec<N> gradient(const Vec<N>& q) const {
    Vec<N> g{};
    for (const auto& t : terms_) {
      double phase = 0.0;
      for (std::size_t i = 0; i < N; ++i) phase += t.k[i] * q[i];
      const double c = -t.a * std::sin(phase) + t.b * std::cos(phase);
      for (std::size_t i = 0; i < N; ++i) g[i] += t.k[i] * c;
    }
    return g;
  }

  /// Value and gradient in one pass (shared sin/cos per harmonic).
  std::pair<double, Vec<N>> eval_with_gradient(const Vec<N>& q) const {
    double u = mean_;
    Vec<N> g{};
    for (const auto& t : terms_) {
      double phase = 0.0;
      for (std::size_t i = 0; i < N; ++i) phase += t.k[i] * q[i];
      const double sp = std::sin(phase);
      const double cp = std::cos(phase);
      u += t.a * cp + t.b * sp;
      const double c = -t.a * sp + t.b * cp;
      for (std::size_t i = 0; i < N; ++i) g[i] += t.k[i] * c;
    }
    return {u, g};
  }

  /// Certified sup bound C0 = |mean| + sum(|a_k| + |b_k|) >= sup |U|.
  double sup_bound() const {
    double s = std::abs(mean_);
    for (const auto& t : terms_) s += std::abs(t.a) + std::abs(t.b);
    return s;
  }

  /// Certified gradient bound: sum |k|_2 (|a_k| + |b_k|) >= sup |grad U|.
  double gradient_sup_bound() const {
    double s = 0.0;
    for (const auto& t : terms_) {
      double k2 = 0.0;
      for (int ki : t.k) k2 += double(ki) * ki;
      s += std::sqrt(k2) * (std::abs(t.a) + std::abs(t.b));
    }
    return s;
  }

  double max_abs_coefficient() const {
    double m = 0.0;
    for (const auto& t : terms_)
      m = std::max({m, std::abs(t.a), std::abs(t.b)});
    return m;
  }

 private:
  double mean_ = 0.0;
  int k_max_ = 0;
  std::vector<Harmonic<N>> terms_;  // sorted by k, canonical only
};

using FourierSeries2D = FourierSeries<2>;
using FourierSeries3D = FourierSeries<3>;

template <std::size_t N>
std::vector<std::array<int, N>> canonical_wave_vectors(int k_max) {
  std::vector<std::array<int, N>> out;
  out.reserve(canonical_count<N>(k_max));
  std::array<int, N> k{};
  for (std::size_t i = 0; i < N; ++i) k[i] = -k_max;
  while (true) {
    if (is_canonical(k)) out.push_back(k);
    std::size_t i = N;
    while (i > 0) {
      --i;
      if (k[i] < k_max) {
        ++k[i];
        break;
      }
      k[i] = -k_max;
      if (i == 0) return out;
    }
  }
}

// 2D conveniences over TorusPoint
inline double evaluate(const FourierSeries2D& u, const TorusPoint& q) {
  return u.evaluate(q.arr());
}
inline Vec2 gradient(const FourierSeries2D& u, const TorusPoint& q) {
  return u.gradient(q.arr());
}
inline double sup_bound_C0(const FourierSeries2D& u) { return u.sup_bound(); }

/// Exhaustive max of |U| over an n-by-n uniform grid (reported next to
/// the l1 bound when tightness matters).
double grid_sup_norm(const FourierSeries2D& u, std::size_t n);

inline FourierSeries2D random_potential(std::uint64_t seed, int k_max, double amplitude) {
  return FourierSeries2D::random(seed, k_max, amplitude);
}

// CSV: header "k1,..,kN,a,b", mean emitted as the all-zero wave vector row.
template <std::size_t N>
void write_series_csv(std::ostream& os, const FourierSeries<N>& s);
template <std::size_t N>
FourierSeries<N> read_series_csv(std::istream& is);

/// max_k |coef_fit - coef_true| / max_k |coef_true| over the union band
/// (means compared separately by the caller when meaningful).
template <std::size_t N>
double coefficient_rel_error(const FourierSeries<N>& fit, const FourierSeries<N>& truth);

}  // namespace hamrec
