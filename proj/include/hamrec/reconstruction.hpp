#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "hamrec/dynamics.hpp"
#include "hamrec/geometry.hpp"
#include "hamrec/potential.hpp"

namespace hamrec {

template <std::size_t N>
struct ForceSample {
  Vec<N> q{};
  Vec<N> f{};  // value of -grad U at q
  double weight = 1.0;
};

template <std::size_t N>
struct ReconstructionResult {
  FourierSeries<N> fitted;  // mean gauged to 0
  double residual_rms = 0.0;
  std::vector<double> singular_values;  // nonincreasing
  double condition = 0.0;               // ratio of extreme retained singular values
  bool rank_deficient = false;          // sigma_min < rank_tol * sigma_max
};

/// Reads the force off the observed accelerations: f = -(1/2) qddot,
/// inverting qddot = -2 grad U. Flat-torus natural systems only.
template <std::size_t N>
std::vector<ForceSample<N>> extract_force(const ObservationSeries<N>& obs,
                                          std::size_t stride = 1);

/// Least-squares fit of a canonical band to sampled gradients
/// (grad V_theta(q_i) = g_i), via SVD with rank_tol truncation and
/// minimum-norm completion of discarded directions.
template <std::size_t N>
ReconstructionResult<N> fit_from_gradients(const std::vector<Vec<N>>& points,
                                           const std::vector<Vec<N>>& gradients,
                                           const std::vector<double>& weights, int k_max,
                                           double rank_tol = 1e-10);

/// Solves -grad U_theta(q_i) = f_i over the canonical band.
template <std::size_t N>
ReconstructionResult<N> fit_potential(const std::vector<ForceSample<N>>& samples, int k_max,
                                      double rank_tol = 1e-10);

struct KeySetDiagnostic {
  std::size_t rank = 0;
  double sigma_min = 0.0;
  double sigma_max = 0.0;
  double condition = 0.0;  // sigma_max / sigma_min over the full spectrum
  bool key = false;        // sigma_min >= rank_tol * sigma_max
};

/// Spectrum of the gradient design matrix without solving: the sampled
/// set is a key set for the band exactly when no nonzero band-limited
/// potential has vanishing gradient on it, i.e. full column rank.
template <std::size_t N>
KeySetDiagnostic key_set_diagnostic(const std::vector<ForceSample<N>>& samples, int k_max,
                                    double rank_tol = 1e-10);

/// ||A theta|| / ||theta|| for a coefficient direction theta of the
/// band's design matrix A (near zero for a null direction).
template <std::size_t N>
double design_image_norm(const std::vector<ForceSample<N>>& samples, int k_max,
                         const FourierSeries<N>& direction);

struct CoverageMetrics {
  double occupancy = 0.0;  // fraction of grid cells visited
  TorusPoint q_star;       // center of the most-visited cell
  long crossing_count = 0; // sign changes of dist(q, q_star) - r
};

CoverageMetrics coverage_metrics(std::span<const Vec2> positions, std::size_t grid_n,
                                 double circle_radius);

/// Crossings of the circle of radius r around `center` along the sampled
/// path (counted as sign changes of the torus distance minus r).
long circle_crossing_count(std::span<const Vec2> positions, const TorusPoint& center,
                           double r);

struct ConformalReconstruction {
  std::vector<double> rho_pointwise;   // log(|qdot|^2 / 4E) at kept samples
  FourierSeries2D rho_value_fit;       // route (a): direct band fit of the values
  FourierSeries2D rho_gradient_fit;    // route (b): gradient fit, mean gauged to 0
  ReconstructionResult<2> gradient_report;
  double agreement = 0.0;              // mean-aligned sup difference of the two fits
  std::size_t dropped = 0;             // samples with |qdot| below 1e-8
};

/// Two independent recoveries of the conformal exponent, cross-checked:
/// (a) pointwise rho = log(|qdot|^2/(4E)) from the speed law, then a
/// direct function fit; (b) grad rho solved per sample from the 2x2
/// system qddot = (grad.qdot)qdot - (|qdot|^2/2)grad (determinant
/// -|qdot|^4/4, invertible off qdot = 0), then a gradient fit.
ConformalReconstruction reconstruct_conformal_factor(const ObservationSeries<2>& obs,
                                                     double energy, int k_max,
                                                     double rank_tol = 1e-10);

/// Max over an n-by-n grid of |fit - truth| after aligning the mean
/// terms (the additive constant is gauge).
double sup_norm_error(const FourierSeries2D& fit, const FourierSeries2D& truth,
                      std::size_t grid_n);

}  // namespace hamrec
