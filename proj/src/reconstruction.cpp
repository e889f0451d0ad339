#include "hamrec/reconstruction.hpp"

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace hamrec {

namespace {

/// Gradient design matrix over the canonical band: one row block of N
/// scalar equations per sample, columns [a_k ...| b_k ...] in canonical
/// order. Row for component d: d/dq_d [a cos(k.q) + b sin(k.q)].
template <std::size_t N>
Eigen::MatrixXd gradient_design(const std::vector<Vec<N>>& points,
                                const std::vector<std::array<int, N>>& band,
                                const std::vector<double>& row_scale) {
  const std::size_t m = band.size();
  Eigen::MatrixXd a(N * points.size(), 2 * m);
  for (std::size_t i = 0; i < points.size(); ++i) {
    const double w = row_scale.empty() ? 1.0 : row_scale[i];
    for (std::size_t j = 0; j < m; ++j) {
      double phase = 0.0;
      for (std::size_t d = 0; d < N; ++d) phase += band[j][d] * points[i][d];
      const double sp = std::sin(phase);
      const double cp = std::cos(phase);
      for (std::size_t d = 0; d < N; ++d) {
        a(N * i + d, j) = w * -band[j][d] * sp;
        a(N * i + d, m + j) = w * band[j][d] * cp;
      }
    }
  }
  return a;
}

struct SvdSolve {
  Eigen::VectorXd theta;
  std::vector<double> singular_values;
  double sigma_max = 0.0;
  double sigma_min = 0.0;
  double condition_retained = 0.0;
  bool rank_deficient = false;
  std::size_t rank = 0;
  double residual_rms = 0.0;
};

/// Minimum-norm least squares through a rank-revealing SVD; directions
/// with singular value below rank_tol * sigma_max are zeroed.
SvdSolve svd_least_squares(const Eigen::MatrixXd& a, const Eigen::VectorXd& rhs,
                           double rank_tol) {
  Eigen::BDCSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  SvdSolve out;
  const auto& sv = svd.singularValues();
  out.singular_values.assign(sv.data(), sv.data() + sv.size());
  out.sigma_max = sv.size() > 0 ? sv(0) : 0.0;
  out.sigma_min = sv.size() > 0 ? sv(sv.size() - 1) : 0.0;

  if (out.sigma_max <= 0.0) {
    // all-zero design: minimum-norm solution is zero, everything discarded
    out.theta = Eigen::VectorXd::Zero(a.cols());
    out.rank_deficient = true;
    out.condition_retained = std::numeric_limits<double>::infinity();
    out.residual_rms = rhs.size() > 0 ? std::sqrt(rhs.squaredNorm() / double(rhs.size())) : 0.0;
    return out;
  }

  const double cutoff = rank_tol * out.sigma_max;
  Eigen::VectorXd inv = Eigen::VectorXd::Zero(sv.size());
  double sigma_retained_min = out.sigma_max;
  for (Eigen::Index i = 0; i < sv.size(); ++i) {
    if (sv(i) >= cutoff) {
      inv(i) = 1.0 / sv(i);
      sigma_retained_min = sv(i);
      ++out.rank;
    } else {
      out.rank_deficient = true;
    }
  }
  if (std::size_t(sv.size()) < std::size_t(a.cols())) out.rank_deficient = true;
  out.condition_retained = out.sigma_max / sigma_retained_min;
  out.theta = svd.matrixV() * inv.asDiagonal() * (svd.matrixU().transpose() * rhs);
  const Eigen::VectorXd res = a * out.theta - rhs;
  out.residual_rms = res.size() > 0 ? std::sqrt(res.squaredNorm() / double(res.size())) : 0.0;
  return out;
}

template <std::size_t N>
FourierSeries<N> series_from_theta(const std::vector<std::array<int, N>>& band,
                                   const Eigen::VectorXd& theta) {
  FourierSeries<N> s;
  const std::size_t m = band.size();
  for (std::size_t j = 0; j < m; ++j) s.set_coefficient(band[j], theta(j), theta(m + j));
  return s;
}

}  // namespace

template <std::size_t N>
std::vector<ForceSample<N>> extract_force(const ObservationSeries<N>& obs,
                                          std::size_t stride) {
  if (obs.conformal)
    throw std::invalid_argument("extract_force: series is not from a natural flat system");
  if (stride == 0) throw std::invalid_argument("extract_force: zero stride");
  if (obs.samples.empty()) throw std::invalid_argument("extract_force: empty series");
  std::vector<ForceSample<N>> out;
  out.reserve(obs.samples.size() / stride + 1);
  for (std::size_t i = 0; i < obs.samples.size(); i += stride) {
    ForceSample<N> s;
    s.q = obs.samples[i].q;
    s.f = scale(obs.samples[i].acceleration, -0.5);
    out.push_back(s);
  }
  return out;
}

template std::vector<ForceSample<2>> extract_force<2>(const ObservationSeries<2>&, std::size_t);
template std::vector<ForceSample<3>> extract_force<3>(const ObservationSeries<3>&, std::size_t);

template <std::size_t N>
ReconstructionResult<N> fit_from_gradients(const std::vector<Vec<N>>& points,
                                           const std::vector<Vec<N>>& gradients,
                                           const std::vector<double>& weights, int k_max,
                                           double rank_tol) {
  if (points.empty()) throw std::invalid_argument("fit_from_gradients: no samples");
  if (points.size() != gradients.size())
    throw std::invalid_argument("fit_from_gradients: points/gradients size mismatch");
  const auto band = canonical_wave_vectors<N>(k_max);
  if (points.size() < band.size())
    throw std::invalid_argument("fit_from_gradients: fewer samples than canonical wave vectors");

  std::vector<double> row_scale;
  if (!weights.empty()) {
    row_scale.reserve(weights.size());
    for (double w : weights) row_scale.push_back(std::sqrt(w));
  }
  const Eigen::MatrixXd a = gradient_design<N>(points, band, row_scale);
  Eigen::VectorXd rhs(N * points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    const double w = row_scale.empty() ? 1.0 : row_scale[i];
    for (std::size_t d = 0; d < N; ++d) rhs(N * i + d) = w * gradients[i][d];
  }
  const SvdSolve sol = svd_least_squares(a, rhs, rank_tol);

  ReconstructionResult<N> r;
  r.fitted = series_from_theta<N>(band, sol.theta);
  r.fitted.set_mean(0.0);
  r.residual_rms = sol.residual_rms;
  r.singular_values = sol.singular_values;
  r.condition = sol.condition_retained;
  r.rank_deficient = sol.rank_deficient;
  return r;
}

template ReconstructionResult<2> fit_from_gradients<2>(const std::vector<Vec2>&,
                                                       const std::vector<Vec2>&,
                                                       const std::vector<double>&, int, double);
template ReconstructionResult<3> fit_from_gradients<3>(const std::vector<Vec3>&,
                                                       const std::vector<Vec3>&,
                                                       const std::vector<double>&, int, double);

template <std::size_t N>
ReconstructionResult<N> fit_potential(const std::vector<ForceSample<N>>& samples, int k_max,
                                      double rank_tol) {
  if (samples.empty()) throw std::invalid_argument("fit_potential: empty samples");
  std::vector<Vec<N>> points;
  std::vector<Vec<N>> grads;
  std::vector<double> weights;
  points.reserve(samples.size());
  grads.reserve(samples.size());
  bool nontrivial_weights = false;
  for (const auto& s : samples) {
    points.push_back(s.q);
    grads.push_back(scale(s.f, -1.0));  // -grad U = f
    weights.push_back(s.weight);
    nontrivial_weights = nontrivial_weights || s.weight != 1.0;
  }
  if (!nontrivial_weights) weights.clear();
  return fit_from_gradients<N>(points, grads, weights, k_max, rank_tol);
}

template ReconstructionResult<2> fit_potential<2>(const std::vector<ForceSample<2>>&, int,
                                                  double);
template ReconstructionResult<3> fit_potential<3>(const std::vector<ForceSample<3>>&, int,
                                                  double);

template <std::size_t N>
KeySetDiagnostic key_set_diagnostic(const std::vector<ForceSample<N>>& samples, int k_max,
                                    double rank_tol) {
  if (samples.empty()) throw std::invalid_argument("key_set_diagnostic: empty samples");
  const auto band = canonical_wave_vectors<N>(k_max);
  std::vector<Vec<N>> points;
  points.reserve(samples.size());
  for (const auto& s : samples) points.push_back(s.q);
  const Eigen::MatrixXd a = gradient_design<N>(points, band, {});
  Eigen::BDCSVD<Eigen::MatrixXd> svd(a);
  const auto& sv = svd.singularValues();

  KeySetDiagnostic d;
  d.sigma_max = sv.size() > 0 ? sv(0) : 0.0;
  // column count exceeding row count leaves implicit zero singular values
  d.sigma_min = std::size_t(sv.size()) < std::size_t(a.cols())
                    ? 0.0
                    : (sv.size() > 0 ? sv(sv.size() - 1) : 0.0);
  for (Eigen::Index i = 0; i < sv.size(); ++i)
    if (sv(i) >= rank_tol * d.sigma_max && d.sigma_max > 0.0) ++d.rank;
  d.condition = d.sigma_min > 0.0 ? d.sigma_max / d.sigma_min
                                  : std::numeric_limits<double>::infinity();
  d.key = d.sigma_max > 0.0 && d.sigma_min >= rank_tol * d.sigma_max;
  return d;
}

template KeySetDiagnostic key_set_diagnostic<2>(const std::vector<ForceSample<2>>&, int,
                                                double);
template KeySetDiagnostic key_set_diagnostic<3>(const std::vector<ForceSample<3>>&, int,
                                                double);

template <std::size_t N>
double design_image_norm(const std::vector<ForceSample<N>>& samples, int k_max,
                         const FourierSeries<N>& direction) {
  const auto band = canonical_wave_vectors<N>(k_max);
  std::vector<Vec<N>> points;
  points.reserve(samples.size());
  for (const auto& s : samples) points.push_back(s.q);
  const Eigen::MatrixXd a = gradient_design<N>(points, band, {});
  Eigen::VectorXd theta(2 * band.size());
  for (std::size_t j = 0; j < band.size(); ++j) {
    const auto [ca, cb] = direction.coefficient(band[j]);
    theta(j) = ca;
    theta(band.size() + j) = cb;
  }
  const double tn = theta.norm();
  if (tn == 0.0) throw std::invalid_argument("design_image_norm: zero direction");
  return (a * theta).norm() / tn;
}

template double design_image_norm<2>(const std::vector<ForceSample<2>>&, int,
                                     const FourierSeries<2>&);
template double design_image_norm<3>(const std::vector<ForceSample<3>>&, int,
                                     const FourierSeries<3>&);

// ---- coverage ---------------------------------------------------------------

CoverageMetrics coverage_metrics(std::span<const Vec2> positions, std::size_t grid_n,
                                 double circle_radius) {
  if (positions.empty()) throw std::invalid_argument("coverage_metrics: empty trajectory");
  const double cell = kTwoPi / double(grid_n);
  std::vector<long> counts(grid_n * grid_n, 0);
  for (const auto& q : positions) {
    auto i = std::size_t(q[0] / cell);
    auto j = std::size_t(q[1] / cell);
    if (i >= grid_n) i = grid_n - 1;
    if (j >= grid_n) j = grid_n - 1;
    ++counts[i * grid_n + j];
  }
  std::size_t visited = 0;
  std::size_t best = 0;
  for (std::size_t idx = 0; idx < counts.size(); ++idx) {
    if (counts[idx] > 0) ++visited;
    if (counts[idx] > counts[best]) best = idx;  // ties keep the smallest index
  }
  CoverageMetrics m;
  m.occupancy = double(visited) / double(counts.size());
  m.q_star = {(double(best / grid_n) + 0.5) * cell, (double(best % grid_n) + 0.5) * cell};
  m.crossing_count = circle_crossing_count(positions, m.q_star, circle_radius);
  return m;
}

long circle_crossing_count(std::span<const Vec2> positions, const TorusPoint& center,
                           double r) {
  long crossings = 0;
  bool have_prev = false;
  bool prev_inside = false;
  for (const auto& q : positions) {
    const bool inside = torus_distance(center.arr(), q) - r < 0.0;
    if (have_prev && inside != prev_inside) ++crossings;
    prev_inside = inside;
    have_prev = true;
  }
  return crossings;
}

// ---- conformal factor --------------------------------------------------------

ConformalReconstruction reconstruct_conformal_factor(const ObservationSeries<2>& obs,
                                                     double energy, int k_max,
                                                     double rank_tol) {
  if (!obs.conformal)
    throw std::invalid_argument("reconstruct_conformal_factor: series is not conformal");
  if (!(energy > 0.0))
    throw std::invalid_argument("reconstruct_conformal_factor: energy must be positive");

  ConformalReconstruction out;
  std::vector<Vec2> points;
  std::vector<Vec2> grads;
  for (const auto& s : obs.samples) {
    const double v2 = dot(s.velocity, s.velocity);
    if (std::sqrt(v2) < 1e-8) {
      ++out.dropped;
      continue;
    }
    points.push_back(s.q);
    // speed law: |qdot|^2 = 4 E e^rho
    out.rho_pointwise.push_back(std::log(v2 / (4.0 * energy)));
    // invert qddot = [qdot qdot^T - (|qdot|^2/2) I] grad rho
    const double a11 = s.velocity[0] * s.velocity[0] - 0.5 * v2;
    const double a12 = s.velocity[0] * s.velocity[1];
    const double a22 = s.velocity[1] * s.velocity[1] - 0.5 * v2;
    const double det = a11 * a22 - a12 * a12;  // = -|qdot|^4 / 4
    grads.push_back({(a22 * s.acceleration[0] - a12 * s.acceleration[1]) / det,
                     (-a12 * s.acceleration[0] + a11 * s.acceleration[1]) / det});
  }
  if (points.empty())
    throw std::runtime_error("reconstruct_conformal_factor: all samples dropped (|qdot| ~ 0)");

  // route (a): direct value fit over [mean | a_k | b_k]
  const auto band = canonical_wave_vectors<2>(k_max);
  const std::size_t m = band.size();
  if (points.size() < 2 * m + 1)
    throw std::invalid_argument("reconstruct_conformal_factor: too few samples for the band");
  Eigen::MatrixXd a(points.size(), 2 * m + 1);
  Eigen::VectorXd rhs(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    a(i, 0) = 1.0;
    for (std::size_t j = 0; j < m; ++j) {
      double phase = 0.0;
      for (std::size_t d = 0; d < 2; ++d) phase += band[j][d] * points[i][d];
      a(i, 1 + j) = std::cos(phase);
      a(i, 1 + m + j) = std::sin(phase);
    }
    rhs(i) = out.rho_pointwise[i];
  }
  const SvdSolve val = svd_least_squares(a, rhs, rank_tol);
  out.rho_value_fit = FourierSeries2D();
  for (std::size_t j = 0; j < m; ++j)
    out.rho_value_fit.set_coefficient(band[j], val.theta(1 + j), val.theta(1 + m + j));
  out.rho_value_fit.set_mean(val.theta(0));

  // route (b): gradient fit of the eliminated grad rho samples
  out.gradient_report = fit_from_gradients<2>(points, grads, {}, k_max, rank_tol);
  out.rho_gradient_fit = out.gradient_report.fitted;

  out.agreement = sup_norm_error(out.rho_gradient_fit, out.rho_value_fit, 128);
  return out;
}

double sup_norm_error(const FourierSeries2D& fit, const FourierSeries2D& truth,
                      std::size_t grid_n) {
  const double offset = truth.mean() - fit.mean();
  double worst = 0.0;
  const double h = kTwoPi / double(grid_n);
  for (std::size_t i = 0; i < grid_n; ++i)
    for (std::size_t j = 0; j < grid_n; ++j) {
      const Vec2 q{i * h, j * h};
      worst = std::max(worst, std::abs(fit.evaluate(q) + offset - truth.evaluate(q)));
    }
  return worst;
}

}  // namespace hamrec
