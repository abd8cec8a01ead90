#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

#include "pulsepp/types.hpp"

namespace pulsepp {

/// Norm shell [delta_min, delta_max] holding a 1-gamma fraction of the
/// latent-norm mass; the feasible set for style columns under pulse_pp.
struct AnnulusSpec {
  double delta_min = 0.0;
  double delta_max = 1.0;
  double gamma = 0.0;
};

/// Empirical CDF over nonnegative norm samples. Evaluation is
/// right-continuous; quantiles interpolate linearly between order
/// statistics.
class NormEcdf {
 public:
  static NormEcdf build(std::vector<double> samples);

  /// (# samples <= x) / n.
  double evaluate(double x) const;

  /// Linear interpolation between order statistics at rank (n-1)*q.
  double quantile(double q) const;

  std::size_t size() const { return sorted_.size(); }
  const std::vector<double>& sorted_samples() const { return sorted_; }

 private:
  std::vector<double> sorted_;
};

inline NormEcdf ecdf_build(std::vector<double> samples) {
  return NormEcdf::build(std::move(samples));
}

/// delta_min and delta_max are the gamma/2 and 1-gamma/2 quantiles, so a
/// fresh draw lands inside the annulus with probability about 1-gamma.
AnnulusSpec calibrate_annulus(const NormEcdf& ecdf, double gamma);

/// Metric projection onto the annulus: vectors with norm inside
/// [delta_min, delta_max] pass through unchanged (bitwise), others are
/// rescaled to the nearer boundary. The zero vector maps to delta_min*e1.
/// When boundary rescaling rounds to a norm just outside the shell, the
/// result is nudged strictly inside so a second projection is the
/// identity.
template <typename Derived>
typename Derived::PlainObject project_annulus(
    const Eigen::MatrixBase<Derived>& v, const AnnulusSpec& spec) {
  using Plain = typename Derived::PlainObject;
  const double n = v.norm();
  if (n >= spec.delta_min && n <= spec.delta_max) return v.derived();
  if (n == 0.0) {
    Plain w = Plain::Zero(v.rows(), v.cols());
    w(0) = spec.delta_min;
    return w;
  }
  const double target = (n < spec.delta_min) ? spec.delta_min : spec.delta_max;
  Plain w = v.derived() * (target / n);
  const double m = w.norm();
  if (m < spec.delta_min) {
    const double t = std::min(spec.delta_min * (1.0 + 1e-11), spec.delta_max);
    w *= t / m;
  } else if (m > spec.delta_max) {
    const double t = std::max(spec.delta_max * (1.0 - 1e-11), spec.delta_min);
    w *= t / m;
  }
  return w;
}

/// Rescale onto the sphere of the given radius. Throws on a zero vector.
template <typename Derived>
typename Derived::PlainObject project_sphere(
    const Eigen::MatrixBase<Derived>& v, double radius) {
  const double n = v.norm();
  if (n == 0.0)
    throw std::invalid_argument("project_sphere: zero input vector");
  if (n == radius) return v.derived();
  return v.derived() * (radius / n);
}

struct StylePenalty {
  double value = 0.0;
  Matrix grad;  // k x L
};

/// Sum of pairwise squared Euclidean distances between style columns.
StylePenalty cross_penalty(const StyleMatrix& V);

/// Sum of pairwise geodesic (arc-length) distances radius*theta_ij between
/// style columns, with the arccos argument clamped to [-1, 1]. Pairs at
/// zero or straight angle contribute no gradient.
StylePenalty geocross_penalty(const StyleMatrix& V, double radius);

struct NoisePenalty {
  double value = 0.0;
  NoiseSet grad;
};

/// Gaussian negative log-density of the noise set, 0.5 * sum ||phi_l||^2;
/// the gradient is the noise set itself.
NoisePenalty noise_log_prior(const NoiseSet& phi);

/// Chi-square density with k degrees of freedom; 0 for x < 0.
double chi2_pdf(int k, double x);

/// Chi-square CDF (regularized lower incomplete gamma P(k/2, x/2)).
double chi2_cdf(int k, double x);

/// Kolmogorov-Smirnov distance between the ECDF and a reference CDF,
/// taking the supremum over both one-sided limits at each sample point.
double ks_distance(const NormEcdf& ecdf,
                   const std::function<double(double)>& reference_cdf);

}  // namespace pulsepp
