#include "pulsepp/latent_space.hpp"

#include <cmath>
#include <limits>

namespace pulsepp {

NormEcdf NormEcdf::build(std::vector<double> samples) {
  if (samples.empty())
    throw std::invalid_argument("ecdf_build: empty sample list");
  for (double s : samples) {
    if (!std::isfinite(s))
      throw std::invalid_argument("ecdf_build: non-finite sample");
    if (s < 0.0) throw std::invalid_argument("ecdf_build: negative sample");
  }
  std::sort(samples.begin(), samples.end());
  NormEcdf e;
  e.sorted_ = std::move(samples);
  return e;
}

double NormEcdf::evaluate(double x) const {
  const auto it = std::upper_bound(sorted_.begin(), sorted_.end(), x);
  return static_cast<double>(it - sorted_.begin()) /
         static_cast<double>(sorted_.size());
}

double NormEcdf::quantile(double q) const {
  if (q < 0.0 || q > 1.0)
    throw std::invalid_argument("quantile: q outside [0, 1]");
  const std::size_t n = sorted_.size();
  if (n == 1) return sorted_[0];
  const double h = q * static_cast<double>(n - 1);
  const std::size_t lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= n) return sorted_[n - 1];
  const double frac = h - static_cast<double>(lo);
  return sorted_[lo] + frac * (sorted_[lo + 1] - sorted_[lo]);
}

AnnulusSpec calibrate_annulus(const NormEcdf& ecdf, double gamma) {
  if (!(gamma > 0.0 && gamma < 1.0))
    throw std::invalid_argument("calibrate_annulus: gamma outside (0, 1)");
  AnnulusSpec spec;
  spec.gamma = gamma;
  spec.delta_min = ecdf.quantile(gamma / 2.0);
  spec.delta_max = ecdf.quantile(1.0 - gamma / 2.0);
  return spec;
}

StylePenalty cross_penalty(const StyleMatrix& V) {
  const Eigen::Index L = V.cols();
  StylePenalty p;
  p.grad = Matrix::Zero(V.rows(), L);
  for (Eigen::Index i = 0; i + 1 < L; ++i) {
    for (Eigen::Index j = i + 1; j < L; ++j) {
      const Vector d = V.col(i) - V.col(j);
      p.value += d.squaredNorm();
      p.grad.col(i) += 2.0 * d;
      p.grad.col(j) -= 2.0 * d;
    }
  }
  return p;
}

StylePenalty geocross_penalty(const StyleMatrix& V, double radius) {
  if (radius <= 0.0)
    throw std::invalid_argument("geocross_penalty: radius must be positive");
  const Eigen::Index L = V.cols();
  StylePenalty p;
  p.grad = Matrix::Zero(V.rows(), L);
  std::vector<double> norms(static_cast<std::size_t>(L));
  for (Eigen::Index i = 0; i < L; ++i) {
    norms[static_cast<std::size_t>(i)] = V.col(i).norm();
    if (norms[static_cast<std::size_t>(i)] == 0.0)
      throw std::invalid_argument("geocross_penalty: zero style column");
  }
  for (Eigen::Index i = 0; i + 1 < L; ++i) {
    for (Eigen::Index j = i + 1; j < L; ++j) {
      const double ni = norms[static_cast<std::size_t>(i)];
      const double nj = norms[static_cast<std::size_t>(j)];
      const double c =
          std::clamp(V.col(i).dot(V.col(j)) / (ni * nj), -1.0, 1.0);
      const double theta = std::acos(c);
      p.value += radius * theta;
      const double s2 = 1.0 - c * c;
      if (s2 <= 1e-24) continue;  // angle 0 or pi: no usable direction
      const double inv_sin = 1.0 / std::sqrt(s2);
      // d theta / d v_i = -(v_j/(ni*nj) - c*v_i/ni^2) / sin(theta)
      p.grad.col(i) +=
          -radius * inv_sin * (V.col(j) / (ni * nj) - c * V.col(i) / (ni * ni));
      p.grad.col(j) +=
          -radius * inv_sin * (V.col(i) / (ni * nj) - c * V.col(j) / (nj * nj));
    }
  }
  return p;
}

NoisePenalty noise_log_prior(const NoiseSet& phi) {
  NoisePenalty p;
  p.grad = phi;
  for (const Vector& v : phi) p.value += 0.5 * v.squaredNorm();
  return p;
}

double chi2_pdf(int k, double x) {
  if (k < 1) throw std::invalid_argument("chi2_pdf: k must be >= 1");
  if (x < 0.0) return 0.0;
  if (x == 0.0) {
    if (k == 1) return std::numeric_limits<double>::infinity();
    if (k == 2) return 0.5;
    return 0.0;
  }
  const double a = 0.5 * static_cast<double>(k);
  const double logp = (a - 1.0) * std::log(x) - 0.5 * x -
                      a * std::log(2.0) - std::lgamma(a);
  return std::exp(logp);
}

namespace {

// Regularized lower incomplete gamma P(a, x); series for x < a+1,
// continued fraction otherwise.
double gamma_p(double a, double x) {
  if (x <= 0.0) return 0.0;
  const double log_gamma_a = std::lgamma(a);
  if (x < a + 1.0) {
    double term = 1.0 / a;
    double sum = term;
    double ap = a;
    for (int i = 0; i < 1000; ++i) {
      ap += 1.0;
      term *= x / ap;
      sum += term;
      if (std::abs(term) < std::abs(sum) * 1e-16) break;
    }
    return sum * std::exp(-x + a * std::log(x) - log_gamma_a);
  }
  // Lentz's continued fraction for Q(a, x).
  const double tiny = 1e-300;
  double b = x + 1.0 - a;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i <= 1000; ++i) {
    const double an = -static_cast<double>(i) * (static_cast<double>(i) - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < 1e-16) break;
  }
  const double q = std::exp(-x + a * std::log(x) - log_gamma_a) * h;
  return 1.0 - q;
}

}  // namespace

double chi2_cdf(int k, double x) {
  if (k < 1) throw std::invalid_argument("chi2_cdf: k must be >= 1");
  if (x <= 0.0) return 0.0;
  return gamma_p(0.5 * static_cast<double>(k), 0.5 * x);
}

double ks_distance(const NormEcdf& ecdf,
                   const std::function<double(double)>& reference_cdf) {
  const auto& s = ecdf.sorted_samples();
  const double n = static_cast<double>(s.size());
  double d = 0.0;
  std::size_t i = 0;
  while (i < s.size()) {
    std::size_t j = i;
    while (j + 1 < s.size() && s[j + 1] == s[i]) ++j;  // group ties
    const double f = reference_cdf(s[i]);
    const double lo = static_cast<double>(i) / n;
    const double hi = static_cast<double>(j + 1) / n;
    d = std::max(d, std::max(std::abs(f - lo), std::abs(f - hi)));
    i = j + 1;
  }
  return d;
}

}  // namespace pulsepp
