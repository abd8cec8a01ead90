#pragma once

#include <Eigen/Sparse>

#include <cstdint>
#include <string>
#include <vector>

#include "pulsepp/types.hpp"

namespace pulsepp {

// ---------------------------------------------------------------------------
// Masked-Fourier system (stylized MRI)
// ---------------------------------------------------------------------------

/// Column-sampling mask over the 2D DFT grid. Retained columns are closed
/// under frequency negation (c and width-c are kept together), which makes
/// adjoint-after-forward an exact orthogonal projector on real images.
struct CartesianMask {
  int width = 0;
  int height = 0;
  std::vector<int> retained_cols;  // ascending, DFT (unshifted) indexing
  double acceleration = 1.0;       // requested R
  double center_fraction = 0.0;
  std::uint64_t seed = 0;

  int samples() const {
    return static_cast<int>(retained_cols.size()) * height;
  }
};

/// Keeps the central center_fraction band of low-frequency columns plus
/// seeded random others so the retained fraction is 1/R (rounded). The
/// realized sample count is samples(); record it, tolerance rules depend
/// on it.
CartesianMask make_cartesian_mask(int width, int height, double R,
                                  double center_fraction, std::uint64_t seed);

struct KSpaceData {
  ComplexVector samples;  // length M, ordering: retained column-major
  double sigma = 0.0;
};

/// Retained entries of the orthonormal 2D DFT of f.
ComplexVector fourier_forward(const ObjectImage& f, const CartesianMask& m);
ComplexVector fourier_forward_vec(const Vector& pixels,
                                  const CartesianMask& m);

/// Real part of the orthonormal inverse DFT of the zero-filled data; the
/// adjoint of fourier_forward under the stacked real/imaginary inner
/// product.
Vector fourier_adjoint(const ComplexVector& g, const CartesianMask& m);

/// Stacked-real views [Re; Im] of the same operator pair, for solvers that
/// work over real vectors.
Vector fourier_forward_stacked(const Vector& pixels, const CartesianMask& m);
Vector fourier_adjoint_stacked(const Vector& stacked, const CartesianMask& m);

/// i.i.d. complex Gaussian noise with E|n_i|^2 = sigma^2 (variance sigma^2/2
/// per real component).
KSpaceData add_complex_gaussian(const ComplexVector& clean, double sigma,
                                std::uint64_t seed);

struct Fidelity {
  double value = 0.0;
  Vector grad;  // with respect to image pixels
};

/// J = ||g - H f||^2 / (2 sigma^2) with complex modulus; the Morozov
/// statistic has mean M/2 at the true object.
Fidelity gaussian_fidelity(const KSpaceData& g, const ObjectImage& fhat,
                           const CartesianMask& m);

// ---------------------------------------------------------------------------
// Fan-beam X-ray system (stylized CT)
// ---------------------------------------------------------------------------

struct FanBeamGeometry {
  int n_pix = 32;
  double pixel_pitch_mm = 0.82;
  double source_to_iso_mm = 100.0;
  double iso_to_det_mm = 40.0;
  int det_count = 96;
  double det_pitch_mm = 0.6;
  std::vector<double> view_angles_deg;  // strictly increasing

  int rays() const {
    return det_count * static_cast<int>(view_angles_deg.size());
  }
  void validate() const;
};

std::vector<double> linspace_angles(double first_deg, double last_deg,
                                    int n_views);

using SystemMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

/// Ray-pixel intersection lengths in mm by incremental parametric
/// traversal; row (view * det_count + detector element).
SystemMatrix build_fanbeam(const FanBeamGeometry& geom);

void save_system_matrix(const std::string& path, const SystemMatrix& h);
SystemMatrix load_system_matrix(const std::string& path);

struct IntensityData {
  Vector counts;  // photons, length M
  double i0 = 0.0;
  double mu_max = 0.0;
};

/// Mean photon counts I0 * exp(-H (mu_max * f)).
Vector xray_intensity(const SystemMatrix& h, const ObjectImage& f, double i0,
                      double mu_max);

IntensityData add_poisson(const Vector& mean, double i0, double mu_max,
                          std::uint64_t seed);

/// Generalized Kullback-Leibler fidelity between counts and the predicted
/// intensity, with 0*log 0 = 0.
Fidelity kl_fidelity(const IntensityData& g, const ObjectImage& fhat,
                     const SystemMatrix& h);

// ---------------------------------------------------------------------------
// Synthetic objects
// ---------------------------------------------------------------------------

enum class PhantomKind { ellipses, checker };

struct Ellipse {
  double cx, cy;     // unit-square coordinates
  double a, b;       // semi-axes
  double angle_rad;  // rotation of the a-axis
  double value;      // additive intensity
};

/// The seeded ellipse layout used by the ellipse phantom; exposed so line
/// integrals through the phantom can be computed in closed form.
std::vector<Ellipse> phantom_ellipse_params(std::uint64_t seed);

constexpr double kPhantomBackground = 0.2;

ObjectImage phantom_generate(PhantomKind kind, int width, int height,
                             std::uint64_t seed);

}  // namespace pulsepp
