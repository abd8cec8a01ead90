#include "pulsepp/imaging.hpp"

#include <unsupported/Eigen/FFT>

#include <algorithm>
#include <cmath>
#include <complex>

#include "pulsepp/random.hpp"

namespace pulsepp {

namespace {

using ComplexGrid = Eigen::MatrixXcd;

// Orthonormal 2D DFT: 1D transforms over columns then rows, scaled by
// 1/sqrt(W*H).
ComplexGrid fft2_unitary(const ComplexGrid& in) {
  Eigen::FFT<double> fft;
  const Eigen::Index h = in.rows(), w = in.cols();
  ComplexGrid tmp(h, w), out(h, w);
  Eigen::VectorXcd buf_in(h), buf_out(h);
  for (Eigen::Index c = 0; c < w; ++c) {
    buf_in = in.col(c);
    fft.fwd(buf_out, buf_in);
    tmp.col(c) = buf_out;
  }
  Eigen::VectorXcd rbuf_in(w), rbuf_out(w);
  for (Eigen::Index r = 0; r < h; ++r) {
    rbuf_in = tmp.row(r).transpose();
    fft.fwd(rbuf_out, rbuf_in);
    out.row(r) = rbuf_out.transpose();
  }
  out /= std::sqrt(static_cast<double>(w * h));
  return out;
}

ComplexGrid ifft2_unitary(const ComplexGrid& in) {
  Eigen::FFT<double> fft;
  const Eigen::Index h = in.rows(), w = in.cols();
  ComplexGrid tmp(h, w), out(h, w);
  Eigen::VectorXcd buf_in(h), buf_out(h);
  for (Eigen::Index c = 0; c < w; ++c) {
    buf_in = in.col(c);
    fft.inv(buf_out, buf_in);
    tmp.col(c) = buf_out;
  }
  Eigen::VectorXcd rbuf_in(w), rbuf_out(w);
  for (Eigen::Index r = 0; r < h; ++r) {
    rbuf_in = tmp.row(r).transpose();
    fft.inv(rbuf_out, rbuf_in);
    out.row(r) = rbuf_out.transpose();
  }
  out *= std::sqrt(static_cast<double>(w * h));  // inv scales by 1/(W*H)
  return out;
}

ComplexVector masked_entries(const ComplexGrid& spectrum,
                             const CartesianMask& m) {
  ComplexVector g(m.samples());
  Eigen::Index idx = 0;
  for (int c : m.retained_cols)
    for (int r = 0; r < m.height; ++r) g[idx++] = spectrum(r, c);
  return g;
}

}  // namespace

CartesianMask make_cartesian_mask(int width, int height, double R,
                                  double center_fraction, std::uint64_t seed) {
  require(width >= 1 && height >= 1, "make_cartesian_mask: bad dimensions");
  require(R >= 1.0, "make_cartesian_mask: R must be >= 1");
  require(center_fraction >= 0.0 && center_fraction < 1.0 / R,
          "make_cartesian_mask: center_fraction must lie in [0, 1/R)");
  const int n_keep = std::clamp(
      static_cast<int>(std::lround(static_cast<double>(width) / R)), 1, width);
  const int n_center_req =
      static_cast<int>(std::lround(center_fraction * width));
  if (n_center_req > n_keep)
    throw std::invalid_argument(
        "make_cartesian_mask: center band exceeds the retained budget");

  std::vector<bool> taken(static_cast<std::size_t>(width), false);
  int count = 0;
  const auto take = [&](int c) {
    if (!taken[static_cast<std::size_t>(c)]) {
      taken[static_cast<std::size_t>(c)] = true;
      ++count;
    }
  };

  // Center band: lowest-frequency columns, in complete +/- groups.
  if (n_center_req > 0 && n_keep >= 1) take(0);
  for (int f = 1; count < n_center_req && count + 2 <= n_keep; ++f) {
    const int neg = width - f;
    if (f > neg || f >= width) break;
    if (f == neg) {
      take(f);
    } else {
      take(f);
      take(neg);
    }
  }

  // Free self-paired columns and +/- pairs.
  std::vector<int> singles;
  if (!taken[0]) singles.push_back(0);
  if (width % 2 == 0 && width > 1 &&
      !taken[static_cast<std::size_t>(width / 2)])
    singles.push_back(width / 2);
  std::vector<int> pairs;
  for (int f = 1; f < (width + 1) / 2; ++f)
    if (!taken[static_cast<std::size_t>(f)]) pairs.push_back(f);

  int need = n_keep - count;
  std::size_t single_at = 0;
  while (need > 0 &&
         (need % 2 == 1 || need > 2 * static_cast<int>(pairs.size()))) {
    if (single_at < singles.size()) {
      take(singles[single_at++]);
      --need;
    } else {
      --need;  // cannot hit the requested count exactly; realized M governs
    }
  }
  Rng rng(seed);
  rng.shuffle(pairs);
  for (int i = 0; i < need / 2; ++i) {
    take(pairs[static_cast<std::size_t>(i)]);
    take(width - pairs[static_cast<std::size_t>(i)]);
  }

  CartesianMask m;
  m.width = width;
  m.height = height;
  m.acceleration = R;
  m.center_fraction = center_fraction;
  m.seed = seed;
  for (int c = 0; c < width; ++c)
    if (taken[static_cast<std::size_t>(c)]) m.retained_cols.push_back(c);
  return m;
}

ComplexVector fourier_forward_vec(const Vector& pixels,
                                  const CartesianMask& m) {
  require(pixels.size() == static_cast<Eigen::Index>(m.width) * m.height,
          "fourier_forward: image size mismatch");
  ComplexGrid grid(m.height, m.width);
  for (int r = 0; r < m.height; ++r)
    for (int c = 0; c < m.width; ++c)
      grid(r, c) = std::complex<double>(pixels[r * m.width + c], 0.0);
  return masked_entries(fft2_unitary(grid), m);
}

ComplexVector fourier_forward(const ObjectImage& f, const CartesianMask& m) {
  require(f.width == m.width && f.height == m.height,
          "fourier_forward: image dimensions do not match the mask");
  return fourier_forward_vec(f.pixels, m);
}

Vector fourier_adjoint(const ComplexVector& g, const CartesianMask& m) {
  require(g.size() == m.samples(), "fourier_adjoint: data length mismatch");
  ComplexGrid grid = ComplexGrid::Zero(m.height, m.width);
  Eigen::Index idx = 0;
  for (int c : m.retained_cols)
    for (int r = 0; r < m.height; ++r) grid(r, c) = g[idx++];
  const ComplexGrid img = ifft2_unitary(grid);
  Vector out(static_cast<Eigen::Index>(m.width) * m.height);
  for (int r = 0; r < m.height; ++r)
    for (int c = 0; c < m.width; ++c)
      out[r * m.width + c] = img(r, c).real();
  return out;
}

Vector fourier_forward_stacked(const Vector& pixels, const CartesianMask& m) {
  const ComplexVector g = fourier_forward_vec(pixels, m);
  Vector out(2 * g.size());
  out.head(g.size()) = g.real();
  out.tail(g.size()) = g.imag();
  return out;
}

Vector fourier_adjoint_stacked(const Vector& stacked, const CartesianMask& m) {
  const Eigen::Index mlen = stacked.size() / 2;
  require(stacked.size() == 2 * m.samples(),
          "fourier_adjoint_stacked: data length mismatch");
  ComplexVector g(mlen);
  g.real() = stacked.head(mlen);
  g.imag() = stacked.tail(mlen);
  return fourier_adjoint(g, m);
}

KSpaceData add_complex_gaussian(const ComplexVector& clean, double sigma,
                                std::uint64_t seed) {
  require(sigma >= 0.0, "add_complex_gaussian: sigma must be >= 0");
  KSpaceData out;
  out.sigma = sigma;
  out.samples = clean;
  if (sigma == 0.0) return out;
  Rng rng(seed);
  const double s = sigma / std::sqrt(2.0);
  for (Eigen::Index i = 0; i < out.samples.size(); ++i) {
    const double re = s * rng.normal();
    const double im = s * rng.normal();
    out.samples[i] += std::complex<double>(re, im);
  }
  return out;
}

Fidelity gaussian_fidelity(const KSpaceData& g, const ObjectImage& fhat,
                           const CartesianMask& m) {
  require(g.sigma > 0.0, "gaussian_fidelity: sigma must be > 0");
  require(g.samples.size() == m.samples(),
          "gaussian_fidelity: data length mismatch");
  const ComplexVector pred = fourier_forward(fhat, m);
  const ComplexVector resid = pred - g.samples;
  Fidelity out;
  out.value = resid.squaredNorm() / (2.0 * g.sigma * g.sigma);
  out.grad = fourier_adjoint(resid, m) / (g.sigma * g.sigma);
  return out;
}

// ---------------------------------------------------------------------------
// Synthetic objects
// ---------------------------------------------------------------------------

std::vector<Ellipse> phantom_ellipse_params(std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Ellipse> es;
  for (int i = 0; i < 4; ++i) {
    Ellipse e;
    e.cx = 0.25 + 0.5 * rng.uniform();
    e.cy = 0.25 + 0.5 * rng.uniform();
    e.a = 0.08 + 0.22 * rng.uniform();
    e.b = 0.08 + 0.22 * rng.uniform();
    e.angle_rad = 3.14159265358979323846 * rng.uniform();
    e.value = 0.05 + 0.13 * rng.uniform();
    es.push_back(e);
  }
  return es;
}

namespace {

bool inside_ellipse(const Ellipse& e, double x, double y) {
  const double dx = x - e.cx;
  const double dy = y - e.cy;
  const double c = std::cos(e.angle_rad), s = std::sin(e.angle_rad);
  const double u = (dx * c + dy * s) / e.a;
  const double v = (-dx * s + dy * c) / e.b;
  return u * u + v * v <= 1.0;
}

}  // namespace

ObjectImage phantom_generate(PhantomKind kind, int width, int height,
                             std::uint64_t seed) {
  require(width >= 1 && height >= 1, "phantom_generate: bad dimensions");
  ObjectImage img(width, height);
  if (kind == PhantomKind::checker) {
    const int block = std::max(1, std::min(width, height) / 8);
    const int phase = static_cast<int>(seed & 1u);
    for (int r = 0; r < height; ++r)
      for (int c = 0; c < width; ++c)
        img.at(r, c) =
            ((r / block + c / block + phase) % 2 == 0) ? 0.25 : 0.75;
    return img;
  }
  const auto ellipses = phantom_ellipse_params(seed);
  // 4x4 supersampling; pixel values approximate covered-area fractions so
  // discrete line integrals track the continuous ones closely.
  for (int r = 0; r < height; ++r) {
    for (int c = 0; c < width; ++c) {
      double v = kPhantomBackground;
      for (const Ellipse& e : ellipses) {
        int hits = 0;
        for (int sy = 0; sy < 4; ++sy)
          for (int sx = 0; sx < 4; ++sx) {
            const double x = (c + (sx + 0.5) / 4.0) / width;
            const double y = (r + (sy + 0.5) / 4.0) / height;
            if (inside_ellipse(e, x, y)) ++hits;
          }
        v += e.value * hits / 16.0;
      }
      img.at(r, c) = v;
    }
  }
  return img;
}

}  // namespace pulsepp
