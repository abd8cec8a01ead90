#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <vector>

#include "pulsepp/binio.hpp"
#include "pulsepp/checksum.hpp"
#include "pulsepp/imaging.hpp"
#include "pulsepp/random.hpp"

namespace pulsepp {

void FanBeamGeometry::validate() const {
  require(n_pix >= 1, "fan-beam geometry: n_pix must be >= 1");
  require(pixel_pitch_mm > 0.0, "fan-beam geometry: pixel pitch must be > 0");
  require(source_to_iso_mm > 0.0 && iso_to_det_mm > 0.0,
          "fan-beam geometry: distances must be > 0");
  require(det_count >= 1 && det_pitch_mm > 0.0,
          "fan-beam geometry: bad detector");
  require(!view_angles_deg.empty(), "fan-beam geometry: no view angles");
  for (std::size_t i = 1; i < view_angles_deg.size(); ++i)
    require(view_angles_deg[i] > view_angles_deg[i - 1],
            "fan-beam geometry: view angles must be strictly increasing");
  const double half_diag =
      0.5 * n_pix * pixel_pitch_mm * std::sqrt(2.0);
  require(source_to_iso_mm > half_diag,
          "fan-beam geometry: source lies inside the image support");
}

std::vector<double> linspace_angles(double first_deg, double last_deg,
                                    int n_views) {
  require(n_views >= 1, "linspace_angles: n_views must be >= 1");
  std::vector<double> a(static_cast<std::size_t>(n_views));
  if (n_views == 1) {
    a[0] = first_deg;
    return a;
  }
  const double step = (last_deg - first_deg) / (n_views - 1);
  for (int i = 0; i < n_views; ++i) a[static_cast<std::size_t>(i)] =
      first_deg + step * i;
  return a;
}

namespace {

struct Ray {
  double sx, sy;  // source
  double ex, ey;  // detector element
};

// Accumulates (pixel index, chord length in mm) for one ray by parametric
// traversal of the pixel grid.
template <typename Emit>
void trace_ray(const Ray& ray, int n_pix, double pitch, Emit&& emit) {
  const double half = 0.5 * n_pix * pitch;
  const double dx = ray.ex - ray.sx;
  const double dy = ray.ey - ray.sy;
  const double len = std::hypot(dx, dy);
  if (len == 0.0) return;

  double tmin = 0.0, tmax = 1.0;
  const auto clip = [&](double s, double d, double lo, double hi) {
    if (d == 0.0) return s >= lo && s <= hi;
    double t0 = (lo - s) / d;
    double t1 = (hi - s) / d;
    if (t0 > t1) std::swap(t0, t1);
    tmin = std::max(tmin, t0);
    tmax = std::min(tmax, t1);
    return true;
  };
  if (!clip(ray.sx, dx, -half, half)) return;
  if (!clip(ray.sy, dy, -half, half)) return;
  if (tmin >= tmax) return;

  const double inf = std::numeric_limits<double>::infinity();
  double t = tmin;
  int guard = 4 * n_pix + 8;
  while (t < tmax - 1e-13 && guard-- > 0) {
    const double x = ray.sx + t * dx;
    const double y = ray.sy + t * dy;
    // Next crossing of a vertical / horizontal pixel boundary.
    double tx = inf, ty = inf;
    if (dx > 0.0) {
      const double bx = -half + (std::floor((x + half) / pitch) + 1.0) * pitch;
      tx = (bx - ray.sx) / dx;
    } else if (dx < 0.0) {
      const double bx = -half + (std::ceil((x + half) / pitch) - 1.0) * pitch;
      tx = (bx - ray.sx) / dx;
    }
    if (dy > 0.0) {
      const double by = -half + (std::floor((y + half) / pitch) + 1.0) * pitch;
      ty = (by - ray.sy) / dy;
    } else if (dy < 0.0) {
      const double by = -half + (std::ceil((y + half) / pitch) - 1.0) * pitch;
      ty = (by - ray.sy) / dy;
    }
    double tn = std::min(std::min(tx, ty), tmax);
    if (tn <= t) tn = std::min(t + 1e-12, tmax);
    const double tm = 0.5 * (t + tn);
    const double mx = ray.sx + tm * dx;
    const double my = ray.sy + tm * dy;
    const int col = static_cast<int>(std::floor((mx + half) / pitch));
    const int row = static_cast<int>(std::floor((half - my) / pitch));
    if (col >= 0 && col < n_pix && row >= 0 && row < n_pix)
      emit(row * n_pix + col, (tn - t) * len);
    t = tn;
  }
}

}  // namespace

SystemMatrix build_fanbeam(const FanBeamGeometry& geom) {
  geom.validate();
  const int n = geom.n_pix;
  const int nd = geom.det_count;
  const int n_views = static_cast<int>(geom.view_angles_deg.size());
  const double deg = 3.14159265358979323846 / 180.0;

  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(static_cast<std::size_t>(geom.rays()) * 2 *
                static_cast<std::size_t>(n));
  for (int v = 0; v < n_views; ++v) {
    const double beta = geom.view_angles_deg[static_cast<std::size_t>(v)] * deg;
    const double dirx = std::cos(beta), diry = std::sin(beta);
    const double perpx = -std::sin(beta), perpy = std::cos(beta);
    const double sx = -geom.source_to_iso_mm * dirx;
    const double sy = -geom.source_to_iso_mm * diry;
    for (int d = 0; d < nd; ++d) {
      const double u = (d - 0.5 * (nd - 1)) * geom.det_pitch_mm;
      Ray ray;
      ray.sx = sx;
      ray.sy = sy;
      ray.ex = geom.iso_to_det_mm * dirx + u * perpx;
      ray.ey = geom.iso_to_det_mm * diry + u * perpy;
      const int rowi = v * nd + d;
      trace_ray(ray, n, geom.pixel_pitch_mm, [&](int pix, double length) {
        if (length > 0.0)
          trips.emplace_back(rowi, pix, length);
      });
    }
  }
  SystemMatrix h(geom.rays(), n * n);
  h.setFromTriplets(trips.begin(), trips.end());
  h.makeCompressed();
  return h;
}

void save_system_matrix(const std::string& path, const SystemMatrix& h) {
  SystemMatrix m = h;
  m.makeCompressed();
  ByteWriter bw;
  bw.magic("LMSM");
  bw.u32(static_cast<std::uint32_t>(m.rows()));
  bw.u32(static_cast<std::uint32_t>(m.cols()));
  bw.u64(static_cast<std::uint64_t>(m.nonZeros()));
  for (Eigen::Index r = 0; r <= m.rows(); ++r)
    bw.u32(static_cast<std::uint32_t>(m.outerIndexPtr()[r]));
  for (Eigen::Index i = 0; i < m.nonZeros(); ++i)
    bw.u32(static_cast<std::uint32_t>(m.innerIndexPtr()[i]));
  for (Eigen::Index i = 0; i < m.nonZeros(); ++i)
    bw.f64(m.valuePtr()[i]);
  const std::uint32_t crc = crc32(bw.data().data(), bw.data().size());
  bw.u32(crc);
  write_file(path, bw.data());
}

SystemMatrix load_system_matrix(const std::string& path) {
  std::vector<char> raw = read_file(path);
  if (raw.size() < 8) throw std::runtime_error("system matrix file truncated");
  const std::size_t body = raw.size() - 4;
  std::uint32_t stored;
  std::memcpy(&stored, raw.data() + body, 4);
  if (crc32(raw.data(), body) != stored)
    throw std::runtime_error("system matrix checksum mismatch");
  raw.resize(body);
  ByteReader br(std::move(raw));
  br.expect_magic("LMSM", "system matrix file");
  const int rows = static_cast<int>(br.u32());
  const int cols = static_cast<int>(br.u32());
  const std::uint64_t nnz = br.u64();
  std::vector<int> outer(static_cast<std::size_t>(rows) + 1);
  for (auto& o : outer) o = static_cast<int>(br.u32());
  std::vector<int> inner(nnz);
  for (auto& i : inner) i = static_cast<int>(br.u32());
  std::vector<double> vals(nnz);
  for (auto& v : vals) v = br.f64();

  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(nnz);
  for (int r = 0; r < rows; ++r)
    for (int i = outer[static_cast<std::size_t>(r)];
         i < outer[static_cast<std::size_t>(r) + 1]; ++i)
      trips.emplace_back(r, inner[static_cast<std::size_t>(i)],
                         vals[static_cast<std::size_t>(i)]);
  SystemMatrix h(rows, cols);
  h.setFromTriplets(trips.begin(), trips.end());
  h.makeCompressed();
  return h;
}

Vector xray_intensity(const SystemMatrix& h, const ObjectImage& f, double i0,
                      double mu_max) {
  require(i0 > 0.0, "xray_intensity: I0 must be > 0");
  require(mu_max >= 0.0, "xray_intensity: mu_max must be >= 0");
  require(h.cols() == f.pixels.size(), "xray_intensity: size mismatch");
  const Vector path = h * (mu_max * f.pixels);
  return i0 * (-path.array()).exp();
}

IntensityData add_poisson(const Vector& mean, double i0, double mu_max,
                          std::uint64_t seed) {
  Rng rng(seed);
  IntensityData out;
  out.i0 = i0;
  out.mu_max = mu_max;
  out.counts = Vector(mean.size());
  for (Eigen::Index i = 0; i < mean.size(); ++i) {
    require(mean[i] >= 0.0, "add_poisson: negative mean");
    out.counts[i] = static_cast<double>(rng.poisson(mean[i]));
  }
  return out;
}

Fidelity kl_fidelity(const IntensityData& g, const ObjectImage& fhat,
                     const SystemMatrix& h) {
  require(g.counts.size() == h.rows(), "kl_fidelity: data length mismatch");
  require(h.cols() == fhat.pixels.size(), "kl_fidelity: image size mismatch");
  const Vector pred = xray_intensity(h, fhat, g.i0, g.mu_max);
  Fidelity out;
  double j = 0.0;
  for (Eigen::Index i = 0; i < pred.size(); ++i) {
    const double gi = g.counts[i];
    const double pi = pred[i];
    j += (gi > 0.0 ? gi * std::log(gi / pi) : 0.0) - gi + pi;
  }
  out.value = j;
  out.grad = g.mu_max * (h.transpose() * (g.counts - pred));
  return out;
}

}  // namespace pulsepp
