#include "pulsepp/generator.hpp"

#include <algorithm>
#include <cmath>

#include "pulsepp/binio.hpp"
#include "pulsepp/checksum.hpp"

namespace pulsepp {

namespace {

constexpr double kInstanceNormEps = 1e-8;
constexpr double kRangeInset = 1e-9;  // keeps pixels strictly inside (0,1)

// Quantize to float32 so in-memory weights match their file encoding.
double q32(double x) { return static_cast<double>(static_cast<float>(x)); }

double lrelu(double x, double slope) { return x >= 0.0 ? x : slope * x; }
double lrelu_deriv(double x, double slope) { return x >= 0.0 ? 1.0 : slope; }

void conv3x3_forward(const double* in, double* out, const double* kern,
                     int channels, int res) {
  std::fill(out, out + channels * res * res, 0.0);
  const int n = res * res;
  for (int co = 0; co < channels; ++co) {
    double* o = out + co * n;
    for (int ci = 0; ci < channels; ++ci) {
      const double* x = in + ci * n;
      const double* k9 = kern + (co * channels + ci) * 9;
      for (int y = 0; y < res; ++y) {
        double* orow = o + y * res;
        for (int dy = -1; dy <= 1; ++dy) {
          const int yy = y + dy;
          if (yy < 0 || yy >= res) continue;
          const double* xrow = x + yy * res;
          const double* kr = k9 + (dy + 1) * 3;
          for (int px = 0; px < res; ++px) {
            double acc = kr[1] * xrow[px];
            if (px > 0) acc += kr[0] * xrow[px - 1];
            if (px + 1 < res) acc += kr[2] * xrow[px + 1];
            orow[px] += acc;
          }
        }
      }
    }
  }
}

void conv3x3_backward(const double* gout, double* gin, const double* kern,
                      int channels, int res) {
  std::fill(gin, gin + channels * res * res, 0.0);
  const int n = res * res;
  for (int co = 0; co < channels; ++co) {
    const double* go = gout + co * n;
    for (int ci = 0; ci < channels; ++ci) {
      double* gi = gin + ci * n;
      const double* k9 = kern + (co * channels + ci) * 9;
      for (int y = 0; y < res; ++y) {
        double* girow = gi + y * res;
        for (int dy = -1; dy <= 1; ++dy) {
          const int yy = y - dy;
          if (yy < 0 || yy >= res) continue;
          const double* grow = go + yy * res;
          const double* kr = k9 + (dy + 1) * 3;
          for (int px = 0; px < res; ++px) {
            double acc = kr[1] * grow[px];
            if (px + 1 < res) acc += kr[0] * grow[px + 1];
            if (px > 0) acc += kr[2] * grow[px - 1];
            girow[px] += acc;
          }
        }
      }
    }
  }
}

void upsample2x(const double* in, double* out, int channels, int res_in) {
  const int ro = 2 * res_in;
  for (int c = 0; c < channels; ++c) {
    const double* src = in + c * res_in * res_in;
    double* dst = out + c * ro * ro;
    for (int y = 0; y < ro; ++y)
      for (int x = 0; x < ro; ++x)
        dst[y * ro + x] = src[(y / 2) * res_in + (x / 2)];
  }
}

void downsum2x(const double* gout, double* gin, int channels, int res_in) {
  const int ro = 2 * res_in;
  std::fill(gin, gin + channels * res_in * res_in, 0.0);
  for (int c = 0; c < channels; ++c) {
    const double* src = gout + c * ro * ro;
    double* dst = gin + c * res_in * res_in;
    for (int y = 0; y < ro; ++y)
      for (int x = 0; x < ro; ++x)
        dst[(y / 2) * res_in + (x / 2)] += src[y * ro + x];
  }
}

Vector lrelu_vec(const Vector& x, double slope) {
  Vector y(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) y[i] = lrelu(x[i], slope);
  return y;
}

void check_latent_shapes(const GeneratorConfig& c, const StyleMatrix& V,
                         const NoiseSet& phi) {
  require(V.rows() == c.k && V.cols() == c.L,
          "synthesize: style matrix shape mismatch");
  require(static_cast<int>(phi.size()) == c.L,
          "synthesize: noise set layer count mismatch");
  for (int l = 0; l < c.L; ++l)
    require(phi[static_cast<std::size_t>(l)].size() == noise_dim(l + 1),
            "synthesize: noise vector length mismatch");
}

}  // namespace

void GeneratorConfig::validate() const {
  require(k >= 1, "generator config: k must be >= 1");
  require(L >= 2 && L % 2 == 0, "generator config: L must be even and >= 2");
  require(channels >= 1, "generator config: channels must be >= 1");
  require(mapping_depth >= 1, "generator config: mapping_depth must be >= 1");
  require(leaky_slope > 0.0 && leaky_slope < 1.0,
          "generator config: leaky_slope must lie in (0, 1)");
}

int noise_dim(int layer) {
  require(layer >= 1, "noise_dim: layer must be >= 1");
  const int level = (layer + 1) / 2;
  int p = 4;  // 4^(1+level)
  for (int i = 0; i < level; ++i) p *= 4;
  return p;
}

std::vector<int> noise_dims(int L) {
  require(L >= 1, "noise_dims: L must be >= 1");
  std::vector<int> dims(static_cast<std::size_t>(L));
  for (int l = 1; l <= L; ++l)
    dims[static_cast<std::size_t>(l - 1)] = noise_dim(l);
  return dims;
}

int layer_resolution(int layer) {
  const int level = (layer + 1) / 2;
  return 4 << (level - 1);
}

GeneratorWeights init_generator(const GeneratorConfig& config,
                                std::uint64_t seed) {
  config.validate();
  Rng rng(seed);
  GeneratorWeights w;
  w.config = config;
  const int k = config.k;
  const int C = config.channels;
  const double gain = std::sqrt(
      2.0 / (1.0 + config.leaky_slope * config.leaky_slope));

  const auto normal_matrix = [&](int rows, int cols, double scale) {
    Matrix m(rows, cols);
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < cols; ++c) m(r, c) = q32(scale * rng.normal());
    return m;
  };
  const auto normal_vector = [&](int n, double scale, double shift = 0.0) {
    Vector v(n);
    for (int i = 0; i < n; ++i) v[i] = q32(shift + scale * rng.normal());
    return v;
  };

  for (int d = 0; d < config.mapping_depth; ++d) {
    w.mapping_w.push_back(normal_matrix(k, k, gain / std::sqrt(double(k))));
    w.mapping_b.push_back(normal_vector(k, 0.01));
  }
  w.const_base = normal_vector(C * 16, 1.0);
  for (int l = 0; l < config.L; ++l)
    w.conv.push_back(
        normal_vector(C * C * 9, gain / std::sqrt(9.0 * double(C))));
  for (int l = 0; l < config.L; ++l) {
    w.style_scale_w.push_back(normal_matrix(C, k, 0.3 / std::sqrt(double(k))));
    w.style_scale_b.push_back(normal_vector(C, 0.1, 1.0));
    w.style_shift_w.push_back(normal_matrix(C, k, 0.3 / std::sqrt(double(k))));
    w.style_shift_b.push_back(normal_vector(C, 0.1));
  }
  w.noise_scale = Vector(config.L);
  for (int l = 0; l < config.L; ++l)
    w.noise_scale[l] = q32(0.05 + 0.25 * rng.uniform());
  w.head_w = normal_vector(C, 1.0 / std::sqrt(double(C)));
  w.head_b = q32(0.1 * rng.normal());
  return w;
}

Vector mapping_forward(const GeneratorWeights& w, const Vector& z) {
  require(z.size() == w.config.k, "mapping_forward: latent size mismatch");
  Vector h = z;
  for (std::size_t d = 0; d < w.mapping_w.size(); ++d)
    h = lrelu_vec(w.mapping_w[d] * h + w.mapping_b[d], w.config.leaky_slope);
  return h;
}

std::pair<Vector, Vector> mapping_jvp(const GeneratorWeights& w,
                                      const Vector& z, const Vector& dz) {
  Vector h = z;
  Vector dh = dz;
  for (std::size_t d = 0; d < w.mapping_w.size(); ++d) {
    const Vector pre = w.mapping_w[d] * h + w.mapping_b[d];
    const Vector dpre = w.mapping_w[d] * dh;
    h.resize(pre.size());
    dh.resize(pre.size());
    for (Eigen::Index i = 0; i < pre.size(); ++i) {
      h[i] = lrelu(pre[i], w.config.leaky_slope);
      dh[i] = lrelu_deriv(pre[i], w.config.leaky_slope) * dpre[i];
    }
  }
  return {h, dh};
}

TransformParams fit_transform(const GeneratorWeights& w, int n_samples,
                              std::uint64_t seed) {
  const int k = w.config.k;
  require(n_samples >= 10 * k, "fit_transform: n_samples must be >= 10*k");
  Rng rng(seed);
  Vector sum = Vector::Zero(k);
  Matrix outer = Matrix::Zero(k, k);
  Vector z(k);
  for (int i = 0; i < n_samples; ++i) {
    for (int j = 0; j < k; ++j) z[j] = rng.normal();
    const Vector x = lrelu_vec(mapping_forward(w, z), w.config.leaky_slope);
    sum += x;
    outer.selfadjointView<Eigen::Lower>().rankUpdate(x);
  }
  const double n = static_cast<double>(n_samples);
  const Vector mean = sum / n;
  Matrix cov = Matrix(outer.selfadjointView<Eigen::Lower>()) / n -
               mean * mean.transpose();
  cov.diagonal().array() += 1e-6 * cov.trace() / static_cast<double>(k);

  Eigen::SelfAdjointEigenSolver<Matrix> eig(cov);
  if (eig.info() != Eigen::Success || eig.eigenvalues().minCoeff() <= 0.0)
    throw std::runtime_error("fit_transform: singular sample covariance");
  const Vector lam = eig.eigenvalues();
  const Matrix& U = eig.eigenvectors();
  TransformParams t;
  t.leaky_slope = w.config.leaky_slope;
  t.mean = mean;
  t.whiten = U * lam.cwiseSqrt().cwiseInverse().asDiagonal() * U.transpose();
  t.unwhiten = U * lam.cwiseSqrt().asDiagonal() * U.transpose();
  return t;
}

StyleMatrix transform_forward(const TransformParams& t, const StyleMatrix& W) {
  StyleMatrix V(W.rows(), W.cols());
  for (Eigen::Index c = 0; c < W.cols(); ++c)
    V.col(c) = t.whiten * (lrelu_vec(W.col(c), t.leaky_slope) - t.mean);
  return V;
}

StyleMatrix transform_inverse(const TransformParams& t, const StyleMatrix& V) {
  StyleMatrix W(V.rows(), V.cols());
  for (Eigen::Index c = 0; c < V.cols(); ++c) {
    const Vector u = t.unwhiten * V.col(c) + t.mean;
    Vector w(u.size());
    for (Eigen::Index i = 0; i < u.size(); ++i)
      w[i] = u[i] >= 0.0 ? u[i] : u[i] / t.leaky_slope;
    W.col(c) = w;
  }
  return W;
}

SynthesisCache synthesize_cached(const GeneratorWeights& w,
                                 const TransformParams& t,
                                 const StyleMatrix& V, const NoiseSet& phi) {
  const GeneratorConfig& c = w.config;
  check_latent_shapes(c, V, phi);
  const int C = c.channels;
  const double slope = c.leaky_slope;

  SynthesisCache cache;
  cache.layers.resize(static_cast<std::size_t>(c.L));

  Vector x = w.const_base;
  int res = 4;
  for (int l = 0; l < c.L; ++l) {
    auto& lc = cache.layers[static_cast<std::size_t>(l)];
    const int target_res = layer_resolution(l + 1);
    if (target_res > res) {
      Vector up(C * target_res * target_res);
      upsample2x(x.data(), up.data(), C, res);
      x = std::move(up);
      res = target_res;
      lc.upsampled = true;
    }
    lc.res = res;
    const int n = res * res;

    // Style vector for this layer through the inverse transform.
    lc.u = t.unwhiten * V.col(l) + t.mean;
    Vector wl(c.k);
    for (int i = 0; i < c.k; ++i)
      wl[i] = lc.u[i] >= 0.0 ? lc.u[i] : lc.u[i] / slope;

    Vector conv_out(C * n);
    conv3x3_forward(x.data(), conv_out.data(),
                    w.conv[static_cast<std::size_t>(l)].data(), C, res);
    const double ns = w.noise_scale[l];
    const Vector& noise = phi[static_cast<std::size_t>(l)];
    for (int ch = 0; ch < C; ++ch) {
      double* p = conv_out.data() + ch * n;
      for (int i = 0; i < n; ++i) p[i] += ns * noise[i];
    }
    lc.pre_act = conv_out;

    Vector act(C * n);
    for (int i = 0; i < C * n; ++i) act[i] = lrelu(conv_out[i], slope);

    // Instance normalization followed by the style affine.
    const Vector ys =
        w.style_scale_w[static_cast<std::size_t>(l)] * wl +
        w.style_scale_b[static_cast<std::size_t>(l)];
    const Vector yb =
        w.style_shift_w[static_cast<std::size_t>(l)] * wl +
        w.style_shift_b[static_cast<std::size_t>(l)];
    lc.style_scale = ys;
    lc.inv_std = Vector(C);
    lc.normed = Vector(C * n);
    x = Vector(C * n);
    for (int ch = 0; ch < C; ++ch) {
      const double* a = act.data() + ch * n;
      double mu = 0.0;
      for (int i = 0; i < n; ++i) mu += a[i];
      mu /= n;
      double var = 0.0;
      for (int i = 0; i < n; ++i) var += (a[i] - mu) * (a[i] - mu);
      var /= n;
      const double inv_std = 1.0 / std::sqrt(var + kInstanceNormEps);
      lc.inv_std[ch] = inv_std;
      double* nm = lc.normed.data() + ch * n;
      double* out = x.data() + ch * n;
      for (int i = 0; i < n; ++i) {
        nm[i] = (a[i] - mu) * inv_std;
        out[i] = ys[ch] * nm[i] + yb[ch];
      }
    }
  }

  // 1x1 head and logistic squash into (0,1).
  const int n = res * res;
  cache.image = ObjectImage(res, res);
  for (int i = 0; i < n; ++i) {
    double a = w.head_b;
    for (int ch = 0; ch < C; ++ch) a += w.head_w[ch] * x[ch * n + i];
    const double s = 1.0 / (1.0 + std::exp(-a));
    cache.image.pixels[i] = kRangeInset + (1.0 - 2.0 * kRangeInset) * s;
  }
  return cache;
}

ObjectImage synthesize(const GeneratorWeights& w, const TransformParams& t,
                       const StyleMatrix& V, const NoiseSet& phi) {
  return synthesize_cached(w, t, V, phi).image;
}

LatentGrad synthesize_backward(const GeneratorWeights& w,
                               const TransformParams& t,
                               const SynthesisCache& cache,
                               const Vector& upstream) {
  const GeneratorConfig& c = w.config;
  const int C = c.channels;
  const double slope = c.leaky_slope;
  require(upstream.size() == cache.image.pixels.size(),
          "synthesize_backward: upstream length mismatch");

  LatentGrad grad;
  grad.style = Matrix::Zero(c.k, c.L);
  grad.noise.resize(static_cast<std::size_t>(c.L));

  // Head backward.
  int res = cache.image.width;
  int n = res * res;
  Vector g(C * n);
  {
    Vector da(n);
    for (int i = 0; i < n; ++i) {
      const double s =
          (cache.image.pixels[i] - kRangeInset) / (1.0 - 2.0 * kRangeInset);
      da[i] = upstream[i] * (1.0 - 2.0 * kRangeInset) * s * (1.0 - s);
    }
    for (int ch = 0; ch < C; ++ch) {
      double* gp = g.data() + ch * n;
      for (int i = 0; i < n; ++i) gp[i] = w.head_w[ch] * da[i];
    }
  }

  for (int l = c.L - 1; l >= 0; --l) {
    const auto& lc = cache.layers[static_cast<std::size_t>(l)];
    res = lc.res;
    n = res * res;

    // Style affine backward: per-channel sums against the normed features.
    Vector dys(C), dyb(C);
    for (int ch = 0; ch < C; ++ch) {
      const double* gp = g.data() + ch * n;
      const double* nm = lc.normed.data() + ch * n;
      double sum_g = 0.0, sum_gx = 0.0;
      for (int i = 0; i < n; ++i) {
        sum_g += gp[i];
        sum_gx += gp[i] * nm[i];
      }
      dyb[ch] = sum_g;
      dys[ch] = sum_gx;
    }
    const Vector dw =
        w.style_scale_w[static_cast<std::size_t>(l)].transpose() * dys +
        w.style_shift_w[static_cast<std::size_t>(l)].transpose() * dyb;
    // Through the inverse leaky unit and the unwhitening map.
    Vector du(c.k);
    for (int i = 0; i < c.k; ++i)
      du[i] = (lc.u[i] >= 0.0 ? 1.0 : 1.0 / slope) * dw[i];
    grad.style.col(l) = t.unwhiten.transpose() * du;

    // Instance norm backward.
    Vector g3(C * n);
    for (int ch = 0; ch < C; ++ch) {
      const double ys = lc.style_scale[ch];
      const double inv_std = lc.inv_std[ch];
      const double* gp = g.data() + ch * n;
      const double* nm = lc.normed.data() + ch * n;
      double m1 = 0.0, m2 = 0.0;
      for (int i = 0; i < n; ++i) {
        const double g4 = gp[i] * ys;
        m1 += g4;
        m2 += g4 * nm[i];
      }
      m1 /= n;
      m2 /= n;
      double* out = g3.data() + ch * n;
      for (int i = 0; i < n; ++i) {
        const double g4 = gp[i] * ys;
        out[i] = inv_std * (g4 - m1 - nm[i] * m2);
      }
    }

    // Leaky unit backward, then the noise injection gradient.
    Vector g2(C * n);
    for (int i = 0; i < C * n; ++i)
      g2[i] = g3[i] * lrelu_deriv(lc.pre_act[i], slope);
    Vector& gphi = grad.noise[static_cast<std::size_t>(l)];
    gphi = Vector::Zero(n);
    for (int ch = 0; ch < C; ++ch) {
      const double* gp = g2.data() + ch * n;
      for (int i = 0; i < n; ++i) gphi[i] += gp[i];
    }
    gphi *= w.noise_scale[l];

    Vector gin(C * n);
    conv3x3_backward(g2.data(), gin.data(),
                     w.conv[static_cast<std::size_t>(l)].data(), C, res);
    if (lc.upsampled) {
      const int res_in = res / 2;
      Vector gprev(C * res_in * res_in);
      downsum2x(gin.data(), gprev.data(), C, res_in);
      g = std::move(gprev);
    } else {
      g = std::move(gin);
    }
  }
  return grad;
}

LatentGrad generator_grad(const GeneratorWeights& w, const TransformParams& t,
                          const StyleMatrix& V, const NoiseSet& phi,
                          const Vector& upstream) {
  const SynthesisCache cache = synthesize_cached(w, t, V, phi);
  return synthesize_backward(w, t, cache, upstream);
}

std::vector<double> sample_latent_norm_sq(const GeneratorWeights& w,
                                          const TransformParams& t, int n,
                                          std::uint64_t seed) {
  require(n >= 1, "sample_latent_norm_sq: n must be >= 1");
  Rng rng(seed);
  std::vector<double> out(static_cast<std::size_t>(n));
  Vector z(w.config.k);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < w.config.k; ++j) z[j] = rng.normal();
    const Vector x =
        lrelu_vec(mapping_forward(w, z), w.config.leaky_slope) - t.mean;
    out[static_cast<std::size_t>(i)] = (t.whiten * x).squaredNorm();
  }
  return out;
}

StyleMatrix sample_style_init(const GeneratorConfig& config, Rng& rng) {
  StyleMatrix V(config.k, config.L);
  for (int c = 0; c < config.L; ++c)
    for (int r = 0; r < config.k; ++r) V(r, c) = rng.normal();
  return V;
}

NoiseSet sample_noise_init(const GeneratorConfig& config, Rng& rng) {
  NoiseSet phi(static_cast<std::size_t>(config.L));
  for (int l = 0; l < config.L; ++l) {
    Vector& v = phi[static_cast<std::size_t>(l)];
    v = Vector(noise_dim(l + 1));
    for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = rng.normal();
  }
  return phi;
}

NoiseSet zero_noise_set(const GeneratorConfig& config) {
  NoiseSet phi(static_cast<std::size_t>(config.L));
  for (int l = 0; l < config.L; ++l)
    phi[static_cast<std::size_t>(l)] = Vector::Zero(noise_dim(l + 1));
  return phi;
}

namespace {

constexpr std::uint16_t kWeightsVersion = 1;

void put_array(ByteWriter& bw, const double* p, std::size_t count) {
  bw.u64(count);
  for (std::size_t i = 0; i < count; ++i)
    bw.f32(static_cast<float>(p[i]));
}

void get_array(ByteReader& br, double* p, std::size_t count) {
  const std::uint64_t stored = br.u64();
  if (stored != count)
    throw std::runtime_error("weights file: unexpected array length");
  for (std::size_t i = 0; i < count; ++i)
    p[i] = static_cast<double>(br.f32());
}

void put_matrix(ByteWriter& bw, const Matrix& m) {
  // Row-major serialization.
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm =
      m;
  put_array(bw, rm.data(), static_cast<std::size_t>(rm.size()));
}

void get_matrix(ByteReader& br, Matrix& m) {
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm(
      m.rows(), m.cols());
  get_array(br, rm.data(), static_cast<std::size_t>(rm.size()));
  m = rm;
}

}  // namespace

void save_weights(const GeneratorWeights& w, const std::string& path) {
  ByteWriter bw;
  bw.magic("LMGW");
  bw.u16(kWeightsVersion);
  bw.u32(static_cast<std::uint32_t>(w.config.k));
  bw.u32(static_cast<std::uint32_t>(w.config.L));
  bw.u32(static_cast<std::uint32_t>(w.config.channels));
  bw.u32(static_cast<std::uint32_t>(w.config.mapping_depth));
  bw.f64(w.config.leaky_slope);
  for (const auto& m : w.mapping_w) put_matrix(bw, m);
  for (const auto& v : w.mapping_b)
    put_array(bw, v.data(), static_cast<std::size_t>(v.size()));
  put_array(bw, w.const_base.data(),
            static_cast<std::size_t>(w.const_base.size()));
  for (const auto& v : w.conv)
    put_array(bw, v.data(), static_cast<std::size_t>(v.size()));
  for (int l = 0; l < w.config.L; ++l) {
    const auto li = static_cast<std::size_t>(l);
    put_matrix(bw, w.style_scale_w[li]);
    put_array(bw, w.style_scale_b[li].data(),
              static_cast<std::size_t>(w.style_scale_b[li].size()));
    put_matrix(bw, w.style_shift_w[li]);
    put_array(bw, w.style_shift_b[li].data(),
              static_cast<std::size_t>(w.style_shift_b[li].size()));
  }
  put_array(bw, w.noise_scale.data(),
            static_cast<std::size_t>(w.noise_scale.size()));
  put_array(bw, w.head_w.data(), static_cast<std::size_t>(w.head_w.size()));
  bw.u64(1);
  bw.f32(static_cast<float>(w.head_b));

  const std::uint32_t crc = crc32(bw.data().data(), bw.data().size());
  bw.u32(crc);
  write_file(path, bw.data());
}

GeneratorWeights load_weights(const std::string& path) {
  std::vector<char> raw = read_file(path);
  if (raw.size() < 8) throw std::runtime_error("weights file truncated");
  const std::size_t body = raw.size() - 4;
  std::uint32_t stored_crc;
  std::memcpy(&stored_crc, raw.data() + body, 4);
  if (crc32(raw.data(), body) != stored_crc)
    throw std::runtime_error("weights file checksum mismatch");
  raw.resize(body);
  ByteReader br(std::move(raw));
  br.expect_magic("LMGW", "weights file");
  const std::uint16_t version = br.u16();
  if (version != kWeightsVersion)
    throw std::runtime_error("weights file version mismatch");

  GeneratorConfig c;
  c.k = static_cast<int>(br.u32());
  c.L = static_cast<int>(br.u32());
  c.channels = static_cast<int>(br.u32());
  c.mapping_depth = static_cast<int>(br.u32());
  c.leaky_slope = br.f64();
  c.validate();

  GeneratorWeights w;
  w.config = c;
  w.mapping_w.assign(static_cast<std::size_t>(c.mapping_depth),
                     Matrix(c.k, c.k));
  w.mapping_b.assign(static_cast<std::size_t>(c.mapping_depth), Vector(c.k));
  for (auto& m : w.mapping_w) get_matrix(br, m);
  for (auto& v : w.mapping_b)
    get_array(br, v.data(), static_cast<std::size_t>(v.size()));
  w.const_base = Vector(c.channels * 16);
  get_array(br, w.const_base.data(),
            static_cast<std::size_t>(w.const_base.size()));
  w.conv.assign(static_cast<std::size_t>(c.L),
                Vector(c.channels * c.channels * 9));
  for (auto& v : w.conv)
    get_array(br, v.data(), static_cast<std::size_t>(v.size()));
  w.style_scale_w.assign(static_cast<std::size_t>(c.L),
                         Matrix(c.channels, c.k));
  w.style_scale_b.assign(static_cast<std::size_t>(c.L), Vector(c.channels));
  w.style_shift_w.assign(static_cast<std::size_t>(c.L),
                         Matrix(c.channels, c.k));
  w.style_shift_b.assign(static_cast<std::size_t>(c.L), Vector(c.channels));
  for (int l = 0; l < c.L; ++l) {
    const auto li = static_cast<std::size_t>(l);
    get_matrix(br, w.style_scale_w[li]);
    get_array(br, w.style_scale_b[li].data(),
              static_cast<std::size_t>(w.style_scale_b[li].size()));
    get_matrix(br, w.style_shift_w[li]);
    get_array(br, w.style_shift_b[li].data(),
              static_cast<std::size_t>(w.style_shift_b[li].size()));
  }
  w.noise_scale = Vector(c.L);
  get_array(br, w.noise_scale.data(),
            static_cast<std::size_t>(w.noise_scale.size()));
  w.head_w = Vector(c.channels);
  get_array(br, w.head_w.data(), static_cast<std::size_t>(w.head_w.size()));
  get_array(br, &w.head_b, 1);
  return w;
}

}  // namespace pulsepp
