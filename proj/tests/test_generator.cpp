#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "pulsepp/generator.hpp"
#include "pulsepp/random.hpp"

using namespace pulsepp;

namespace {

GeneratorConfig small_config() {
  GeneratorConfig c;
  c.k = 12;
  c.L = 4;  // 4 -> 8 pixels per side
  c.channels = 5;
  c.mapping_depth = 3;
  return c;
}

struct Rig {
  GeneratorConfig config;
  GeneratorWeights weights;
  TransformParams transform;
};

Rig make_rig(std::uint64_t seed = 7) {
  Rig r;
  r.config = small_config();
  r.weights = init_generator(r.config, seed);
  r.transform = fit_transform(r.weights, 10 * r.config.k * 2, seed + 1);
  return r;
}

std::string temp_path(const char* name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_CASE("noise dimensions follow the layer formula") {
  CHECK(noise_dim(1) == 16);
  CHECK(noise_dim(2) == 16);
  CHECK(noise_dim(3) == 64);
  CHECK(noise_dim(8) == 1024);  // 32 x 32 grid
  const auto dims = noise_dims(8);
  REQUIRE(dims.size() == 8);
  CHECK(dims[0] == 16);
  CHECK(dims[2] == 64);
  CHECK(dims[7] == 1024);
}

TEST_CASE("generator config resolution") {
  GeneratorConfig c;
  c.k = 64;
  c.L = 8;
  CHECK(c.output_resolution() == 32);
  c.L = 4;
  CHECK(c.output_resolution() == 8);
  c.L = 3;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
}

TEST_CASE("weight initialization is deterministic and seed sensitive") {
  const GeneratorConfig c = small_config();
  const GeneratorWeights a = init_generator(c, 99);
  const GeneratorWeights b = init_generator(c, 99);
  CHECK(a.mapping_w[0] == b.mapping_w[0]);
  CHECK(a.const_base == b.const_base);
  CHECK(a.conv[1] == b.conv[1]);
  CHECK(a.head_b == b.head_b);

  const GeneratorWeights d = init_generator(c, 100);
  CHECK(a.mapping_w[0] != d.mapping_w[0]);
}

TEST_CASE("mapping forward is deterministic and latent sensitive") {
  const Rig rig = make_rig();
  Rng rng(5);
  Vector z(rig.config.k);
  for (int i = 0; i < rig.config.k; ++i) z[i] = rng.normal();
  const Vector w1 = mapping_forward(rig.weights, z);
  const Vector w2 = mapping_forward(rig.weights, z);
  CHECK(w1 == w2);
  Vector z2 = z;
  z2[0] += 0.5;
  CHECK(mapping_forward(rig.weights, z2) != w1);
}

TEST_CASE("mapping jvp matches finite differences") {
  const Rig rig = make_rig();
  Rng rng(6);
  Vector z(rig.config.k), dz(rig.config.k);
  for (int i = 0; i < rig.config.k; ++i) {
    z[i] = rng.normal();
    dz[i] = rng.normal();
  }
  const auto [w, dw] = mapping_jvp(rig.weights, z, dz);
  CHECK(w == mapping_forward(rig.weights, z));
  const double h = 1e-6;
  const Vector fp = mapping_forward(rig.weights, z + h * dz);
  const Vector fm = mapping_forward(rig.weights, z - h * dz);
  const Vector fd = (fp - fm) / (2.0 * h);
  CHECK((dw - fd).norm() / (fd.norm() + 1e-30) < 1e-4);
}

TEST_CASE("fitted transform standardizes mapped latents") {
  const GeneratorConfig c = small_config();
  const GeneratorWeights w = init_generator(c, 17);
  const int n = 10000;
  const TransformParams t = fit_transform(w, n, 18);

  // Fresh mapped samples through the transform: near zero mean, near unit
  // variance per coordinate.
  Rng rng(19);
  Vector mean = Vector::Zero(c.k);
  Vector second = Vector::Zero(c.k);
  Vector z(c.k);
  const int m = 10000;
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < c.k; ++j) z[j] = rng.normal();
    const Vector v = transform_forward(t, mapping_forward(w, z));
    mean += v;
    second += v.cwiseProduct(v);
  }
  mean /= m;
  second /= m;
  for (int j = 0; j < c.k; ++j) {
    CHECK(std::abs(mean[j]) < 0.1);
    CHECK(std::abs(second[j] - mean[j] * mean[j] - 1.0) < 0.15);
  }

  CHECK_THROWS_AS(fit_transform(w, c.k, 18), std::invalid_argument);
}

TEST_CASE("transform round trip and columnwise structure") {
  const Rig rig = make_rig(23);
  Rng rng(24);
  StyleMatrix W(rig.config.k, 5);
  for (int cidx = 0; cidx < 5; ++cidx)
    for (int r = 0; r < rig.config.k; ++r) W(r, cidx) = rng.normal();

  const StyleMatrix V = transform_forward(rig.transform, W);
  const StyleMatrix back = transform_inverse(rig.transform, V);
  CHECK((back - W).cwiseAbs().maxCoeff() < 1e-8);

  // Columnwise: permuting columns commutes with the forward map.
  StyleMatrix Wp(rig.config.k, 5);
  const int perm[5] = {4, 2, 0, 1, 3};
  for (int cidx = 0; cidx < 5; ++cidx) Wp.col(cidx) = W.col(perm[cidx]);
  const StyleMatrix Vp = transform_forward(rig.transform, Wp);
  for (int cidx = 0; cidx < 5; ++cidx)
    CHECK(Vp.col(cidx) == V.col(perm[cidx]));
}

TEST_CASE("transform applies the leaky unit before whitening") {
  const Rig rig = make_rig(29);
  const TransformParams& t = rig.transform;
  Vector w(rig.config.k);
  for (int i = 0; i < rig.config.k; ++i) w[i] = (i % 2 == 0) ? 2.0 : -2.0;
  // Hand-computed forward: negatives scaled by the slope, then whitening.
  Vector x(rig.config.k);
  for (int i = 0; i < rig.config.k; ++i)
    x[i] = w[i] >= 0.0 ? w[i] : t.leaky_slope * w[i];
  const Vector expect = t.whiten * (x - t.mean);
  const StyleMatrix got = transform_forward(t, w);
  CHECK((got.col(0) - expect).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("synthesis is deterministic with pixels strictly inside (0,1)") {
  const Rig rig = make_rig(31);
  Rng rng(32);
  for (int trial = 0; trial < 100; ++trial) {
    const StyleMatrix V = sample_style_init(rig.config, rng);
    const NoiseSet phi = sample_noise_init(rig.config, rng);
    const ObjectImage img = synthesize(rig.weights, rig.transform, V, phi);
    REQUIRE(img.width == rig.config.output_resolution());
    for (int i = 0; i < img.size(); ++i) {
      REQUIRE(img.pixels[i] > 0.0);
      REQUIRE(img.pixels[i] < 1.0);
    }
    if (trial == 0) {
      const ObjectImage again = synthesize(rig.weights, rig.transform, V, phi);
      REQUIRE(again.pixels == img.pixels);
    }
  }
}

TEST_CASE("late-layer noise only affects the image, not earlier features") {
  const Rig rig = make_rig(33);
  Rng rng(34);
  const StyleMatrix V = sample_style_init(rig.config, rng);
  NoiseSet phi = sample_noise_init(rig.config, rng);
  const SynthesisCache base =
      synthesize_cached(rig.weights, rig.transform, V, phi);

  NoiseSet phi2 = phi;
  phi2.back()[0] += 1.0;
  const SynthesisCache mod =
      synthesize_cached(rig.weights, rig.transform, V, phi2);

  CHECK(mod.image.pixels != base.image.pixels);
  // All layers before the last are bitwise unchanged.
  for (int l = 0; l + 1 < rig.config.L; ++l) {
    CHECK(mod.layers[static_cast<std::size_t>(l)].pre_act ==
          base.layers[static_cast<std::size_t>(l)].pre_act);
    CHECK(mod.layers[static_cast<std::size_t>(l)].normed ==
          base.layers[static_cast<std::size_t>(l)].normed);
  }
}

TEST_CASE("shape mismatches are rejected") {
  const Rig rig = make_rig(35);
  Rng rng(36);
  StyleMatrix V = sample_style_init(rig.config, rng);
  NoiseSet phi = sample_noise_init(rig.config, rng);
  NoiseSet bad = phi;
  bad[1] = Vector::Zero(7);
  CHECK_THROWS_AS(synthesize(rig.weights, rig.transform, V, bad),
                  std::invalid_argument);
  StyleMatrix badV(rig.config.k, rig.config.L + 1);
  badV.setZero();
  CHECK_THROWS_AS(synthesize(rig.weights, rig.transform, badV, phi),
                  std::invalid_argument);
}

TEST_CASE("generator gradient matches central finite differences") {
  const Rig rig = make_rig(37);
  Rng rng(38);
  const StyleMatrix V = sample_style_init(rig.config, rng);
  const NoiseSet phi = sample_noise_init(rig.config, rng);
  const int n = rig.config.output_resolution() * rig.config.output_resolution();
  Vector upstream(n);
  for (int i = 0; i < n; ++i) upstream[i] = rng.normal();

  const LatentGrad g =
      generator_grad(rig.weights, rig.transform, V, phi, upstream);

  const auto loss = [&](const StyleMatrix& v, const NoiseSet& p) {
    return upstream.dot(synthesize(rig.weights, rig.transform, v, p).pixels);
  };
  const double h = 1e-5;
  // 20 style coordinates.
  for (int probe = 0; probe < 20; ++probe) {
    const int r = (probe * 5) % rig.config.k;
    const int c = probe % rig.config.L;
    StyleMatrix vp = V, vm = V;
    vp(r, c) += h;
    vm(r, c) -= h;
    const double fd = (loss(vp, phi) - loss(vm, phi)) / (2.0 * h);
    const double scale = std::max(std::abs(fd), 1e-8);
    CHECK(std::abs(g.style(r, c) - fd) / scale < 1e-4);
  }
  // 20 noise coordinates spread over the layers.
  for (int probe = 0; probe < 20; ++probe) {
    const std::size_t l = probe % phi.size();
    const Eigen::Index i = (probe * 13) % phi[l].size();
    NoiseSet pp = phi, pm = phi;
    pp[l][i] += h;
    pm[l][i] -= h;
    const double fd = (loss(V, pp) - loss(V, pm)) / (2.0 * h);
    const double scale = std::max(std::abs(fd), 1e-8);
    CHECK(std::abs(g.noise[l][i] - fd) / scale < 1e-4);
  }
}

TEST_CASE("generator gradient edge cases") {
  const Rig rig = make_rig(39);
  Rng rng(40);
  const StyleMatrix V = sample_style_init(rig.config, rng);
  const NoiseSet phi = sample_noise_init(rig.config, rng);
  const int n = rig.config.output_resolution() * rig.config.output_resolution();

  const LatentGrad zero =
      generator_grad(rig.weights, rig.transform, V, phi, Vector::Zero(n));
  CHECK(zero.style.norm() == 0.0);
  for (const auto& gn : zero.noise) CHECK(gn.norm() == 0.0);

  // A dead noise path (scale 0) yields a zero noise gradient for that layer.
  GeneratorWeights frozen = rig.weights;
  frozen.noise_scale[2] = 0.0;
  Vector upstream(n);
  for (int i = 0; i < n; ++i) upstream[i] = rng.normal();
  const LatentGrad g =
      generator_grad(frozen, rig.transform, V, phi, upstream);
  CHECK(g.noise[2].norm() == 0.0);
  CHECK(g.noise[3].norm() > 0.0);
}

TEST_CASE("latent norm samples are reproducible and whitened") {
  const GeneratorConfig c = small_config();
  const GeneratorWeights w = init_generator(c, 51);
  const TransformParams t = fit_transform(w, 10000, 52);

  const auto a = sample_latent_norm_sq(w, t, 500, 53);
  const auto b = sample_latent_norm_sq(w, t, 500, 53);
  CHECK(a == b);
  for (double v : a) CHECK(v >= 0.0);

  const auto big = sample_latent_norm_sq(w, t, 100000, 54);
  double mean = 0.0;
  for (double v : big) mean += v;
  mean /= static_cast<double>(big.size());
  CHECK(mean == doctest::Approx(double(c.k)).epsilon(0.10));
}

TEST_CASE("weights file round trip") {
  const GeneratorConfig c = small_config();
  const GeneratorWeights w = init_generator(c, 61);
  const std::string path = temp_path("pulsepp_weights_test.lmgw");
  save_weights(w, path);
  const GeneratorWeights r = load_weights(path);
  CHECK(r.config.k == c.k);
  CHECK(r.mapping_w == w.mapping_w);
  CHECK(r.mapping_b == w.mapping_b);
  CHECK(r.const_base == w.const_base);
  CHECK(r.conv == w.conv);
  CHECK(r.style_scale_w == w.style_scale_w);
  CHECK(r.style_scale_b == w.style_scale_b);
  CHECK(r.style_shift_w == w.style_shift_w);
  CHECK(r.style_shift_b == w.style_shift_b);
  CHECK(r.noise_scale == w.noise_scale);
  CHECK(r.head_w == w.head_w);
  CHECK(r.head_b == w.head_b);
  std::filesystem::remove(path);
}

TEST_CASE("weights file corruption is detected") {
  const GeneratorWeights w = init_generator(small_config(), 62);
  const std::string path = temp_path("pulsepp_weights_corrupt.lmgw");
  save_weights(w, path);

  // Truncation.
  {
    std::ifstream in(path, std::ios::binary);
    std::vector<char> bytes((std::istreambuf_iterator<char>(in)),
                            std::istreambuf_iterator<char>());
    bytes.resize(bytes.size() - 9);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  }
  CHECK_THROWS_AS(load_weights(path), std::runtime_error);

  // Wrong magic.
  save_weights(w, path);
  {
    std::fstream f(path, std::ios::binary | std::ios::in | std::ios::out);
    f.seekp(0);
    f.write("XXXX", 4);
  }
  CHECK_THROWS_AS(load_weights(path), std::runtime_error);
  std::filesystem::remove(path);
}
