#include <doctest.h>

#include <cmath>
#include <limits>

#include "pulsepp/random.hpp"
#include "pulsepp/sampler.hpp"

using namespace pulsepp;

namespace {

struct Bench {
  GeneratorConfig gconf;
  GeneratorWeights weights;
  TransformParams transform;
  AnnulusSpec annulus;
  Measurement data;
  ObjectImage truth;
};

// Small in-range benchmark: 8x8 generator, mildly undersampled k-space.
// phi_scale shrinks the target's noise detail; add_noise = false keeps the
// measurement exact (sigma still weights the fidelity).
Bench make_bench(double R = 2.0, double sigma = 0.05, std::uint64_t seed = 7,
                 double phi_scale = 1.0, bool add_noise = true) {
  Bench b;
  b.gconf.k = 12;
  b.gconf.L = 4;
  b.gconf.channels = 5;
  b.gconf.mapping_depth = 3;
  b.weights = init_generator(b.gconf, seed);
  b.transform = fit_transform(b.weights, 2000, seed + 1);

  const auto norm_sq =
      sample_latent_norm_sq(b.weights, b.transform, 20000, seed + 2);
  std::vector<double> norms(norm_sq.size());
  for (std::size_t i = 0; i < norm_sq.size(); ++i)
    norms[i] = std::sqrt(norm_sq[i]);
  b.annulus = calibrate_annulus(ecdf_build(norms), 0.01);

  Rng rng(seed + 3);
  Vector z(b.gconf.k);
  for (int i = 0; i < b.gconf.k; ++i) z[i] = rng.normal();
  const Vector v = transform_forward(b.transform,
                                     mapping_forward(b.weights, z));
  StyleMatrix V(b.gconf.k, b.gconf.L);
  for (int c = 0; c < b.gconf.L; ++c) V.col(c) = v;
  NoiseSet phi = sample_noise_init(b.gconf, rng);
  for (auto& p : phi) p *= phi_scale;
  b.truth = synthesize(b.weights, b.transform, V, phi);

  const int res = b.gconf.output_resolution();
  CartesianMask mask = make_cartesian_mask(res, res, R, 0.1, seed + 4);
  const ComplexVector clean = fourier_forward(b.truth, mask);
  KSpaceData data;
  if (add_noise) {
    data = add_complex_gaussian(clean, sigma, seed + 5);
  } else {
    data.samples = clean;
  }
  data.sigma = sigma;
  b.data = make_fourier_measurement(std::move(mask), std::move(data));
  return b;
}

SamplerConfig bench_config(Variant variant, int n_steps, int restarts,
                           std::uint64_t seed) {
  SamplerConfig c;
  c.variant = variant;
  c.gamma = 0.01;
  c.lambda_c = 0.01;
  c.lambda_g = 0.1;
  c.lr = 0.4;
  c.n_steps = n_steps;
  c.restarts = restarts;
  c.seed = seed;
  return c;
}

bool same_noise(const NoiseSet& a, const NoiseSet& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (!(a[i] == b[i])) return false;
  return true;
}

}  // namespace

TEST_CASE("adam handles zero gradients and is deterministic") {
  AdamState st;
  Vector p = Vector::Constant(3, 1.5);
  const Vector p0 = p;
  adam_step(st, p, Vector::Zero(3), 0.1);
  CHECK(p == p0);
  CHECK(st.step == 1);

  AdamState s1, s2;
  Vector a = Vector::Constant(2, 1.0), b = Vector::Constant(2, 1.0);
  Vector g(2);
  for (int i = 0; i < 50; ++i) {
    g << a[0] * 2.0, a[1] * 4.0;
    adam_step(s1, a, g, 0.05);
    g << b[0] * 2.0, b[1] * 4.0;
    adam_step(s2, b, g, 0.05);
  }
  CHECK(a == b);

  CHECK_THROWS_AS(adam_step(s1, a, Vector::Zero(5), 0.1),
                  std::invalid_argument);
}

TEST_CASE("adam minimizes a quadratic") {
  AdamState st;
  Vector x = Vector::Constant(1, 1.0);
  for (int i = 0; i < 200; ++i) {
    const Vector g = 2.0 * x;
    adam_step(st, x, g, 0.1);
  }
  CHECK(std::abs(x[0]) < 1e-2);
}

TEST_CASE("objective variants differ by their penalty terms") {
  const Bench b = make_bench();
  Rng rng(17);
  StyleMatrix V = sample_style_init(b.gconf, rng);
  NoiseSet phi = sample_noise_init(b.gconf, rng);

  // pulse_pp minus pulse1 is exactly the noise log prior.
  const auto pp = objective_eval(Variant::pulse_pp, V, phi, b.data, b.weights,
                                 b.transform, 0.01, 0.1);
  const auto p1 = objective_eval(Variant::pulse1, V, phi, b.data, b.weights,
                                 b.transform, 0.01, 0.1);
  const double prior = noise_log_prior(phi).value;
  CHECK(pp.value - p1.value == doctest::Approx(prior).epsilon(1e-12));
  CHECK(pp.fidelity == p1.fidelity);

  // On the pulse-feasible set, pulse2 equals pulse plus the same prior.
  constraint_step(Variant::pulse, V, phi, b.annulus);
  const auto pu = objective_eval(Variant::pulse, V, phi, b.data, b.weights,
                                 b.transform, 0.01, 0.1);
  const auto p2 = objective_eval(Variant::pulse2, V, phi, b.data, b.weights,
                                 b.transform, 0.01, 0.1);
  const double prior2 = noise_log_prior(phi).value;
  CHECK(p2.value - pu.value == doctest::Approx(prior2).epsilon(1e-12));

  // With lambda_c = 0 and zero noise, pulse_pp reduces to the fidelity.
  NoiseSet zero = zero_noise_set(b.gconf);
  const auto bare = objective_eval(Variant::pulse_pp, V, zero, b.data,
                                   b.weights, b.transform, 0.0, 0.1);
  CHECK(bare.value == bare.fidelity);
}

TEST_CASE("objective gradient matches finite differences") {
  const Bench b = make_bench();
  Rng rng(19);
  const StyleMatrix V = sample_style_init(b.gconf, rng);
  const NoiseSet phi = sample_noise_init(b.gconf, rng);
  const double h = 1e-5;

  for (Variant variant : {Variant::pulse_pp, Variant::pulse2}) {
    const auto at = [&](const StyleMatrix& v, const NoiseSet& p) {
      return objective_eval(variant, v, p, b.data, b.weights, b.transform,
                            0.01, 0.1)
          .value;
    };
    const auto full = objective_eval(variant, V, phi, b.data, b.weights,
                                     b.transform, 0.01, 0.1);
    for (int probe = 0; probe < 6; ++probe) {
      const int r = (probe * 5) % b.gconf.k;
      const int c = probe % b.gconf.L;
      StyleMatrix vp = V, vm = V;
      vp(r, c) += h;
      vm(r, c) -= h;
      const double fd = (at(vp, phi) - at(vm, phi)) / (2.0 * h);
      const double scale = std::max(std::abs(fd), 1e-8);
      CHECK(std::abs(full.grad_style(r, c) - fd) / scale < 1e-4);
    }
    for (int probe = 0; probe < 6; ++probe) {
      const std::size_t l = probe % phi.size();
      const Eigen::Index i = (probe * 11) % phi[l].size();
      NoiseSet pp = phi, pm = phi;
      pp[l][i] += h;
      pm[l][i] -= h;
      const double fd = (at(V, pp) - at(V, pm)) / (2.0 * h);
      const double scale = std::max(std::abs(fd), 1e-8);
      CHECK(std::abs(full.grad_noise[l][i] - fd) / scale < 1e-4);
    }
  }
}

TEST_CASE("constraint step enforces the variant geometry") {
  const Bench b = make_bench();
  Rng rng(23);
  const double radius = std::sqrt(double(b.gconf.k));

  StyleMatrix V = 3.0 * sample_style_init(b.gconf, rng);
  NoiseSet phi = sample_noise_init(b.gconf, rng);
  StyleMatrix Vp = V;
  NoiseSet php = phi;
  constraint_step(Variant::pulse_pp, Vp, php, b.annulus);
  for (int c = 0; c < b.gconf.L; ++c) {
    CHECK(Vp.col(c).norm() >= b.annulus.delta_min);
    CHECK(Vp.col(c).norm() <= b.annulus.delta_max);
  }
  CHECK(same_noise(php, phi));  // pulse_pp leaves the noise unconstrained

  StyleMatrix Vs = V;
  NoiseSet phs = phi;
  constraint_step(Variant::pulse, Vs, phs, b.annulus);
  for (int c = 0; c < b.gconf.L; ++c)
    CHECK(std::abs(Vs.col(c).norm() - radius) < 1e-10);
  for (const auto& p : phs)
    CHECK(std::abs(p.norm() - std::sqrt(double(p.size()))) < 1e-10);

  // Interior states under pulse_pp pass through unchanged.
  StyleMatrix Vi = Vp;
  NoiseSet phi2 = phi;
  constraint_step(Variant::pulse_pp, Vi, phi2, b.annulus);
  CHECK(Vi == Vp);
}

TEST_CASE("restart with zero steps returns the projected initialization") {
  const Bench b = make_bench();
  SamplerConfig c = bench_config(Variant::pulse_pp, 0, 1, 31);
  const RestartResult r = run_restart(c, b.data, b.weights, b.transform,
                                      b.annulus, 1e30, 777, nullptr);
  REQUIRE_FALSE(r.failed);
  CHECK(r.best_step == 0);

  Rng rng(777);
  StyleMatrix V = sample_style_init(b.gconf, rng);
  NoiseSet phi = sample_noise_init(b.gconf, rng);
  constraint_step(Variant::pulse_pp, V, phi, b.annulus);
  CHECK(r.best_style == V);
  CHECK(same_noise(r.best_noise, phi));
  CHECK(r.accepted);  // epsilon effectively infinite
}

TEST_CASE("best objective trace is non-increasing") {
  const Bench b = make_bench();
  SamplerConfig c = bench_config(Variant::pulse_pp, 120, 1, 37);
  std::vector<double> trace;
  const RestartResult r = run_restart(c, b.data, b.weights, b.transform,
                                      b.annulus, 1e30, 1234, &trace);
  REQUIRE_FALSE(r.failed);
  REQUIRE(trace.size() == 121);
  for (std::size_t i = 1; i < trace.size(); ++i)
    CHECK(trace[i] <= trace[i - 1]);
  CHECK(r.best_objective == trace.back());
  CHECK(r.accepted == (r.fidelity <= 1e30));
}

TEST_CASE("restarts recover an in-range target from full data") {
  // Fully sampled, no measurement noise, modest target noise detail.
  const Bench b = make_bench(1.0, 0.05, 41, 0.1, false);
  SamplerConfig c = bench_config(Variant::pulse_pp, 800, 1, 43);

  double init_j = 0.0;
  {
    Rng rng(900);
    StyleMatrix V = sample_style_init(b.gconf, rng);
    NoiseSet phi = sample_noise_init(b.gconf, rng);
    constraint_step(Variant::pulse_pp, V, phi, b.annulus);
    init_j = objective_eval(Variant::pulse_pp, V, phi, b.data, b.weights,
                            b.transform, c.lambda_c, c.lambda_g)
                 .fidelity;
  }
  double best_j = std::numeric_limits<double>::infinity();
  for (std::uint64_t seed : {900ull, 901ull, 902ull}) {
    const RestartResult r = run_restart(c, b.data, b.weights, b.transform,
                                        b.annulus, 1e30, seed, nullptr);
    REQUIRE_FALSE(r.failed);
    best_j = std::min(best_j, r.fidelity);
  }
  CHECK(best_j < 1e-3 * init_j);
}

TEST_CASE("morozov acceptance threshold and pairing rules") {
  const Bench b = make_bench();
  SamplerConfig c = bench_config(Variant::pulse_pp, 10, 1, 47);
  c.acceptance = AcceptanceMode::gaussian_morozov;
  const double eps = acceptance_threshold(c, b.data, nullptr, b.weights,
                                          b.transform, b.annulus);
  CHECK(eps == 0.5 * b.data.sample_count());

  c.acceptance = AcceptanceMode::poisson_embedding;
  CHECK_THROWS_AS(acceptance_threshold(c, b.data, &b.truth, b.weights,
                                       b.transform, b.annulus),
                  std::invalid_argument);
}

TEST_CASE("poisson acceptance threshold embeds the true object") {
  const Bench b = make_bench();
  FanBeamGeometry geom;
  geom.n_pix = b.gconf.output_resolution();
  geom.pixel_pitch_mm = 0.82;
  geom.source_to_iso_mm = 30.0;
  geom.iso_to_det_mm = 12.0;
  geom.det_count = 16;
  geom.det_pitch_mm = 0.7;
  geom.view_angles_deg = linspace_angles(0.0, 119.0, 12);
  auto h = std::make_shared<SystemMatrix>(build_fanbeam(geom));
  const Vector mean = xray_intensity(*h, b.truth, 1000.0, 0.063);
  Measurement ct = make_fanbeam_measurement(
      h, add_poisson(mean, 1000.0, 0.063, 51));

  SamplerConfig c = bench_config(Variant::pulse_pp, 150, 1, 53);
  c.acceptance = AcceptanceMode::poisson_embedding;
  CHECK_THROWS_AS(acceptance_threshold(c, ct, nullptr, b.weights, b.transform,
                                       b.annulus),
                  std::invalid_argument);
  const double eps = acceptance_threshold(c, ct, &b.truth, b.weights,
                                          b.transform, b.annulus);
  CHECK(eps > 0.0);
  CHECK(std::isfinite(eps));
}

TEST_CASE("self-embedding reaches a small residual") {
  const Bench b = make_bench(2.0, 0.05, 57, 0.1);
  SamplerConfig c = bench_config(Variant::pulse_pp, 1500, 1, 59);
  const EmbedConfig ec = make_embed_config(c);
  CHECK(ec.lambda_c == doctest::Approx(0.5 * c.lambda_c));

  const EmbedResult e =
      embed_object(b.truth, b.weights, b.transform, b.annulus, ec);
  CHECK(e.residual_sq / b.truth.size() < 1e-4);
  CHECK(e.image.width == b.truth.width);

  // Best-so-far: a longer run of the same seeded loop never ends worse.
  EmbedConfig shorter = ec;
  shorter.n_steps = 80;
  const EmbedResult e0 =
      embed_object(b.truth, b.weights, b.transform, b.annulus, shorter);
  CHECK(e.objective <= e0.objective);

  // A flat out-of-range image still embeds without failure.
  ObjectImage flat(b.truth.width, b.truth.height);
  flat.pixels.setConstant(0.5);
  EmbedConfig quick = ec;
  quick.n_steps = 60;
  const EmbedResult ef =
      embed_object(flat, b.weights, b.transform, b.annulus, quick);
  CHECK(std::isfinite(ef.residual_sq));
  CHECK(ef.residual_sq > 0.0);
}

TEST_CASE("empirical sampling basics") {
  const Bench b = make_bench();
  SamplerConfig c = bench_config(Variant::pulse_pp, 40, 1, 61);
  const SolutionSet one =
      empirical_sample(c, b.data, b.weights, b.transform, b.annulus,
                       std::numeric_limits<double>::infinity(), 1);
  CHECK(one.accepted.size() == 1);
  CHECK(one.restarts.size() == 1);

  // Every accepted member satisfies the tolerance with its re-evaluated
  // fidelity.
  SamplerConfig c2 = bench_config(Variant::pulse_pp, 150, 6, 67);
  const double eps = 0.5 * b.data.sample_count();
  const SolutionSet set = empirical_sample(c2, b.data, b.weights, b.transform,
                                           b.annulus, eps, 2);
  for (const auto& e : set.accepted) {
    CHECK(e.fidelity <= eps);
    const double j = b.data.fidelity(e.image).value;
    CHECK(j == doctest::Approx(e.fidelity).epsilon(1e-12));
  }
}

TEST_CASE("empirical sampling is deterministic for any worker count") {
  const Bench b = make_bench();
  SamplerConfig c = bench_config(Variant::pulse_pp, 60, 5, 71);
  const double eps = 0.5 * b.data.sample_count();
  const SolutionSet s1 = empirical_sample(c, b.data, b.weights, b.transform,
                                          b.annulus, eps, 1);
  const SolutionSet s2 = empirical_sample(c, b.data, b.weights, b.transform,
                                          b.annulus, eps, 2);
  const SolutionSet s4 = empirical_sample(c, b.data, b.weights, b.transform,
                                          b.annulus, eps, 4);
  REQUIRE(s1.restarts.size() == s2.restarts.size());
  REQUIRE(s1.accepted.size() == s2.accepted.size());
  REQUIRE(s1.accepted.size() == s4.accepted.size());
  for (std::size_t i = 0; i < s1.restarts.size(); ++i) {
    CHECK(s1.restarts[i].seed == s2.restarts[i].seed);
    CHECK(s1.restarts[i].fidelity == s2.restarts[i].fidelity);
    CHECK(s1.restarts[i].accepted == s2.restarts[i].accepted);
  }
  for (std::size_t i = 0; i < s1.accepted.size(); ++i) {
    CHECK(s1.accepted[i].image.pixels == s2.accepted[i].image.pixels);
    CHECK(s1.accepted[i].image.pixels == s4.accepted[i].image.pixels);
  }
}
