#include "pulsepp/sampler.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <limits>
#include <thread>

#include "pulsepp/random.hpp"

namespace pulsepp {

const char* variant_name(Variant v) {
  switch (v) {
    case Variant::pulse_pp: return "pulse_pp";
    case Variant::pulse: return "pulse";
    case Variant::pulse1: return "pulse1";
    case Variant::pulse2: return "pulse2";
  }
  return "?";
}

Variant variant_from_name(const std::string& name) {
  if (name == "pulse_pp") return Variant::pulse_pp;
  if (name == "pulse") return Variant::pulse;
  if (name == "pulse1") return Variant::pulse1;
  if (name == "pulse2") return Variant::pulse2;
  throw std::invalid_argument("unknown sampler variant: " + name);
}

void SamplerConfig::validate() const {
  require(lr > 0.0, "sampler config: lr must be > 0");
  require(n_steps >= 1, "sampler config: n_steps must be >= 1");
  require(restarts >= 1, "sampler config: restarts must be >= 1");
  require(lambda_c >= 0.0 && lambda_g >= 0.0,
          "sampler config: penalty weights must be >= 0");
  require(gamma > 0.0 && gamma < 1.0,
          "sampler config: gamma must lie in (0, 1)");
}

Fidelity Measurement::fidelity(const ObjectImage& fhat) const {
  if (kind == Kind::fourier) return gaussian_fidelity(kspace, fhat, mask);
  return kl_fidelity(intensity, fhat, *system);
}

int Measurement::sample_count() const {
  if (kind == Kind::fourier) return mask.samples();
  return static_cast<int>(intensity.counts.size());
}

Measurement make_fourier_measurement(CartesianMask mask, KSpaceData data) {
  require(data.samples.size() == mask.samples(),
          "fourier measurement: data length mismatch");
  Measurement m;
  m.kind = Measurement::Kind::fourier;
  m.mask = std::move(mask);
  m.kspace = std::move(data);
  return m;
}

Measurement make_fanbeam_measurement(std::shared_ptr<const SystemMatrix> h,
                                     IntensityData data) {
  require(h != nullptr, "fanbeam measurement: missing system matrix");
  require(data.counts.size() == h->rows(),
          "fanbeam measurement: data length mismatch");
  Measurement m;
  m.kind = Measurement::Kind::fanbeam;
  m.system = std::move(h);
  m.intensity = std::move(data);
  return m;
}

void adam_step(AdamState& state, Vector& params, const Vector& grad,
               double lr) {
  require(params.size() == grad.size(), "adam_step: shape mismatch");
  if (state.m.size() == 0) {
    state.m = Vector::Zero(params.size());
    state.v = Vector::Zero(params.size());
  }
  require(state.m.size() == params.size(), "adam_step: state shape mismatch");
  state.step += 1;
  state.m = state.beta1 * state.m + (1.0 - state.beta1) * grad;
  state.v = state.beta2 * state.v + (1.0 - state.beta2) * grad.cwiseProduct(grad);
  const double c1 = 1.0 - std::pow(state.beta1, double(state.step));
  const double c2 = 1.0 - std::pow(state.beta2, double(state.step));
  params.array() -= lr * (state.m.array() / c1) /
                    ((state.v.array() / c2).sqrt() + state.eps);
}

ObjectiveResult objective_eval(Variant variant, const StyleMatrix& V,
                               const NoiseSet& phi, const Measurement& data,
                               const GeneratorWeights& weights,
                               const TransformParams& transform,
                               double lambda_c, double lambda_g) {
  const SynthesisCache cache = synthesize_cached(weights, transform, V, phi);
  const Fidelity fid = data.fidelity(cache.image);
  LatentGrad g = synthesize_backward(weights, transform, cache, fid.grad);

  ObjectiveResult out;
  out.fidelity = fid.value;
  out.value = fid.value;
  out.grad_style = std::move(g.style);
  out.grad_noise = std::move(g.noise);

  const double radius = std::sqrt(static_cast<double>(V.rows()));
  switch (variant) {
    case Variant::pulse_pp: {
      const StylePenalty cp = cross_penalty(V);
      const NoisePenalty np = noise_log_prior(phi);
      out.value += lambda_c * cp.value + np.value;
      out.grad_style += lambda_c * cp.grad;
      for (std::size_t l = 0; l < phi.size(); ++l)
        out.grad_noise[l] += np.grad[l];
      break;
    }
    case Variant::pulse: {
      const StylePenalty gp = geocross_penalty(V, radius);
      out.value += lambda_g * gp.value;
      out.grad_style += lambda_g * gp.grad;
      break;
    }
    case Variant::pulse1: {
      const StylePenalty cp = cross_penalty(V);
      out.value += lambda_c * cp.value;
      out.grad_style += lambda_c * cp.grad;
      break;
    }
    case Variant::pulse2: {
      const StylePenalty gp = geocross_penalty(V, radius);
      const NoisePenalty np = noise_log_prior(phi);
      out.value += lambda_g * gp.value + np.value;
      out.grad_style += lambda_g * gp.grad;
      for (std::size_t l = 0; l < phi.size(); ++l)
        out.grad_noise[l] += np.grad[l];
      break;
    }
  }
  return out;
}

void constraint_step(Variant variant, StyleMatrix& V, NoiseSet& phi,
                     const AnnulusSpec& annulus) {
  const bool annular =
      variant == Variant::pulse_pp || variant == Variant::pulse1;
  const double radius = std::sqrt(static_cast<double>(V.rows()));
  for (Eigen::Index c = 0; c < V.cols(); ++c) {
    if (annular) {
      const Vector p = project_annulus(V.col(c), annulus);
      V.col(c) = p;
    } else {
      if (V.col(c).norm() == 0.0) {
        V.col(c).setZero();
        V(0, c) = radius;  // same convention as the annulus zero case
      } else {
        const Vector p = project_sphere(V.col(c), radius);
        V.col(c) = p;
      }
    }
  }
  const bool phi_spheres =
      variant == Variant::pulse || variant == Variant::pulse1;
  if (phi_spheres) {
    for (auto& v : phi) {
      const double r = std::sqrt(static_cast<double>(v.size()));
      if (v.norm() == 0.0)
        v[0] = r;
      else
        v = project_sphere(v, r);
    }
  }
}

namespace {

Eigen::Index packed_size(const StyleMatrix& V, const NoiseSet& phi) {
  Eigen::Index n = V.size();
  for (const auto& p : phi) n += p.size();
  return n;
}

void pack(const StyleMatrix& V, const NoiseSet& phi, Vector& out) {
  Eigen::Index at = 0;
  out.segment(at, V.size()) =
      Eigen::Map<const Vector>(V.data(), V.size());
  at += V.size();
  for (const auto& p : phi) {
    out.segment(at, p.size()) = p;
    at += p.size();
  }
}

void unpack(const Vector& in, StyleMatrix& V, NoiseSet& phi) {
  Eigen::Index at = 0;
  Eigen::Map<Vector>(V.data(), V.size()) = in.segment(at, V.size());
  at += V.size();
  for (auto& p : phi) {
    p = in.segment(at, p.size());
    at += p.size();
  }
}

bool finite(const ObjectiveResult& r) {
  if (!std::isfinite(r.value)) return false;
  if (!r.grad_style.allFinite()) return false;
  for (const auto& g : r.grad_noise)
    if (!g.allFinite()) return false;
  return true;
}

struct InnerLoopResult {
  StyleMatrix best_style;
  NoiseSet best_noise;
  double best_objective = std::numeric_limits<double>::infinity();
  double best_fidelity = std::numeric_limits<double>::infinity();
  long best_step = 0;
  bool failed = false;
};

// Shared core of run_restart and embed_object: standard normal init,
// projection, then n_steps of (Adam, projection), tracking the best
// objective value seen.
template <typename Objective>
InnerLoopResult projected_adam_loop(const GeneratorConfig& gconf,
                                    Variant variant,
                                    const AnnulusSpec& annulus,
                                    const Objective& objective, double lr,
                                    int n_steps, std::uint64_t seed,
                                    std::vector<double>* best_trace) {
  Rng rng(seed);
  StyleMatrix V = sample_style_init(gconf, rng);
  NoiseSet phi = sample_noise_init(gconf, rng);
  constraint_step(variant, V, phi, annulus);

  InnerLoopResult res;
  ObjectiveResult eval = objective(V, phi);
  if (!finite(eval)) {
    res.failed = true;
    return res;
  }
  res.best_style = V;
  res.best_noise = phi;
  res.best_objective = eval.value;
  res.best_fidelity = eval.fidelity;
  res.best_step = 0;
  if (best_trace) best_trace->push_back(res.best_objective);

  AdamState adam;
  Vector params(packed_size(V, phi));
  Vector grads(params.size());
  for (int j = 1; j <= n_steps; ++j) {
    pack(V, phi, params);
    pack(eval.grad_style, eval.grad_noise, grads);
    adam_step(adam, params, grads, lr);
    unpack(params, V, phi);
    constraint_step(variant, V, phi, annulus);
    eval = objective(V, phi);
    if (!finite(eval)) {
      res.failed = true;
      return res;
    }
    if (eval.value < res.best_objective) {
      res.best_style = V;
      res.best_noise = phi;
      res.best_objective = eval.value;
      res.best_fidelity = eval.fidelity;
      res.best_step = j;
    }
    if (best_trace) best_trace->push_back(res.best_objective);
  }
  return res;
}

}  // namespace

RestartResult run_restart(const SamplerConfig& config, const Measurement& data,
                          const GeneratorWeights& weights,
                          const TransformParams& transform,
                          const AnnulusSpec& annulus, double epsilon,
                          std::uint64_t restart_seed,
                          std::vector<double>* best_trace) {
  // n_steps == 0 is allowed here: the result is the projected
  // initialization. Config-level validation still demands >= 1.
  require(config.lr > 0.0 && config.n_steps >= 0, "run_restart: bad config");
  const auto t0 = std::chrono::steady_clock::now();
  const auto objective = [&](const StyleMatrix& V, const NoiseSet& phi) {
    return objective_eval(config.variant, V, phi, data, weights, transform,
                          config.lambda_c, config.lambda_g);
  };
  InnerLoopResult inner = projected_adam_loop(
      weights.config, config.variant, annulus, objective, config.lr,
      config.n_steps, restart_seed, best_trace);

  RestartResult out;
  out.seed = restart_seed;
  out.failed = inner.failed;
  if (!inner.failed) {
    out.best_style = std::move(inner.best_style);
    out.best_noise = std::move(inner.best_noise);
    out.best_objective = inner.best_objective;
    out.fidelity = inner.best_fidelity;
    out.best_step = inner.best_step;
    out.accepted = out.fidelity <= epsilon;
  }
  out.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  return out;
}

EmbedConfig make_embed_config(const SamplerConfig& config) {
  EmbedConfig e;
  e.lambda_c = 0.5 * config.lambda_c;
  e.lr = config.lr;
  e.n_steps = config.n_steps;
  e.seed = derive_seed(config.seed, 0x456d626564ull);  // embedding stream
  return e;
}

EmbedResult embed_object(const ObjectImage& f, const GeneratorWeights& weights,
                         const TransformParams& transform,
                         const AnnulusSpec& annulus,
                         const EmbedConfig& config) {
  require(f.width == weights.config.output_resolution() &&
              f.height == weights.config.output_resolution(),
          "embed_object: image size does not match the generator");
  const auto objective = [&](const StyleMatrix& V, const NoiseSet& phi) {
    const SynthesisCache cache = synthesize_cached(weights, transform, V, phi);
    const Vector resid = cache.image.pixels - f.pixels;
    LatentGrad g = synthesize_backward(weights, transform, cache, resid);
    const StylePenalty cp = cross_penalty(V);
    const NoisePenalty np = noise_log_prior(phi);
    ObjectiveResult out;
    out.fidelity = 0.5 * resid.squaredNorm();
    out.value = out.fidelity + config.lambda_c * cp.value + np.value;
    out.grad_style = std::move(g.style) + config.lambda_c * cp.grad;
    out.grad_noise = std::move(g.noise);
    for (std::size_t l = 0; l < phi.size(); ++l)
      out.grad_noise[l] += np.grad[l];
    return out;
  };
  InnerLoopResult inner = projected_adam_loop(
      weights.config, Variant::pulse_pp, annulus, objective, config.lr,
      config.n_steps, config.seed, nullptr);
  if (inner.failed)
    throw std::runtime_error("embed_object: non-finite objective");

  EmbedResult out;
  out.style = std::move(inner.best_style);
  out.noise = std::move(inner.best_noise);
  out.image = synthesize(weights, transform, out.style, out.noise);
  out.residual_sq = (out.image.pixels - f.pixels).squaredNorm();
  out.objective = inner.best_objective;
  return out;
}

double acceptance_threshold(const SamplerConfig& config,
                            const Measurement& data,
                            const ObjectImage* f_true,
                            const GeneratorWeights& weights,
                            const TransformParams& transform,
                            const AnnulusSpec& annulus) {
  if (config.acceptance == AcceptanceMode::gaussian_morozov) {
    require(data.kind == Measurement::Kind::fourier,
            "acceptance_threshold: gaussian_morozov requires k-space data");
    return 0.5 * static_cast<double>(data.sample_count());
  }
  require(data.kind == Measurement::Kind::fanbeam,
          "acceptance_threshold: poisson_embedding requires count data");
  require(f_true != nullptr,
          "acceptance_threshold: poisson_embedding requires the true object");
  const EmbedResult emb = embed_object(*f_true, weights, transform, annulus,
                                       make_embed_config(config));
  return data.fidelity(emb.image).value;
}

SolutionSet empirical_sample(const SamplerConfig& config,
                             const Measurement& data,
                             const GeneratorWeights& weights,
                             const TransformParams& transform,
                             const AnnulusSpec& annulus, double epsilon,
                             int workers) {
  config.validate();
  const int T = config.restarts;
  std::vector<RestartResult> results(static_cast<std::size_t>(T));
  std::atomic<int> next{0};
  const auto worker = [&]() {
    for (;;) {
      const int i = next.fetch_add(1);
      if (i >= T) return;
      const std::uint64_t seed =
          derive_seed(config.seed, static_cast<std::uint64_t>(i));
      try {
        results[static_cast<std::size_t>(i)] =
            run_restart(config, data, weights, transform, annulus, epsilon,
                        seed, nullptr);
      } catch (const std::exception&) {
        results[static_cast<std::size_t>(i)].failed = true;
        results[static_cast<std::size_t>(i)].seed = seed;
      }
    }
  };
  const int n_threads = std::max(1, std::min(workers, T));
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(n_threads));
    for (int i = 0; i < n_threads; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  SolutionSet set;
  set.epsilon = epsilon;
  for (int i = 0; i < T; ++i) {
    const RestartResult& r = results[static_cast<std::size_t>(i)];
    RestartRecord rec;
    rec.index = i;
    rec.seed = r.seed;
    rec.failed = r.failed;
    if (!r.failed) {
      // Re-evaluate the fidelity of the returned state before acceptance.
      const ObjectImage image =
          synthesize(weights, transform, r.best_style, r.best_noise);
      const double j = data.fidelity(image).value;
      rec.best_objective = r.best_objective;
      rec.fidelity = j;
      rec.best_step = r.best_step;
      rec.accepted = j <= epsilon;
      if (rec.accepted) {
        SolutionEntry e;
        e.restart_index = i;
        e.seed = r.seed;
        e.image = image;
        e.style = r.best_style;
        e.noise = r.best_noise;
        e.objective = r.best_objective;
        e.fidelity = j;
        set.accepted.push_back(std::move(e));
      }
    }
    set.restarts.push_back(rec);
  }
  return set;
}

}  // namespace pulsepp
