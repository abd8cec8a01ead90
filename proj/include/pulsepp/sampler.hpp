#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "pulsepp/generator.hpp"
#include "pulsepp/imaging.hpp"
#include "pulsepp/latent_space.hpp"
#include "pulsepp/types.hpp"

namespace pulsepp {

/// Objective variants: pulse_pp is the annulus-projected objective with
/// CROSS and the Gaussian noise log-prior; pulse is the sphere-constrained
/// baseline with GEOCROSS; pulse1/pulse2 each carry one of the two
/// enhancements.
enum class Variant { pulse_pp, pulse, pulse1, pulse2 };

enum class AcceptanceMode { gaussian_morozov, poisson_embedding };

const char* variant_name(Variant v);
Variant variant_from_name(const std::string& name);

struct SamplerConfig {
  Variant variant = Variant::pulse_pp;
  double gamma = 0.01;
  double lambda_c = 0.01;
  double lambda_g = 0.1;
  double lr = 0.4;
  int n_steps = 2000;    // paper-scale runs use 10000
  int restarts = 32;     // T; paper-scale runs use 100
  std::uint64_t seed = 0;
  AcceptanceMode acceptance = AcceptanceMode::gaussian_morozov;
  void validate() const;
};

/// One acquisition: either masked-Fourier k-space data or fan-beam photon
/// counts. The system matrix is shared read-only across restarts.
struct Measurement {
  enum class Kind { fourier, fanbeam };
  Kind kind = Kind::fourier;

  CartesianMask mask;  // fourier
  KSpaceData kspace;

  std::shared_ptr<const SystemMatrix> system;  // fanbeam
  IntensityData intensity;

  Fidelity fidelity(const ObjectImage& fhat) const;
  int sample_count() const;
};

Measurement make_fourier_measurement(CartesianMask mask, KSpaceData data);
Measurement make_fanbeam_measurement(std::shared_ptr<const SystemMatrix> h,
                                     IntensityData data);

// ---------------------------------------------------------------------------
// Optimizer
// ---------------------------------------------------------------------------

struct AdamState {
  Vector m;  // first moment
  Vector v;  // second moment
  long step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// One bias-corrected Adam update, in place.
void adam_step(AdamState& state, Vector& params, const Vector& grad,
               double lr);

// ---------------------------------------------------------------------------
// Objective and constraints
// ---------------------------------------------------------------------------

struct ObjectiveResult {
  double value = 0.0;     // L = J + R
  double fidelity = 0.0;  // J alone
  Matrix grad_style;      // k x L
  NoiseSet grad_noise;
};

ObjectiveResult objective_eval(Variant variant, const StyleMatrix& V,
                               const NoiseSet& phi, const Measurement& data,
                               const GeneratorWeights& weights,
                               const TransformParams& transform,
                               double lambda_c, double lambda_g);

/// pulse_pp / pulse1 project style columns onto the annulus; pulse / pulse2
/// project them onto the sqrt(k) sphere. Noise vectors are projected onto
/// their sqrt(p_l) spheres only for pulse and pulse1.
void constraint_step(Variant variant, StyleMatrix& V, NoiseSet& phi,
                     const AnnulusSpec& annulus);

// ---------------------------------------------------------------------------
// Restarts
// ---------------------------------------------------------------------------

struct RestartResult {
  StyleMatrix best_style;
  NoiseSet best_noise;
  double best_objective = 0.0;
  double fidelity = 0.0;  // J at the best state
  bool accepted = false;
  bool failed = false;  // non-finite objective aborted this restart
  long best_step = 0;
  double wall_seconds = 0.0;
  std::uint64_t seed = 0;
};

/// One randomized restart of the projected-Adam loop: standard normal
/// initialization, projection, then n_steps of Adam followed by projection,
/// tracking the best objective seen. Adam moments persist across
/// projections.
RestartResult run_restart(const SamplerConfig& config, const Measurement& data,
                          const GeneratorWeights& weights,
                          const TransformParams& transform,
                          const AnnulusSpec& annulus, double epsilon,
                          std::uint64_t restart_seed,
                          std::vector<double>* best_trace = nullptr);

// ---------------------------------------------------------------------------
// Acceptance
// ---------------------------------------------------------------------------

/// gaussian_morozov: epsilon = M/2 with the realized sample count.
/// poisson_embedding: epsilon = J(g, f_tilde) where f_tilde embeds the true
/// object into the generator range (virtual-trial setting; f_true required).
double acceptance_threshold(const SamplerConfig& config,
                            const Measurement& data,
                            const ObjectImage* f_true,
                            const GeneratorWeights& weights,
                            const TransformParams& transform,
                            const AnnulusSpec& annulus);

struct EmbedConfig {
  double lambda_c = 0.005;
  double lr = 0.4;
  int n_steps = 2000;
  std::uint64_t seed = 0;
};

/// Embedding hyperparameters derived from the sampler ones (lambda_c
/// halved).
EmbedConfig make_embed_config(const SamplerConfig& config);

struct EmbedResult {
  StyleMatrix style;
  NoiseSet noise;
  ObjectImage image;       // f_tilde
  double residual_sq = 0;  // ||f - f_tilde||^2
  double objective = 0;    // best penalized objective over the loop
};

/// Euclidean projection of an image onto the generator range by the same
/// projected-Adam loop, with annulus constraints, CROSS and the noise
/// log-prior.
EmbedResult embed_object(const ObjectImage& f, const GeneratorWeights& weights,
                         const TransformParams& transform,
                         const AnnulusSpec& annulus, const EmbedConfig& config);

// ---------------------------------------------------------------------------
// Empirical sampling
// ---------------------------------------------------------------------------

struct SolutionEntry {
  int restart_index = 0;
  std::uint64_t seed = 0;
  ObjectImage image;
  StyleMatrix style;
  NoiseSet noise;
  double objective = 0.0;
  double fidelity = 0.0;
};

struct RestartRecord {
  int index = 0;
  std::uint64_t seed = 0;
  double best_objective = 0.0;
  double fidelity = 0.0;
  bool accepted = false;
  bool failed = false;
  long best_step = 0;
};

struct SolutionSet {
  double epsilon = 0.0;
  std::vector<SolutionEntry> accepted;   // in restart order
  std::vector<RestartRecord> restarts;   // all T restarts
};

/// T restarts with counter-derived seeds, optionally across worker threads;
/// results are assembled in restart order so the outcome is independent of
/// scheduling. Fidelities are re-evaluated from the returned states before
/// acceptance. Failed restarts are recorded, never fatal.
SolutionSet empirical_sample(const SamplerConfig& config,
                             const Measurement& data,
                             const GeneratorWeights& weights,
                             const TransformParams& transform,
                             const AnnulusSpec& annulus, double epsilon,
                             int workers);

}  // namespace pulsepp
