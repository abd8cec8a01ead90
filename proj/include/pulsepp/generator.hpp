#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "pulsepp/random.hpp"
#include "pulsepp/types.hpp"

namespace pulsepp {

/// Architecture of the desk-scale style-based generator: a fully connected
/// mapping network, and a synthesis stack of L layers (two per resolution
/// level, 4 -> 4*2^(L/2-1) pixels per side) with per-layer style modulation
/// and additive scaled noise.
struct GeneratorConfig {
  int k = 64;              // latent dimension
  int L = 8;               // synthesis layers; even, >= 2
  int channels = 8;        // feature channels per synthesis layer
  int mapping_depth = 4;   // fully connected mapping layers
  double leaky_slope = 0.2;

  int levels() const { return (L + 1) / 2; }
  int output_resolution() const { return 4 << (levels() - 1); }
  void validate() const;
};

/// p_l = 4^(1 + ceil(l/2)): the flattened spatial grid of layer l.
int noise_dim(int layer);
std::vector<int> noise_dims(int L);
int layer_resolution(int layer);

struct GeneratorWeights {
  GeneratorConfig config;
  std::vector<Matrix> mapping_w;     // mapping_depth x (k x k)
  std::vector<Vector> mapping_b;     // mapping_depth x k
  Vector const_base;                 // channels * 16, the learned 4x4 input
  std::vector<Vector> conv;          // L x (C*C*9), [(co*C+ci)*9 + dy*3+dx]
  std::vector<Matrix> style_scale_w; // L x (C x k)
  std::vector<Vector> style_scale_b; // L x C
  std::vector<Matrix> style_shift_w; // L x (C x k)
  std::vector<Vector> style_shift_b; // L x C
  Vector noise_scale;                // L
  Vector head_w;                     // C
  double head_b = 0.0;
};

/// Leaky-ReLU followed by affine whitening; maps the intermediate latent
/// space onto coordinates with approximately zero mean and unit covariance.
struct TransformParams {
  double leaky_slope = 0.2;
  Vector mean;      // k
  Matrix whiten;    // k x k symmetric, inverse square root of covariance
  Matrix unwhiten;  // k x k symmetric, whiten^-1
};

/// Seeded random weights; deterministic for a given (config, seed). Every
/// parameter is quantized to float32 so weight files round-trip bitwise.
GeneratorWeights init_generator(const GeneratorConfig& config,
                                std::uint64_t seed);

Vector mapping_forward(const GeneratorWeights& w, const Vector& z);

/// Forward value together with the Jacobian-vector product along dz.
std::pair<Vector, Vector> mapping_jvp(const GeneratorWeights& w,
                                      const Vector& z, const Vector& dz);

/// Estimates the whitening transform from n_samples mapped latents.
/// Requires n_samples >= 10*k. The sample covariance is regularized by
/// 1e-6*(trace/k) on the diagonal before the symmetric square root.
TransformParams fit_transform(const GeneratorWeights& w, int n_samples,
                              std::uint64_t seed);

StyleMatrix transform_forward(const TransformParams& t, const StyleMatrix& W);
StyleMatrix transform_inverse(const TransformParams& t, const StyleMatrix& V);

/// Per-layer forward caches retained for the backward pass.
struct SynthesisCache {
  struct Layer {
    Vector u;         // unwhiten*v + mean, before the inverse leaky unit
    Vector pre_act;   // conv output + scaled noise, before leaky unit
    Vector normed;    // instance-normalized features
    Vector inv_std;   // per channel
    Vector style_scale;  // per channel
    int res = 0;
    bool upsampled = false;
  };
  std::vector<Layer> layers;
  ObjectImage image;
};

SynthesisCache synthesize_cached(const GeneratorWeights& w,
                                 const TransformParams& t,
                                 const StyleMatrix& V, const NoiseSet& phi);

ObjectImage synthesize(const GeneratorWeights& w, const TransformParams& t,
                       const StyleMatrix& V, const NoiseSet& phi);

struct LatentGrad {
  Matrix style;   // k x L
  NoiseSet noise;
};

/// Vector-Jacobian product of synthesize with respect to (V, phi), reusing
/// the forward caches.
LatentGrad synthesize_backward(const GeneratorWeights& w,
                               const TransformParams& t,
                               const SynthesisCache& cache,
                               const Vector& upstream);

/// Convenience wrapper: forward then backward in one call.
LatentGrad generator_grad(const GeneratorWeights& w, const TransformParams& t,
                          const StyleMatrix& V, const NoiseSet& phi,
                          const Vector& upstream);

/// n draws of ||T(G_m(z))||^2 with z standard normal under the seeded
/// stream.
std::vector<double> sample_latent_norm_sq(const GeneratorWeights& w,
                                          const TransformParams& t, int n,
                                          std::uint64_t seed);

/// Standard normal style matrix / noise set, the Algorithm-1 initialization.
StyleMatrix sample_style_init(const GeneratorConfig& config, Rng& rng);
NoiseSet sample_noise_init(const GeneratorConfig& config, Rng& rng);
NoiseSet zero_noise_set(const GeneratorConfig& config);

void save_weights(const GeneratorWeights& w, const std::string& path);
GeneratorWeights load_weights(const std::string& path);

}  // namespace pulsepp
