#pragma once

#include <string>

#include "pulsepp/analysis.hpp"
#include "pulsepp/config.hpp"
#include "pulsepp/generator.hpp"
#include "pulsepp/sampler.hpp"

namespace pulsepp {

/// Exit codes shared by the commands: 0 success, 1 error (thrown),
/// 2 valid-but-empty result.
inline constexpr int kExitOk = 0;
inline constexpr int kExitEmpty = 2;

/// Loads weights from generator.weights_path when set, otherwise derives
/// them from the generator seed and (when allow_create) writes
/// run_dir/weights.lmgw. path_out receives the file the weights came from,
/// empty when nothing was persisted.
GeneratorWeights obtain_weights(const RunConfig& config,
                                const std::string& run_dir, bool allow_create,
                                std::string* path_out);

/// The simulated ground-truth object for the configured target kind.
ObjectImage make_target(const RunConfig& config, const GeneratorWeights& w,
                        const TransformParams& t);

/// Annulus calibration with a JSON cache in the run directory keyed by
/// (weights hash, n_samples, seed, gamma).
AnnulusSpec calibrate_cached(const RunConfig& config,
                             const GeneratorWeights& w,
                             const TransformParams& t,
                             const std::string& run_dir,
                             const std::string& weights_hash);

/// Rebuilds the measurement recorded in a run directory by cmd_simulate.
Measurement load_measurement(const RunConfig& config,
                             const std::string& run_dir);

/// Stacked-real forward/adjoint pair of the configured operator.
std::pair<LinearOp, LinearOp> measurement_operator(const Measurement& m);

int cmd_validate_latents(const RunConfig& config, const std::string& out_dir);
int cmd_simulate(const RunConfig& config, const std::string& out_dir);
int cmd_sample(const RunConfig& config, const std::string& run_dir,
               int workers);
int cmd_analyze(const std::string& run_dir, int workers);

}  // namespace pulsepp
