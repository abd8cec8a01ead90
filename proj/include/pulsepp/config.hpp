#pragma once

#include <json.hpp>

#include <cstdint>
#include <optional>
#include <string>

#include "pulsepp/generator.hpp"
#include "pulsepp/sampler.hpp"

namespace pulsepp {

inline constexpr const char* kToolVersion = "0.1.0";

struct GeneratorBlock {
  int k = 64;
  int L = 8;
  int channels = 8;
  int mapping_depth = 4;
  double leaky_slope = 0.2;
  std::uint64_t seed = 1001;
  std::string weights_path;  // empty: init from seed

  GeneratorConfig to_config() const;
};

struct TransformBlock {
  int n_samples = 10000;
  std::uint64_t seed = 2001;
};

struct CalibrationBlock {
  int n_samples = 100000;
  std::uint64_t seed = 3001;
};

struct FourierBlock {
  double R = 2.0;
  double center_fraction = 0.04;
  double sigma = 0.05;
  std::uint64_t mask_seed = 4001;
  std::uint64_t noise_seed = 5001;
};

struct FanBeamBlock {
  int n_views = 40;
  double angle_first_deg = 0.0;
  double angle_last_deg = 119.0;
  double source_to_iso_mm = 100.0;
  double iso_to_det_mm = 40.0;
  int det_count = 96;
  double det_pitch_mm = 0.6;
  double pixel_pitch_mm = 0.82;
  double i0 = 1000.0;
  double mu_max = 0.063;
  std::uint64_t noise_seed = 5001;
  bool cache_matrix = false;

  FanBeamGeometry to_geometry(int n_pix) const;
};

struct MeasurementBlock {
  Measurement::Kind variant = Measurement::Kind::fourier;
  FourierBlock fourier;
  FanBeamBlock fanbeam;
};

struct TargetBlock {
  enum class Kind { inrange, ellipses, checker };
  Kind kind = Kind::inrange;
  std::uint64_t seed = 6001;
};

struct SamplerBlock {
  SamplerConfig config;
  std::optional<double> epsilon_override;
};

struct AnalysisBlock {
  double tol = 1e-8;
  int max_iter = 2000;
};

struct ValidateBlock {
  int n_samples = 100000;
  std::uint64_t seed = 8001;
  int bins = 80;
};

struct RunConfig {
  GeneratorBlock generator;
  TransformBlock transform;
  CalibrationBlock calibration;
  MeasurementBlock measurement;
  TargetBlock target;
  SamplerBlock sampler;
  AnalysisBlock analysis;
  ValidateBlock validate;
  std::string output_dir = "run";
};

/// Parses and validates a config. Unknown keys, type errors and range
/// violations are rejected with the offending key path in the message.
RunConfig parse_config(const std::string& path);
RunConfig parse_config_json(const nlohmann::json& j);

/// Serialization with every default resolved; parse(config_to_json(c)) == c.
nlohmann::json config_to_json(const RunConfig& c);

/// Built-in desk-scale experiment presets: "mri_toy" and "ct_toy".
nlohmann::json preset_config(const std::string& name);

}  // namespace pulsepp
