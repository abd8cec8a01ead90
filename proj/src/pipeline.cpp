#include "pulsepp/pipeline.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "pulsepp/binio.hpp"
#include "pulsepp/checksum.hpp"
#include "pulsepp/latent_space.hpp"
#include "pulsepp/raster.hpp"

namespace pulsepp {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string join(const std::string& dir, const std::string& name) {
  return (fs::path(dir) / name).string();
}

void dump_json(const std::string& path, const json& j) {
  std::string text = j.dump(2);
  text.push_back('\n');
  write_file(path, std::vector<char>(text.begin(), text.end()));
}

json load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  json j;
  in >> j;
  return j;
}

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

json annulus_to_json(const AnnulusSpec& a) {
  return json{{"delta_min", a.delta_min},
              {"delta_max", a.delta_max},
              {"gamma", a.gamma}};
}

AnnulusSpec annulus_from_json(const json& j) {
  AnnulusSpec a;
  a.delta_min = j.at("delta_min").get<double>();
  a.delta_max = j.at("delta_max").get<double>();
  a.gamma = j.at("gamma").get<double>();
  return a;
}

}  // namespace

GeneratorWeights obtain_weights(const RunConfig& config,
                                const std::string& run_dir, bool allow_create,
                                std::string* path_out) {
  if (!config.generator.weights_path.empty()) {
    GeneratorWeights w = load_weights(config.generator.weights_path);
    if (path_out) *path_out = config.generator.weights_path;
    return w;
  }
  const std::string local = join(run_dir, "weights.lmgw");
  if (fs::exists(local)) {
    if (path_out) *path_out = local;
    return load_weights(local);
  }
  GeneratorWeights w =
      init_generator(config.generator.to_config(), config.generator.seed);
  if (allow_create) {
    fs::create_directories(run_dir);
    save_weights(w, local);
    if (path_out) *path_out = local;
  } else if (path_out) {
    path_out->clear();
  }
  return w;
}

ObjectImage make_target(const RunConfig& config, const GeneratorWeights& w,
                        const TransformParams& t) {
  const int res = w.config.output_resolution();
  switch (config.target.kind) {
    case TargetBlock::Kind::ellipses:
      return phantom_generate(PhantomKind::ellipses, res, res,
                              config.target.seed);
    case TargetBlock::Kind::checker:
      return phantom_generate(PhantomKind::checker, res, res,
                              config.target.seed);
    case TargetBlock::Kind::inrange:
      break;
  }
  Rng rng(config.target.seed);
  Vector z(w.config.k);
  for (int i = 0; i < w.config.k; ++i) z[i] = rng.normal();
  const Vector v = transform_forward(t, mapping_forward(w, z));
  StyleMatrix V(w.config.k, w.config.L);
  for (int c = 0; c < w.config.L; ++c) V.col(c) = v;
  const NoiseSet phi = sample_noise_init(w.config, rng);
  return synthesize(w, t, V, phi);
}

AnnulusSpec calibrate_cached(const RunConfig& config,
                             const GeneratorWeights& w,
                             const TransformParams& t,
                             const std::string& run_dir,
                             const std::string& weights_hash) {
  const std::string cache_path = join(run_dir, "annulus_cache.json");
  json cache = json::object();
  cache["entries"] = json::array();
  if (fs::exists(cache_path)) cache = load_json(cache_path);
  const double gamma = config.sampler.config.gamma;
  for (const auto& e : cache.at("entries")) {
    if (e.at("weights_hash").get<std::string>() == weights_hash &&
        e.at("n_samples").get<int>() == config.calibration.n_samples &&
        e.at("seed").get<std::uint64_t>() == config.calibration.seed &&
        e.at("gamma").get<double>() == gamma)
      return annulus_from_json(e);
  }
  const std::vector<double> norm_sq = sample_latent_norm_sq(
      w, t, config.calibration.n_samples, config.calibration.seed);
  std::vector<double> norms(norm_sq.size());
  for (std::size_t i = 0; i < norm_sq.size(); ++i)
    norms[i] = std::sqrt(norm_sq[i]);
  const AnnulusSpec spec = calibrate_annulus(ecdf_build(norms), gamma);

  json entry = annulus_to_json(spec);
  entry["weights_hash"] = weights_hash;
  entry["n_samples"] = config.calibration.n_samples;
  entry["seed"] = config.calibration.seed;
  cache["entries"].push_back(entry);
  fs::create_directories(run_dir);
  dump_json(cache_path, cache);
  return spec;
}

std::pair<LinearOp, LinearOp> measurement_operator(const Measurement& m) {
  if (m.kind == Measurement::Kind::fourier) {
    const CartesianMask mask = m.mask;
    return {[mask](const Vector& f) { return fourier_forward_stacked(f, mask); },
            [mask](const Vector& g) { return fourier_adjoint_stacked(g, mask); }};
  }
  const std::shared_ptr<const SystemMatrix> h = m.system;
  return {[h](const Vector& f) { return Vector(*h * f); },
          [h](const Vector& g) { return Vector(h->transpose() * g); }};
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

int cmd_simulate(const RunConfig& config, const std::string& out_dir) {
  fs::create_directories(out_dir);
  std::string weights_file;
  const GeneratorWeights w = obtain_weights(config, out_dir, true,
                                            &weights_file);
  const TransformParams t =
      fit_transform(w, config.transform.n_samples, config.transform.seed);
  const ObjectImage truth = make_target(config, w, t);

  raster_write(join(out_dir, "truth.lmfr"), raster_from_image(truth));
  pgm_export(join(out_dir, "truth.pgm"), raster_from_image(truth));

  json manifest;
  manifest["tool_version"] = kToolVersion;
  manifest["command"] = "simulate";
  manifest["config"] = config_to_json(config);
  manifest["weights_hash"] = hash_hex(hash_file(weights_file));
  manifest["target"] = {{"kind", config_to_json(config)["target"]["kind"]},
                        {"seed", config.target.seed}};

  if (config.measurement.variant == Measurement::Kind::fourier) {
    const auto& fb = config.measurement.fourier;
    const CartesianMask mask = make_cartesian_mask(
        truth.width, truth.height, fb.R, fb.center_fraction, fb.mask_seed);
    const ComplexVector clean = fourier_forward(truth, mask);
    const KSpaceData data =
        add_complex_gaussian(clean, fb.sigma, fb.noise_seed);

    Vector interleaved(2 * data.samples.size());
    for (Eigen::Index i = 0; i < data.samples.size(); ++i) {
      interleaved[2 * i] = data.samples[i].real();
      interleaved[2 * i + 1] = data.samples[i].imag();
    }
    raster_write(join(out_dir, "kspace.lmfr"),
                 raster_from_vector(interleaved,
                                    static_cast<int>(data.samples.size()), 1,
                                    2));
    json mj;
    mj["width"] = mask.width;
    mj["height"] = mask.height;
    mj["acceleration"] = mask.acceleration;
    mj["center_fraction"] = mask.center_fraction;
    mj["seed"] = mask.seed;
    mj["retained_cols"] = mask.retained_cols;
    mj["m"] = mask.samples();
    dump_json(join(out_dir, "mask.json"), mj);

    manifest["measurement"] = {
        {"variant", "fourier"},
        {"m", mask.samples()},
        {"sigma", fb.sigma},
        {"noise_seed", fb.noise_seed},
        {"epsilon_morozov", 0.5 * mask.samples()}};
  } else {
    const auto& fb = config.measurement.fanbeam;
    const FanBeamGeometry geom = fb.to_geometry(truth.width);
    const SystemMatrix h = build_fanbeam(geom);
    if (fb.cache_matrix)
      save_system_matrix(join(out_dir, "system_matrix.lmsm"), h);
    const Vector mean = xray_intensity(h, truth, fb.i0, fb.mu_max);
    const IntensityData data =
        add_poisson(mean, fb.i0, fb.mu_max, fb.noise_seed);
    raster_write(join(out_dir, "counts.lmfr"),
                 raster_from_vector(data.counts,
                                    static_cast<int>(data.counts.size()), 1,
                                    1));
    json gj;
    gj["n_pix"] = geom.n_pix;
    gj["pixel_pitch_mm"] = geom.pixel_pitch_mm;
    gj["source_to_iso_mm"] = geom.source_to_iso_mm;
    gj["iso_to_det_mm"] = geom.iso_to_det_mm;
    gj["det_count"] = geom.det_count;
    gj["det_pitch_mm"] = geom.det_pitch_mm;
    gj["view_angles_deg"] = geom.view_angles_deg;
    dump_json(join(out_dir, "geometry.json"), gj);

    manifest["measurement"] = {{"variant", "fanbeam"},
                               {"m", static_cast<int>(data.counts.size())},
                               {"i0", fb.i0},
                               {"mu_max", fb.mu_max},
                               {"noise_seed", fb.noise_seed}};
  }
  dump_json(join(out_dir, "manifest.json"), manifest);
  return kExitOk;
}

// ---------------------------------------------------------------------------
// sample
// ---------------------------------------------------------------------------

Measurement load_measurement(const RunConfig& config,
                             const std::string& run_dir) {
  if (config.measurement.variant == Measurement::Kind::fourier) {
    const json mj = load_json(join(run_dir, "mask.json"));
    CartesianMask mask;
    mask.width = mj.at("width").get<int>();
    mask.height = mj.at("height").get<int>();
    mask.acceleration = mj.at("acceleration").get<double>();
    mask.center_fraction = mj.at("center_fraction").get<double>();
    mask.seed = mj.at("seed").get<std::uint64_t>();
    mask.retained_cols = mj.at("retained_cols").get<std::vector<int>>();

    const FloatRaster raster = raster_read(join(run_dir, "kspace.lmfr"));
    require(raster.channels == 2, "kspace raster must have two channels");
    const Vector interleaved = vector_from_raster(raster);
    KSpaceData data;
    data.sigma = config.measurement.fourier.sigma;
    data.samples = ComplexVector(interleaved.size() / 2);
    for (Eigen::Index i = 0; i < data.samples.size(); ++i)
      data.samples[i] = std::complex<double>(interleaved[2 * i],
                                             interleaved[2 * i + 1]);
    return make_fourier_measurement(std::move(mask), std::move(data));
  }
  const json gj = load_json(join(run_dir, "geometry.json"));
  FanBeamGeometry geom;
  geom.n_pix = gj.at("n_pix").get<int>();
  geom.pixel_pitch_mm = gj.at("pixel_pitch_mm").get<double>();
  geom.source_to_iso_mm = gj.at("source_to_iso_mm").get<double>();
  geom.iso_to_det_mm = gj.at("iso_to_det_mm").get<double>();
  geom.det_count = gj.at("det_count").get<int>();
  geom.det_pitch_mm = gj.at("det_pitch_mm").get<double>();
  geom.view_angles_deg = gj.at("view_angles_deg").get<std::vector<double>>();

  const std::string cache = join(run_dir, "system_matrix.lmsm");
  auto h = std::make_shared<SystemMatrix>(
      fs::exists(cache) ? load_system_matrix(cache) : build_fanbeam(geom));

  const FloatRaster raster = raster_read(join(run_dir, "counts.lmfr"));
  IntensityData data;
  data.i0 = config.measurement.fanbeam.i0;
  data.mu_max = config.measurement.fanbeam.mu_max;
  data.counts = vector_from_raster(raster);
  return make_fanbeam_measurement(std::move(h), std::move(data));
}

int cmd_sample(const RunConfig& config, const std::string& run_dir,
               int workers) {
  const json sim_manifest = load_json(join(run_dir, "manifest.json"));
  std::string weights_file;
  const GeneratorWeights w =
      obtain_weights(config, run_dir, false, &weights_file);
  if (weights_file.empty())
    throw std::runtime_error("sample: no weights file in the run directory");
  const std::string weights_hash = hash_hex(hash_file(weights_file));
  const std::string recorded =
      sim_manifest.at("weights_hash").get<std::string>();
  if (recorded != weights_hash)
    throw std::runtime_error(
        "sample: weights hash mismatch against the simulate manifest (" +
        weights_hash + " vs " + recorded + ")");

  const TransformParams t =
      fit_transform(w, config.transform.n_samples, config.transform.seed);
  const AnnulusSpec annulus =
      calibrate_cached(config, w, t, run_dir, weights_hash);
  const Measurement data = load_measurement(config, run_dir);

  double epsilon;
  if (config.sampler.epsilon_override) {
    epsilon = *config.sampler.epsilon_override;
  } else if (config.sampler.config.acceptance ==
             AcceptanceMode::poisson_embedding) {
    const ObjectImage truth =
        image_from_raster(raster_read(join(run_dir, "truth.lmfr")));
    epsilon = acceptance_threshold(config.sampler.config, data, &truth, w, t,
                                   annulus);
  } else {
    epsilon = acceptance_threshold(config.sampler.config, data, nullptr, w, t,
                                   annulus);
  }

  const SolutionSet set = empirical_sample(config.sampler.config, data, w, t,
                                           annulus, epsilon, workers);

  const std::string sol_dir = join(run_dir, "solutions");
  fs::create_directories(sol_dir);
  json solutions = json::array();
  for (const auto& e : set.accepted) {
    char name[32];
    std::snprintf(name, sizeof(name), "sol_%03d.lmfr", e.restart_index);
    raster_write(join(sol_dir, name), raster_from_image(e.image));
    solutions.push_back({{"file", std::string("solutions/") + name},
                         {"restart_index", e.restart_index},
                         {"fidelity", e.fidelity},
                         {"objective", e.objective}});
  }
  json restarts = json::array();
  for (const auto& r : set.restarts)
    restarts.push_back({{"index", r.index},
                        {"seed", r.seed},
                        {"best_objective", r.best_objective},
                        {"fidelity", r.fidelity},
                        {"accepted", r.accepted},
                        {"failed", r.failed},
                        {"best_step", r.best_step}});

  json manifest;
  manifest["tool_version"] = kToolVersion;
  manifest["command"] = "sample";
  manifest["config"] = config_to_json(config);
  manifest["weights_hash"] = weights_hash;
  manifest["annulus"] = annulus_to_json(annulus);
  manifest["epsilon"] = epsilon;
  manifest["m"] = data.sample_count();
  manifest["restarts"] = restarts;
  manifest["solutions"] = solutions;
  manifest["accepted_count"] = static_cast<int>(set.accepted.size());
  dump_json(join(run_dir, "sample_manifest.json"), manifest);

  return set.accepted.empty() ? kExitEmpty : kExitOk;
}

// ---------------------------------------------------------------------------
// analyze
// ---------------------------------------------------------------------------

int cmd_analyze(const std::string& run_dir, int workers) {
  (void)workers;  // component solves run in solution order
  const json manifest = load_json(join(run_dir, "sample_manifest.json"));
  const RunConfig config = parse_config_json(manifest.at("config"));
  const double epsilon = manifest.at("epsilon").get<double>();

  std::vector<ObjectImage> solutions;
  for (const auto& s : manifest.at("solutions"))
    solutions.push_back(image_from_raster(
        raster_read(join(run_dir, s.at("file").get<std::string>()))));
  // The fidelity distribution covers every completed restart; the fraction
  // under epsilon is the acceptance rate.
  std::vector<double> fidelities;
  for (const auto& r : manifest.at("restarts"))
    if (!r.at("failed").get<bool>())
      fidelities.push_back(r.at("fidelity").get<double>());
  if (solutions.size() < 2) {
    std::cerr << "analyze: need at least two accepted solutions, have "
              << solutions.size() << "\n";
    return kExitEmpty;
  }

  const Measurement data = load_measurement(config, run_dir);
  const auto [apply_h, apply_ht] = measurement_operator(data);
  const UncertaintyReport rep =
      uncertainty_report(solutions, apply_h, apply_ht, config.analysis.tol,
                         config.analysis.max_iter);
  const FidelitySummary fsum = fidelity_summary(fidelities, epsilon);

  const int res = solutions.front().width;
  raster_write(join(run_dir, "um_full.lmfr"),
               raster_from_vector(rep.map_full, res, res));
  raster_write(join(run_dir, "um_meas.lmfr"),
               raster_from_vector(rep.map_meas, res, res));
  raster_write(join(run_dir, "um_null.lmfr"),
               raster_from_vector(rep.map_null, res, res));

  json out;
  out["tool_version"] = kToolVersion;
  out["command"] = "analyze";
  out["count"] = rep.count;
  out["tol"] = rep.tol;
  out["converged"] = rep.converged;
  out["residuals"] = rep.residuals;
  out["fom_full"] = rep.fom_full;
  out["fom_meas"] = rep.fom_meas;
  out["fom_null"] = rep.fom_null;
  out["epsilon"] = epsilon;
  out["fidelity_summary"] = {{"min", fsum.min},
                             {"q1", fsum.q1},
                             {"median", fsum.median},
                             {"q3", fsum.q3},
                             {"max", fsum.max},
                             {"fraction_accepted", fsum.fraction_accepted},
                             {"count", fsum.count}};
  dump_json(join(run_dir, "analysis.json"), out);
  return kExitOk;
}

// ---------------------------------------------------------------------------
// validate-latents
// ---------------------------------------------------------------------------

int cmd_validate_latents(const RunConfig& config, const std::string& out_dir) {
  fs::create_directories(out_dir);
  std::string weights_file;
  const GeneratorWeights w =
      obtain_weights(config, out_dir, true, &weights_file);
  const TransformParams t =
      fit_transform(w, config.transform.n_samples, config.transform.seed);
  const int k = w.config.k;
  const int n = config.validate.n_samples;

  const std::vector<double> gen_sq =
      sample_latent_norm_sq(w, t, n, config.validate.seed);
  const NormEcdf gen_ecdf = ecdf_build(gen_sq);
  const auto chi2_ref = [k](double x) { return chi2_cdf(k, x); };
  const double ks_generator = ks_distance(gen_ecdf, chi2_ref);

  // Positive control: genuinely Gaussian latents.
  Rng rng(derive_seed(config.validate.seed, 1));
  std::vector<double> control_sq(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    double s = 0.0;
    for (int j = 0; j < k; ++j) {
      const double z = rng.normal();
      s += z * z;
    }
    control_sq[static_cast<std::size_t>(i)] = s;
  }
  const double ks_control = ks_distance(ecdf_build(control_sq), chi2_ref);

  // Histogram of generator norm-squares and the chi-square reference curve.
  const double hi = gen_ecdf.sorted_samples().back();
  const int bins = config.validate.bins;
  const double width = hi / bins;
  std::vector<int> counts(static_cast<std::size_t>(bins), 0);
  for (double v : gen_sq) {
    int b = width > 0.0 ? static_cast<int>(v / width) : 0;
    b = std::min(b, bins - 1);
    ++counts[static_cast<std::size_t>(b)];
  }
  {
    std::string csv = "bin_center,count,density\n";
    for (int b = 0; b < bins; ++b) {
      const double center = (b + 0.5) * width;
      const double density =
          width > 0.0 ? counts[static_cast<std::size_t>(b)] / (n * width) : 0.0;
      csv += fmt_double(center) + "," +
             std::to_string(counts[static_cast<std::size_t>(b)]) + "," +
             fmt_double(density) + "\n";
    }
    write_file(join(out_dir, "latent_norm_sq_hist.csv"),
               std::vector<char>(csv.begin(), csv.end()));
  }
  {
    std::string csv = "x,chi2_pdf\n";
    for (int b = 0; b < bins; ++b) {
      const double center = (b + 0.5) * width;
      csv += fmt_double(center) + "," + fmt_double(chi2_pdf(k, center)) + "\n";
    }
    write_file(join(out_dir, "chi2_reference.csv"),
               std::vector<char>(csv.begin(), csv.end()));
  }

  double mean = 0.0;
  for (double v : gen_sq) mean += v;
  mean /= n;

  json report;
  report["tool_version"] = kToolVersion;
  report["command"] = "validate-latents";
  report["config"] = config_to_json(config);
  report["k"] = k;
  report["n_samples"] = n;
  report["ks_generator_vs_chi2"] = ks_generator;
  report["ks_gaussian_control_vs_chi2"] = ks_control;
  report["norm_sq_mean"] = mean;
  report["files"] = {"latent_norm_sq_hist.csv", "chi2_reference.csv"};
  dump_json(join(out_dir, "validate.json"), report);
  return kExitOk;
}

}  // namespace pulsepp
