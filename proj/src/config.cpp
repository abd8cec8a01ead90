#include "pulsepp/config.hpp"

#include <fstream>
#include <set>

namespace pulsepp {

using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& path, const std::string& msg) {
  throw std::invalid_argument("config error at \"" + path + "\": " + msg);
}

// Strict object view: every key must be consumed, leftovers are errors.
class Obj {
 public:
  Obj(json j, std::string path) : j_(std::move(j)), path_(std::move(path)) {
    if (!j_.is_object()) fail(path_, "expected an object");
  }

  template <typename T>
  T get(const char* key, T fallback) {
    seen_.insert(key);
    if (!j_.contains(key)) return fallback;
    return convert<T>(j_.at(key), path_ + "." + key);
  }

  bool has(const char* key) const { return j_.contains(key); }

  json object(const char* key) {
    seen_.insert(key);
    if (!j_.contains(key)) return json::object();
    if (!j_.at(key).is_object()) fail(path_ + "." + key, "expected an object");
    return j_.at(key);
  }

  void finish() const {
    for (const auto& item : j_.items())
      if (seen_.find(item.key()) == seen_.end())
        fail(path_.empty() ? item.key() : path_ + "." + item.key(),
             "unknown key");
  }

  const std::string& path() const { return path_; }

 private:
  template <typename T>
  static T convert(const json& v, const std::string& path) {
    try {
      if constexpr (std::is_same_v<T, double>) {
        if (!v.is_number()) fail(path, "expected a number");
      } else if constexpr (std::is_same_v<T, int> ||
                           std::is_same_v<T, std::uint64_t>) {
        if (!v.is_number_integer() && !v.is_number_unsigned())
          fail(path, "expected an integer");
      } else if constexpr (std::is_same_v<T, bool>) {
        if (!v.is_boolean()) fail(path, "expected a boolean");
      } else if constexpr (std::is_same_v<T, std::string>) {
        if (!v.is_string()) fail(path, "expected a string");
      }
      return v.get<T>();
    } catch (const json::exception&) {
      fail(path, "invalid value");
    }
  }

  json j_;
  std::string path_;
  std::set<std::string> seen_;
};

void check(bool ok, const std::string& path, const std::string& msg) {
  if (!ok) fail(path, msg);
}

}  // namespace

GeneratorConfig GeneratorBlock::to_config() const {
  GeneratorConfig c;
  c.k = k;
  c.L = L;
  c.channels = channels;
  c.mapping_depth = mapping_depth;
  c.leaky_slope = leaky_slope;
  return c;
}

FanBeamGeometry FanBeamBlock::to_geometry(int n_pix) const {
  FanBeamGeometry g;
  g.n_pix = n_pix;
  g.pixel_pitch_mm = pixel_pitch_mm;
  g.source_to_iso_mm = source_to_iso_mm;
  g.iso_to_det_mm = iso_to_det_mm;
  g.det_count = det_count;
  g.det_pitch_mm = det_pitch_mm;
  g.view_angles_deg = linspace_angles(angle_first_deg, angle_last_deg, n_views);
  return g;
}

RunConfig parse_config_json(const json& j) {
  RunConfig c;
  Obj root(j, "");

  {
    Obj g(root.object("generator"), "generator");
    c.generator.k = g.get<int>("k", c.generator.k);
    c.generator.L = g.get<int>("L", c.generator.L);
    c.generator.channels = g.get<int>("channels", c.generator.channels);
    c.generator.mapping_depth =
        g.get<int>("mapping_depth", c.generator.mapping_depth);
    c.generator.leaky_slope =
        g.get<double>("leaky_slope", c.generator.leaky_slope);
    c.generator.seed = g.get<std::uint64_t>("seed", c.generator.seed);
    c.generator.weights_path =
        g.get<std::string>("weights_path", c.generator.weights_path);
    g.finish();
    check(c.generator.k >= 1, "generator.k", "must be >= 1");
    check(c.generator.L >= 2 && c.generator.L % 2 == 0, "generator.L",
          "must be even and >= 2");
    check(c.generator.channels >= 1, "generator.channels", "must be >= 1");
    check(c.generator.mapping_depth >= 1, "generator.mapping_depth",
          "must be >= 1");
    check(c.generator.leaky_slope > 0.0 && c.generator.leaky_slope < 1.0,
          "generator.leaky_slope", "must lie in (0, 1)");
  }
  {
    Obj t(root.object("transform"), "transform");
    c.transform.n_samples = t.get<int>("n_samples", c.transform.n_samples);
    c.transform.seed = t.get<std::uint64_t>("seed", c.transform.seed);
    t.finish();
    check(c.transform.n_samples >= 10 * c.generator.k, "transform.n_samples",
          "must be >= 10*k");
  }
  {
    Obj b(root.object("calibration"), "calibration");
    c.calibration.n_samples = b.get<int>("n_samples", c.calibration.n_samples);
    c.calibration.seed = b.get<std::uint64_t>("seed", c.calibration.seed);
    b.finish();
    check(c.calibration.n_samples >= 2, "calibration.n_samples",
          "must be >= 2");
  }
  {
    Obj m(root.object("measurement"), "measurement");
    const std::string variant = m.get<std::string>("variant", "fourier");
    if (variant == "fourier")
      c.measurement.variant = Measurement::Kind::fourier;
    else if (variant == "fanbeam")
      c.measurement.variant = Measurement::Kind::fanbeam;
    else
      fail("measurement.variant", "must be \"fourier\" or \"fanbeam\"");
    {
      Obj f(m.object("fourier"), "measurement.fourier");
      auto& fb = c.measurement.fourier;
      fb.R = f.get<double>("R", fb.R);
      fb.center_fraction = f.get<double>("center_fraction", fb.center_fraction);
      fb.sigma = f.get<double>("sigma", fb.sigma);
      fb.mask_seed = f.get<std::uint64_t>("mask_seed", fb.mask_seed);
      fb.noise_seed = f.get<std::uint64_t>("noise_seed", fb.noise_seed);
      f.finish();
      check(fb.R >= 1.0, "measurement.fourier.R", "must be >= 1");
      check(fb.center_fraction >= 0.0 && fb.center_fraction < 1.0 / fb.R,
            "measurement.fourier.center_fraction", "must lie in [0, 1/R)");
      check(fb.sigma > 0.0, "measurement.fourier.sigma", "must be > 0");
    }
    {
      Obj f(m.object("fanbeam"), "measurement.fanbeam");
      auto& fb = c.measurement.fanbeam;
      fb.n_views = f.get<int>("n_views", fb.n_views);
      fb.angle_first_deg = f.get<double>("angle_first_deg", fb.angle_first_deg);
      fb.angle_last_deg = f.get<double>("angle_last_deg", fb.angle_last_deg);
      fb.source_to_iso_mm =
          f.get<double>("source_to_iso_mm", fb.source_to_iso_mm);
      fb.iso_to_det_mm = f.get<double>("iso_to_det_mm", fb.iso_to_det_mm);
      fb.det_count = f.get<int>("det_count", fb.det_count);
      fb.det_pitch_mm = f.get<double>("det_pitch_mm", fb.det_pitch_mm);
      fb.pixel_pitch_mm = f.get<double>("pixel_pitch_mm", fb.pixel_pitch_mm);
      fb.i0 = f.get<double>("i0", fb.i0);
      fb.mu_max = f.get<double>("mu_max", fb.mu_max);
      fb.noise_seed = f.get<std::uint64_t>("noise_seed", fb.noise_seed);
      fb.cache_matrix = f.get<bool>("cache_matrix", fb.cache_matrix);
      f.finish();
      check(fb.n_views >= 1, "measurement.fanbeam.n_views", "must be >= 1");
      check(fb.n_views == 1 || fb.angle_last_deg > fb.angle_first_deg,
            "measurement.fanbeam.angle_last_deg",
            "must exceed angle_first_deg");
      check(fb.i0 > 0.0, "measurement.fanbeam.i0", "must be > 0");
      check(fb.mu_max >= 0.0, "measurement.fanbeam.mu_max", "must be >= 0");
      check(fb.source_to_iso_mm > 0.0 && fb.iso_to_det_mm > 0.0 &&
                fb.det_pitch_mm > 0.0 && fb.pixel_pitch_mm > 0.0,
            "measurement.fanbeam", "distances and pitches must be > 0");
      check(fb.det_count >= 1, "measurement.fanbeam.det_count",
            "must be >= 1");
    }
    m.finish();
  }
  {
    Obj t(root.object("target"), "target");
    const std::string kind = t.get<std::string>("kind", "inrange");
    if (kind == "inrange")
      c.target.kind = TargetBlock::Kind::inrange;
    else if (kind == "ellipses")
      c.target.kind = TargetBlock::Kind::ellipses;
    else if (kind == "checker")
      c.target.kind = TargetBlock::Kind::checker;
    else
      fail("target.kind", "must be \"inrange\", \"ellipses\" or \"checker\"");
    c.target.seed = t.get<std::uint64_t>("seed", c.target.seed);
    t.finish();
  }
  {
    Obj s(root.object("sampler"), "sampler");
    auto& sc = c.sampler.config;
    sc.variant = variant_from_name(
        s.get<std::string>("variant", variant_name(sc.variant)));
    sc.gamma = s.get<double>("gamma", sc.gamma);
    sc.lambda_c = s.get<double>("lambda_c", sc.lambda_c);
    sc.lambda_g = s.get<double>("lambda_g", sc.lambda_g);
    sc.lr = s.get<double>("lr", sc.lr);
    sc.n_steps = s.get<int>("n_steps", sc.n_steps);
    sc.restarts = s.get<int>("restarts", sc.restarts);
    sc.seed = s.get<std::uint64_t>("seed", sc.seed);
    const std::string acc = s.get<std::string>(
        "acceptance", sc.acceptance == AcceptanceMode::gaussian_morozov
                          ? "gaussian_morozov"
                          : "poisson_embedding");
    if (acc == "gaussian_morozov")
      sc.acceptance = AcceptanceMode::gaussian_morozov;
    else if (acc == "poisson_embedding")
      sc.acceptance = AcceptanceMode::poisson_embedding;
    else
      fail("sampler.acceptance",
           "must be \"gaussian_morozov\" or \"poisson_embedding\"");
    if (s.has("epsilon_override"))
      c.sampler.epsilon_override =
          s.get<double>("epsilon_override", 0.0);
    else
      s.get<double>("epsilon_override", 0.0);  // consume for key tracking
    s.finish();
    check(sc.gamma > 0.0 && sc.gamma < 1.0, "sampler.gamma",
          "must lie in (0, 1)");
    check(sc.lr > 0.0, "sampler.lr", "must be > 0");
    check(sc.n_steps >= 1, "sampler.n_steps", "must be >= 1");
    check(sc.restarts >= 1, "sampler.restarts", "must be >= 1");
    check(sc.lambda_c >= 0.0, "sampler.lambda_c", "must be >= 0");
    check(sc.lambda_g >= 0.0, "sampler.lambda_g", "must be >= 0");
    if (c.sampler.epsilon_override)
      check(*c.sampler.epsilon_override >= 0.0, "sampler.epsilon_override",
            "must be >= 0");
    const bool fourier = c.measurement.variant == Measurement::Kind::fourier;
    check((sc.acceptance == AcceptanceMode::gaussian_morozov) == fourier,
          "sampler.acceptance",
          "gaussian_morozov pairs with fourier data, poisson_embedding with "
          "fanbeam data");
  }
  {
    Obj a(root.object("analysis"), "analysis");
    c.analysis.tol = a.get<double>("tol", c.analysis.tol);
    c.analysis.max_iter = a.get<int>("max_iter", c.analysis.max_iter);
    a.finish();
    check(c.analysis.tol > 0.0, "analysis.tol", "must be > 0");
    check(c.analysis.max_iter >= 1, "analysis.max_iter", "must be >= 1");
  }
  {
    Obj v(root.object("validate"), "validate");
    c.validate.n_samples = v.get<int>("n_samples", c.validate.n_samples);
    c.validate.seed = v.get<std::uint64_t>("seed", c.validate.seed);
    c.validate.bins = v.get<int>("bins", c.validate.bins);
    v.finish();
    check(c.validate.n_samples >= 2, "validate.n_samples", "must be >= 2");
    check(c.validate.bins >= 1, "validate.bins", "must be >= 1");
  }
  c.output_dir = root.get<std::string>("output_dir", c.output_dir);
  root.finish();
  return c;
}

RunConfig parse_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw std::runtime_error("config file is not valid JSON: " +
                             std::string(e.what()));
  }
  return parse_config_json(j);
}

json config_to_json(const RunConfig& c) {
  json j;
  j["generator"] = {{"k", c.generator.k},
                    {"L", c.generator.L},
                    {"channels", c.generator.channels},
                    {"mapping_depth", c.generator.mapping_depth},
                    {"leaky_slope", c.generator.leaky_slope},
                    {"seed", c.generator.seed},
                    {"weights_path", c.generator.weights_path}};
  j["transform"] = {{"n_samples", c.transform.n_samples},
                    {"seed", c.transform.seed}};
  j["calibration"] = {{"n_samples", c.calibration.n_samples},
                      {"seed", c.calibration.seed}};
  j["measurement"] = {
      {"variant", c.measurement.variant == Measurement::Kind::fourier
                      ? "fourier"
                      : "fanbeam"},
      {"fourier",
       {{"R", c.measurement.fourier.R},
        {"center_fraction", c.measurement.fourier.center_fraction},
        {"sigma", c.measurement.fourier.sigma},
        {"mask_seed", c.measurement.fourier.mask_seed},
        {"noise_seed", c.measurement.fourier.noise_seed}}},
      {"fanbeam",
       {{"n_views", c.measurement.fanbeam.n_views},
        {"angle_first_deg", c.measurement.fanbeam.angle_first_deg},
        {"angle_last_deg", c.measurement.fanbeam.angle_last_deg},
        {"source_to_iso_mm", c.measurement.fanbeam.source_to_iso_mm},
        {"iso_to_det_mm", c.measurement.fanbeam.iso_to_det_mm},
        {"det_count", c.measurement.fanbeam.det_count},
        {"det_pitch_mm", c.measurement.fanbeam.det_pitch_mm},
        {"pixel_pitch_mm", c.measurement.fanbeam.pixel_pitch_mm},
        {"i0", c.measurement.fanbeam.i0},
        {"mu_max", c.measurement.fanbeam.mu_max},
        {"noise_seed", c.measurement.fanbeam.noise_seed},
        {"cache_matrix", c.measurement.fanbeam.cache_matrix}}}};
  const char* target_kind = "inrange";
  if (c.target.kind == TargetBlock::Kind::ellipses) target_kind = "ellipses";
  if (c.target.kind == TargetBlock::Kind::checker) target_kind = "checker";
  j["target"] = {{"kind", target_kind}, {"seed", c.target.seed}};
  j["sampler"] = {{"variant", variant_name(c.sampler.config.variant)},
                  {"gamma", c.sampler.config.gamma},
                  {"lambda_c", c.sampler.config.lambda_c},
                  {"lambda_g", c.sampler.config.lambda_g},
                  {"lr", c.sampler.config.lr},
                  {"n_steps", c.sampler.config.n_steps},
                  {"restarts", c.sampler.config.restarts},
                  {"seed", c.sampler.config.seed},
                  {"acceptance",
                   c.sampler.config.acceptance ==
                           AcceptanceMode::gaussian_morozov
                       ? "gaussian_morozov"
                       : "poisson_embedding"}};
  if (c.sampler.epsilon_override)
    j["sampler"]["epsilon_override"] = *c.sampler.epsilon_override;
  j["analysis"] = {{"tol", c.analysis.tol},
                   {"max_iter", c.analysis.max_iter}};
  j["validate"] = {{"n_samples", c.validate.n_samples},
                   {"seed", c.validate.seed},
                   {"bins", c.validate.bins}};
  j["output_dir"] = c.output_dir;
  return j;
}

json preset_config(const std::string& name) {
  if (name == "mri_toy") {
    json j;
    j["generator"] = {{"k", 64}, {"L", 8}, {"channels", 8}, {"seed", 1001}};
    j["measurement"] = {
        {"variant", "fourier"},
        {"fourier",
         {{"R", 2.0}, {"center_fraction", 0.04}, {"sigma", 0.05}}}};
    j["target"] = {{"kind", "inrange"}, {"seed", 42}};
    j["sampler"] = {{"variant", "pulse_pp"}, {"gamma", 0.01},
                    {"lambda_c", 0.01},      {"lr", 0.4},
                    {"n_steps", 2000},       {"restarts", 32},
                    {"acceptance", "gaussian_morozov"}};
    j["output_dir"] = "runs/mri_toy";
    return j;
  }
  if (name == "ct_toy") {
    json j;
    j["generator"] = {{"k", 64}, {"L", 8}, {"channels", 8}, {"seed", 1001}};
    j["measurement"] = {{"variant", "fanbeam"},
                        {"fanbeam",
                         {{"n_views", 40},
                          {"angle_first_deg", 0.0},
                          {"angle_last_deg", 119.0},
                          {"i0", 1000.0},
                          {"mu_max", 0.063}}}};
    j["target"] = {{"kind", "ellipses"}, {"seed", 42}};
    j["sampler"] = {{"variant", "pulse_pp"}, {"gamma", 0.01},
                    {"lambda_c", 0.01},      {"lr", 0.4},
                    {"n_steps", 2000},       {"restarts", 16},
                    {"acceptance", "poisson_embedding"}};
    j["output_dir"] = "runs/ct_toy";
    return j;
  }
  throw std::invalid_argument("unknown preset: " + name +
                              " (available: mri_toy, ct_toy)");
}

}  // namespace pulsepp
