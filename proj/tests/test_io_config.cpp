#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "pulsepp/config.hpp"
#include "pulsepp/raster.hpp"

using namespace pulsepp;
using nlohmann::json;

namespace {

std::string temp_path(const char* name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_CASE("raster round trip is bitwise") {
  FloatRaster r;
  r.width = 5;
  r.height = 3;
  r.channels = 2;
  r.payload.resize(30);
  for (std::size_t i = 0; i < r.payload.size(); ++i)
    r.payload[i] = static_cast<float>(0.1 * i - 0.7);
  const std::string path = temp_path("pulsepp_raster.lmfr");
  raster_write(path, r);
  const FloatRaster back = raster_read(path);
  CHECK(back.width == r.width);
  CHECK(back.height == r.height);
  CHECK(back.channels == r.channels);
  CHECK(back.payload == r.payload);
  std::filesystem::remove(path);
}

TEST_CASE("raster corruption is detected") {
  FloatRaster r;
  r.width = 4;
  r.height = 4;
  r.channels = 1;
  r.payload.assign(16, 0.25f);
  const std::string path = temp_path("pulsepp_raster_bad.lmfr");
  raster_write(path, r);
  {
    std::fstream f(path, std::ios::binary | std::ios::in | std::ios::out);
    f.seekp(20);  // inside the payload
    const char junk = 0x5A;
    f.write(&junk, 1);
  }
  CHECK_THROWS_AS(raster_read(path), std::runtime_error);
  std::filesystem::remove(path);
}

TEST_CASE("pgm export quantizes to 16 bits") {
  FloatRaster r;
  r.width = 4;
  r.height = 2;
  r.channels = 1;
  r.payload.assign(8, 0.5f);
  const std::string path = temp_path("pulsepp_half.pgm");
  pgm_export(path, r);
  std::ifstream in(path, std::ios::binary);
  std::string magic, dims1, dims2, maxval;
  in >> magic >> dims1 >> dims2 >> maxval;
  CHECK(magic == "P5");
  CHECK(maxval == "65535");
  in.get();  // single whitespace after the header
  for (int i = 0; i < 8; ++i) {
    const int hi = in.get(), lo = in.get();
    const int sample = hi * 256 + lo;
    CHECK(std::abs(sample - 32768) <= 1);
  }
  std::filesystem::remove(path);
}

TEST_CASE("minimal config resolves documented defaults") {
  const RunConfig c = parse_config_json(json::object());
  CHECK(c.sampler.config.lr == 0.4);
  CHECK(c.sampler.config.n_steps == 2000);
  CHECK(c.generator.k == 64);
  CHECK(c.generator.L == 8);
  CHECK(c.measurement.fourier.sigma == 0.05);
  CHECK(c.analysis.tol == 1e-8);
  CHECK_FALSE(c.sampler.epsilon_override.has_value());
}

TEST_CASE("config rejections name the offending key path") {
  json bad;
  bad["sampler"]["gamma"] = 1.5;
  CHECK_THROWS_WITH_AS(parse_config_json(bad),
                       doctest::Contains("sampler.gamma"),
                       std::invalid_argument);

  json unknown;
  unknown["sampler"]["gama"] = 0.01;
  CHECK_THROWS_WITH_AS(parse_config_json(unknown),
                       doctest::Contains("sampler.gama"),
                       std::invalid_argument);

  json badtype;
  badtype["generator"]["k"] = "many";
  CHECK_THROWS_WITH_AS(parse_config_json(badtype),
                       doctest::Contains("generator.k"),
                       std::invalid_argument);

  json mismatch;  // fourier data cannot pair with the embedding rule
  mismatch["sampler"]["acceptance"] = "poisson_embedding";
  CHECK_THROWS_WITH_AS(parse_config_json(mismatch),
                       doctest::Contains("sampler.acceptance"),
                       std::invalid_argument);

  json toplevel;
  toplevel["outputs"] = "x";
  CHECK_THROWS_AS(parse_config_json(toplevel), std::invalid_argument);
}

TEST_CASE("config serialization round trips") {
  json j;
  j["generator"] = {{"k", 16}, {"L", 4}, {"seed", 77}};
  j["measurement"] = {{"variant", "fanbeam"},
                      {"fanbeam", {{"i0", 100000.0}, {"n_views", 12}}}};
  j["sampler"] = {{"variant", "pulse2"},
                  {"acceptance", "poisson_embedding"},
                  {"epsilon_override", 12.5}};
  j["output_dir"] = "elsewhere";
  const RunConfig c = parse_config_json(j);
  CHECK(c.sampler.config.variant == Variant::pulse2);
  CHECK(c.measurement.fanbeam.i0 == 100000.0);
  CHECK(*c.sampler.epsilon_override == 12.5);

  const json full = config_to_json(c);
  const RunConfig c2 = parse_config_json(full);
  CHECK(config_to_json(c2) == full);
}

TEST_CASE("presets parse cleanly") {
  const RunConfig mri = parse_config_json(preset_config("mri_toy"));
  CHECK(mri.measurement.variant == Measurement::Kind::fourier);
  CHECK(mri.generator.to_config().output_resolution() == 32);
  const RunConfig ct = parse_config_json(preset_config("ct_toy"));
  CHECK(ct.measurement.variant == Measurement::Kind::fanbeam);
  CHECK(ct.sampler.config.acceptance == AcceptanceMode::poisson_embedding);
  CHECK_THROWS_AS(preset_config("nope"), std::invalid_argument);
}

TEST_CASE("config file parsing reports json errors") {
  const std::string path = temp_path("pulsepp_bad.json");
  {
    std::ofstream out(path);
    out << "{ not json";
  }
  CHECK_THROWS_AS(parse_config(path), std::runtime_error);
  std::filesystem::remove(path);
  CHECK_THROWS_AS(parse_config(temp_path("pulsepp_missing.json")),
                  std::runtime_error);
}
