#include "pulsepp/raster.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include "pulsepp/binio.hpp"
#include "pulsepp/checksum.hpp"

namespace pulsepp {

void raster_write(const std::string& path, const FloatRaster& raster) {
  require(raster.payload.size() == static_cast<std::size_t>(raster.width) *
                                       raster.height * raster.channels,
          "raster_write: payload length mismatch");
  ByteWriter bw;
  bw.magic("LMFR");
  bw.u32(raster.width);
  bw.u32(raster.height);
  bw.u32(raster.channels);
  for (float f : raster.payload) bw.f32(f);
  const std::uint32_t crc = crc32(bw.data().data(), bw.data().size());
  bw.u32(crc);
  write_file(path, bw.data());
}

FloatRaster raster_read(const std::string& path) {
  std::vector<char> raw = read_file(path);
  if (raw.size() < 20) throw std::runtime_error("raster file truncated");
  const std::size_t body = raw.size() - 4;
  std::uint32_t stored;
  std::memcpy(&stored, raw.data() + body, 4);
  if (crc32(raw.data(), body) != stored)
    throw std::runtime_error("raster file checksum mismatch");
  raw.resize(body);
  ByteReader br(std::move(raw));
  br.expect_magic("LMFR", "raster file");
  FloatRaster r;
  r.width = br.u32();
  r.height = br.u32();
  r.channels = br.u32();
  const std::size_t count =
      static_cast<std::size_t>(r.width) * r.height * r.channels;
  if (br.size() - br.position() != count * 4)
    throw std::runtime_error("raster file payload length mismatch");
  r.payload.resize(count);
  for (auto& f : r.payload) f = br.f32();
  return r;
}

void pgm_export(const std::string& path, const FloatRaster& raster) {
  require(raster.channels == 1, "pgm_export: single-channel rasters only");
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << "P5\n" << raster.width << " " << raster.height << "\n65535\n";
  for (float f : raster.payload) {
    const double clamped = std::clamp(static_cast<double>(f), 0.0, 1.0);
    const auto q = static_cast<std::uint16_t>(std::lround(clamped * 65535.0));
    // PGM stores 16-bit samples most-significant byte first.
    const unsigned char hi = static_cast<unsigned char>(q >> 8);
    const unsigned char lo = static_cast<unsigned char>(q & 0xFF);
    out.put(static_cast<char>(hi));
    out.put(static_cast<char>(lo));
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

FloatRaster raster_from_image(const ObjectImage& img) {
  FloatRaster r;
  r.width = static_cast<std::uint32_t>(img.width);
  r.height = static_cast<std::uint32_t>(img.height);
  r.channels = 1;
  r.payload.resize(static_cast<std::size_t>(img.size()));
  for (int i = 0; i < img.size(); ++i)
    r.payload[static_cast<std::size_t>(i)] = static_cast<float>(img.pixels[i]);
  return r;
}

ObjectImage image_from_raster(const FloatRaster& raster) {
  require(raster.channels == 1, "image_from_raster: expected one channel");
  ObjectImage img(static_cast<int>(raster.width),
                  static_cast<int>(raster.height));
  for (std::size_t i = 0; i < raster.payload.size(); ++i)
    img.pixels[static_cast<Eigen::Index>(i)] =
        static_cast<double>(raster.payload[i]);
  return img;
}

FloatRaster raster_from_vector(const Vector& v, int width, int height,
                               int channels) {
  require(v.size() == static_cast<Eigen::Index>(width) * height * channels,
          "raster_from_vector: size mismatch");
  FloatRaster r;
  r.width = static_cast<std::uint32_t>(width);
  r.height = static_cast<std::uint32_t>(height);
  r.channels = static_cast<std::uint32_t>(channels);
  r.payload.resize(static_cast<std::size_t>(v.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i)
    r.payload[static_cast<std::size_t>(i)] = static_cast<float>(v[i]);
  return r;
}

Vector vector_from_raster(const FloatRaster& raster) {
  Vector v(static_cast<Eigen::Index>(raster.payload.size()));
  for (std::size_t i = 0; i < raster.payload.size(); ++i)
    v[static_cast<Eigen::Index>(i)] = static_cast<double>(raster.payload[i]);
  return v;
}

}  // namespace pulsepp
