#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pulsepp/types.hpp"

namespace pulsepp {

/// Binary raster: magic "LMFR", u32 width/height/channels (little-endian),
/// float32 payload, trailing CRC32.
struct FloatRaster {
  std::uint32_t width = 0;
  std::uint32_t height = 0;
  std::uint32_t channels = 1;
  std::vector<float> payload;  // length width*height*channels
};

void raster_write(const std::string& path, const FloatRaster& raster);
FloatRaster raster_read(const std::string& path);

/// 16-bit PGM export; [0,1] quantized to [0, 65535] with rounding.
void pgm_export(const std::string& path, const FloatRaster& raster);

FloatRaster raster_from_image(const ObjectImage& img);
ObjectImage image_from_raster(const FloatRaster& raster);

FloatRaster raster_from_vector(const Vector& v, int width, int height,
                               int channels = 1);
Vector vector_from_raster(const FloatRaster& raster);

}  // namespace pulsepp
