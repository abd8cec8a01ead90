#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

namespace pulsepp {

/// CRC-32 (IEEE 802.3 polynomial). Used as the trailing integrity word of
/// the binary file formats in this project.
std::uint32_t crc32(const void* data, std::size_t size,
                    std::uint32_t seed = 0u);

/// 64-bit FNV-1a content hash, reported as 16 hex digits. Used to key
/// weight files and calibration caches in run manifests.
std::uint64_t fnv1a64(const void* data, std::size_t size);

std::string hash_hex(std::uint64_t h);

/// FNV-1a hash of an entire file. Throws std::runtime_error on I/O failure.
std::uint64_t hash_file(const std::string& path);

}  // namespace pulsepp
