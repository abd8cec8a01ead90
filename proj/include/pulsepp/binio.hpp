#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace pulsepp {

/// Little-endian byte buffer writers/readers for the binary file formats.
class ByteWriter {
 public:
  void u16(std::uint16_t v) { raw(&v, 2); }
  void u32(std::uint32_t v) { raw(&v, 4); }
  void u64(std::uint64_t v) { raw(&v, 8); }
  void f32(float v) { raw(&v, 4); }
  void f64(double v) { raw(&v, 8); }
  void bytes(const void* p, std::size_t n) {
    const char* c = static_cast<const char*>(p);
    buf_.insert(buf_.end(), c, c + n);
  }
  void magic(const char tag[4]) { bytes(tag, 4); }

  const std::vector<char>& data() const { return buf_; }

 private:
  void raw(const void* p, std::size_t n) {
    // Integers and IEEE floats are stored little-endian; this memcpy path
    // assumes a little-endian host.
    static_assert(sizeof(float) == 4 && sizeof(double) == 8);
    bytes(p, n);
  }
  std::vector<char> buf_;
};

class ByteReader {
 public:
  explicit ByteReader(std::vector<char> data) : buf_(std::move(data)) {}

  std::uint16_t u16() { return scalar<std::uint16_t>(); }
  std::uint32_t u32() { return scalar<std::uint32_t>(); }
  std::uint64_t u64() { return scalar<std::uint64_t>(); }
  float f32() { return scalar<float>(); }
  double f64() { return scalar<double>(); }
  void bytes(void* out, std::size_t n) {
    if (pos_ + n > buf_.size())
      throw std::runtime_error("binary file truncated");
    std::memcpy(out, buf_.data() + pos_, n);
    pos_ += n;
  }
  void expect_magic(const char tag[4], const std::string& what) {
    char got[4];
    bytes(got, 4);
    if (std::memcmp(got, tag, 4) != 0)
      throw std::runtime_error("bad magic bytes in " + what);
  }
  std::size_t position() const { return pos_; }
  std::size_t size() const { return buf_.size(); }
  const std::vector<char>& data() const { return buf_; }

 private:
  template <typename T>
  T scalar() {
    T v;
    bytes(&v, sizeof(T));
    return v;
  }
  std::vector<char> buf_;
  std::size_t pos_ = 0;
};

inline void write_file(const std::string& path, const std::vector<char>& b) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out.write(b.data(), static_cast<std::streamsize>(b.size()));
  if (!out) throw std::runtime_error("write failed: " + path);
}

inline std::vector<char> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open for reading: " + path);
  return std::vector<char>((std::istreambuf_iterator<char>(in)),
                           std::istreambuf_iterator<char>());
}

}  // namespace pulsepp
