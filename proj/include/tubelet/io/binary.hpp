#pragma once

#include <cstdint>
#include <cstring>
#include <string>
#include <vector>

#include "tubelet/core/errors.hpp"
#include "tubelet/core/tensor.hpp"

namespace tubelet::io {

// Little-endian primitives shared by the RSTK and TBLT formats.

inline void put_u16(std::vector<uint8_t>& out, uint16_t v) {
  out.push_back(static_cast<uint8_t>(v & 0xff));
  out.push_back(static_cast<uint8_t>(v >> 8));
}

inline void put_u32(std::vector<uint8_t>& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<uint8_t>((v >> (8 * i)) & 0xff));
}

inline void put_f32(std::vector<uint8_t>& out, float v) {
  uint32_t bits;
  std::memcpy(&bits, &v, sizeof(bits));
  put_u32(out, bits);
}

class Reader {
 public:
  Reader(const uint8_t* data, size_t size, std::string context)
      : data_(data), size_(size), context_(std::move(context)) {}

  size_t remaining() const { return size_ - pos_; }
  size_t position() const { return pos_; }

  const uint8_t* take(size_t n) {
    if (remaining() < n) throw DataError(context_ + ": truncated file");
    const uint8_t* p = data_ + pos_;
    pos_ += n;
    return p;
  }

  uint8_t u8() { return *take(1); }

  uint16_t u16() {
    const uint8_t* p = take(2);
    return static_cast<uint16_t>(p[0] | (p[1] << 8));
  }

  uint32_t u32() {
    const uint8_t* p = take(4);
    return static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
           (static_cast<uint32_t>(p[2]) << 16) | (static_cast<uint32_t>(p[3]) << 24);
  }

  float f32() {
    uint32_t bits = u32();
    float v;
    std::memcpy(&v, &bits, sizeof(v));
    return v;
  }

 private:
  const uint8_t* data_;
  size_t size_;
  size_t pos_ = 0;
  std::string context_;
};

// One named float32 tensor entry: name length u16, name bytes, rank u8,
// extents u32 each, payload.
void put_tensor_entry(std::vector<uint8_t>& out, const std::string& name,
                      const core::Tensor& tensor);

struct TensorEntry {
  std::string name;
  core::Tensor tensor;
};

TensorEntry read_tensor_entry(Reader& r, const std::string& context);

std::vector<uint8_t> read_file_bytes(const std::string& path);
void write_file_bytes(const std::string& path, const std::vector<uint8_t>& bytes);

}  // namespace tubelet::io
