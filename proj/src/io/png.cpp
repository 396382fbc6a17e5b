#include "tubelet/io/png.hpp"

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "tubelet/io/binary.hpp"

namespace tubelet::io {

namespace {

void put_u32_be(std::vector<uint8_t>& out, uint32_t v) {
  for (int i = 3; i >= 0; --i) out.push_back(static_cast<uint8_t>((v >> (8 * i)) & 0xff));
}

void put_chunk(std::vector<uint8_t>& out, const char type[4], const std::vector<uint8_t>& body) {
  put_u32_be(out, static_cast<uint32_t>(body.size()));
  const size_t type_at = out.size();
  out.insert(out.end(), type, type + 4);
  out.insert(out.end(), body.begin(), body.end());
  const uint32_t crc = static_cast<uint32_t>(
      crc32(0L, out.data() + type_at, static_cast<uInt>(4 + body.size())));
  put_u32_be(out, crc);
}

void write_rgb_png(const std::vector<uint8_t>& rgb, int64_t H, int64_t W,
                   const std::string& path) {
  // scanlines with filter byte 0, zlib-compressed
  std::vector<uint8_t> raw;
  raw.reserve(static_cast<size_t>(H * (W * 3 + 1)));
  for (int64_t y = 0; y < H; ++y) {
    raw.push_back(0);
    raw.insert(raw.end(), rgb.begin() + y * W * 3, rgb.begin() + (y + 1) * W * 3);
  }
  uLongf comp_len = compressBound(static_cast<uLong>(raw.size()));
  std::vector<uint8_t> comp(comp_len);
  if (compress2(comp.data(), &comp_len, raw.data(), static_cast<uLong>(raw.size()), 6) != Z_OK) {
    throw DataError("png: deflate failed for '" + path + "'");
  }
  comp.resize(comp_len);

  std::vector<uint8_t> out = {0x89, 'P', 'N', 'G', 0x0d, 0x0a, 0x1a, 0x0a};
  std::vector<uint8_t> ihdr;
  put_u32_be(ihdr, static_cast<uint32_t>(W));
  put_u32_be(ihdr, static_cast<uint32_t>(H));
  ihdr.push_back(8);   // bit depth
  ihdr.push_back(2);   // color type RGB
  ihdr.push_back(0);   // compression
  ihdr.push_back(0);   // filter
  ihdr.push_back(0);   // interlace
  put_chunk(out, "IHDR", ihdr);
  put_chunk(out, "IDAT", comp);
  put_chunk(out, "IEND", {});
  write_file_bytes(path, out);
}

uint8_t to_byte(double v) {
  return static_cast<uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

void check_bands(const core::Tensor& frame, const std::array<int64_t, 3>& bands) {
  if (frame.rank() != 3) {
    throw ShapeError("png: expected a (C,H,W) frame, got " + core::shape_str(frame.shape));
  }
  for (int64_t b : bands) {
    if (b < 0 || b >= frame.shape[0]) {
      throw ConfigError("png: band index " + std::to_string(b) + " out of range [0," +
                        std::to_string(frame.shape[0]) + ")");
    }
  }
}

}  // namespace

void write_png(const core::Tensor& frame, const std::array<int64_t, 3>& band_triple,
               const std::string& path) {
  check_bands(frame, band_triple);
  const int64_t H = frame.shape[1], W = frame.shape[2];
  std::vector<uint8_t> rgb(static_cast<size_t>(H * W * 3));
  for (int64_t y = 0; y < H; ++y)
    for (int64_t x = 0; x < W; ++x)
      for (int c = 0; c < 3; ++c) {
        rgb[static_cast<size_t>((y * W + x) * 3 + c)] =
            to_byte(frame.at({band_triple[static_cast<size_t>(c)], y, x}));
      }
  write_rgb_png(rgb, H, W, path);
}

void write_error_png(const core::Tensor& pred, const core::Tensor& target,
                     const std::array<int64_t, 3>& band_triple, const std::string& path) {
  check_bands(pred, band_triple);
  core::require_same_shape(pred, target, "write_error_png");
  const int64_t H = pred.shape[1], W = pred.shape[2];
  std::vector<uint8_t> rgb(static_cast<size_t>(H * W * 3));
  for (int64_t y = 0; y < H; ++y)
    for (int64_t x = 0; x < W; ++x) {
      double e = 0.0;
      for (int64_t b : band_triple) {
        e += static_cast<double>(pred.at({b, y, x})) - static_cast<double>(target.at({b, y, x}));
      }
      e = std::clamp(e / 3.0, -1.0, 1.0);
      const double fade = 1.0 - std::abs(e);
      const size_t at = static_cast<size_t>((y * W + x) * 3);
      if (e >= 0) {  // toward red
        rgb[at] = 255;
        rgb[at + 1] = to_byte(fade);
        rgb[at + 2] = to_byte(fade);
      } else {  // toward blue
        rgb[at] = to_byte(fade);
        rgb[at + 1] = to_byte(fade);
        rgb[at + 2] = 255;
      }
    }
  write_rgb_png(rgb, H, W, path);
}

}  // namespace tubelet::io
