#include <zlib.h>

#include <string>

#include "plasmaviz/error.hpp"
#include "plasmaviz/io.hpp"

namespace plasmaviz {

namespace {

void put_u32_be(Bytes& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 24));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

void put_chunk(Bytes& out, const char (&type)[5], const Bytes& data) {
  put_u32_be(out, static_cast<std::uint32_t>(data.size()));
  const std::size_t crc_start = out.size();
  out.insert(out.end(), type, type + 4);
  out.insert(out.end(), data.begin(), data.end());
  const uLong crc = crc32(0L, out.data() + crc_start, static_cast<uInt>(out.size() - crc_start));
  put_u32_be(out, static_cast<std::uint32_t>(crc));
}

}  // namespace

Bytes write_png(std::size_t width, std::size_t height, std::span<const Rgb> pixels) {
  if (width == 0 || height == 0 || pixels.size() != width * height)
    throw Error(ErrorCode::invalid_argument, "PNG image needs width*height pixels and nonzero size");

  Bytes raw;
  raw.reserve(height * (1 + 3 * width));
  for (std::size_t y = 0; y < height; ++y) {
    raw.push_back(0);  // filter: none
    for (std::size_t x = 0; x < width; ++x) {
      const Rgb& p = pixels[y * width + x];
      raw.insert(raw.end(), p.begin(), p.end());
    }
  }
  uLongf packed_size = compressBound(static_cast<uLong>(raw.size()));
  Bytes packed(packed_size);
  if (compress2(packed.data(), &packed_size, raw.data(), static_cast<uLong>(raw.size()), 6) != Z_OK)
    throw Error(ErrorCode::io, "zlib compression failed");
  packed.resize(packed_size);

  Bytes out = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
  Bytes ihdr;
  put_u32_be(ihdr, static_cast<std::uint32_t>(width));
  put_u32_be(ihdr, static_cast<std::uint32_t>(height));
  ihdr.insert(ihdr.end(), {8, 2, 0, 0, 0});  // 8-bit, RGB, deflate, filter 0, no interlace
  put_chunk(out, "IHDR", ihdr);
  put_chunk(out, "IDAT", packed);
  put_chunk(out, "IEND", {});
  return out;
}

}  // namespace plasmaviz
