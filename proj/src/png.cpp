// SPDX-License-Identifier: Apache-2.0

#include "xmodal/png.hpp"

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <string>

#include "xmodal/error.hpp"

namespace xmodal {

namespace {

void put_u32(std::string& out, std::uint32_t v) {
  out.push_back(static_cast<char>(v >> 24));
  out.push_back(static_cast<char>(v >> 16));
  out.push_back(static_cast<char>(v >> 8));
  out.push_back(static_cast<char>(v));
}

void chunk(std::string& out, const char* type, const std::string& data) {
  put_u32(out, static_cast<std::uint32_t>(data.size()));
  std::string body(type, 4);
  body += data;
  out += body;
  put_u32(out, static_cast<std::uint32_t>(
                   crc32(0L, reinterpret_cast<const Bytef*>(body.data()), static_cast<uInt>(body.size()))));
}

std::uint8_t to_byte(float v, double lo, double hi) {
  const double t = (static_cast<double>(v) - lo) / (hi - lo);
  return static_cast<std::uint8_t>(std::lround(std::clamp(t, 0.0, 1.0) * 255.0));
}

}  // namespace

void write_png(const GrayImage& image, const std::filesystem::path& path) {
  if (image.width <= 0 || image.height <= 0 ||
      image.pixels.size() != static_cast<std::size_t>(image.width) * static_cast<std::size_t>(image.height))
    throw UsageError("png: pixel buffer does not match dimensions");
  std::string raw;
  raw.reserve(static_cast<std::size_t>(image.height) * (static_cast<std::size_t>(image.width) + 1));
  for (int y = 0; y < image.height; ++y) {
    raw.push_back('\0');
    raw.append(reinterpret_cast<const char*>(image.pixels.data()) + static_cast<std::size_t>(y) * image.width,
               static_cast<std::size_t>(image.width));
  }
  uLongf len = compressBound(static_cast<uLong>(raw.size()));
  std::string packed(len, '\0');
  if (compress2(reinterpret_cast<Bytef*>(packed.data()), &len, reinterpret_cast<const Bytef*>(raw.data()),
                static_cast<uLong>(raw.size()), 9) != Z_OK)
    throw DataError("png: compression failed for " + path.string());
  packed.resize(len);

  std::string ihdr;
  put_u32(ihdr, static_cast<std::uint32_t>(image.width));
  put_u32(ihdr, static_cast<std::uint32_t>(image.height));
  ihdr += std::string("\x08\x00\x00\x00\x00", 5);
  std::string file("\x89PNG\r\n\x1a\n", 8);
  chunk(file, "IHDR", ihdr);
  chunk(file, "IDAT", packed);
  chunk(file, "IEND", "");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out.write(file.data(), static_cast<std::streamsize>(file.size()));
  if (!out) throw DataError("write failed: " + path.string());
}

GrayImage three_view(const Volume& v, double lo, double hi) {
  if (!(hi > lo)) hi = lo + 1.0;
  const Dims d = v.dims();
  const std::int64_t cz = d.d / 2, cy = d.h / 2, cx = d.w / 2;
  const std::int64_t tile_h = std::max(d.h, d.d);
  GrayImage img;
  img.width = static_cast<int>(d.w + d.w + d.h);
  img.height = static_cast<int>(tile_h);
  img.pixels.assign(static_cast<std::size_t>(img.width) * img.height, 0);
  auto set = [&](std::int64_t col, std::int64_t row, float value) {
    img.pixels[static_cast<std::size_t>(row * img.width + col)] = to_byte(value, lo, hi);
  };
  for (std::int64_t y = 0; y < d.h; ++y)  // axial
    for (std::int64_t x = 0; x < d.w; ++x) set(x, y, v.at(cz, y, x));
  for (std::int64_t z = 0; z < d.d; ++z)  // coronal, superior up
    for (std::int64_t x = 0; x < d.w; ++x) set(d.w + x, d.d - 1 - z, v.at(z, cy, x));
  for (std::int64_t z = 0; z < d.d; ++z)  // sagittal
    for (std::int64_t y = 0; y < d.h; ++y) set(2 * d.w + y, d.d - 1 - z, v.at(z, y, cx));
  return img;
}

GrayImage stack_rows(const std::vector<GrayImage>& rows) {
  GrayImage out;
  for (const auto& r : rows) {
    out.width = std::max(out.width, r.width);
    out.height += r.height;
  }
  out.pixels.assign(static_cast<std::size_t>(out.width) * out.height, 0);
  int y0 = 0;
  for (const auto& r : rows) {
    for (int y = 0; y < r.height; ++y)
      std::copy_n(r.pixels.begin() + static_cast<std::ptrdiff_t>(y) * r.width, r.width,
                  out.pixels.begin() + static_cast<std::ptrdiff_t>(y0 + y) * out.width);
    y0 += r.height;
  }
  return out;
}

}  // namespace xmodal
