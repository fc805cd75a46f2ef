// SPDX-License-Identifier: Apache-2.0

#include <zlib.h>

#include <cstring>

#include "doctest.h"
#include "test_util.hpp"
#include "xmodal/png.hpp"

using namespace xmodal;

namespace {

std::uint32_t be32(const unsigned char* p) {
  return (std::uint32_t(p[0]) << 24) | (std::uint32_t(p[1]) << 16) | (std::uint32_t(p[2]) << 8) | p[3];
}

// Decoder for the unfiltered 8-bit grayscale subset; checks every CRC.
GrayImage decode(const std::string& file) {
  const auto* p = reinterpret_cast<const unsigned char*>(file.data());
  REQUIRE(file.size() > 8);
  REQUIRE(std::memcmp(p, "\x89PNG\r\n\x1a\n", 8) == 0);
  std::size_t off = 8;
  GrayImage img;
  std::string idat;
  bool ended = false;
  while (off + 12 <= file.size()) {
    const std::uint32_t len = be32(p + off);
    const std::string type(file, off + 4, 4);
    const std::uint32_t crc = be32(p + off + 8 + len);
    CHECK(crc == crc32(0, p + off + 4, len + 4));
    if (type == "IHDR") {
      img.width = static_cast<int>(be32(p + off + 8));
      img.height = static_cast<int>(be32(p + off + 12));
      CHECK(p[off + 16] == 8);
      CHECK(p[off + 17] == 0);
    } else if (type == "IDAT") {
      idat.append(file, off + 8, len);
    } else if (type == "IEND") {
      ended = true;
    }
    off += 12 + len;
  }
  CHECK(ended);
  std::vector<unsigned char> raw(static_cast<std::size_t>(img.height) * (img.width + 1));
  uLongf n = raw.size();
  REQUIRE(uncompress(raw.data(), &n, reinterpret_cast<const Bytef*>(idat.data()), idat.size()) == Z_OK);
  REQUIRE(n == raw.size());
  for (int y = 0; y < img.height; ++y) {
    CHECK(raw[static_cast<std::size_t>(y) * (img.width + 1)] == 0);
    for (int x = 0; x < img.width; ++x) img.pixels.push_back(raw[static_cast<std::size_t>(y) * (img.width + 1) + 1 + x]);
  }
  return img;
}

}  // namespace

TEST_SUITE("png") {
  TEST_CASE("written file decodes to the same pixels") {
    GrayImage img{5, 3, {}};
    for (int i = 0; i < 15; ++i) img.pixels.push_back(static_cast<std::uint8_t>(i * 17));
    auto dir = test::scratch_dir("png");
    write_png(img, dir / "a.png");
    auto back = decode(test::slurp(dir / "a.png"));
    CHECK(back.width == 5);
    CHECK(back.height == 3);
    CHECK(back.pixels == img.pixels);
  }

  TEST_CASE("three view layout") {
    Volume v(Dims{4, 6, 8});
    for (std::int64_t z = 0; z < 4; ++z)
      for (std::int64_t y = 0; y < 6; ++y)
        for (std::int64_t x = 0; x < 8; ++x) v.at(z, y, x) = static_cast<float>(z);
    auto img = three_view(v, 0.0, 3.0);
    CHECK(img.width == 8 + 8 + 6);
    CHECK(img.height == 6);
    CHECK(img.pixels[0] == 170);  // axial slice z=2
    CHECK(img.pixels[8] == 255);  // coronal top row is the most superior slice
    CHECK(img.pixels[3 * img.width + 8] == 0);
    CHECK(img.pixels[3 * img.width + 16] == 0);
  }

  TEST_CASE("rows stack with padding") {
    GrayImage a{2, 1, {1, 2}}, b{3, 2, {3, 4, 5, 6, 7, 8}};
    auto s = stack_rows({a, b});
    CHECK(s.width == 3);
    CHECK(s.height == 3);
    CHECK(s.pixels == std::vector<std::uint8_t>{1, 2, 0, 3, 4, 5, 6, 7, 8});
  }
}
