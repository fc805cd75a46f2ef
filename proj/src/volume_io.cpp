// SPDX-License-Identifier: Apache-2.0

#include "xmodal/volume_io.hpp"

#include <zlib.h>

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <memory>

#include "xmodal/error.hpp"

namespace xmodal {
namespace {

constexpr char kMagic[5] = {'X', 'V', 'O', 'L', '1'};

template <class U>
U byteswap(U v) {
  unsigned char b[sizeof(U)];
  std::memcpy(b, &v, sizeof(U));
  for (std::size_t i = 0; i < sizeof(U) / 2; ++i) std::swap(b[i], b[sizeof(U) - 1 - i]);
  std::memcpy(&v, b, sizeof(U));
  return v;
}

template <class U>
void put_le(std::ostream& os, U v) {
  if constexpr (std::endian::native == std::endian::big) v = byteswap(v);
  os.write(reinterpret_cast<const char*>(&v), sizeof(U));
}

template <class U>
U get_le(const unsigned char* p) {
  U v;
  std::memcpy(&v, p, sizeof(U));
  if constexpr (std::endian::native == std::endian::big) v = byteswap(v);
  return v;
}

std::string path_str(const std::filesystem::path& p) { return p.string(); }

}  // namespace

void write_xvol(const Volume& v, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw DataError("cannot open " + path_str(path) + " for writing");
  os.write(kMagic, sizeof(kMagic));
  const Dims d = v.dims();
  for (auto e : {d.d, d.h, d.w}) put_le<std::uint32_t>(os, static_cast<std::uint32_t>(e));
  for (float s : v.spacing()) put_le<float>(os, s);
  if constexpr (std::endian::native == std::endian::little) {
    os.write(reinterpret_cast<const char*>(v.data()),
             static_cast<std::streamsize>(v.size() * sizeof(float)));
  } else {
    for (float x : v.values()) put_le<float>(os, x);
  }
  if (!os) throw DataError("failed writing " + path_str(path));
}

Volume read_xvol(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open " + path_str(path));
  unsigned char header[5 + 12 + 12];
  if (!is.read(reinterpret_cast<char*>(header), sizeof(header)))
    throw DataError(path_str(path) + ": truncated XVOL1 header");
  if (std::memcmp(header, kMagic, sizeof(kMagic)) != 0)
    throw DataError(path_str(path) + ": not an XVOL1 file");
  Dims d{get_le<std::uint32_t>(header + 5), get_le<std::uint32_t>(header + 9),
         get_le<std::uint32_t>(header + 13)};
  if (d.d < 1 || d.h < 1 || d.w < 1) throw DataError(path_str(path) + ": zero dimension");
  std::array<float, 3> spacing{get_le<float>(header + 17), get_le<float>(header + 21),
                               get_le<float>(header + 25)};
  std::vector<float> data(static_cast<std::size_t>(d.voxels()));
  if (!is.read(reinterpret_cast<char*>(data.data()),
               static_cast<std::streamsize>(data.size() * sizeof(float))))
    throw DataError(path_str(path) + ": truncated voxel data");
  if constexpr (std::endian::native == std::endian::big)
    for (auto& x : data) x = byteswap(x);
  Volume v(d, std::move(data), spacing);
  require_finite(v, path_str(path));
  return v;
}

Volume read_nifti(const std::filesystem::path& path) {
  struct GzCloser {
    void operator()(gzFile f) const { gzclose(f); }
  };
  std::unique_ptr<gzFile_s, GzCloser> file(gzopen(path_str(path).c_str(), "rb"));
  if (!file) throw DataError("cannot open " + path_str(path));

  std::vector<unsigned char> bytes;
  unsigned char chunk[1 << 16];
  for (;;) {
    const int got = gzread(file.get(), chunk, sizeof(chunk));
    if (got < 0) throw DataError(path_str(path) + ": read error");
    if (got == 0) break;
    bytes.insert(bytes.end(), chunk, chunk + got);
  }
  if (bytes.size() < 348) throw DataError(path_str(path) + ": truncated NIfTI header");

  bool swap = false;
  std::int32_t sizeof_hdr;
  std::memcpy(&sizeof_hdr, bytes.data(), 4);
  if (sizeof_hdr != 348) {
    swap = byteswap(sizeof_hdr) == 348;
    if (!swap) throw DataError(path_str(path) + ": not a NIfTI-1 file");
  }
  auto rd = [&](std::size_t off, auto tag) {
    using U = decltype(tag);
    U v;
    std::memcpy(&v, bytes.data() + off, sizeof(U));
    return swap ? byteswap(v) : v;
  };
  const std::int16_t ndim = rd(40, std::int16_t{});
  if (ndim < 1 || ndim > 7) throw DataError(path_str(path) + ": invalid dim[0]");
  std::int64_t ext[3] = {1, 1, 1};
  for (int i = 0; i < std::min<int>(ndim, 3); ++i) ext[i] = rd(42 + 2 * i, std::int16_t{});
  for (int i = 3; i < ndim; ++i)
    if (rd(42 + 2 * i, std::int16_t{}) > 1)
      throw DataError(path_str(path) + ": only single 3-D volumes are supported");
  const std::int16_t datatype = rd(70, std::int16_t{});
  const std::array<float, 3> spacing{std::abs(rd(88, float{})), std::abs(rd(84, float{})),
                                     std::abs(rd(80, float{}))};
  const auto vox_offset = static_cast<std::size_t>(rd(108, float{}));
  float slope = rd(112, float{});
  const float inter = rd(116, float{});
  if (slope == 0.0f || !std::isfinite(slope)) slope = 1.0f;

  const Dims dims{ext[2], ext[1], ext[0]};
  const auto count = static_cast<std::size_t>(dims.voxels());
  std::size_t width = 0;
  switch (datatype) {
    case 2: case 256: width = 1; break;           // uint8, int8
    case 4: case 512: width = 2; break;           // int16, uint16
    case 8: case 16: case 768: width = 4; break;  // int32, float32, uint32
    case 64: width = 8; break;                    // float64
    default:
      throw DataError(path_str(path) + ": unsupported NIfTI datatype " + std::to_string(datatype));
  }
  if (bytes.size() < vox_offset + count * width) throw DataError(path_str(path) + ": truncated voxel data");

  std::vector<float> data(count);
  const unsigned char* p = bytes.data() + vox_offset;
  for (std::size_t i = 0; i < count; ++i, p += width) {
    double x = 0.0;
    auto load = [&](auto tag) {
      using U = decltype(tag);
      U v;
      std::memcpy(&v, p, sizeof(U));
      return swap ? byteswap(v) : v;
    };
    switch (datatype) {
      case 2: x = *p; break;
      case 256: x = static_cast<std::int8_t>(*p); break;
      case 4: x = load(std::int16_t{}); break;
      case 512: x = load(std::uint16_t{}); break;
      case 8: x = load(std::int32_t{}); break;
      case 768: x = load(std::uint32_t{}); break;
      case 16: x = load(float{}); break;
      case 64: x = load(double{}); break;
    }
    data[i] = static_cast<float>(x * slope + inter);
  }
  Volume v(dims, std::move(data), spacing);
  require_finite(v, path_str(path));
  return v;
}

Volume read_volume(const std::filesystem::path& path) {
  const std::string name = path.filename().string();
  auto ends_with = [&](std::string_view suffix) {
    return name.size() >= suffix.size() && name.compare(name.size() - suffix.size(), suffix.size(), suffix) == 0;
  };
  if (ends_with(".nii") || ends_with(".nii.gz")) return read_nifti(path);
  return read_xvol(path);
}

}  // namespace xmodal
