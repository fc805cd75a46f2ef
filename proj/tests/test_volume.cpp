// SPDX-License-Identifier: Apache-2.0

#include <zlib.h>

#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

#include "doctest.h"
#include "test_util.hpp"
#include "xmodal/error.hpp"
#include "xmodal/volume.hpp"
#include "xmodal/volume_io.hpp"

using namespace xmodal;

namespace {

// Minimal NIfTI-1 image: 348-byte header, 4 extension bytes, int16 voxels.
std::string nifti_bytes(std::int16_t nx, std::int16_t ny, std::int16_t nz, const std::vector<std::int16_t>& vox,
                        float slope, float inter) {
  std::string buf(352, '\0');
  auto put = [&](std::size_t off, auto v) { std::memcpy(buf.data() + off, &v, sizeof(v)); };
  put(0, std::int32_t{348});
  put(40, std::int16_t{3});
  put(42, nx);
  put(44, ny);
  put(46, nz);
  put(48, std::int16_t{1});
  put(70, std::int16_t{4});
  put(72, std::int16_t{16});
  put(80, 2.0f);
  put(84, 3.0f);
  put(88, 4.0f);
  put(108, 352.0f);
  put(112, slope);
  put(116, inter);
  std::memcpy(buf.data() + 344, "n+1", 4);
  buf.append(reinterpret_cast<const char*>(vox.data()), vox.size() * sizeof(std::int16_t));
  return buf;
}

}  // namespace

TEST_SUITE("volume") {
  TEST_CASE("indexing is W fastest") {
    Volume v(Dims{2, 3, 4});
    v.at(1, 2, 3) = 7.0f;
    CHECK(v.values()[23] == 7.0f);
    CHECK(v.index(1, 0, 0) == 12);
  }

  TEST_CASE("intensity normalization maps range onto [-1, 1]") {
    Volume v(Dims{1, 1, 4}, std::vector<float>{0.0f, 5.0f, 10.0f, 12.0f});
    auto n = normalize_intensity(v, {0.0, 10.0});
    CHECK(n.values()[0] == -1.0f);
    CHECK(n.values()[1] == 0.0f);
    CHECK(n.values()[2] == 1.0f);
    CHECK(n.values()[3] == 1.0f);
    auto back = denormalize_intensity(n, {0.0, 10.0});
    CHECK(back.values()[1] == doctest::Approx(5.0));
    CHECK_THROWS_AS(normalize_intensity(v, {1.0, 1.0}), UsageError);
  }

  TEST_CASE("abeta normalization clamps to the unit interval") {
    CHECK(normalize_abeta(0.085, {0.05, 0.12}) == doctest::Approx(0.5));
    CHECK(normalize_abeta(0.01, {0.05, 0.12}) == 0.0);
    CHECK(normalize_abeta(0.5, {0.05, 0.12}) == 1.0);
  }

  TEST_CASE("normalization statistics span the samples") {
    PairedSample a{"s1", Volume(Dims{2, 2, 2}, 1.0f), Volume(Dims{2, 2, 2}, 3.0f), 0.06};
    PairedSample b{"s2", Volume(Dims{2, 2, 2}, 2.0f), Volume(Dims{2, 2, 2}, 0.5f), 0.1};
    b.mri.at(0, 0, 0) = -1.0f;
    std::vector<PairedSample> s{a, b};
    auto st = compute_normalization_stats(s);
    CHECK(st.mri == IntensityRange{-1.0, 2.0});
    CHECK(st.pet == IntensityRange{0.5, 3.0});
    CHECK(st.abeta.lo == doctest::Approx(0.06));
    CHECK(st.abeta.hi == doctest::Approx(0.1));
  }

  TEST_CASE("trilinear resampling hand values") {
    Volume v(Dims{1, 1, 2}, std::vector<float>{0.0f, 1.0f});
    auto up = resample_trilinear(v, Dims{1, 1, 4});
    // Output centres map to -0.25, 0.25, 0.75, 1.25 in source voxels.
    CHECK(up.values()[0] == doctest::Approx(0.0));
    CHECK(up.values()[1] == doctest::Approx(0.25));
    CHECK(up.values()[2] == doctest::Approx(0.75));
    CHECK(up.values()[3] == doctest::Approx(1.0));
    CHECK(up.spacing()[2] == doctest::Approx(0.5));

    auto r = test::random_volume(Dims{3, 4, 5}, 1);
    CHECK(resample_trilinear(r, r.dims()) == r);
    Volume ramp(Dims{4, 4, 4});
    for (int z = 0; z < 4; ++z)
      for (int y = 0; y < 4; ++y)
        for (int x = 0; x < 4; ++x) ramp.at(z, y, x) = static_cast<float>(z + 2 * y + 3 * x);
    auto down = resample_trilinear(ramp, Dims{2, 2, 2});
    CHECK(down.at(0, 0, 0) == doctest::Approx(0.5 + 1.0 + 1.5));
    CHECK(down.at(1, 1, 1) == doctest::Approx(2.5 + 5.0 + 7.5));
  }

  TEST_CASE("broadcast and finiteness checks") {
    auto b = broadcast_scalar(0.3, Dims{2, 2, 2});
    for (float x : b.values()) CHECK(x == 0.3f);
    CHECK(broadcast_scalar(1.0, Shape{1, 2, 2, 2}).size() == 8);
    CHECK_THROWS(broadcast_scalar(std::numeric_limits<double>::quiet_NaN(), Dims{1, 1, 1}));
    Volume v(Dims{1, 1, 2});
    v.values()[1] = std::numeric_limits<float>::infinity();
    CHECK_THROWS_AS(require_finite(v, "v"), DataError);
  }

  TEST_CASE("pair validation") {
    PairedSample s{"s", Volume(Dims{2, 2, 2}), Volume(Dims{2, 2, 3}), 0.1};
    CHECK_THROWS_AS(validate(s), DataError);
    s.pet = Volume(Dims{2, 2, 2});
    CHECK_NOTHROW(validate(s));
    s.abeta_ratio = 0.0;
    CHECK_THROWS_AS(validate(s), DataError);
  }

  TEST_CASE("tensor conversion round trip") {
    auto v = test::random_volume(Dims{2, 3, 4}, 2);
    auto t = to_tensor<float>(v);
    CHECK(t.shape() == Shape{1, 1, 2, 3, 4});
    CHECK(from_tensor(t).values()[5] == v.values()[5]);
    CHECK(from_tensor(t) == v);
  }

  TEST_CASE("xvol round trip is exact") {
    auto dir = test::scratch_dir("volume_io");
    auto v = test::random_volume(Dims{3, 5, 7}, 3, -2.0, 2.0);
    v.set_spacing({1.5f, 2.0f, 2.5f});
    write_xvol(v, dir / "a.xvol");
    CHECK(read_xvol(dir / "a.xvol") == v);
    CHECK(read_volume(dir / "a.xvol") == v);
    std::ofstream(dir / "bad.xvol") << "nope";
    CHECK_THROWS_AS(read_xvol(dir / "bad.xvol"), DataError);
    CHECK_THROWS_AS(read_xvol(dir / "missing.xvol"), DataError);
  }

  TEST_CASE("NIfTI plain and gzip") {
    auto dir = test::scratch_dir("nifti");
    std::vector<std::int16_t> vox(2 * 3 * 4);
    for (std::size_t i = 0; i < vox.size(); ++i) vox[i] = static_cast<std::int16_t>(i);
    const auto bytes = nifti_bytes(4, 3, 2, vox, 0.5f, 1.0f);
    std::ofstream(dir / "a.nii", std::ios::binary) << bytes;
    gzFile gz = gzopen((dir / "a.nii.gz").string().c_str(), "wb");
    gzwrite(gz, bytes.data(), static_cast<unsigned>(bytes.size()));
    gzclose(gz);
    for (const char* name : {"a.nii", "a.nii.gz"}) {
      auto v = read_volume(dir / name);
      CHECK(v.dims() == Dims{2, 3, 4});
      CHECK(v.at(1, 2, 3) == doctest::Approx(23 * 0.5 + 1.0));
      CHECK(v.at(0, 1, 0) == doctest::Approx(4 * 0.5 + 1.0));
      CHECK(v.spacing()[0] == 4.0f);
      CHECK(v.spacing()[2] == 2.0f);
    }
    std::ofstream(dir / "short.nii", std::ios::binary) << bytes.substr(0, 100);
    CHECK_THROWS_AS(read_volume(dir / "short.nii"), DataError);
  }
}
