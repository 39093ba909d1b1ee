#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>

#include <gtest/gtest.h>

#include "jasgan/io.hpp"
#include "jasgan/phantom.hpp"

using namespace jasgan;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const auto p = fs::temp_directory_path() / ("jasgan_io_" + name);
    fs::remove_all(p);
    return p;
}

} // namespace

TEST(Io, GridRoundTripPreservesEverything) {
    std::mt19937_64 rng(1);
    std::normal_distribution<float> g(0.0f, 2.0f);
    const auto dir = scratch("roundtrip");
    for (int trial = 0; trial < 5; ++trial) {
        const Dims d{1 + std::int64_t(rng() % 4), 1 + std::int64_t(rng() % 9), 1 + std::int64_t(rng() % 9)};
        Volume v{Grid3<float>(d), {0.5 + trial, 1.25, 2.0}, "vol" + std::to_string(trial)};
        Mask m(d);
        for (std::size_t i = 0; i < v.data.size(); ++i) v.data[i] = g(rng), m[i] = rng() % 2;
        io::write_volume(dir / "img", v);
        io::write_grid(dir / "mask", m, v.spacing, "atrium", v.id);
        EXPECT_EQ(io::read_volume(dir / "img"), v);
        EXPECT_EQ(io::read_mask(dir / "mask"), m);
    }
}

TEST(Io, SidecarAndByteLayout) {
    const auto dir = scratch("layout");
    Volume v{Grid3<float>({1, 1, 2}), {3.0, 2.0, 1.0}, "x"};
    v.data[0] = 1.0f;
    v.data[1] = -2.5f;
    io::write_volume(dir / "img", v);
    const auto side = io::read_json(dir / "img.json");
    EXPECT_EQ(side["dims"], nlohmann::json({1, 1, 2}));
    EXPECT_EQ(side["spacing"], nlohmann::json({3.0, 2.0, 1.0}));
    EXPECT_EQ(side["dtype"], "float32");
    EXPECT_EQ(side["role"], "image");
    std::ifstream in(dir / "img.raw", std::ios::binary);
    unsigned char bytes[8];
    in.read(reinterpret_cast<char*>(bytes), 8);
    // 1.0f = 0x3f800000, stored little-endian.
    EXPECT_EQ(bytes[0], 0x00);
    EXPECT_EQ(bytes[3], 0x3f);
    EXPECT_EQ(bytes[2], 0x80);
    EXPECT_EQ(fs::file_size(dir / "img.raw"), 8u);
}

TEST(Io, Errors) {
    const auto dir = scratch("errors");
    EXPECT_THROW(io::read_volume(dir / "missing"), MissingInputError);
    Volume v{Grid3<float>({2, 2, 2}, 1.0f), {}, "x"};
    io::write_volume(dir / "img", v);
    fs::resize_file(dir / "img.raw", 4);
    EXPECT_THROW(io::read_volume(dir / "img"), IoError);
    EXPECT_THROW(io::read_mask(dir / "img"), ConfigError);
    io::write_text(dir / "bad.json", "{not json");
    EXPECT_THROW(io::read_json(dir / "bad.json"), ConfigError);
}

TEST(Io, SampleAndManifest) {
    const auto dir = scratch("sample");
    PhantomConfig c;
    c.dims = {10, 32, 32};
    c.atrium_radius_mm = {8, 11};
    c.atrium_radius_z_mm = {2.5, 3.0};
    c.wall_thickness_vox = {1, 1};
    c.scar_radius_mm = {1.5, 2.5};
    const auto p = generate_phantom(c);
    const io::SampleRecord rec{"s0000", "train", 42};
    io::write_sample(dir, rec, p.volume, p.labels);
    io::write_json(dir / "manifest.json", io::manifest_json({rec}, "abc"));
    std::string hash;
    const auto recs = io::read_manifest(dir, &hash);
    ASSERT_EQ(recs.size(), 1u);
    EXPECT_EQ(recs[0].seed, 42u);
    EXPECT_EQ(hash, "abc");
    const auto s = io::read_sample(dir, recs[0]);
    EXPECT_EQ(s.volume.data, p.volume.data);
    EXPECT_EQ(s.labels, p.labels);
}
