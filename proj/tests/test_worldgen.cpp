#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "terratwin/rng.hpp"
#include "terratwin/worldgen.hpp"

using namespace terratwin;
using namespace terratwin::worldgen;

namespace {

// Independent scalar re-evaluation of the documented noise recipe, written
// out step by step; the frozen reference for the library generators.
double oracle_hash01(int xi, int yi, std::uint32_t seed) {
    std::uint32_t h = static_cast<std::uint32_t>(xi) * 0x27d4eb2dU ^
                      static_cast<std::uint32_t>(yi) * 0x85ebca6bU ^ seed * 0x9e3779b9U;
    h ^= h >> 16;
    h *= 0x7feb352dU;
    h ^= h >> 15;
    h *= 0x846ca68bU;
    h ^= h >> 16;
    return h / 4294967296.0;
}

double oracle_value_noise(double u, double v, std::uint32_t seed) {
    const int x0 = static_cast<int>(std::floor(u));
    const int y0 = static_cast<int>(std::floor(v));
    const double fx = u - x0, fy = v - y0;
    const double tx = fx * fx * (3.0 - 2.0 * fx);
    const double ty = fy * fy * (3.0 - 2.0 * fy);
    const double v00 = oracle_hash01(x0, y0, seed);
    const double v10 = oracle_hash01(x0 + 1, y0, seed);
    const double v01 = oracle_hash01(x0, y0 + 1, seed);
    const double v11 = oracle_hash01(x0 + 1, y0 + 1, seed);
    return (v00 + (v10 - v00) * tx) * (1.0 - ty) + (v01 + (v11 - v01) * tx) * ty;
}

double oracle_height_at(std::uint64_t seed, int w, int h, int octaves, double persistence,
                        double bias, int x, int y) {
    const double scale = 4.0 / std::max(w, h);
    const std::uint64_t hs = mix_seed(seed, {streams::kHeight});
    double amp = 1.0, sum = 0.0, norm = 0.0, freq = 1.0;
    for (int k = 0; k < octaves; ++k) {
        const std::uint32_t sk =
            static_cast<std::uint32_t>(mix_seed(hs, {static_cast<std::uint64_t>(k)}));
        sum += amp * oracle_value_noise((x + 0.5) * scale * freq, (y + 0.5) * scale * freq, sk);
        norm += amp;
        amp *= persistence;
        freq *= 2.0;
    }
    const double t = std::clamp(sum / norm + bias, 0.0, 1.0);
    return -4000.0 + t * 10000.0;
}

HeightField flat_field(int w, int h, double elevation, double cell = 1.0) {
    HeightField f;
    f.elevation = Grid<double>(w, h, elevation);
    f.cell_size = cell;
    return f;
}

} // namespace

TEST_CASE("synth_height is deterministic per seed") {
    const HeightField a = synth_height(42, 64, 64, 4, 0.5);
    const HeightField b = synth_height(42, 64, 64, 4, 0.5);
    CHECK(a.elevation == b.elevation);
    const HeightField c = synth_height(43, 64, 64, 4, 0.5);
    CHECK_FALSE(a.elevation == c.elevation);
}

TEST_CASE("synth_height matches the scalar reference evaluation") {
    const HeightField f = synth_height(42, 4, 4, 1, 0.5);
    for (int y = 0; y < 4; ++y)
        for (int x = 0; x < 4; ++x)
            CHECK(f.elevation.at(x, y) ==
                  Catch::Approx(oracle_height_at(42, 4, 4, 1, 0.5, 0.0, x, y)).margin(1e-12));
    // multiple octaves too
    const HeightField g = synth_height(7, 8, 6, 3, 0.4, 0.1);
    for (int y = 0; y < 6; ++y)
        for (int x = 0; x < 8; ++x)
            CHECK(g.elevation.at(x, y) ==
                  Catch::Approx(oracle_height_at(7, 8, 6, 3, 0.4, 0.1, x, y)).margin(1e-12));
}

TEST_CASE("large sea_level_bias removes the ocean") {
    const HeightField f = synth_height(42, 16, 16, 3, 0.5, 10.0);
    for (double e : f.elevation.cells())
        CHECK(e > 0.0);
}

TEST_CASE("synth_height rejects invalid arguments") {
    CHECK_THROWS_AS(synth_height(1, 1, 4, 2, 0.5), argument_error);
    CHECK_THROWS_AS(synth_height(1, 4, 4, 0, 0.5), argument_error);
    CHECK_THROWS_AS(synth_height(1, 4, 4, 2, 1.0), argument_error);
}

TEST_CASE("synth_moisture is deterministic, in range, and matches the oracle") {
    const Grid<double> a = synth_moisture(7, 4, 4);
    const Grid<double> b = synth_moisture(7, 4, 4);
    CHECK(a == b);
    for (double v : a.cells()) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
    }
    // scalar oracle for the documented moisture recipe
    const std::uint64_t ms = mix_seed(7, {streams::kMoisture});
    for (int y = 0; y < 4; ++y)
        for (int x = 0; x < 4; ++x) {
            const double scale = 3.0 / 4.0;
            double amp = 1.0, sum = 0.0, norm = 0.0, freq = 1.0;
            for (int k = 0; k < 2; ++k) {
                const std::uint32_t sk =
                    static_cast<std::uint32_t>(mix_seed(ms, {static_cast<std::uint64_t>(k)}));
                sum += amp * oracle_value_noise((x + 0.5) * scale * freq,
                                                (y + 0.5) * scale * freq, sk);
                norm += amp;
                amp *= 0.5;
                freq *= 2.0;
            }
            CHECK(a.at(x, y) == Catch::Approx(sum / norm).margin(1e-12));
        }
    CHECK_THROWS_AS(synth_moisture(7, 1, 4), argument_error);
}

TEST_CASE("moisture differs from the height stream") {
    const HeightField f = synth_height(11, 32, 32, 1, 0.5);
    const Grid<double> m = synth_moisture(11, 32, 32);
    // same seed, different derived streams: fields must not be correlated copies
    bool any_diff = false;
    for (int i = 0; i < 32 * 32; ++i)
        if (std::abs((f.elevation[i] + 4000.0) / 10000.0 - m[i]) > 1e-6)
            any_diff = true;
    CHECK(any_diff);
}

TEST_CASE("hillshade of a flat field is cos of the zenith angle") {
    const HeightField f = flat_field(8, 8, 123.0, 30.0);
    const Grid<double> s = hillshade(f, 315.0, 45.0);
    const double expect = std::cos(45.0 * kPi / 180.0);
    for (double v : s.cells())
        CHECK(v == Catch::Approx(expect).margin(1e-12));
}

TEST_CASE("zenith sun gives cos(slope)") {
    // ramp: elevation = 2x, cell 1 -> slope angle atan(2) everywhere
    HeightField f = flat_field(6, 6, 0.0, 1.0);
    for (int y = 0; y < 6; ++y)
        for (int x = 0; x < 6; ++x)
            f.elevation.at(x, y) = 2.0 * x;
    const Grid<double> s = hillshade(f, 0.0, 90.0);
    for (double v : s.cells())
        CHECK(v == Catch::Approx(std::cos(std::atan(2.0))).margin(1e-12));
}

TEST_CASE("east-facing ramp is lit from the east, dark from the west") {
    // elevation falls to the east: downslope azimuth 90 deg, slope 45 deg.
    HeightField f = flat_field(3, 3, 0.0, 1.0);
    for (int y = 0; y < 3; ++y)
        for (int x = 0; x < 3; ++x)
            f.elevation.at(x, y) = -static_cast<double>(x);
    const Grid<double> east = hillshade(f, 90.0, 45.0);
    const Grid<double> west = hillshade(f, 270.0, 45.0);
    // hand evaluation at the center pixel: s = 45deg, z = 45deg,
    // az=90: cos45*cos45 + sin45*sin45*cos(0) = 1; az=270: cos(180) term -> 0
    CHECK(east.at(1, 1) == Catch::Approx(1.0).margin(1e-12));
    CHECK(west.at(1, 1) == Catch::Approx(0.0).margin(1e-12));
    CHECK(east.at(1, 1) > west.at(1, 1));
}

TEST_CASE("hillshade intensities stay in [0,1] on random fields") {
    Pcg32 rng(5);
    for (int trial = 0; trial < 5; ++trial) {
        HeightField f = flat_field(17, 9, 0.0, 3.0);
        for (double& e : f.elevation.cells())
            e = rng.uniform(-4000.0, 6000.0);
        const double az = rng.uniform(0.0, 360.0 - 1e-9);
        const double alt = rng.uniform(1.0, 90.0);
        for (double v : hillshade(f, az, alt).cells()) {
            CHECK(v >= 0.0);
            CHECK(v <= 1.0);
        }
    }
}

TEST_CASE("hillshade validates arguments") {
    const HeightField f = flat_field(4, 4, 0.0, 1.0);
    CHECK_THROWS_AS(hillshade(f, 360.0, 45.0), argument_error);
    CHECK_THROWS_AS(hillshade(f, 0.0, 0.0), argument_error);
    HeightField bad = f;
    bad.cell_size = 0.0;
    CHECK_THROWS_AS(hillshade(bad, 0.0, 45.0), argument_error);
}

TEST_CASE("render_terrain reproduces the palette exactly") {
    const HeightField f = flat_field(7, 1, 10.0);
    Grid<double> shade(7, 1, 1.0);
    LabelMask mask(7, 1);
    for (int c = 0; c < 7; ++c)
        mask.at(c, 0) = static_cast<std::uint8_t>(c);
    const TerrainImage img = render_terrain(f, mask, shade);
    CHECK(img.at(0, 0) == Rgb{17, 141, 215});
    CHECK(img.at(1, 0) == Rgb{225, 227, 155});
    CHECK(img.at(2, 0) == Rgb{127, 173, 123});
    CHECK(img.at(3, 0) == Rgb{185, 122, 87});
    CHECK(img.at(4, 0) == Rgb{230, 200, 181});
    CHECK(img.at(5, 0) == Rgb{150, 150, 150});
    CHECK(img.at(6, 0) == Rgb{193, 190, 175});
}

TEST_CASE("render_terrain shading and the water exception") {
    const HeightField f = flat_field(2, 1, 10.0);
    Grid<double> shade(2, 1, 0.0);
    LabelMask mask(2, 1);
    mask.at(0, 0) = static_cast<std::uint8_t>(labeler::TerrainClass::Grassland);
    mask.at(1, 0) = static_cast<std::uint8_t>(labeler::TerrainClass::Water);
    const TerrainImage img = render_terrain(f, mask, shade);
    // round(0.4 * (225,227,155)) = (90, 91, 62)
    CHECK(img.at(0, 0) == Rgb{90, 91, 62});
    // water ignores shade
    CHECK(img.at(1, 0) == Rgb{17, 141, 215});

    Grid<double> wrong(3, 1, 1.0);
    CHECK_THROWS_AS(render_terrain(f, mask, wrong), argument_error);
}

TEST_CASE("height_to_image endpoints, midpoint, and inversion") {
    HeightField f = flat_field(3, 1, 0.0);
    f.elevation.at(0, 0) = -100.0;
    f.elevation.at(1, 0) = 0.0;
    f.elevation.at(2, 0) = 100.0;
    const HeightImage img = height_to_image(f);
    CHECK(img.pixels.at(0, 0) == 0);
    CHECK(img.pixels.at(2, 0) == 65535);
    // midpoint maps to 32767.5, rounded half up
    CHECK(img.pixels.at(1, 0) == 32768);
    CHECK(img.min_elevation == -100.0);
    CHECK(img.max_elevation == 100.0);
}

TEST_CASE("height image round trip changes no pixel") {
    Pcg32 rng(17);
    HeightField f = flat_field(16, 16, 0.0);
    for (double& e : f.elevation.cells())
        e = rng.uniform(-4000.0, 6000.0);
    const HeightImage img = height_to_image(f);
    HeightField back = f;
    for (std::size_t i = 0; i < f.elevation.size(); ++i)
        back.elevation[i] =
            image_to_elevation(img.pixels[i], img.min_elevation, img.max_elevation);
    const HeightImage img2 = height_to_image(back);
    CHECK(img2.pixels == img.pixels);
}

TEST_CASE("height encoding is monotone") {
    Pcg32 rng(23);
    HeightField f = flat_field(32, 4, 0.0);
    for (double& e : f.elevation.cells())
        e = rng.uniform(-4000.0, 6000.0);
    const HeightImage img = height_to_image(f);
    for (std::size_t i = 0; i < f.elevation.size(); ++i)
        for (std::size_t j = 0; j < f.elevation.size(); ++j)
            if (f.elevation[i] < f.elevation[j])
                CHECK(img.pixels[i] <= img.pixels[j]);
}

TEST_CASE("constant field cannot be encoded") {
    CHECK_THROWS_AS(height_to_image(flat_field(4, 4, 5.0)), degenerate_error);
}
