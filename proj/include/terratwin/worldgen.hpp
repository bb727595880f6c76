#pragma once
// Procedural world synthesis: fractal value-noise elevation, an independent
// moisture field, Horn hillshading, the palette-based terrain render, and the
// 16-bit height image encoding. All generators are pure functions of
// (seed, parameters); repeated calls are bit-identical.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>

#include "terratwin/classes.hpp"
#include "terratwin/errors.hpp"
#include "terratwin/grid.hpp"
#include "terratwin/parallel.hpp"
#include "terratwin/rng.hpp"

namespace terratwin::worldgen {

inline constexpr double kMinElevation = -4000.0; // meters
inline constexpr double kMaxElevation = 6000.0;  // meters
inline constexpr double kEarthCircumference = 40075017.0; // meters
inline constexpr double kPi = 3.14159265358979323846;

struct HeightField {
    Grid<double> elevation; // meters, sea level = 0
    double cell_size = 1.0; // meters per pixel at the equator

    int width() const noexcept { return elevation.width(); }
    int height() const noexcept { return elevation.height(); }
};

struct WorldRaster {
    HeightField height_field;
    Grid<double> moisture; // unitless in [0,1], same dimensions as elevation
    double lat_max = 80.0; // latitude extent is [-lat_max, +lat_max]
    std::uint64_t seed = 0;

    int width() const noexcept { return height_field.width(); }
    int height() const noexcept { return height_field.height(); }

    // Row 0 maps to +lat_max, the last row to -lat_max; affine in between.
    double latitude_of_row(double row) const noexcept {
        return lat_max * (1.0 - 2.0 * row / (height_field.height() - 1));
    }
    double longitude_of_col(double col) const noexcept {
        return -180.0 + (col + 0.5) * (360.0 / height_field.width());
    }
};

// --- value noise ---

// Integer-lattice hash to [0,1).
inline double noise_hash01(int xi, int yi, std::uint32_t seed) noexcept {
    std::uint32_t h = static_cast<std::uint32_t>(xi) * 0x27d4eb2dU ^
                      static_cast<std::uint32_t>(yi) * 0x85ebca6bU ^ seed * 0x9e3779b9U;
    h ^= h >> 16;
    h *= 0x7feb352dU;
    h ^= h >> 15;
    h *= 0x846ca68bU;
    h ^= h >> 16;
    return h * 0x1p-32;
}

inline double noise_fade(double t) noexcept { return t * t * (3.0 - 2.0 * t); }

// Bilinear value noise at continuous coordinates, in [0,1).
inline double value_noise(double u, double v, std::uint32_t seed) noexcept {
    const int x0 = static_cast<int>(std::floor(u));
    const int y0 = static_cast<int>(std::floor(v));
    const double tx = noise_fade(u - x0);
    const double ty = noise_fade(v - y0);
    const double v00 = noise_hash01(x0, y0, seed);
    const double v10 = noise_hash01(x0 + 1, y0, seed);
    const double v01 = noise_hash01(x0, y0 + 1, seed);
    const double v11 = noise_hash01(x0 + 1, y0 + 1, seed);
    const double a = v00 + (v10 - v00) * tx;
    const double b = v01 + (v11 - v01) * tx;
    return a + (b - a) * ty;
}

// Amplitude-normalized octave sum, in [0,1).
inline double fractal_noise(double u, double v, std::uint64_t seed, int octaves,
                            double persistence) noexcept {
    double amp = 1.0, sum = 0.0, norm = 0.0, freq = 1.0;
    for (int k = 0; k < octaves; ++k) {
        const std::uint32_t sk =
            static_cast<std::uint32_t>(mix_seed(seed, {static_cast<std::uint64_t>(k)}));
        sum += amp * value_noise(u * freq, v * freq, sk);
        norm += amp;
        amp *= persistence;
        freq *= 2.0;
    }
    return sum / norm;
}

// Octave-0 lattice cells across the larger image dimension.
inline constexpr double kHeightBaseCells = 4.0;
inline constexpr double kMoistureBaseCells = 3.0;
inline constexpr int kMoistureOctaves = 2;
inline constexpr double kMoisturePersistence = 0.5;

inline HeightField synth_height(std::uint64_t seed, int width, int height, int octaves,
                                double persistence, double sea_level_bias = 0.0) {
    if (width < 2 || height < 2)
        throw argument_error("synth_height: width and height must be >= 2");
    if (octaves < 1)
        throw argument_error("synth_height: octaves must be >= 1");
    if (!(persistence > 0.0 && persistence < 1.0))
        throw argument_error("synth_height: persistence must be in (0,1)");

    HeightField field;
    field.elevation = Grid<double>(width, height);
    field.cell_size = kEarthCircumference / width;
    const double scale = kHeightBaseCells / std::max(width, height);
    const std::uint64_t hs = mix_seed(seed, {streams::kHeight});
    parallel_for(height, [&](int y) {
        for (int x = 0; x < width; ++x) {
            const double n =
                fractal_noise((x + 0.5) * scale, (y + 0.5) * scale, hs, octaves, persistence);
            const double t = std::clamp(n + sea_level_bias, 0.0, 1.0);
            field.elevation.at(x, y) = kMinElevation + t * (kMaxElevation - kMinElevation);
        }
    });
    return field;
}

inline Grid<double> synth_moisture(std::uint64_t seed, int width, int height) {
    if (width < 2 || height < 2)
        throw argument_error("synth_moisture: width and height must be >= 2");
    Grid<double> out(width, height);
    const double scale = kMoistureBaseCells / std::max(width, height);
    const std::uint64_t ms = mix_seed(seed, {streams::kMoisture});
    parallel_for(height, [&](int y) {
        for (int x = 0; x < width; ++x)
            out.at(x, y) = fractal_noise((x + 0.5) * scale, (y + 0.5) * scale, ms,
                                         kMoistureOctaves, kMoisturePersistence);
    });
    return out;
}

inline WorldRaster synth_world(std::uint64_t seed, int width, int height, int octaves,
                               double persistence, double sea_level_bias, double lat_max) {
    if (!(lat_max > 0.0 && lat_max < 90.0))
        throw argument_error("synth_world: lat_max must be in (0,90)");
    WorldRaster world;
    world.height_field = synth_height(seed, width, height, octaves, persistence, sea_level_bias);
    world.moisture = synth_moisture(seed, width, height);
    world.lat_max = lat_max;
    world.seed = seed;
    return world;
}

// --- hillshade ---

// Central-difference gradient, one-sided at borders. Returns d(elevation)/dx
// in meters per meter for the given axis.
inline void gradient_at(const Grid<double>& e, int x, int y, double cell_size, double& gx,
                        double& gy) noexcept {
    const int w = e.width(), h = e.height();
    const int xl = std::max(0, x - 1), xr = std::min(w - 1, x + 1);
    const int yu = std::max(0, y - 1), yd = std::min(h - 1, y + 1);
    gx = (e.at(xr, y) - e.at(xl, y)) / ((xr - xl) * cell_size);
    gy = (e.at(x, yd) - e.at(x, yu)) / ((yd - yu) * cell_size);
}

// Horn-style shading: intensity = max(0, cos z cos s + sin z sin s cos(a - aspect)),
// z = 90 deg - sun_altitude, s = slope angle, a = azimuth clockwise from north.
inline Grid<double> hillshade(const HeightField& field, double azimuth_deg,
                              double sun_altitude_deg) {
    if (!(azimuth_deg >= 0.0 && azimuth_deg < 360.0))
        throw argument_error("hillshade: azimuth must be in [0,360)");
    if (!(sun_altitude_deg > 0.0 && sun_altitude_deg <= 90.0))
        throw argument_error("hillshade: sun altitude must be in (0,90]");
    if (!(field.cell_size > 0.0))
        throw argument_error("hillshade: cell_size must be positive");

    const double az = azimuth_deg * kPi / 180.0;
    const double zenith = (90.0 - sun_altitude_deg) * kPi / 180.0;
    const double cz = std::cos(zenith), sz = std::sin(zenith);
    const int w = field.width(), h = field.height();
    Grid<double> shade(w, h);
    parallel_for(h, [&](int y) {
        for (int x = 0; x < w; ++x) {
            double gx, gy;
            gradient_at(field.elevation, x, y, field.cell_size, gx, gy);
            // gy is the southward derivative; northward slope component is -gy.
            const double gn = -gy;
            const double mag = std::hypot(gx, gn);
            const double slope = std::atan(mag);
            // Downslope direction as azimuth (clockwise from north).
            const double aspect = mag > 0.0 ? std::atan2(-gx, -gn) : 0.0;
            const double v = cz * std::cos(slope) + sz * std::sin(slope) * std::cos(az - aspect);
            shade.at(x, y) = std::max(0.0, v);
        }
    });
    return shade;
}

// --- rendering ---

inline std::uint8_t round_channel(double v) noexcept {
    return static_cast<std::uint8_t>(std::clamp(std::floor(v + 0.5), 0.0, 255.0));
}

// rgb = round(palette[class] * (0.4 + 0.6 * shade)); Water keeps shade = 1.
inline TerrainImage render_terrain(const HeightField& field, const LabelMask& mask,
                                   const Grid<double>& shade) {
    if (!field.elevation.same_shape(mask) || !field.elevation.same_shape(shade))
        throw argument_error("render_terrain: input dimensions differ");
    const int w = field.width(), h = field.height();
    TerrainImage img(w, h);
    parallel_for(h, [&](int y) {
        for (int x = 0; x < w; ++x) {
            const std::uint8_t cls = mask.at(x, y);
            const Rgb base = labeler::kTerrainPalette[cls];
            const double s =
                cls == static_cast<std::uint8_t>(labeler::TerrainClass::Water) ? 1.0
                                                                               : shade.at(x, y);
            const double f = 0.4 + 0.6 * s;
            img.at(x, y) = Rgb{round_channel(base.r * f), round_channel(base.g * f),
                               round_channel(base.b * f)};
        }
    });
    return img;
}

// --- height image ---

struct HeightImage {
    Grid<std::uint16_t> pixels;
    double min_elevation = 0.0;
    double max_elevation = 0.0;
};

// Linear [min,max] -> [0,65535], round half up; min/max kept for inversion.
inline HeightImage height_to_image(const HeightField& field) {
    const auto [lo_it, hi_it] =
        std::minmax_element(field.elevation.cells().begin(), field.elevation.cells().end());
    const double lo = *lo_it, hi = *hi_it;
    if (!(lo < hi))
        throw degenerate_error("height_to_image: constant elevation field");
    HeightImage out;
    out.min_elevation = lo;
    out.max_elevation = hi;
    out.pixels = Grid<std::uint16_t>(field.width(), field.height());
    const double scale = 65535.0 / (hi - lo);
    for (std::size_t i = 0; i < field.elevation.size(); ++i) {
        const double v = (field.elevation[i] - lo) * scale;
        out.pixels[i] = static_cast<std::uint16_t>(std::clamp(std::floor(v + 0.5), 0.0, 65535.0));
    }
    return out;
}

inline double image_to_elevation(std::uint16_t v, double min_elevation, double max_elevation) {
    return min_elevation + v * (max_elevation - min_elevation) / 65535.0;
}

} // namespace terratwin::worldgen
