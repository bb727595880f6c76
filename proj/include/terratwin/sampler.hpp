#pragma once
// Patch sampling: latitude-corrected crops from the world raster, ocean
// rejection, dataset assembly, and the on-disk dataset layout
// (terrain_*.ppm / height_*.pgm / labels_*.pgm + manifest.txt).

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "terratwin/errors.hpp"
#include "terratwin/grid.hpp"
#include "terratwin/labeler.hpp"
#include "terratwin/netpbm.hpp"
#include "terratwin/parallel.hpp"
#include "terratwin/rng.hpp"
#include "terratwin/worldgen.hpp"

namespace terratwin::sampler {

// cos of an angle in degrees, via double-double reduction of pi/180 so that
// special angles come out exact (cos_deg(60) == 0.5, cos_deg(0) == 1).
inline double cos_deg(double deg) noexcept {
    constexpr double kDegHi = 0x1.1df46a2529d39p-6; // nearest double to pi/180
    constexpr double kDegLo = 2.9486522708701687e-19;
    const double r = deg * kDegHi;
    const double rl = std::fma(deg, kDegHi, -r) + deg * kDegLo;
    return std::cos(r) - std::sin(r) * rl;
}

// Equirectangular east-west stretch: 1/cos(latitude).
inline double rescale_factor(double lat_deg, double lat_max_deg) {
    if (!(lat_max_deg < 90.0))
        throw argument_error("rescale_factor: lat_max must be < 90");
    if (std::abs(lat_deg) > lat_max_deg)
        throw argument_error("rescale_factor: |latitude| exceeds lat_max");
    return 1.0 / cos_deg(lat_deg);
}

struct SamplerConfig {
    int n_patches = 5000;
    int base = 64;                       // patch edge, pixels
    double lat_max = 80.0;               // clamp for drawn centers, degrees
    double ocean_reject_threshold = 0.9; // reject when Water fraction exceeds this
    std::uint64_t seed = 0;

    void validate() const {
        if (n_patches < 1)
            throw argument_error("sampler: n_patches must be >= 1");
        if (base < 16 || base % 2 != 0)
            throw argument_error("sampler: base must be even and >= 16");
        if (!(lat_max > 0.0 && lat_max < 90.0))
            throw argument_error("sampler: lat_max must be in (0,90)");
        if (!(ocean_reject_threshold > 0.0 && ocean_reject_threshold <= 1.0))
            throw argument_error("sampler: ocean_reject_threshold must be in (0,1]");
    }
};

// A latitude-rescaled crop. terrain and mask are filled in by the dataset
// builder (labels are generated after rescaling); moisture is carried for
// the labeler but never persisted.
struct Patch {
    TerrainImage terrain;
    Grid<double> height; // meters
    Grid<double> moisture;
    LabelMask mask;
    double center_lat = 0.0;
    double center_lon = 0.0;
    double rescale = 1.0;
    std::uint64_t source_seed = 0;
};

// --- horizontal resampling (equirectangular distortion is purely zonal) ---

// Area-averaging column reduction: output column j covers the source
// interval [j*sw/ow, (j+1)*sw/ow) with fractional edge weights.
inline Grid<double> resample_columns_area(const Grid<double>& src, int out_w) {
    if (out_w < 1)
        throw argument_error("resample: output width must be >= 1");
    if (out_w == src.width())
        return src;
    Grid<double> out(out_w, src.height());
    const double ratio = static_cast<double>(src.width()) / out_w;
    for (int y = 0; y < src.height(); ++y) {
        for (int j = 0; j < out_w; ++j) {
            const double lo = j * ratio;
            const double hi = (j + 1) * ratio;
            double acc = 0.0;
            int x = static_cast<int>(std::floor(lo));
            double pos = lo;
            while (pos < hi - 1e-12) {
                const double next = std::min(hi, std::floor(pos + 1.0));
                acc += src.at(std::min(x, src.width() - 1), y) * (next - pos);
                pos = next;
                ++x;
            }
            out.at(j, y) = acc / ratio;
        }
    }
    return out;
}

// Nearest-neighbor column reduction for categorical grids.
inline LabelMask resample_columns_nearest(const LabelMask& src, int out_w) {
    if (out_w < 1)
        throw argument_error("resample: output width must be >= 1");
    if (out_w == src.width())
        return src;
    LabelMask out(out_w, src.height());
    const double ratio = static_cast<double>(src.width()) / out_w;
    for (int y = 0; y < src.height(); ++y)
        for (int j = 0; j < out_w; ++j) {
            const int x = std::min(src.width() - 1,
                                   static_cast<int>(std::floor((j + 0.5) * ratio)));
            out.at(j, y) = src.at(x, y);
        }
    return out;
}

namespace detail {
inline Grid<double> crop(const Grid<double>& src, int x0, int y0, int w, int h) {
    Grid<double> out(w, h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            out.at(x, y) = src.at(x0 + x, y0 + y);
    return out;
}
} // namespace detail

// Deterministic crop around a given center; the window is `base` rows tall
// and round(base * 1/cos(lat)) columns wide, then reduced back to base
// columns by area averaging.
inline Patch crop_patch_at(const worldgen::WorldRaster& world, int center_row, int center_col,
                           const SamplerConfig& cfg) {
    const int base = cfg.base;
    const int row0 = center_row - base / 2;
    if (row0 < 0 || row0 + base > world.height())
        throw argument_error("crop_patch_at: row window out of bounds");

    const double lat = world.latitude_of_row(center_row - 0.5);
    const double factor = rescale_factor(lat, cfg.lat_max);
    const int crop_w = static_cast<int>(std::llround(base * factor));
    const int col0 = center_col - crop_w / 2;
    if (col0 < 0 || col0 + crop_w > world.width())
        throw argument_error("crop_patch_at: column window out of bounds");

    Patch p;
    p.center_lat = lat;
    p.center_lon = world.longitude_of_col(col0 + (crop_w - 1) / 2.0);
    p.rescale = factor;
    p.source_seed = world.seed;
    p.height = resample_columns_area(
        detail::crop(world.height_field.elevation, col0, row0, crop_w, base), base);
    p.moisture =
        resample_columns_area(detail::crop(world.moisture, col0, row0, crop_w, base), base);
    return p;
}

// Draws a center uniformly over valid rows/columns (rejecting rows whose
// rescaled window does not fit or whose latitude exceeds the clamp).
inline Patch sample_patch(const worldgen::WorldRaster& world, Pcg32& rng,
                          const SamplerConfig& cfg) {
    cfg.validate();
    const int base = cfg.base;
    if (world.height() < base || world.width() < base)
        throw argument_error("sample_patch: world smaller than patch base");
    const int row_lo = base / 2;
    const int row_hi = world.height() - base + base / 2; // inclusive

    for (int attempt = 0; attempt < 1000; ++attempt) {
        const int rc =
            row_lo + static_cast<int>(rng.next_below(static_cast<std::uint32_t>(row_hi - row_lo + 1)));
        const double lat = world.latitude_of_row(rc - 0.5);
        if (std::abs(lat) > cfg.lat_max)
            continue;
        const double factor = rescale_factor(lat, cfg.lat_max);
        const int crop_w = static_cast<int>(std::llround(base * factor));
        if (crop_w > world.width())
            continue;
        const int col_lo = crop_w / 2;
        const int col_hi = world.width() - crop_w + crop_w / 2; // inclusive
        const int cc =
            col_lo + static_cast<int>(rng.next_below(static_cast<std::uint32_t>(col_hi - col_lo + 1)));
        return crop_patch_at(world, rc, cc, cfg);
    }
    throw exhaustion_error("sample_patch: no valid center after 1000 draws");
}

// True iff the Water fraction strictly exceeds the threshold.
inline bool is_ocean_only(const LabelMask& mask, double threshold) {
    if (!(threshold > 0.0 && threshold <= 1.0))
        throw argument_error("is_ocean_only: threshold must be in (0,1]");
    std::size_t water = 0;
    for (std::size_t i = 0; i < mask.size(); ++i)
        if (mask[i] == static_cast<std::uint8_t>(labeler::TerrainClass::Water))
            ++water;
    return static_cast<double>(water) / static_cast<double>(mask.size()) > threshold;
}

// --- dataset layout ---

inline std::string patch_file_name(const char* prefix, int index, const char* ext) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%s_%05d.%s", prefix, index, ext);
    return buf;
}

struct ManifestEntry {
    int index = 0;
    double center_lat = 0.0;
    double center_lon = 0.0;
    double rescale = 1.0;
    std::uint64_t label_jitter_seed = 0;
};

// Patch heights are encoded against the fixed world range so no per-patch
// sidecar is needed for inversion.
inline std::uint16_t encode_patch_height(double meters) noexcept {
    const double t =
        (meters - worldgen::kMinElevation) / (worldgen::kMaxElevation - worldgen::kMinElevation);
    return static_cast<std::uint16_t>(
        std::clamp(std::floor(t * 65535.0 + 0.5), 0.0, 65535.0));
}
inline double decode_patch_height(std::uint16_t v) noexcept {
    return worldgen::kMinElevation +
           v * (worldgen::kMaxElevation - worldgen::kMinElevation) / 65535.0;
}

inline void write_manifest(const std::filesystem::path& path,
                           const std::vector<ManifestEntry>& entries) {
    std::string text = "# index center_lat center_lon rescale_factor label_jitter_seed\n";
    for (const auto& e : entries) {
        char line[160];
        std::snprintf(line, sizeof line, "%d %.9f %.9f %.9f %llu\n", e.index, e.center_lat,
                      e.center_lon, e.rescale,
                      static_cast<unsigned long long>(e.label_jitter_seed));
        text += line;
    }
    io::write_text_atomic(path, text);
}

inline std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in)
        throw io_error("cannot open manifest " + path.string());
    std::vector<ManifestEntry> entries;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#')
            continue;
        std::istringstream ss(line);
        ManifestEntry e;
        unsigned long long seed = 0;
        if (!(ss >> e.index >> e.center_lat >> e.center_lon >> e.rescale >> seed))
            throw parse_error("malformed manifest line", line_no);
        e.label_jitter_seed = seed;
        entries.push_back(e);
    }
    return entries;
}

// Builds exactly cfg.n_patches accepted patches. Rejected ocean crops are
// redrawn (bounded at 10000 attempts per patch). Per-patch rng streams make
// the result independent of scheduling.
inline std::vector<ManifestEntry> build_dataset(const worldgen::WorldRaster& world,
                                                const SamplerConfig& cfg,
                                                const labeler::LabelerConfig& label_cfg,
                                                const std::filesystem::path& out_dir) {
    cfg.validate();
    label_cfg.validate();
    std::filesystem::create_directories(out_dir);
    std::vector<ManifestEntry> entries(static_cast<std::size_t>(cfg.n_patches));

    parallel_for(cfg.n_patches, [&](int i) {
        Pcg32 draw_rng = make_stream(cfg.seed, {streams::kPatch, static_cast<std::uint64_t>(i)});
        for (int attempt = 0;; ++attempt) {
            if (attempt >= 10000)
                throw exhaustion_error("build_dataset: patch " + std::to_string(i) +
                                       " rejected 10000 times (ocean-only world?)");
            Patch p = sample_patch(world, draw_rng, cfg);
            const std::uint64_t jitter_seed =
                mix_seed(label_cfg.seed, {streams::kLabel, static_cast<std::uint64_t>(i),
                                          static_cast<std::uint64_t>(attempt)});
            Pcg32 label_rng(jitter_seed, splitmix64(jitter_seed ^ 0x5bd1e995U));
            p.mask = labeler::pseudo_label(p.height, p.moisture, p.center_lat, label_cfg,
                                           label_rng);
            if (is_ocean_only(p.mask, cfg.ocean_reject_threshold))
                continue;

            worldgen::HeightField patch_field{p.height, world.height_field.cell_size};
            const Grid<double> shade = worldgen::hillshade(patch_field, 315.0, 45.0);
            p.terrain = worldgen::render_terrain(patch_field, p.mask, shade);

            io::write_netpbm(out_dir / patch_file_name("terrain", i, "ppm"),
                             io::to_pnm(p.terrain));
            Grid<std::uint16_t> h16(p.height.width(), p.height.height());
            for (std::size_t px = 0; px < p.height.size(); ++px)
                h16[px] = encode_patch_height(p.height[px]);
            io::write_netpbm(out_dir / patch_file_name("height", i, "pgm"), io::to_pnm(h16));
            io::write_netpbm(out_dir / patch_file_name("labels", i, "pgm"), io::to_pnm(p.mask));

            entries[static_cast<std::size_t>(i)] =
                ManifestEntry{i, p.center_lat, p.center_lon, p.rescale, jitter_seed};
            return;
        }
    });

    write_manifest(out_dir / "manifest.txt", entries);
    return entries;
}

// A dataset patch re-read from disk.
struct LoadedPatch {
    TerrainImage terrain;
    LabelMask mask;
    Grid<double> height; // meters (decoded)
    ManifestEntry meta;
};

inline LoadedPatch load_patch(const std::filesystem::path& dir, const ManifestEntry& e,
                              bool with_height) {
    LoadedPatch p;
    p.meta = e;
    p.terrain = io::rgb_from_pnm(io::read_netpbm(dir / patch_file_name("terrain", e.index, "ppm")));
    p.mask = io::gray8_from_pnm(io::read_netpbm(dir / patch_file_name("labels", e.index, "pgm")));
    if (!p.terrain.same_shape(p.mask))
        throw shape_error("dataset patch " + std::to_string(e.index) +
                          ": terrain/labels dimensions differ");
    for (std::size_t i = 0; i < p.mask.size(); ++i)
        if (p.mask[i] >= labeler::kNumClasses)
            throw parse_error("label value out of range in patch " + std::to_string(e.index),
                              i);
    if (with_height) {
        const Grid<std::uint16_t> h16 =
            io::gray16_from_pnm(io::read_netpbm(dir / patch_file_name("height", e.index, "pgm")));
        if (h16.width() != p.mask.width() || h16.height() != p.mask.height())
            throw shape_error("dataset patch " + std::to_string(e.index) +
                              ": height dimensions differ");
        p.height = Grid<double>(h16.width(), h16.height());
        for (std::size_t i = 0; i < h16.size(); ++i)
            p.height[i] = decode_patch_height(h16[i]);
    }
    return p;
}

inline std::vector<LoadedPatch> load_dataset(const std::filesystem::path& dir, bool with_height) {
    const auto entries = read_manifest(dir / "manifest.txt");
    std::vector<LoadedPatch> patches(entries.size());
    parallel_for(static_cast<int>(entries.size()), [&](int i) {
        patches[static_cast<std::size_t>(i)] =
            load_patch(dir, entries[static_cast<std::size_t>(i)], with_height);
    });
    return patches;
}

} // namespace terratwin::sampler
