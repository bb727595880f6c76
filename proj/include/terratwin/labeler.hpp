#pragma once
// Pseudo-labeling: per-pixel features, k-means clustering, the rule table
// mapping cluster centroids to terrain classes, threshold jitter, and the
// categorical mode filter. Also owns mask <-> color conversions.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "terratwin/classes.hpp"
#include "terratwin/errors.hpp"
#include "terratwin/grid.hpp"
#include "terratwin/rng.hpp"
#include "terratwin/worldgen.hpp"

namespace terratwin::labeler {

// Feature vector per pixel: (elevation/6000 in [-1,1], slope normalized by
// the patch 99th percentile in [0,1], |latitude|/90, moisture in [0,1]).
using Feature = std::array<double, 4>;

struct Thresholds {
    double slope_hill = 0.15;     // normalized slope
    double slope_mountain = 0.45; // normalized slope
    double elev_high = 1500.0;    // meters
    double moisture_dry = 0.25;
    double moisture_wet = 0.65;
    double tundra_lat = 66.5; // degrees
};

struct LabelerConfig {
    int k = 7;
    int kmeans_iters = 20;
    Thresholds thresholds;
    double jitter_frac = 0.10;
    std::uint64_t seed = 0;

    void validate() const {
        if (k < 1)
            throw argument_error("labeler: k must be >= 1");
        if (kmeans_iters < 1)
            throw argument_error("labeler: kmeans_iters must be >= 1");
        if (!(jitter_frac > 0.0 && jitter_frac < 0.5))
            throw argument_error("labeler: jitter_frac must be in (0,0.5)");
        if (!(thresholds.slope_hill < thresholds.slope_mountain))
            throw argument_error("labeler: slope_hill must be < slope_mountain");
        if (!(thresholds.moisture_dry < thresholds.moisture_wet))
            throw argument_error("labeler: moisture_dry must be < moisture_wet");
    }
};

namespace detail {

// Nearest-rank percentile of a copy of the values (q in (0,1]).
inline double percentile(std::vector<double> values, double q) {
    if (values.empty())
        return 0.0;
    std::sort(values.begin(), values.end());
    const std::size_t rank = static_cast<std::size_t>(
        std::ceil(q * static_cast<double>(values.size())));
    return values[std::min(values.size() - 1, std::max<std::size_t>(rank, 1) - 1)];
}

// Central-difference slope magnitude per pixel (one-sided at borders),
// in height units per pixel.
inline std::vector<double> slope_magnitude(const Grid<double>& height_m) {
    const int w = height_m.width(), h = height_m.height();
    std::vector<double> mag(height_m.size());
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const int xl = std::max(0, x - 1), xr = std::min(w - 1, x + 1);
            const int yu = std::max(0, y - 1), yd = std::min(h - 1, y + 1);
            const double gx = (height_m.at(xr, y) - height_m.at(xl, y)) / (xr - xl);
            const double gy = (height_m.at(x, yd) - height_m.at(x, yu)) / (yd - yu);
            mag[static_cast<std::size_t>(y) * w + x] = std::hypot(gx, gy);
        }
    }
    return mag;
}

} // namespace detail

// Latitude given per row; the patch overload passes a constant.
inline std::vector<Feature> pixel_features_rows(const Grid<double>& height_m,
                                                const Grid<double>& moisture,
                                                std::span<const double> row_lat_deg) {
    if (!height_m.same_shape(moisture))
        throw shape_error("pixel_features: height/moisture dimensions differ");
    if (row_lat_deg.size() != static_cast<std::size_t>(height_m.height()))
        throw shape_error("pixel_features: latitude rows mismatch");

    std::vector<double> slope = detail::slope_magnitude(height_m);
    const double p99 = detail::percentile(slope, 0.99);
    const int w = height_m.width(), h = height_m.height();
    std::vector<Feature> features(height_m.size());
    for (int y = 0; y < h; ++y) {
        const double phi = std::min(std::abs(row_lat_deg[y]), 90.0) / 90.0;
        for (int x = 0; x < w; ++x) {
            const std::size_t i = static_cast<std::size_t>(y) * w + x;
            const double e =
                std::clamp(height_m.at(x, y) / worldgen::kMaxElevation, -1.0, 1.0);
            const double s = p99 > 0.0 ? std::min(1.0, slope[i] / p99) : 0.0;
            const double m = std::clamp(moisture.at(x, y), 0.0, 1.0);
            features[i] = Feature{e, s, phi, m};
        }
    }
    return features;
}

inline std::vector<Feature> pixel_features(const Grid<double>& height_m,
                                           const Grid<double>& moisture,
                                           double center_lat_deg) {
    std::vector<double> lat(static_cast<std::size_t>(height_m.height()), center_lat_deg);
    return pixel_features_rows(height_m, moisture, lat);
}

// --- k-means ---

struct KmeansResult {
    std::vector<int> assignment;
    std::vector<Feature> centroids;
    int k_effective = 0;
    std::vector<double> objective_history; // within-cluster squared distance per iteration
};

namespace detail {

inline double sq_dist(const Feature& a, const Feature& b) noexcept {
    double d = 0.0;
    for (int i = 0; i < 4; ++i) {
        const double t = a[i] - b[i];
        d += t * t;
    }
    return d;
}

inline int count_distinct(std::vector<Feature> pts) {
    std::sort(pts.begin(), pts.end());
    return static_cast<int>(std::unique(pts.begin(), pts.end()) - pts.begin());
}

} // namespace detail

// Lloyd iterations with k-means++ seeding. Empty clusters are reseeded to the
// point farthest from its assigned centroid. When fewer distinct points than
// k exist, k is reduced (reflected in k_effective).
inline KmeansResult kmeans(std::span<const Feature> features, int k, int iters, Pcg32& rng) {
    if (features.empty())
        throw argument_error("kmeans: no features");
    if (k < 1)
        throw argument_error("kmeans: k must be >= 1");
    const int n = static_cast<int>(features.size());
    const int distinct = detail::count_distinct({features.begin(), features.end()});
    const int keff = std::min(k, distinct);

    KmeansResult res;
    res.k_effective = keff;
    res.centroids.resize(keff);
    res.assignment.assign(n, 0);

    // k-means++ seeding: first uniform, then D^2-weighted.
    std::vector<double> d2(n, 0.0);
    res.centroids[0] = features[rng.next_below(static_cast<std::uint32_t>(n))];
    for (int c = 1; c < keff; ++c) {
        double total = 0.0;
        for (int i = 0; i < n; ++i) {
            double best = detail::sq_dist(features[i], res.centroids[0]);
            for (int j = 1; j < c; ++j)
                best = std::min(best, detail::sq_dist(features[i], res.centroids[j]));
            d2[i] = best;
            total += best;
        }
        double r = rng.uniform01() * total;
        int pick = -1;
        for (int i = 0; i < n; ++i) {
            if (d2[i] <= 0.0)
                continue;
            pick = i;
            r -= d2[i];
            if (r <= 0.0)
                break;
        }
        res.centroids[c] = features[pick];
    }

    std::vector<std::array<double, 4>> sums(keff);
    std::vector<int> counts(keff);
    for (int iter = 0; iter < iters; ++iter) {
        // Assignment step.
        double objective = 0.0;
        for (int i = 0; i < n; ++i) {
            int best = 0;
            double bd = detail::sq_dist(features[i], res.centroids[0]);
            for (int c = 1; c < keff; ++c) {
                const double d = detail::sq_dist(features[i], res.centroids[c]);
                if (d < bd) {
                    bd = d;
                    best = c;
                }
            }
            res.assignment[i] = best;
            objective += bd;
        }

        // Reseed empty clusters to the point farthest from its centroid.
        for (int c = 0; c < keff; ++c) {
            const bool empty =
                std::none_of(res.assignment.begin(), res.assignment.end(),
                             [c](int a) { return a == c; });
            if (!empty)
                continue;
            int far_i = 0;
            double far_d = -1.0;
            for (int i = 0; i < n; ++i) {
                const double d = detail::sq_dist(features[i], res.centroids[res.assignment[i]]);
                if (d > far_d) {
                    far_d = d;
                    far_i = i;
                }
            }
            objective -= far_d;
            res.centroids[c] = features[far_i];
            res.assignment[far_i] = c;
        }
        res.objective_history.push_back(objective);

        // Update step.
        for (auto& s : sums)
            s = {0.0, 0.0, 0.0, 0.0};
        std::fill(counts.begin(), counts.end(), 0);
        for (int i = 0; i < n; ++i) {
            const int c = res.assignment[i];
            for (int d = 0; d < 4; ++d)
                sums[c][d] += features[i][d];
            ++counts[c];
        }
        for (int c = 0; c < keff; ++c)
            if (counts[c] > 0)
                for (int d = 0; d < 4; ++d)
                    res.centroids[c][d] = sums[c][d] / counts[c];
    }
    return res;
}

// --- rule table ---

// First matching rule wins; total over all in-range feature vectors.
inline TerrainClass classify_centroid(const Feature& c, const Thresholds& t) noexcept {
    const double elev_m = c[0] * worldgen::kMaxElevation;
    const double lat_deg = c[2] * 90.0;
    if (c[0] <= 0.0)
        return TerrainClass::Water;
    if (lat_deg >= t.tundra_lat)
        return TerrainClass::Tundra;
    if (c[1] >= t.slope_mountain && elev_m >= t.elev_high)
        return TerrainClass::Mountain;
    if (c[1] >= t.slope_hill)
        return TerrainClass::Hills;
    if (c[3] <= t.moisture_dry)
        return TerrainClass::Desert;
    if (c[3] >= t.moisture_wet)
        return TerrainClass::Forest;
    return TerrainClass::Grassland;
}

// Each cutoff scaled by an independent uniform draw in [1-f, 1+f]; ordering
// pairs re-enforced by swapping. Draw order is fixed (field declaration order).
inline Thresholds jitter_thresholds(const Thresholds& t, double jitter_frac, Pcg32& rng) {
    if (!(jitter_frac >= 0.0 && jitter_frac < 0.5))
        throw argument_error("jitter_thresholds: jitter_frac must be in [0,0.5)");
    auto scale = [&](double v) { return v * rng.uniform(1.0 - jitter_frac, 1.0 + jitter_frac); };
    Thresholds out;
    out.slope_hill = scale(t.slope_hill);
    out.slope_mountain = scale(t.slope_mountain);
    out.elev_high = scale(t.elev_high);
    out.moisture_dry = scale(t.moisture_dry);
    out.moisture_wet = scale(t.moisture_wet);
    out.tundra_lat = scale(t.tundra_lat);
    if (out.slope_hill > out.slope_mountain)
        std::swap(out.slope_hill, out.slope_mountain);
    if (out.moisture_dry > out.moisture_wet)
        std::swap(out.moisture_dry, out.moisture_wet);
    return out;
}

// --- mode filter ---

// Majority vote in an odd window, truncated at borders; ties break to the
// smallest class index.
inline LabelMask mode_filter(const LabelMask& mask, int window, int passes = 1) {
    if (window < 3 || window % 2 == 0)
        throw argument_error("mode_filter: window must be odd and >= 3");
    if (passes < 0)
        throw argument_error("mode_filter: passes must be >= 0");
    const int w = mask.width(), h = mask.height();
    const int r = window / 2;
    LabelMask cur = mask;
    for (int pass = 0; pass < passes; ++pass) {
        LabelMask next(w, h);
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                std::array<int, kNumClasses> votes{};
                const int x0 = std::max(0, x - r), x1 = std::min(w - 1, x + r);
                const int y0 = std::max(0, y - r), y1 = std::min(h - 1, y + r);
                for (int yy = y0; yy <= y1; ++yy)
                    for (int xx = x0; xx <= x1; ++xx)
                        ++votes[cur.at(xx, yy)];
                int best = 0;
                for (int c = 1; c < kNumClasses; ++c)
                    if (votes[c] > votes[best])
                        best = c;
                next.at(x, y) = static_cast<std::uint8_t>(best);
            }
        }
        cur = std::move(next);
    }
    return cur;
}

inline constexpr int kModeFilterWindow = 5;

// --- full pipeline per patch ---

// features -> k-means -> jittered rule table per centroid -> mode filter.
// Consumes rng in a fixed order: jitter draws first, then k-means seeding.
inline LabelMask pseudo_label(const Grid<double>& height_m, const Grid<double>& moisture,
                              double center_lat_deg, const LabelerConfig& cfg, Pcg32& rng) {
    const std::vector<Feature> features = pixel_features(height_m, moisture, center_lat_deg);
    const Thresholds jittered = jitter_thresholds(cfg.thresholds, cfg.jitter_frac, rng);
    const KmeansResult km = kmeans(features, cfg.k, cfg.kmeans_iters, rng);

    std::vector<std::uint8_t> cluster_class(km.k_effective);
    for (int c = 0; c < km.k_effective; ++c)
        cluster_class[c] = static_cast<std::uint8_t>(classify_centroid(km.centroids[c], jittered));

    LabelMask mask(height_m.width(), height_m.height());
    for (std::size_t i = 0; i < mask.size(); ++i)
        mask[i] = cluster_class[km.assignment[i]];
    return mode_filter(mask, kModeFilterWindow, 1);
}

// World-scale labeling for the global terrain render: per-pixel rule
// classification (no clustering, no jitter) with per-row latitude, then the
// same mode filter.
inline LabelMask label_world(const worldgen::WorldRaster& world, const Thresholds& t) {
    std::vector<double> lat(static_cast<std::size_t>(world.height()));
    for (int y = 0; y < world.height(); ++y)
        lat[static_cast<std::size_t>(y)] = world.latitude_of_row(y);
    const std::vector<Feature> features =
        pixel_features_rows(world.height_field.elevation, world.moisture, lat);
    LabelMask mask(world.width(), world.height());
    for (std::size_t i = 0; i < mask.size(); ++i)
        mask[i] = static_cast<std::uint8_t>(classify_centroid(features[i], t));
    return mode_filter(mask, kModeFilterWindow, 1);
}

// --- mask <-> color ---

inline TerrainImage colorize_mask(const LabelMask& mask, std::span<const Rgb> class_colors) {
    TerrainImage img(mask.width(), mask.height());
    for (std::size_t i = 0; i < mask.size(); ++i)
        img[i] = class_colors[mask[i]];
    return img;
}

// Pixels of cls painted in the mask-palette color; everything else black.
inline TerrainImage mask_to_binary_image(const LabelMask& mask, TerrainClass cls) {
    const Rgb on = kMaskClassColors[static_cast<int>(cls)];
    TerrainImage img(mask.width(), mask.height());
    for (std::size_t i = 0; i < mask.size(); ++i)
        img[i] = mask[i] == static_cast<std::uint8_t>(cls) ? on : kMaskBackground;
    return img;
}

// Exact inverse of a palette encoding: every pixel must match a palette
// entry; the result holds palette indices.
inline Grid<std::uint8_t> decode_mask_rgb(const TerrainImage& img,
                                          std::span<const Rgb> palette) {
    Grid<std::uint8_t> out(img.width(), img.height());
    for (int y = 0; y < img.height(); ++y) {
        for (int x = 0; x < img.width(); ++x) {
            const Rgb px = img.at(x, y);
            int found = -1;
            for (std::size_t p = 0; p < palette.size(); ++p) {
                if (palette[p] == px) {
                    found = static_cast<int>(p);
                    break;
                }
            }
            if (found < 0)
                throw decode_error("unknown color (" + std::to_string(px.r) + "," +
                                   std::to_string(px.g) + "," + std::to_string(px.b) +
                                   ") at pixel (" + std::to_string(x) + "," +
                                   std::to_string(y) + ")");
            out.at(x, y) = static_cast<std::uint8_t>(found);
        }
    }
    return out;
}

} // namespace terratwin::labeler
