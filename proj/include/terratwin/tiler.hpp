#pragma once
// Large-image inference: non-overlapping fixed-size tiling with reflection
// padding, channel-wise color normalization toward the training statistics,
// per-tile segmentation, and exact mosaic stitching.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "terratwin/color_stats.hpp"
#include "terratwin/errors.hpp"
#include "terratwin/grid.hpp"
#include "terratwin/labeler.hpp"
#include "terratwin/parallel.hpp"
#include "terratwin/unet.hpp"

namespace terratwin::tiler {

// Symmetric reflection with edge repeat, folded into [0, n).
inline int mirror_index(int i, int n) noexcept {
    if (n == 1)
        return 0;
    const int period = 2 * n;
    int m = i % period;
    if (m < 0)
        m += period;
    return m < n ? m : period - 1 - m;
}

template <class T>
struct TileGridT {
    int tile_size = 256;
    int rows = 0, cols = 0;
    int pad_right = 0, pad_bottom = 0;
    int orig_width = 0, orig_height = 0;
    std::vector<Grid<T>> tiles; // row-major, each exactly tile_size x tile_size
};

using TileGrid = TileGridT<Rgb>;

template <class T>
TileGridT<T> tile_grid(const Grid<T>& img, int tile_size) {
    if (img.width() < 1 || img.height() < 1)
        throw argument_error("tile_grid: empty image");
    if (tile_size < 1)
        throw argument_error("tile_grid: tile size must be >= 1");
    TileGridT<T> g;
    g.tile_size = tile_size;
    g.orig_width = img.width();
    g.orig_height = img.height();
    g.cols = (img.width() + tile_size - 1) / tile_size;
    g.rows = (img.height() + tile_size - 1) / tile_size;
    g.pad_right = g.cols * tile_size - img.width();
    g.pad_bottom = g.rows * tile_size - img.height();
    g.tiles.reserve(static_cast<std::size_t>(g.rows) * g.cols);
    for (int tr = 0; tr < g.rows; ++tr)
        for (int tc = 0; tc < g.cols; ++tc) {
            Grid<T> tile(tile_size, tile_size);
            for (int y = 0; y < tile_size; ++y) {
                const int sy = mirror_index(tr * tile_size + y, img.height());
                for (int x = 0; x < tile_size; ++x)
                    tile.at(x, y) = img.at(mirror_index(tc * tile_size + x, img.width()), sy);
            }
            g.tiles.push_back(std::move(tile));
        }
    return g;
}

inline TileGrid tile_image(const TerrainImage& img, int tile_size = 256) {
    return tile_grid(img, tile_size);
}

// Row-major placement, padded margins cropped away.
template <class T>
Grid<T> stitch(const std::vector<Grid<T>>& tiles, int rows, int cols, int tile_size,
               int orig_width, int orig_height) {
    if (tiles.size() != static_cast<std::size_t>(rows) * cols)
        throw argument_error("stitch: tile count does not match grid geometry");
    Grid<T> out(orig_width, orig_height);
    for (int tr = 0; tr < rows; ++tr)
        for (int tc = 0; tc < cols; ++tc) {
            const Grid<T>& tile = tiles[static_cast<std::size_t>(tr) * cols + tc];
            const int y1 = std::min(orig_height, (tr + 1) * tile_size);
            const int x1 = std::min(orig_width, (tc + 1) * tile_size);
            for (int y = tr * tile_size; y < y1; ++y)
                for (int x = tc * tile_size; x < x1; ++x)
                    out.at(x, y) = tile.at(x - tc * tile_size, y - tr * tile_size);
        }
    return out;
}

template <class T, class U>
Grid<T> stitch(const std::vector<Grid<T>>& tiles, const TileGridT<U>& geometry) {
    return stitch(tiles, geometry.rows, geometry.cols, geometry.tile_size, geometry.orig_width,
                  geometry.orig_height);
}

// Per channel: out = clamp(round((in - mean_src) * (std_ref / std_src) + mean_ref)).
// A degenerate source channel (std 0) gets the mean shift only.
inline TerrainImage color_normalize(const TerrainImage& tile, const ColorStats& src,
                                    const ColorStats& ref) {
    for (int c = 0; c < 3; ++c)
        if (ref.degenerate(c))
            throw argument_error("color_normalize: reference stddev must be positive");
    TerrainImage out(tile.width(), tile.height());
    double scale[3], shift[3];
    for (int c = 0; c < 3; ++c) {
        scale[c] = src.degenerate(c) ? 1.0 : ref.stddev[c] / src.stddev[c];
        shift[c] = ref.mean[c] - src.mean[c] * scale[c];
    }
    auto map = [](double v) {
        return static_cast<std::uint8_t>(std::clamp(std::floor(v + 0.5), 0.0, 255.0));
    };
    for (std::size_t i = 0; i < tile.size(); ++i)
        out[i] = Rgb{map(tile[i].r * scale[0] + shift[0]), map(tile[i].g * scale[1] + shift[1]),
                     map(tile[i].b * scale[2] + shift[2])};
    return out;
}

// Source stats over the unpadded region of a tile grid.
inline ColorStats grid_color_stats(const TileGrid& grid) {
    ColorStatsAccumulator acc;
    for (int tr = 0; tr < grid.rows; ++tr)
        for (int tc = 0; tc < grid.cols; ++tc) {
            const TerrainImage& tile = grid.tiles[static_cast<std::size_t>(tr) * grid.cols + tc];
            const int h = std::min(grid.tile_size, grid.orig_height - tr * grid.tile_size);
            const int w = std::min(grid.tile_size, grid.orig_width - tc * grid.tile_size);
            for (int y = 0; y < h; ++y)
                for (int x = 0; x < w; ++x)
                    acc.add(tile.at(x, y));
        }
    return acc.finish();
}

// Normalize each tile toward the reference stats (source stats taken from the
// whole grid) and segment it in inference mode. Tiles are independent work
// units; output order matches tile order regardless of scheduling.
inline std::vector<LabelMask> infer_tiles(const nnet::UNetModel<float>& model,
                                          const TileGrid& grid, const ColorStats& stats_ref) {
    if (model.config.in_channels != 3)
        throw argument_error("infer_tiles: tiled inference needs a 3-channel model");
    if (grid.tile_size % (1 << model.config.depth) != 0)
        throw argument_error("infer_tiles: tile size not divisible by 2^depth");
    const ColorStats src = grid_color_stats(grid);

    std::vector<LabelMask> masks(grid.tiles.size());
    parallel_for(static_cast<int>(grid.tiles.size()), [&](int i) {
        const TerrainImage norm = color_normalize(grid.tiles[static_cast<std::size_t>(i)], src,
                                                  stats_ref);
        nnet::Tensor<float> x(1, 3, norm.height(), norm.width());
        float* r = x.plane(0, 0);
        float* g = x.plane(0, 1);
        float* b = x.plane(0, 2);
        for (std::size_t px = 0; px < norm.size(); ++px) {
            r[px] = norm[px].r / 255.0f;
            g[px] = norm[px].g / 255.0f;
            b[px] = norm[px].b / 255.0f;
        }
        nnet::Tensor<float> logits = nnet::unet_forward(model, x, false);
        const std::vector<std::uint8_t> pred = nnet::argmax_labels(logits);
        LabelMask mask(norm.width(), norm.height());
        std::copy(pred.begin(), pred.end(), mask.cells().begin());
        masks[static_cast<std::size_t>(i)] = std::move(mask);
    });
    return masks;
}

// Full-color mosaic in the mask palette.
inline TerrainImage colorize_mosaic(const LabelMask& mask) {
    return labeler::colorize_mask(mask, labeler::kMaskClassColors);
}

} // namespace terratwin::tiler
