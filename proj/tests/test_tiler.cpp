#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>

#include "terratwin/tiler.hpp"

using namespace terratwin;
using namespace terratwin::tiler;

namespace {

TerrainImage random_image(int w, int h, std::uint64_t seed) {
    Pcg32 rng(seed);
    TerrainImage img(w, h);
    for (std::size_t i = 0; i < img.size(); ++i)
        img[i] = Rgb{static_cast<std::uint8_t>(rng.next_below(256)),
                     static_cast<std::uint8_t>(rng.next_below(256)),
                     static_cast<std::uint8_t>(rng.next_below(256))};
    return img;
}

} // namespace

TEST_CASE("mirror_index reflects with edge repeat") {
    CHECK(mirror_index(0, 4) == 0);
    CHECK(mirror_index(3, 4) == 3);
    CHECK(mirror_index(4, 4) == 3);
    CHECK(mirror_index(5, 4) == 2);
    CHECK(mirror_index(7, 4) == 0);
    CHECK(mirror_index(8, 4) == 0); // period wraps
    for (int i = 0; i < 20; ++i)
        CHECK(mirror_index(i, 1) == 0);
}

TEST_CASE("tiling geometry") {
    SECTION("exact division has no padding") {
        const TileGrid g = tile_image(random_image(512, 512, 1), 256);
        CHECK(g.rows == 2);
        CHECK(g.cols == 2);
        CHECK(g.pad_right == 0);
        CHECK(g.pad_bottom == 0);
        CHECK(g.tiles.size() == 4);
    }
    SECTION("300x300 at tile 256 pads by 212") {
        const TileGrid g = tile_image(random_image(300, 300, 2), 256);
        CHECK(g.rows == 2);
        CHECK(g.cols == 2);
        CHECK(g.pad_right == 212);
        CHECK(g.pad_bottom == 212);
    }
    SECTION("1x1 image becomes one fully reflected tile") {
        TerrainImage img(1, 1, Rgb{9, 8, 7});
        const TileGrid g = tile_image(img, 256);
        REQUIRE(g.tiles.size() == 1);
        for (std::size_t i = 0; i < g.tiles[0].size(); ++i)
            CHECK(g.tiles[0][i] == Rgb{9, 8, 7});
    }
    SECTION("every tile is exactly tile_size squared") {
        const TileGrid g = tile_image(random_image(70, 33, 3), 32);
        CHECK(g.rows == 2);
        CHECK(g.cols == 3);
        for (const auto& t : g.tiles) {
            CHECK(t.width() == 32);
            CHECK(t.height() == 32);
        }
    }
}

TEST_CASE("tile then stitch is the identity") {
    Pcg32 rng(77);
    for (int trial = 0; trial < 10; ++trial) {
        const int w = 1 + static_cast<int>(rng.next_below(600));
        const int h = 1 + static_cast<int>(rng.next_below(600));
        const int tile = trial % 2 == 0 ? 256 : 17;
        const TerrainImage img = random_image(w, h, 1000 + trial);
        const TileGrid g = tile_image(img, tile);
        const TerrainImage back = stitch(g.tiles, g);
        CHECK(back == img);
    }
}

TEST_CASE("stitch places tiles row-major exactly once (index painting)") {
    const TerrainImage img = random_image(300, 300, 5);
    const TileGrid g = tile_image(img, 128); // 3x3 grid
    std::vector<LabelMask> index_masks;
    for (std::size_t i = 0; i < g.tiles.size(); ++i)
        index_masks.push_back(LabelMask(g.tile_size, g.tile_size,
                                        static_cast<std::uint8_t>(i)));
    const LabelMask mosaic = stitch(index_masks, g);
    REQUIRE(mosaic.width() == 300);
    REQUIRE(mosaic.height() == 300);
    for (int y = 0; y < 300; ++y)
        for (int x = 0; x < 300; ++x) {
            const int expect = (y / 128) * g.cols + (x / 128);
            CHECK(mosaic.at(x, y) == expect);
        }
}

TEST_CASE("stitch validates the tile count") {
    const TileGrid g = tile_image(random_image(100, 100, 6), 64);
    std::vector<LabelMask> too_few(3, LabelMask(64, 64, 0));
    CHECK_THROWS_AS(stitch(too_few, g), argument_error);
}

TEST_CASE("color_normalize maps moments") {
    SECTION("identical stats are the identity") {
        const TerrainImage tile = random_image(32, 32, 7);
        ColorStatsAccumulator acc;
        acc.add(tile);
        const ColorStats s = acc.finish();
        CHECK(color_normalize(tile, s, s) == tile);
    }
    SECTION("a constant tile at the source mean maps to the reference mean") {
        ColorStats src, ref;
        src.mean = {100, 100, 100};
        src.stddev = {10, 10, 10};
        ref.mean = {120, 130, 140};
        ref.stddev = {20, 20, 20};
        const TerrainImage tile(8, 8, Rgb{100, 100, 100});
        const TerrainImage out = color_normalize(tile, src, ref);
        for (std::size_t i = 0; i < out.size(); ++i)
            CHECK(out[i] == Rgb{120, 130, 140});
    }
    SECTION("the documented affine example: 110 -> 140") {
        ColorStats src, ref;
        src.mean = {100, 100, 100};
        src.stddev = {10, 10, 10};
        ref.mean = {120, 120, 120};
        ref.stddev = {20, 20, 20};
        const TerrainImage tile(1, 1, Rgb{110, 110, 110});
        CHECK(color_normalize(tile, src, ref)[0] == Rgb{140, 140, 140});
    }
    SECTION("degenerate source channel shifts the mean only") {
        ColorStats src, ref;
        src.mean = {100, 100, 100};
        src.stddev = {0, 10, 10};
        ref.mean = {120, 120, 120};
        ref.stddev = {20, 20, 20};
        const TerrainImage tile(1, 1, Rgb{110, 110, 110});
        const TerrainImage out = color_normalize(tile, src, ref);
        CHECK(out[0].r == 130); // 110 + (120 - 100)
        CHECK(out[0].g == 140);
    }
    SECTION("degenerate reference is rejected") {
        ColorStats src, ref;
        src.stddev = {1, 1, 1};
        ref.stddev = {0, 1, 1};
        CHECK_THROWS_AS(color_normalize(TerrainImage(1, 1), src, ref), argument_error);
    }
}

TEST_CASE("normalized tile means land within one gray level of the reference") {
    Pcg32 rng(55);
    for (int trial = 0; trial < 10; ++trial) {
        TerrainImage tile(64, 64);
        for (std::size_t i = 0; i < tile.size(); ++i)
            tile[i] = Rgb{static_cast<std::uint8_t>(60 + rng.next_below(100)),
                          static_cast<std::uint8_t>(40 + rng.next_below(120)),
                          static_cast<std::uint8_t>(80 + rng.next_below(90))};
        ColorStatsAccumulator acc;
        acc.add(tile);
        const ColorStats src = acc.finish();
        ColorStats ref;
        ref.mean = {110.0, 95.0, 150.0};
        ref.stddev = {25.0, 30.0, 20.0};
        const TerrainImage out = color_normalize(tile, src, ref);
        ColorStatsAccumulator out_acc;
        out_acc.add(out);
        const ColorStats got = out_acc.finish();
        for (int c = 0; c < 3; ++c)
            CHECK(std::abs(got.mean[c] - ref.mean[c]) <= 1.0);
    }
}

TEST_CASE("infer_tiles: cardinality, determinism, and scheduling invariance") {
    nnet::UNetConfig cfg;
    cfg.depth = 2;
    cfg.base_filters = 4;
    const nnet::UNetModel<float> model = nnet::init_params<float>(cfg, 42);
    ColorStats ref;
    ref.mean = {100, 110, 120};
    ref.stddev = {30, 30, 30};

    const TerrainImage img = random_image(200, 140, 9);
    const TileGrid g = tile_image(img, 64);
    REQUIRE(g.tiles.size() == static_cast<std::size_t>(g.rows * g.cols));

    setenv("TERRAIN_TWIN_THREADS", "1", 1);
    const std::vector<LabelMask> serial = infer_tiles(model, g, ref);
    setenv("TERRAIN_TWIN_THREADS", "3", 1);
    const std::vector<LabelMask> parallel = infer_tiles(model, g, ref);
    unsetenv("TERRAIN_TWIN_THREADS");

    REQUIRE(serial.size() == g.tiles.size());
    for (std::size_t i = 0; i < serial.size(); ++i)
        CHECK(serial[i] == parallel[i]);
    CHECK(stitch(serial, g) == stitch(parallel, g));

    // identical tiles produce identical masks
    TileGrid twin = g;
    twin.tiles[1] = twin.tiles[0];
    const std::vector<LabelMask> masks = infer_tiles(model, twin, ref);
    CHECK(masks[0] == masks[1]);
}

TEST_CASE("infer_tiles rejects 4-channel models and bad tile sizes") {
    nnet::UNetConfig cfg;
    cfg.depth = 2;
    cfg.base_filters = 4;
    cfg.in_channels = 4;
    const nnet::UNetModel<float> four = nnet::init_params<float>(cfg, 1);
    ColorStats ref;
    ref.stddev = {1, 1, 1};
    const TileGrid g = tile_image(random_image(64, 64, 10), 64);
    CHECK_THROWS_AS(infer_tiles(four, g, ref), argument_error);

    cfg.in_channels = 3;
    const nnet::UNetModel<float> three = nnet::init_params<float>(cfg, 1);
    const TileGrid odd = tile_image(random_image(64, 64, 11), 15);
    CHECK_THROWS_AS(infer_tiles(three, odd, ref), argument_error);
}

TEST_CASE("colorize_mosaic uses the mask palette") {
    LabelMask mask(7, 1);
    for (int c = 0; c < 7; ++c)
        mask.at(c, 0) = static_cast<std::uint8_t>(c);
    const TerrainImage img = colorize_mosaic(mask);
    CHECK(img.at(0, 0) == Rgb{0, 0, 255});       // water
    CHECK(img.at(1, 0) == Rgb{0, 255, 0});       // grassland
    CHECK(img.at(6, 0) == Rgb{255, 255, 255});   // tundra
    // all-water mask renders solid blue
    const TerrainImage blue = colorize_mosaic(LabelMask(4, 4, 0));
    for (std::size_t i = 0; i < blue.size(); ++i)
        CHECK(blue[i] == Rgb{0, 0, 255});
}
