#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "terratwin/trainer.hpp"
#include "terratwin/worldgen.hpp"

using namespace terratwin;
using namespace terratwin::trainer;
namespace fs = std::filesystem;

namespace {

// In-memory patch whose terrain is rendered from its mask, so the mapping is
// learnable from color alone.
sampler::LoadedPatch synth_patch(int size, std::uint64_t seed) {
    sampler::LoadedPatch p;
    Pcg32 rng(seed);
    p.mask = LabelMask(size, size);
    // blocky regions, 4x4 cells
    for (int y = 0; y < size; y += 4)
        for (int x = 0; x < size; x += 4) {
            const std::uint8_t cls = static_cast<std::uint8_t>(rng.next_below(7));
            for (int yy = y; yy < std::min(size, y + 4); ++yy)
                for (int xx = x; xx < std::min(size, x + 4); ++xx)
                    p.mask.at(xx, yy) = cls;
        }
    worldgen::HeightField field;
    field.elevation = Grid<double>(size, size, 100.0);
    field.cell_size = 1.0;
    Grid<double> shade(size, size);
    for (std::size_t i = 0; i < shade.size(); ++i)
        shade[i] = rng.uniform(0.6, 1.0);
    p.terrain = worldgen::render_terrain(field, p.mask, shade);
    p.height = field.elevation;
    p.meta.index = static_cast<int>(seed);
    return p;
}

std::vector<sampler::LoadedPatch> synth_dataset(int n, int size, std::uint64_t seed) {
    std::vector<sampler::LoadedPatch> out;
    for (int i = 0; i < n; ++i)
        out.push_back(synth_patch(size, seed + static_cast<std::uint64_t>(i)));
    return out;
}

nnet::UNetConfig tiny_net() {
    nnet::UNetConfig cfg;
    cfg.depth = 1;
    cfg.base_filters = 4;
    return cfg;
}

std::vector<float> params_of(const nnet::UNetModel<float>& m) { return flatten_params(m); }

} // namespace

TEST_CASE("split_dataset partitions deterministically") {
    auto [train_ids, val_ids] = split_dataset(10, 0.2, 42);
    CHECK(train_ids.size() == 8);
    CHECK(val_ids.size() == 2);

    auto [train2, val2] = split_dataset(10, 0.2, 42);
    CHECK(train_ids == train2);
    CHECK(val_ids == val2);

    std::set<int> all(train_ids.begin(), train_ids.end());
    all.insert(val_ids.begin(), val_ids.end());
    CHECK(all.size() == 10);
    for (int id : all) {
        CHECK(id >= 0);
        CHECK(id < 10);
    }

    auto [train3, val3] = split_dataset(10, 0.2, 43);
    CHECK((train_ids != train3 || val_ids != val3));
}

TEST_CASE("split_dataset rejects empty sides") {
    CHECK_THROWS_AS(split_dataset(2, 0.2, 1), argument_error); // val would be empty
    CHECK_THROWS_AS(split_dataset(2, 0.9, 1), argument_error); // train would be empty
    CHECK_THROWS_AS(split_dataset(1, 0.5, 1), argument_error);
}

TEST_CASE("adam_step: zero gradients change nothing") {
    std::vector<double> p{1.0, -2.0, 3.0}, g{0.0, 0.0, 0.0}, m(3, 0.0), v(3, 0.0);
    const std::vector<double> before = p;
    adam_step<double>(p, g, m, v, 1, 1e-4, 0.9, 0.999, 1e-8);
    CHECK(p == before);
    for (double x : m)
        CHECK(x == 0.0);
    for (double x : v)
        CHECK(x == 0.0);
}

TEST_CASE("adam_step single step matches the closed form") {
    std::vector<double> p{0.0}, g{1.0}, m{0.0}, v{0.0};
    adam_step<double>(p, g, m, v, 1, 1e-4, 0.9, 0.999, 1e-8);
    // bias corrections cancel at t=1: delta = -lr / (1 + eps)
    CHECK(p[0] == Catch::Approx(-1e-4 / (1.0 + 1e-8)).margin(1e-16));
    CHECK(m[0] == Catch::Approx(0.1).margin(1e-15));
    CHECK(v[0] == Catch::Approx(0.001).margin(1e-15));
}

TEST_CASE("adam_step tracks an independent scalar implementation") {
    // oracle: textbook Adam on f(x) = x^2/2, gradient x
    double x = 1.0, om = 0.0, ov = 0.0;
    const double lr = 0.1, b1 = 0.9, b2 = 0.999, eps = 1e-8;
    std::vector<double> p{1.0}, m{0.0}, v{0.0};
    for (int t = 1; t <= 10; ++t) {
        const double grad = x;
        om = b1 * om + (1 - b1) * grad;
        ov = b2 * ov + (1 - b2) * grad * grad;
        const double mhat = om / (1 - std::pow(b1, t));
        const double vhat = ov / (1 - std::pow(b2, t));
        x -= lr * mhat / (std::sqrt(vhat) + eps);

        std::vector<double> g{p[0]};
        adam_step<double>(p, g, m, v, t, lr, b1, b2, eps);
        CHECK(p[0] == Catch::Approx(x).margin(1e-12));
    }
}

TEST_CASE("sgd_step applies plain gradient descent") {
    std::vector<float> p{1.0f, 2.0f}, g{0.5f, -1.0f};
    sgd_step<float>(p, g, 0.1);
    CHECK(p[0] == Catch::Approx(0.95f));
    CHECK(p[1] == Catch::Approx(2.1f));
}

TEST_CASE("zero learning rate changes no parameter bit") {
    const auto patches = synth_dataset(5, 16, 100);
    TrainConfig cfg;
    cfg.max_epochs = 3;
    cfg.batch_size = 4;
    cfg.learning_rate = 0.0;
    cfg.val_every = 2;
    cfg.seed = 7;
    const TrainResult res = train(patches, tiny_net(), cfg);
    const std::vector<float> init = params_of(nnet::init_params<float>(tiny_net(), 7));
    CHECK(params_of(res.model) == init);
}

TEST_CASE("validation runs exactly every val_every epochs") {
    const auto patches = synth_dataset(5, 16, 200);
    TrainConfig cfg;
    cfg.max_epochs = 30;
    cfg.batch_size = 4;
    cfg.val_every = 10;
    cfg.seed = 3;
    nnet::UNetConfig net = tiny_net();
    net.base_filters = 2;
    const TrainResult res = train(patches, net, cfg);
    REQUIRE(res.log.validations.size() == 3);
    CHECK(res.log.validations[0].epoch == 10);
    CHECK(res.log.validations[1].epoch == 20);
    CHECK(res.log.validations[2].epoch == 30);
    CHECK(res.log.epochs.size() == 30);

    const std::string tsv = format_train_log(res.log);
    std::size_t val_rows = 0, pos = 0;
    while ((pos = tsv.find("\tval\t", pos)) != std::string::npos) {
        ++val_rows;
        ++pos;
    }
    CHECK(val_rows == 3);
}

TEST_CASE("training reduces the loss on a learnable dataset") {
    const auto patches = synth_dataset(6, 16, 300);
    TrainConfig cfg;
    cfg.max_epochs = 150;
    cfg.batch_size = 8;
    cfg.learning_rate = 5e-3;
    cfg.val_every = 150;
    cfg.seed = 11;
    const TrainResult res = train(patches, tiny_net(), cfg);
    REQUIRE(res.log.epochs.size() == 150);
    CHECK(res.log.epochs.back().loss < res.log.epochs.front().loss * 0.7);
}

TEST_CASE("training throws a divergence error on a non-finite loss") {
    const auto patches = synth_dataset(4, 16, 400);
    TrainConfig cfg;
    cfg.max_epochs = 10;
    cfg.batch_size = 4;
    cfg.learning_rate = 1e300; // first step overflows the float parameters
    cfg.val_every = 10;
    try {
        train(patches, tiny_net(), cfg);
        FAIL("expected divergence_error");
    } catch (const divergence_error& e) {
        CHECK(std::string(e.what()).find("epoch") != std::string::npos);
    }
}

TEST_CASE("checkpoint save/load/save is byte identical") {
    const auto patches = synth_dataset(5, 16, 500);
    TrainConfig cfg;
    cfg.max_epochs = 2;
    cfg.batch_size = 4;
    cfg.val_every = 1;
    cfg.seed = 21;
    const TrainResult res = train(patches, tiny_net(), cfg);
    const Checkpoint c = make_checkpoint(res.model, res.final_epoch, cfg, res.adam_t, res.adam_m,
                                         res.adam_v, res.color_stats);
    const std::vector<std::uint8_t> bytes1 = serialize_checkpoint(c);
    const Checkpoint back = parse_checkpoint(bytes1);
    const std::vector<std::uint8_t> bytes2 = serialize_checkpoint(back);
    CHECK(bytes1 == bytes2);
    CHECK(back.epoch == res.final_epoch);
    CHECK(back.params == flatten_params(res.model));
    CHECK(back.color_stats.mean == res.color_stats.mean);
}

TEST_CASE("checkpoint load failures are distinct") {
    const auto patches = synth_dataset(4, 16, 600);
    TrainConfig cfg;
    cfg.max_epochs = 1;
    cfg.batch_size = 4;
    cfg.val_every = 1;
    const TrainResult res = train(patches, tiny_net(), cfg);
    std::vector<std::uint8_t> bytes = serialize_checkpoint(make_checkpoint(
        res.model, 1, cfg, res.adam_t, res.adam_m, res.adam_v, res.color_stats));

    SECTION("bad magic") {
        std::vector<std::uint8_t> bad = bytes;
        bad[0] = 'X';
        CHECK_THROWS_AS(parse_checkpoint(bad), bad_magic_error);
    }
    SECTION("version mismatch") {
        std::vector<std::uint8_t> bad = bytes;
        bad[4] = 99;
        CHECK_THROWS_AS(parse_checkpoint(bad), version_error);
    }
    SECTION("truncation") {
        std::vector<std::uint8_t> bad(bytes.begin(), bytes.end() - 17);
        CHECK_THROWS_AS(parse_checkpoint(bad), truncation_error);
        std::vector<std::uint8_t> tiny(bytes.begin(), bytes.begin() + 6);
        CHECK_THROWS_AS(parse_checkpoint(tiny), truncation_error);
    }
}

TEST_CASE("resume at an epoch boundary matches the uninterrupted run") {
    const auto patches = synth_dataset(6, 16, 700);
    nnet::UNetConfig net = tiny_net();
    TrainConfig cfg;
    cfg.batch_size = 4;
    cfg.val_every = 2;
    cfg.learning_rate = 1e-3;
    cfg.seed = 31;

    cfg.max_epochs = 4;
    const TrainResult full = train(patches, net, cfg);

    cfg.max_epochs = 2;
    const TrainResult half = train(patches, net, cfg);
    const Checkpoint mid = make_checkpoint(half.model, half.final_epoch, cfg, half.adam_t,
                                           half.adam_m, half.adam_v, half.color_stats);
    // round trip through bytes, then resume to epoch 4
    const Checkpoint loaded = parse_checkpoint(serialize_checkpoint(mid));
    cfg.max_epochs = 4;
    const TrainResult resumed = train(patches, net, cfg, loaded);

    CHECK(params_of(resumed.model) == params_of(full.model));
    CHECK(resumed.adam_m == full.adam_m);
    CHECK(resumed.adam_v == full.adam_v);
    CHECK(resumed.adam_t == full.adam_t);
}

TEST_CASE("training twice with the same seed is bit identical") {
    const auto patches = synth_dataset(5, 16, 800);
    TrainConfig cfg;
    cfg.max_epochs = 3;
    cfg.batch_size = 2;
    cfg.val_every = 3;
    cfg.seed = 99;
    const TrainResult a = train(patches, tiny_net(), cfg);
    const TrainResult b = train(patches, tiny_net(), cfg);
    CHECK(params_of(a.model) == params_of(b.model));
    CHECK(format_train_log(a.log) == format_train_log(b.log));
}

TEST_CASE("early stopping halts after patience validations without improvement") {
    const auto patches = synth_dataset(5, 16, 900);
    TrainConfig cfg;
    cfg.max_epochs = 50;
    cfg.batch_size = 4;
    cfg.val_every = 1;
    cfg.learning_rate = 0.0; // loss can never improve after the first round
    cfg.early_stop_patience = 3;
    const TrainResult res = train(patches, tiny_net(), cfg);
    CHECK(res.final_epoch < 50);
    CHECK(res.log.validations.size() == 4); // best + 3 stagnant rounds
}

TEST_CASE("train log lists validation rows after their epoch") {
    TrainLog log;
    log.epochs = {{1, 1.5, 0.3}, {2, 1.2, 0.4}};
    ValidationRecord v;
    v.epoch = 2;
    v.loss = 1.1;
    v.accuracy = 0.45;
    v.mean_jaccard = 0.2;
    log.validations = {v};
    const std::string tsv = format_train_log(log);
    CHECK(tsv.find("epoch\tsplit\tloss\taccuracy\tmean_jaccard\n") == 0);
    CHECK(tsv.find("1\ttrain\t1.500000\t0.300000\t-\n") != std::string::npos);
    CHECK(tsv.find("2\tval\t1.100000\t0.450000\t0.200000\n") != std::string::npos);
}
