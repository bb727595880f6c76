// terratwin command line: gen | train | eval | infer | gradcheck.
// Every run prints the resolved configuration and seeds, and identical
// invocations produce identical output bytes.

#include <cstdio>
#include <cstring>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "terratwin/config.hpp"
#include "terratwin/evalkit.hpp"
#include "terratwin/gradcheck.hpp"
#include "terratwin/labeler.hpp"
#include "terratwin/netpbm.hpp"
#include "terratwin/sampler.hpp"
#include "terratwin/tiler.hpp"
#include "terratwin/trainer.hpp"
#include "terratwin/worldgen.hpp"

namespace fs = std::filesystem;
using namespace terratwin;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitUsage = 2;

void print_usage() {
    std::cout <<
        R"(usage: terratwin <command> [options]

commands:
  gen        synthesize a world and build a labeled patch dataset
  train      train the segmentation network on a dataset directory
  eval       compute ROC/AUC/Jaccard/confusion metrics for a checkpoint
  infer      tiled inference on a P6 image, stitched to a full-size mask
  gradcheck  run the finite-difference gradient suite

common options:
  --config FILE      load `key = value` settings (defaults < file < flags)
  --set KEY=VALUE    override any config key (repeatable)

gen:      --seed N --patches N --out DIR [--width N --height N --base N]
train:    --data DIR [--out DIR --epochs N --batch-size N --lr F --val-every N
           --val-fraction F --optimizer adam|sgd --seed N --channels 3|4
           --depth N --base-filters N --dropout F --resume CKPT]
eval:     --model CKPT --data DIR [--out DIR --split val|train|all --plot]
infer:    --model CKPT --image FILE.ppm --out PREFIX [--tile-size N --binary-views]
gradcheck: [--seed N]

environment:
  TERRAIN_TWIN_THREADS   worker cap for parallel stages (0 = auto)
)";
}

struct ArgParser {
    std::vector<std::string> args;
    std::size_t pos = 0;

    bool done() const { return pos >= args.size(); }
    const std::string& peek() const { return args[pos]; }
    std::string next() { return args[pos++]; }
    std::string value(const std::string& flag) {
        if (done())
            throw argument_error("flag " + flag + " needs a value");
        return next();
    }
};

// Applies --config/--set plus per-command convenience flags; returns any
// leftover flag unconsumed by the config layer.
struct CliOptions {
    io::AppConfig config = io::AppConfig::defaults();
    std::string out, data, model, image;
    std::optional<std::string> resume;
    std::string split = "val";
    bool plot = false;
    bool binary_views = false;
    std::uint64_t gradcheck_seed = 1;
};

bool apply_common_flag(const std::string& flag, ArgParser& p, CliOptions& o) {
    if (flag == "--config") {
        o.config.apply_file(p.value(flag));
        return true;
    }
    if (flag == "--set") {
        const std::string kv = p.value(flag);
        const std::size_t eq = kv.find('=');
        if (eq == std::string::npos)
            throw argument_error("--set expects KEY=VALUE, got `" + kv + "`");
        o.config.set(kv.substr(0, eq), kv.substr(eq + 1));
        return true;
    }
    if (flag == "--out") {
        o.out = p.value(flag);
        return true;
    }
    return false;
}

void print_resolved(const io::AppConfig& cfg) {
    std::cout << "resolved configuration:\n" << cfg.resolved() << std::flush;
}

int cmd_gen(ArgParser& p) {
    CliOptions o;
    while (!p.done()) {
        const std::string flag = p.next();
        if (apply_common_flag(flag, p, o))
            continue;
        if (flag == "--seed") {
            const std::string v = p.value(flag);
            o.config.set("world.seed", v);
            o.config.set("sampler.seed", v);
            o.config.set("labeler.seed", v);
        } else if (flag == "--patches") {
            o.config.set("sampler.n_patches", p.value(flag));
        } else if (flag == "--width") {
            o.config.set("world.width", p.value(flag));
        } else if (flag == "--height") {
            o.config.set("world.height", p.value(flag));
        } else if (flag == "--base") {
            o.config.set("sampler.base", p.value(flag));
        } else {
            std::cerr << "gen: unknown flag " << flag << "\n";
            return kExitUsage;
        }
    }
    if (o.out.empty()) {
        std::cerr << "gen: --out DIR is required\n";
        return kExitUsage;
    }
    print_resolved(o.config);

    const io::WorldConfig wc = o.config.world();
    const sampler::SamplerConfig sc = o.config.sampler_config();
    const labeler::LabelerConfig lc = o.config.labeler_config();

    std::cout << "synthesizing world " << wc.width << "x" << wc.height << " (seed " << wc.seed
              << ")\n";
    const worldgen::WorldRaster world = worldgen::synth_world(
        wc.seed, wc.width, wc.height, wc.octaves, wc.persistence, wc.sea_level_bias, wc.lat_max);

    fs::create_directories(o.out);
    const LabelMask world_mask = labeler::label_world(world, lc.thresholds);
    const Grid<double> shade =
        worldgen::hillshade(world.height_field, wc.sun_azimuth, wc.sun_altitude);
    io::write_netpbm(fs::path(o.out) / "world_terrain.ppm",
                     io::to_pnm(worldgen::render_terrain(world.height_field, world_mask, shade)));

    const worldgen::HeightImage him = worldgen::height_to_image(world.height_field);
    io::write_netpbm(fs::path(o.out) / "world_height.pgm", io::to_pnm(him.pixels));
    {
        char meta[512];
        std::snprintf(meta, sizeof meta,
                      "min_elevation = %.17g\nmax_elevation = %.17g\nlat_extent = %.17g\n"
                      "lon_extent = 180\nseed = %llu\n",
                      him.min_elevation, him.max_elevation, world.lat_max,
                      static_cast<unsigned long long>(world.seed));
        io::write_text_atomic(fs::path(o.out) / "world_height.meta", meta);
    }

    std::cout << "sampling " << sc.n_patches << " patches (base " << sc.base << ")\n";
    const auto entries = sampler::build_dataset(world, sc, lc, o.out);
    std::cout << "wrote " << entries.size() << " patches + manifest to " << o.out << "\n";
    return kExitOk;
}

int cmd_train(ArgParser& p) {
    CliOptions o;
    o.out = ".";
    while (!p.done()) {
        const std::string flag = p.next();
        if (apply_common_flag(flag, p, o))
            continue;
        if (flag == "--data")
            o.data = p.value(flag);
        else if (flag == "--epochs")
            o.config.set("train.max_epochs", p.value(flag));
        else if (flag == "--batch-size")
            o.config.set("train.batch_size", p.value(flag));
        else if (flag == "--lr")
            o.config.set("train.learning_rate", p.value(flag));
        else if (flag == "--val-every")
            o.config.set("train.val_every", p.value(flag));
        else if (flag == "--val-fraction")
            o.config.set("train.val_fraction", p.value(flag));
        else if (flag == "--optimizer")
            o.config.set("train.optimizer", p.value(flag));
        else if (flag == "--seed")
            o.config.set("train.seed", p.value(flag));
        else if (flag == "--channels")
            o.config.set("unet.in_channels", p.value(flag));
        else if (flag == "--depth")
            o.config.set("unet.depth", p.value(flag));
        else if (flag == "--base-filters")
            o.config.set("unet.base_filters", p.value(flag));
        else if (flag == "--dropout")
            o.config.set("unet.dropout_p", p.value(flag));
        else if (flag == "--resume")
            o.resume = p.value(flag);
        else {
            std::cerr << "train: unknown flag " << flag << "\n";
            return kExitUsage;
        }
    }
    if (o.data.empty()) {
        std::cerr << "train: --data DIR is required\n";
        return kExitUsage;
    }
    print_resolved(o.config);

    nnet::UNetConfig uc = o.config.unet_config();
    trainer::TrainConfig tc = o.config.train_config();

    std::optional<trainer::Checkpoint> resume;
    if (o.resume) {
        resume = trainer::load_checkpoint(*o.resume);
        uc = resume->config;
        std::cout << "resuming from " << *o.resume << " at epoch " << resume->epoch << "\n";
    }

    std::cout << "loading dataset from " << o.data << "\n";
    const auto patches = sampler::load_dataset(o.data, uc.in_channels == 4);
    std::cout << "training on " << patches.size() << " patches (seed " << tc.seed << ")\n";
    const trainer::TrainResult result = trainer::train(patches, uc, tc, resume);

    fs::create_directories(o.out);
    trainer::write_train_log(fs::path(o.out) / "train_log.tsv", result.log);
    trainer::save_checkpoint(fs::path(o.out) / "model_final.ckpt",
                             trainer::make_checkpoint(result.model, result.final_epoch, tc,
                                                      result.adam_t, result.adam_m, result.adam_v,
                                                      result.color_stats));
    trainer::save_checkpoint(fs::path(o.out) / "model_best.ckpt",
                             trainer::make_checkpoint(result.best_model, result.best_epoch, tc,
                                                      result.best_adam_t, result.best_m,
                                                      result.best_v, result.color_stats));
    if (!result.log.epochs.empty()) {
        const auto& last = result.log.epochs.back();
        std::cout << "final epoch " << last.epoch << ": train loss " << last.loss
                  << ", accuracy " << last.accuracy << "\n";
    }
    std::cout << "wrote train_log.tsv, model_final.ckpt, model_best.ckpt to " << o.out << "\n";
    return kExitOk;
}

int cmd_eval(ArgParser& p) {
    CliOptions o;
    o.out = ".";
    while (!p.done()) {
        const std::string flag = p.next();
        if (apply_common_flag(flag, p, o))
            continue;
        if (flag == "--model")
            o.model = p.value(flag);
        else if (flag == "--data")
            o.data = p.value(flag);
        else if (flag == "--split")
            o.split = p.value(flag);
        else if (flag == "--plot")
            o.plot = true;
        else {
            std::cerr << "eval: unknown flag " << flag << "\n";
            return kExitUsage;
        }
    }
    if (o.model.empty() || o.data.empty()) {
        std::cerr << "eval: --model CKPT and --data DIR are required\n";
        return kExitUsage;
    }
    if (o.split != "val" && o.split != "train" && o.split != "all") {
        std::cerr << "eval: --split must be val, train or all\n";
        return kExitUsage;
    }
    print_resolved(o.config);

    const trainer::Checkpoint ckpt = trainer::load_checkpoint(o.model);
    const nnet::UNetModel<float> model = trainer::model_from_checkpoint(ckpt);
    auto patches = sampler::load_dataset(o.data, ckpt.config.in_channels == 4);

    std::vector<sampler::LoadedPatch> selected;
    if (o.split == "all") {
        selected = std::move(patches);
    } else {
        auto [train_ids, val_ids] =
            trainer::split_dataset(patches.size(), ckpt.val_fraction, ckpt.seed);
        const auto& ids = o.split == "val" ? val_ids : train_ids;
        for (int id : ids)
            selected.push_back(patches[static_cast<std::size_t>(id)]);
    }
    std::cout << "evaluating " << selected.size() << " patches (split " << o.split << ")\n";

    const evalkit::MetricsReport report = evalkit::evaluate(model, selected);
    evalkit::write_metrics_files(o.out, report, o.plot);
    std::cout << evalkit::format_metrics(report);
    std::cout << "wrote metrics.tsv and roc_<class>.tsv to " << o.out << "\n";
    return kExitOk;
}

int cmd_infer(ArgParser& p) {
    CliOptions o;
    while (!p.done()) {
        const std::string flag = p.next();
        if (apply_common_flag(flag, p, o))
            continue;
        if (flag == "--model")
            o.model = p.value(flag);
        else if (flag == "--image")
            o.image = p.value(flag);
        else if (flag == "--tile-size")
            o.config.set("tiler.tile_size", p.value(flag));
        else if (flag == "--binary-views")
            o.binary_views = true;
        else {
            std::cerr << "infer: unknown flag " << flag << "\n";
            return kExitUsage;
        }
    }
    if (o.model.empty() || o.image.empty() || o.out.empty()) {
        std::cerr << "infer: --model CKPT, --image FILE and --out PREFIX are required\n";
        return kExitUsage;
    }
    print_resolved(o.config);

    const trainer::Checkpoint ckpt = trainer::load_checkpoint(o.model);
    const nnet::UNetModel<float> model = trainer::model_from_checkpoint(ckpt);
    const TerrainImage input = io::rgb_from_pnm(io::read_netpbm(o.image));
    std::cout << "tiling " << input.width() << "x" << input.height() << " image\n";

    const tiler::TileGrid grid = tiler::tile_image(input, o.config.tile_size());
    std::cout << grid.rows << "x" << grid.cols << " tiles, pads (" << grid.pad_right << ", "
              << grid.pad_bottom << ")\n";
    const std::vector<LabelMask> masks = tiler::infer_tiles(model, grid, ckpt.color_stats);
    const LabelMask mosaic = tiler::stitch(masks, grid);

    io::write_netpbm(o.out + "_mask.pgm", io::to_pnm(mosaic));
    io::write_netpbm(o.out + "_mask.ppm", io::to_pnm(tiler::colorize_mosaic(mosaic)));
    if (o.binary_views)
        for (int c = 0; c < labeler::kNumClasses; ++c)
            io::write_netpbm(
                o.out + "_" + std::string(labeler::kClassNames[c]) + ".ppm",
                io::to_pnm(labeler::mask_to_binary_image(
                    mosaic, static_cast<labeler::TerrainClass>(c))));
    std::cout << "wrote " << o.out << "_mask.pgm and " << o.out << "_mask.ppm\n";
    return kExitOk;
}

int cmd_gradcheck(ArgParser& p) {
    CliOptions o;
    while (!p.done()) {
        const std::string flag = p.next();
        if (flag == "--seed")
            o.gradcheck_seed = std::stoull(p.value(flag));
        else {
            std::cerr << "gradcheck: unknown flag " << flag << "\n";
            return kExitUsage;
        }
    }
    std::cout << "gradcheck seed = " << o.gradcheck_seed << "\n";
    bool all_pass = true;
    auto report_line = [&](const nnet::GradCheckReport& r) {
        std::printf("%-18s max relative error %.3e  %s\n", r.name.c_str(), r.max_rel_err,
                    r.pass ? "PASS" : "FAIL");
        all_pass = all_pass && r.pass;
    };
    for (const auto& r : nnet::run_layer_gradchecks(o.gradcheck_seed))
        report_line(r);
    report_line(nnet::run_unet_gradcheck(o.gradcheck_seed));
    return all_pass ? kExitOk : kExitError;
}

} // namespace

int main(int argc, char** argv) {
    if (argc < 2) {
        print_usage();
        return kExitUsage;
    }
    const std::string command = argv[1];
    ArgParser parser;
    for (int i = 2; i < argc; ++i)
        parser.args.emplace_back(argv[i]);

    try {
        if (command == "gen")
            return cmd_gen(parser);
        if (command == "train")
            return cmd_train(parser);
        if (command == "eval")
            return cmd_eval(parser);
        if (command == "infer")
            return cmd_infer(parser);
        if (command == "gradcheck")
            return cmd_gradcheck(parser);
        if (command == "--help" || command == "-h" || command == "help") {
            print_usage();
            return kExitOk;
        }
        std::cerr << "unknown command: " << command << "\n";
        print_usage();
        return kExitUsage;
    } catch (const argument_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitError;
    }
}
