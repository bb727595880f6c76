#pragma once
// Merged key-value configuration: defaults < config file < command-line
// flags. Keys mirror the per-module config records (world.*, sampler.*,
// labeler.*, unet.*, train.*, tiler.*). Unknown keys are rejected.

#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include "terratwin/errors.hpp"
#include "terratwin/labeler.hpp"
#include "terratwin/sampler.hpp"
#include "terratwin/trainer.hpp"
#include "terratwin/unet.hpp"

namespace terratwin::io {

struct WorldConfig {
    int width = 2048;
    int height = 1024;
    int octaves = 6;
    double persistence = 0.5;
    double sea_level_bias = 0.0;
    double lat_max = 80.0;
    double sun_azimuth = 315.0;
    double sun_altitude = 45.0;
    std::uint64_t seed = 0;
};

class AppConfig {
public:
    static AppConfig defaults() {
        AppConfig c;
        auto set = [&](const std::string& k, const std::string& v) { c.values_[k] = v; };
        set("world.width", "2048");
        set("world.height", "1024");
        set("world.octaves", "6");
        set("world.persistence", "0.5");
        set("world.sea_level_bias", "0");
        set("world.lat_max", "80");
        set("world.sun_azimuth", "315");
        set("world.sun_altitude", "45");
        set("world.seed", "0");
        set("sampler.n_patches", "5000");
        set("sampler.base", "64");
        set("sampler.lat_max", "80");
        set("sampler.ocean_reject_threshold", "0.9");
        set("sampler.seed", "0");
        set("labeler.k", "7");
        set("labeler.kmeans_iters", "20");
        set("labeler.jitter_frac", "0.1");
        set("labeler.seed", "0");
        set("labeler.slope_hill", "0.15");
        set("labeler.slope_mountain", "0.45");
        set("labeler.elev_high", "1500");
        set("labeler.moisture_dry", "0.25");
        set("labeler.moisture_wet", "0.65");
        set("labeler.tundra_lat", "66.5");
        set("unet.in_channels", "3");
        set("unet.depth", "2");
        set("unet.base_filters", "16");
        set("unet.dropout_p", "0");
        set("train.max_epochs", "300");
        set("train.batch_size", "16");
        set("train.learning_rate", "1e-4");
        set("train.val_every", "10");
        set("train.val_fraction", "0.2");
        set("train.optimizer", "adam");
        set("train.early_stop_patience", "0");
        set("train.seed", "0");
        set("tiler.tile_size", "256");
        return c;
    }

    // `key = value` lines with '#' comments; unknown keys name the line.
    void apply_file(const std::filesystem::path& path) {
        std::ifstream in(path);
        if (!in)
            throw io_error("cannot open config file " + path.string());
        std::string line;
        std::size_t line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            const std::size_t hash = line.find('#');
            if (hash != std::string::npos)
                line = line.substr(0, hash);
            const std::size_t eq = line.find('=');
            if (eq == std::string::npos) {
                if (line.find_first_not_of(" \t\r") != std::string::npos)
                    throw parse_error("config line is not `key = value`", line_no);
                continue;
            }
            const std::string key = trim(line.substr(0, eq));
            const std::string value = trim(line.substr(eq + 1));
            if (!values_.count(key))
                throw parse_error("unknown config key `" + key + "` on line " +
                                      std::to_string(line_no),
                                  line_no);
            values_[key] = value;
        }
    }

    void set(const std::string& key, const std::string& value) {
        if (!values_.count(key))
            throw argument_error("unknown config key `" + key + "`");
        values_[key] = value;
    }

    const std::string& get(const std::string& key) const {
        auto it = values_.find(key);
        if (it == values_.end())
            throw argument_error("unknown config key `" + key + "`");
        return it->second;
    }
    int get_int(const std::string& key) const {
        return parse_with<int>(key, [](const std::string& s) { return std::stoi(s); });
    }
    double get_double(const std::string& key) const {
        return parse_with<double>(key, [](const std::string& s) { return std::stod(s); });
    }
    std::uint64_t get_u64(const std::string& key) const {
        return parse_with<std::uint64_t>(key,
                                         [](const std::string& s) { return std::stoull(s); });
    }

    WorldConfig world() const {
        WorldConfig w;
        w.width = get_int("world.width");
        w.height = get_int("world.height");
        w.octaves = get_int("world.octaves");
        w.persistence = get_double("world.persistence");
        w.sea_level_bias = get_double("world.sea_level_bias");
        w.lat_max = get_double("world.lat_max");
        w.sun_azimuth = get_double("world.sun_azimuth");
        w.sun_altitude = get_double("world.sun_altitude");
        w.seed = get_u64("world.seed");
        return w;
    }
    sampler::SamplerConfig sampler_config() const {
        sampler::SamplerConfig s;
        s.n_patches = get_int("sampler.n_patches");
        s.base = get_int("sampler.base");
        s.lat_max = get_double("sampler.lat_max");
        s.ocean_reject_threshold = get_double("sampler.ocean_reject_threshold");
        s.seed = get_u64("sampler.seed");
        s.validate();
        return s;
    }
    labeler::LabelerConfig labeler_config() const {
        labeler::LabelerConfig l;
        l.k = get_int("labeler.k");
        l.kmeans_iters = get_int("labeler.kmeans_iters");
        l.jitter_frac = get_double("labeler.jitter_frac");
        l.seed = get_u64("labeler.seed");
        l.thresholds.slope_hill = get_double("labeler.slope_hill");
        l.thresholds.slope_mountain = get_double("labeler.slope_mountain");
        l.thresholds.elev_high = get_double("labeler.elev_high");
        l.thresholds.moisture_dry = get_double("labeler.moisture_dry");
        l.thresholds.moisture_wet = get_double("labeler.moisture_wet");
        l.thresholds.tundra_lat = get_double("labeler.tundra_lat");
        l.validate();
        return l;
    }
    nnet::UNetConfig unet_config() const {
        nnet::UNetConfig u;
        u.in_channels = get_int("unet.in_channels");
        u.depth = get_int("unet.depth");
        u.base_filters = get_int("unet.base_filters");
        u.dropout_p = get_double("unet.dropout_p");
        u.validate();
        return u;
    }
    trainer::TrainConfig train_config() const {
        trainer::TrainConfig t;
        t.max_epochs = get_int("train.max_epochs");
        t.batch_size = get_int("train.batch_size");
        t.learning_rate = get_double("train.learning_rate");
        t.val_every = get_int("train.val_every");
        t.val_fraction = get_double("train.val_fraction");
        const std::string& opt = get("train.optimizer");
        if (opt == "adam")
            t.optimizer = trainer::TrainConfig::Optimizer::adam;
        else if (opt == "sgd")
            t.optimizer = trainer::TrainConfig::Optimizer::sgd;
        else
            throw argument_error("train.optimizer must be adam or sgd");
        t.early_stop_patience = get_int("train.early_stop_patience");
        t.seed = get_u64("train.seed");
        t.validate();
        return t;
    }
    int tile_size() const { return get_int("tiler.tile_size"); }

    // Resolved configuration, sorted by key (printed by every run).
    std::string resolved() const {
        std::string out;
        for (const auto& [k, v] : values_)
            out += k + " = " + v + "\n";
        return out;
    }

private:
    static std::string trim(const std::string& s) {
        const std::size_t b = s.find_first_not_of(" \t\r");
        if (b == std::string::npos)
            return "";
        const std::size_t e = s.find_last_not_of(" \t\r");
        return s.substr(b, e - b + 1);
    }
    template <class T, class Fn>
    T parse_with(const std::string& key, Fn&& fn) const {
        try {
            return fn(get(key));
        } catch (const argument_error&) {
            throw;
        } catch (const std::exception&) {
            throw argument_error("config key `" + key + "` has invalid value `" + get(key) +
                                 "`");
        }
    }

    std::map<std::string, std::string> values_;
};

} // namespace terratwin::io
