#pragma once
// Training: deterministic dataset split, the minibatch loop with periodic
// validation, Adam/SGD, and binary checkpoints. Per-sample forward/backward
// runs in parallel; gradients reduce in sample order, so a run is a pure
// function of (dataset bytes, configs, seed).

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "terratwin/color_stats.hpp"
#include "terratwin/errors.hpp"
#include "terratwin/evalkit_counts.hpp"
#include "terratwin/netpbm.hpp"
#include "terratwin/parallel.hpp"
#include "terratwin/rng.hpp"
#include "terratwin/sampler.hpp"
#include "terratwin/unet.hpp"

namespace terratwin::trainer {

struct TrainConfig {
    int max_epochs = 300;
    int batch_size = 16;
    double learning_rate = 1e-4;
    int val_every = 10;
    double val_fraction = 0.2;
    enum class Optimizer { adam, sgd };
    Optimizer optimizer = Optimizer::adam;
    double beta1 = 0.9, beta2 = 0.999, epsilon = 1e-8;
    std::uint64_t seed = 0;
    int early_stop_patience = 0; // validation rounds without improvement; 0 = off

    void validate() const {
        if (max_epochs < 0)
            throw argument_error("train: max_epochs must be >= 0");
        if (batch_size < 1)
            throw argument_error("train: batch_size must be >= 1");
        if (!(val_fraction > 0.0 && val_fraction < 1.0))
            throw argument_error("train: val_fraction must be in (0,1)");
        if (val_every < 1)
            throw argument_error("train: val_every must be >= 1");
        if (!(learning_rate >= 0.0))
            throw argument_error("train: learning_rate must be >= 0");
    }
};

// Deterministic shuffled split into (train ids, val ids).
inline std::pair<std::vector<int>, std::vector<int>>
split_dataset(std::size_t n_patches, double val_fraction, std::uint64_t seed) {
    if (n_patches < 2)
        throw argument_error("split_dataset: need at least 2 patches");
    std::vector<int> ids(n_patches);
    for (std::size_t i = 0; i < n_patches; ++i)
        ids[i] = static_cast<int>(i);
    Pcg32 rng = make_stream(seed, {streams::kSplit});
    for (std::size_t i = n_patches - 1; i > 0; --i)
        std::swap(ids[i], ids[rng.next_below(static_cast<std::uint32_t>(i + 1))]);
    const std::size_t n_val =
        static_cast<std::size_t>(std::llround(static_cast<double>(n_patches) * val_fraction));
    if (n_val == 0 || n_val == n_patches)
        throw argument_error("split_dataset: fraction yields an empty side");
    std::vector<int> val(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n_val));
    std::vector<int> train(ids.begin() + static_cast<std::ptrdiff_t>(n_val), ids.end());
    return {train, val};
}

// --- optimizer steps (elementwise over flat spans) ---

template <class T>
void adam_step(std::span<T> params, std::span<const T> grads, std::span<T> m, std::span<T> v,
               long t, double lr, double beta1, double beta2, double eps) {
    if (params.size() != grads.size() || params.size() != m.size() || params.size() != v.size())
        throw shape_error("adam_step: array lengths differ");
    if (t < 1)
        throw argument_error("adam_step: step index must be >= 1");
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t));
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double g = static_cast<double>(grads[i]);
        const double mi = beta1 * static_cast<double>(m[i]) + (1.0 - beta1) * g;
        const double vi = beta2 * static_cast<double>(v[i]) + (1.0 - beta2) * g * g;
        m[i] = static_cast<T>(mi);
        v[i] = static_cast<T>(vi);
        const double mhat = mi / bc1;
        const double vhat = vi / bc2;
        params[i] = static_cast<T>(static_cast<double>(params[i]) -
                                   lr * mhat / (std::sqrt(vhat) + eps));
    }
}

template <class T>
void sgd_step(std::span<T> params, std::span<const T> grads, double lr) {
    if (params.size() != grads.size())
        throw shape_error("sgd_step: array lengths differ");
    for (std::size_t i = 0; i < params.size(); ++i)
        params[i] = static_cast<T>(static_cast<double>(params[i]) -
                                   lr * static_cast<double>(grads[i]));
}

// --- train log ---

struct EpochRecord {
    int epoch = 0;
    double loss = 0.0;
    double accuracy = 0.0;
};
struct ValidationRecord {
    int epoch = 0;
    double loss = 0.0;
    double accuracy = 0.0;
    std::array<double, labeler::kNumClasses> jaccard{};
    double mean_jaccard = 0.0;
};
struct TrainLog {
    std::vector<EpochRecord> epochs;
    std::vector<ValidationRecord> validations;
};

inline std::string format_train_log(const TrainLog& log) {
    std::string out = "epoch\tsplit\tloss\taccuracy\tmean_jaccard\n";
    std::size_t vi = 0;
    char line[160];
    for (const auto& e : log.epochs) {
        std::snprintf(line, sizeof line, "%d\ttrain\t%.6f\t%.6f\t-\n", e.epoch, e.loss,
                      e.accuracy);
        out += line;
        while (vi < log.validations.size() && log.validations[vi].epoch == e.epoch) {
            const auto& v = log.validations[vi];
            std::snprintf(line, sizeof line, "%d\tval\t%.6f\t%.6f\t%.6f\n", v.epoch, v.loss,
                          v.accuracy, v.mean_jaccard);
            out += line;
            ++vi;
        }
    }
    return out;
}

inline void write_train_log(const std::filesystem::path& path, const TrainLog& log) {
    io::write_text_atomic(path, format_train_log(log));
}

// --- checkpoints ---
// Layout: magic "MRSU" | u32 version (LE) | u32 header byte length (LE) |
// UTF-8 header of `key = value` lines | f32 LE params | f32 LE adam m | f32 LE adam v,
// arrays in declared parameter order.

inline constexpr char kCheckpointMagic[4] = {'M', 'R', 'S', 'U'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
    nnet::UNetConfig config;
    int epoch = 0;
    std::uint64_t seed = 0;
    long adam_t = 0;
    std::string optimizer = "adam";
    double learning_rate = 1e-4;
    double val_fraction = 0.2;
    tiler::ColorStats color_stats;
    std::vector<float> params, m, v;
};

namespace detail {

inline void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    out.push_back(static_cast<std::uint8_t>(v & 0xff));
    out.push_back(static_cast<std::uint8_t>((v >> 8) & 0xff));
    out.push_back(static_cast<std::uint8_t>((v >> 16) & 0xff));
    out.push_back(static_cast<std::uint8_t>((v >> 24) & 0xff));
}

inline void put_f32_array(std::vector<std::uint8_t>& out, const std::vector<float>& a) {
    for (float f : a) {
        std::uint32_t bits;
        std::memcpy(&bits, &f, 4);
        put_u32(out, bits);
    }
}

inline std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

} // namespace detail

inline std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& c) {
    std::string header;
    auto kv = [&](const std::string& k, const std::string& v) {
        header += k + " = " + v + "\n";
    };
    kv("in_channels", std::to_string(c.config.in_channels));
    kv("n_classes", std::to_string(c.config.n_classes));
    kv("depth", std::to_string(c.config.depth));
    kv("base_filters", std::to_string(c.config.base_filters));
    kv("dropout_p", detail::fmt_double(c.config.dropout_p));
    kv("epoch", std::to_string(c.epoch));
    kv("seed", std::to_string(c.seed));
    kv("adam_t", std::to_string(c.adam_t));
    kv("optimizer", c.optimizer);
    kv("learning_rate", detail::fmt_double(c.learning_rate));
    kv("val_fraction", detail::fmt_double(c.val_fraction));
    for (int ch = 0; ch < 3; ++ch) {
        kv("color_mean_" + std::string(1, "rgb"[ch]), detail::fmt_double(c.color_stats.mean[ch]));
        kv("color_std_" + std::string(1, "rgb"[ch]),
           detail::fmt_double(c.color_stats.stddev[ch]));
    }
    kv("param_count", std::to_string(c.params.size()));

    std::vector<std::uint8_t> out;
    out.insert(out.end(), kCheckpointMagic, kCheckpointMagic + 4);
    detail::put_u32(out, kCheckpointVersion);
    detail::put_u32(out, static_cast<std::uint32_t>(header.size()));
    out.insert(out.end(), header.begin(), header.end());
    detail::put_f32_array(out, c.params);
    detail::put_f32_array(out, c.m);
    detail::put_f32_array(out, c.v);
    return out;
}

inline Checkpoint parse_checkpoint(const std::vector<std::uint8_t>& bytes) {
    if (bytes.size() < 12)
        throw truncation_error("checkpoint shorter than its fixed prelude");
    if (std::memcmp(bytes.data(), kCheckpointMagic, 4) != 0)
        throw bad_magic_error("checkpoint magic mismatch (want MRSU)");
    auto get_u32 = [&](std::size_t off) {
        return static_cast<std::uint32_t>(bytes[off]) |
               (static_cast<std::uint32_t>(bytes[off + 1]) << 8) |
               (static_cast<std::uint32_t>(bytes[off + 2]) << 16) |
               (static_cast<std::uint32_t>(bytes[off + 3]) << 24);
    };
    const std::uint32_t version = get_u32(4);
    if (version != kCheckpointVersion)
        throw version_error("checkpoint version " + std::to_string(version) + " unsupported");
    const std::uint32_t header_len = get_u32(8);
    if (bytes.size() < 12 + header_len)
        throw truncation_error("checkpoint header truncated");

    Checkpoint c;
    std::size_t param_count = 0;
    {
        std::istringstream hs(std::string(bytes.begin() + 12, bytes.begin() + 12 + header_len));
        std::string line;
        while (std::getline(hs, line)) {
            const std::size_t eq = line.find(" = ");
            if (eq == std::string::npos)
                throw parse_error("malformed checkpoint header line: " + line, 12);
            const std::string key = line.substr(0, eq);
            const std::string val = line.substr(eq + 3);
            if (key == "in_channels")
                c.config.in_channels = std::stoi(val);
            else if (key == "n_classes")
                c.config.n_classes = std::stoi(val);
            else if (key == "depth")
                c.config.depth = std::stoi(val);
            else if (key == "base_filters")
                c.config.base_filters = std::stoi(val);
            else if (key == "dropout_p")
                c.config.dropout_p = std::stod(val);
            else if (key == "epoch")
                c.epoch = std::stoi(val);
            else if (key == "seed")
                c.seed = std::stoull(val);
            else if (key == "adam_t")
                c.adam_t = std::stol(val);
            else if (key == "optimizer")
                c.optimizer = val;
            else if (key == "learning_rate")
                c.learning_rate = std::stod(val);
            else if (key == "val_fraction")
                c.val_fraction = std::stod(val);
            else if (key == "color_mean_r")
                c.color_stats.mean[0] = std::stod(val);
            else if (key == "color_mean_g")
                c.color_stats.mean[1] = std::stod(val);
            else if (key == "color_mean_b")
                c.color_stats.mean[2] = std::stod(val);
            else if (key == "color_std_r")
                c.color_stats.stddev[0] = std::stod(val);
            else if (key == "color_std_g")
                c.color_stats.stddev[1] = std::stod(val);
            else if (key == "color_std_b")
                c.color_stats.stddev[2] = std::stod(val);
            else if (key == "param_count")
                param_count = std::stoull(val);
            else
                throw parse_error("unknown checkpoint header key: " + key, 12);
        }
    }
    const std::size_t want = 12 + header_len + param_count * 3 * 4;
    if (bytes.size() < want)
        throw truncation_error("checkpoint arrays truncated: expected " + std::to_string(want) +
                               " bytes, found " + std::to_string(bytes.size()));

    auto read_f32s = [&](std::size_t off, std::vector<float>& dst) {
        dst.resize(param_count);
        for (std::size_t i = 0; i < param_count; ++i) {
            const std::uint32_t bits = get_u32(off + i * 4);
            std::memcpy(&dst[i], &bits, 4);
        }
    };
    std::size_t off = 12 + header_len;
    read_f32s(off, c.params);
    read_f32s(off + param_count * 4, c.m);
    read_f32s(off + param_count * 8, c.v);
    return c;
}

inline void save_checkpoint(const std::filesystem::path& path, const Checkpoint& c) {
    io::write_bytes_atomic(path, serialize_checkpoint(c));
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
    return parse_checkpoint(io::detail::slurp(path));
}

// --- flat parameter access in declared order ---

template <class T>
std::vector<float> flatten_params(const nnet::UNetModel<T>& m) {
    std::vector<float> out;
    out.reserve(m.parameter_count());
    m.visit_layers([&](const nnet::ConvLayer<T>& l) {
        for (const T& v : l.w.data)
            out.push_back(static_cast<float>(v));
        for (const T& v : l.b)
            out.push_back(static_cast<float>(v));
    });
    return out;
}

template <class T>
void unflatten_params(nnet::UNetModel<T>& m, std::span<const float> flat) {
    if (flat.size() != m.parameter_count())
        throw shape_error("checkpoint parameter count does not match architecture");
    std::size_t i = 0;
    m.visit_layers([&](nnet::ConvLayer<T>& l) {
        for (T& v : l.w.data)
            v = static_cast<T>(flat[i++]);
        for (T& v : l.b)
            v = static_cast<T>(flat[i++]);
    });
}

// --- input assembly ---

// Channels: RGB scaled to [0,1]; optional 4th channel = elevation / 6000 m.
inline nnet::Tensor<float> patch_input(const sampler::LoadedPatch& p, int in_channels) {
    const int w = p.terrain.width(), h = p.terrain.height();
    nnet::Tensor<float> x(1, in_channels, h, w);
    float* r = x.plane(0, 0);
    float* g = x.plane(0, 1);
    float* b = x.plane(0, 2);
    for (std::size_t i = 0; i < p.terrain.size(); ++i) {
        r[i] = p.terrain[i].r / 255.0f;
        g[i] = p.terrain[i].g / 255.0f;
        b[i] = p.terrain[i].b / 255.0f;
    }
    if (in_channels == 4) {
        if (p.height.empty())
            throw argument_error("patch_input: height channel requested but not loaded");
        float* e = x.plane(0, 3);
        for (std::size_t i = 0; i < p.height.size(); ++i)
            e[i] = static_cast<float>(p.height[i] / worldgen::kMaxElevation);
    }
    return x;
}

// --- training ---

struct TrainResult {
    nnet::UNetModel<float> model;      // final state
    nnet::UNetModel<float> best_model; // lowest validation loss (final if never validated)
    int best_epoch = 0;
    int final_epoch = 0;
    long adam_t = 0;
    std::vector<float> adam_m, adam_v; // flat, declared order (final state)
    std::vector<float> best_m, best_v;
    long best_adam_t = 0;
    TrainLog log;
    tiler::ColorStats color_stats;
    std::vector<int> train_ids, val_ids;
};

namespace detail {

struct SampleGrad {
    nnet::UNetModel<float> grads;
    double loss = 0.0;
    std::size_t correct = 0;
};

// Forward/backward for one patch; N = 1 per sample, parallel across the batch.
inline SampleGrad sample_pass(const nnet::UNetModel<float>& model,
                              const sampler::LoadedPatch& patch, Pcg32 dropout_rng) {
    nnet::Tensor<float> x = patch_input(patch, model.config.in_channels);
    nnet::UNetCache<float> cache;
    nnet::Tensor<float> logits = nnet::unet_forward(model, x, true, &dropout_rng, &cache);
    nnet::CeResult<float> ce =
        nnet::softmax_ce(logits, std::span<const std::uint8_t>(patch.mask.cells()));
    SampleGrad out{nnet::unet_backward(model, cache, ce.grad_logits), ce.loss, ce.correct};
    return out;
}

} // namespace detail

// Validation pass: loss, pixel accuracy, pooled per-class Jaccard.
inline ValidationRecord validate_split(const nnet::UNetModel<float>& model,
                                       const std::vector<sampler::LoadedPatch>& patches,
                                       const std::vector<int>& ids, int epoch) {
    ValidationRecord rec;
    rec.epoch = epoch;
    std::vector<double> losses(ids.size());
    std::vector<std::size_t> corrects(ids.size());
    std::vector<evalkit::JaccardCounts> counts(ids.size());
    parallel_for(static_cast<int>(ids.size()), [&](int i) {
        const sampler::LoadedPatch& p = patches[static_cast<std::size_t>(ids[i])];
        nnet::Tensor<float> x = patch_input(p, model.config.in_channels);
        nnet::Tensor<float> logits = nnet::unet_forward(model, x, false);
        nnet::CeResult<float> ce =
            nnet::softmax_ce(logits, std::span<const std::uint8_t>(p.mask.cells()));
        losses[i] = ce.loss;
        corrects[i] = ce.correct;
        counts[i].add(nnet::argmax_labels(logits), p.mask.cells());
    });
    double loss = 0.0;
    std::size_t correct = 0, pixels = 0;
    evalkit::JaccardCounts pooled;
    for (std::size_t i = 0; i < ids.size(); ++i) {
        const auto& p = patches[static_cast<std::size_t>(ids[i])];
        loss += losses[i] * static_cast<double>(p.mask.size());
        correct += corrects[i];
        pixels += p.mask.size();
        pooled.merge(counts[i]);
    }
    rec.loss = loss / static_cast<double>(pixels);
    rec.accuracy = static_cast<double>(correct) / static_cast<double>(pixels);
    rec.jaccard = pooled.jaccard_per_class();
    rec.mean_jaccard = 0.0;
    for (double j : rec.jaccard)
        rec.mean_jaccard += j;
    rec.mean_jaccard /= labeler::kNumClasses;
    return rec;
}

inline TrainResult train(const std::vector<sampler::LoadedPatch>& patches,
                         const nnet::UNetConfig& unet_cfg, const TrainConfig& cfg,
                         const std::optional<Checkpoint>& resume = std::nullopt) {
    cfg.validate();
    unet_cfg.validate();
    if (patches.empty())
        throw argument_error("train: dataset is empty");

    TrainResult res;
    auto [train_ids, val_ids] = split_dataset(patches.size(), cfg.val_fraction, cfg.seed);
    res.train_ids = train_ids;
    res.val_ids = val_ids;

    // Color statistics over the training split, in id order.
    {
        tiler::ColorStatsAccumulator acc;
        for (int id : train_ids)
            acc.add(patches[static_cast<std::size_t>(id)].terrain);
        res.color_stats = acc.finish();
    }

    int start_epoch = 0;
    long t = 0;
    nnet::UNetModel<float> model;
    std::vector<float> m, v;
    if (resume) {
        if (resume->config.depth != unet_cfg.depth ||
            resume->config.base_filters != unet_cfg.base_filters ||
            resume->config.in_channels != unet_cfg.in_channels)
            throw argument_error("train: resume checkpoint architecture differs from config");
        model = nnet::build_model<float>(resume->config);
        unflatten_params(model, resume->params);
        m = resume->m;
        v = resume->v;
        t = resume->adam_t;
        start_epoch = resume->epoch;
    } else {
        model = nnet::init_params<float>(unet_cfg, cfg.seed);
        m.assign(model.parameter_count(), 0.0f);
        v.assign(model.parameter_count(), 0.0f);
    }

    res.best_epoch = start_epoch;
    double best_val_loss = std::numeric_limits<double>::infinity();
    nnet::UNetModel<float> best_model = model;
    std::vector<float> best_m = m, best_v = v;
    long best_t = t;
    int stagnant_rounds = 0;
    bool stopped_early = false;

    const std::size_t n_train = train_ids.size();
    for (int epoch = start_epoch + 1; epoch <= cfg.max_epochs && !stopped_early; ++epoch) {
        // Deterministic per-epoch reshuffle.
        std::vector<int> order = train_ids;
        Pcg32 shuffle_rng =
            make_stream(cfg.seed, {streams::kShuffle, static_cast<std::uint64_t>(epoch)});
        for (std::size_t i = order.size() - 1; i > 0; --i)
            std::swap(order[i], order[shuffle_rng.next_below(static_cast<std::uint32_t>(i + 1))]);

        double epoch_loss = 0.0;
        std::size_t epoch_correct = 0, epoch_pixels = 0;
        int step = 0;
        for (std::size_t lo = 0; lo < n_train; lo += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t hi = std::min(n_train, lo + static_cast<std::size_t>(cfg.batch_size));
            const int bsz = static_cast<int>(hi - lo);
            ++step;

            std::vector<detail::SampleGrad> per_sample(static_cast<std::size_t>(bsz));
            parallel_for(bsz, [&](int s) {
                const int id = order[lo + static_cast<std::size_t>(s)];
                Pcg32 drop_rng = make_stream(
                    cfg.seed, {streams::kDropout, static_cast<std::uint64_t>(epoch),
                               static_cast<std::uint64_t>(step), static_cast<std::uint64_t>(s)});
                per_sample[static_cast<std::size_t>(s)] =
                    detail::sample_pass(model, patches[static_cast<std::size_t>(id)], drop_rng);
            });

            // Fixed-order reduction over samples.
            double batch_loss = 0.0;
            std::size_t batch_pixels = 0;
            nnet::UNetModel<float>& total = per_sample[0].grads;
            for (int s = 1; s < bsz; ++s) {
                std::vector<nnet::ConvLayer<float>*> dst, src;
                total.visit_layers([&](nnet::ConvLayer<float>& l) { dst.push_back(&l); });
                per_sample[static_cast<std::size_t>(s)].grads.visit_layers(
                    [&](nnet::ConvLayer<float>& l) { src.push_back(&l); });
                for (std::size_t li = 0; li < dst.size(); ++li) {
                    for (std::size_t i = 0; i < dst[li]->w.size(); ++i)
                        dst[li]->w.data[i] += src[li]->w.data[i];
                    for (std::size_t i = 0; i < dst[li]->b.size(); ++i)
                        dst[li]->b[i] += src[li]->b[i];
                }
            }
            const float inv_b = 1.0f / static_cast<float>(bsz);
            total.visit_layers([&](nnet::ConvLayer<float>& l) {
                for (float& g : l.w.data)
                    g *= inv_b;
                for (float& g : l.b)
                    g *= inv_b;
            });
            for (int s = 0; s < bsz; ++s) {
                const int id = order[lo + static_cast<std::size_t>(s)];
                const std::size_t px = patches[static_cast<std::size_t>(id)].mask.size();
                batch_loss += per_sample[static_cast<std::size_t>(s)].loss;
                epoch_loss += per_sample[static_cast<std::size_t>(s)].loss *
                              static_cast<double>(px);
                epoch_correct += per_sample[static_cast<std::size_t>(s)].correct;
                epoch_pixels += px;
                batch_pixels += px;
            }
            batch_loss /= bsz;
            if (!std::isfinite(batch_loss))
                throw divergence_error("train: non-finite loss at epoch " +
                                       std::to_string(epoch) + " step " + std::to_string(step));

            // Optimizer step over flat views, declared order.
            std::vector<float> flat_grads = flatten_params(total);
            std::vector<float> flat_params = flatten_params(model);
            if (cfg.optimizer == TrainConfig::Optimizer::adam) {
                ++t;
                adam_step<float>(flat_params, flat_grads, m, v, t, cfg.learning_rate, cfg.beta1,
                                 cfg.beta2, cfg.epsilon);
            } else {
                sgd_step<float>(flat_params, flat_grads, cfg.learning_rate);
            }
            unflatten_params(model, flat_params);
        }

        res.log.epochs.push_back(
            {epoch, epoch_loss / static_cast<double>(epoch_pixels),
             static_cast<double>(epoch_correct) / static_cast<double>(epoch_pixels)});

        if (epoch % cfg.val_every == 0) {
            ValidationRecord rec = validate_split(model, patches, val_ids, epoch);
            res.log.validations.push_back(rec);
            if (rec.loss < best_val_loss) {
                best_val_loss = rec.loss;
                best_model = model;
                best_m = m;
                best_v = v;
                best_t = t;
                res.best_epoch = epoch;
                stagnant_rounds = 0;
            } else if (cfg.early_stop_patience > 0 &&
                       ++stagnant_rounds >= cfg.early_stop_patience) {
                stopped_early = true;
            }
        }
        res.final_epoch = epoch;
    }
    if (res.log.epochs.empty())
        res.final_epoch = start_epoch;

    res.model = std::move(model);
    res.best_model = std::move(best_model);
    res.adam_t = t;
    res.adam_m = std::move(m);
    res.adam_v = std::move(v);
    res.best_m = std::move(best_m);
    res.best_v = std::move(best_v);
    res.best_adam_t = best_t;
    return res;
}

inline Checkpoint make_checkpoint(const nnet::UNetModel<float>& model, int epoch,
                                  const TrainConfig& cfg, long adam_t,
                                  const std::vector<float>& m, const std::vector<float>& v,
                                  const tiler::ColorStats& stats) {
    Checkpoint c;
    c.config = model.config;
    c.epoch = epoch;
    c.seed = cfg.seed;
    c.adam_t = adam_t;
    c.optimizer = cfg.optimizer == TrainConfig::Optimizer::adam ? "adam" : "sgd";
    c.learning_rate = cfg.learning_rate;
    c.val_fraction = cfg.val_fraction;
    c.color_stats = stats;
    c.params = flatten_params(model);
    c.m = m;
    c.v = v;
    return c;
}

inline nnet::UNetModel<float> model_from_checkpoint(const Checkpoint& c) {
    nnet::UNetModel<float> model = nnet::build_model<float>(c.config);
    unflatten_params(model, c.params);
    return model;
}

} // namespace terratwin::trainer
