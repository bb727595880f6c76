#pragma once
// Segmentation metrics: one-vs-rest ROC curves (single step per distinct
// threshold), trapezoidal AUC, per-class Jaccard, confusion matrices, and the
// full evaluation pass over a patch set.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "terratwin/classes.hpp"
#include "terratwin/errors.hpp"
#include "terratwin/evalkit_counts.hpp"
#include "terratwin/grid.hpp"
#include "terratwin/netpbm.hpp"
#include "terratwin/parallel.hpp"
#include "terratwin/sampler.hpp"
#include "terratwin/trainer.hpp"
#include "terratwin/unet.hpp"

namespace terratwin::evalkit {

struct RocPoint {
    double threshold = 0.0; // score at or above which pixels are called positive
    double fpr = 0.0;
    double tpr = 0.0;
};

struct RocCurve {
    std::vector<RocPoint> points; // starts at (0,0), ends at (1,1)
};

// Sweep over distinct score values in descending order; pixels with equal
// scores move together.
inline RocCurve roc_curve(std::span<const double> scores, std::span<const std::uint8_t> truth) {
    if (scores.size() != truth.size())
        throw shape_error("roc_curve: scores/truth length mismatch");
    std::size_t positives = 0;
    for (std::uint8_t t : truth)
        positives += t ? 1 : 0;
    const std::size_t negatives = truth.size() - positives;
    if (positives == 0 || negatives == 0)
        throw degenerate_error("roc_curve: truth has no " +
                               std::string(positives == 0 ? "positive" : "negative") +
                               " pixels");

    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

    RocCurve curve;
    curve.points.push_back({std::numeric_limits<double>::infinity(), 0.0, 0.0});
    std::size_t tp = 0, fp = 0, i = 0;
    while (i < order.size()) {
        const double s = scores[order[i]];
        while (i < order.size() && scores[order[i]] == s) {
            if (truth[order[i]])
                ++tp;
            else
                ++fp;
            ++i;
        }
        curve.points.push_back({s, static_cast<double>(fp) / static_cast<double>(negatives),
                                static_cast<double>(tp) / static_cast<double>(positives)});
    }
    return curve;
}

// Trapezoidal area under the curve over FPR.
inline double auc(const RocCurve& curve) {
    double area = 0.0;
    for (std::size_t i = 1; i < curve.points.size(); ++i) {
        const RocPoint& a = curve.points[i - 1];
        const RocPoint& b = curve.points[i];
        area += (b.fpr - a.fpr) * (a.tpr + b.tpr) * 0.5;
    }
    return area;
}

inline double jaccard(const LabelMask& pred, const LabelMask& truth, labeler::TerrainClass cls) {
    if (!pred.same_shape(truth))
        throw shape_error("jaccard: mask dimensions differ");
    const std::uint8_t c = static_cast<std::uint8_t>(cls);
    std::uint64_t inter = 0, uni = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const bool p = pred[i] == c, t = truth[i] == c;
        inter += (p && t) ? 1 : 0;
        uni += (p || t) ? 1 : 0;
    }
    return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

// Rows = truth, columns = prediction.
using Confusion =
    std::array<std::array<std::uint64_t, labeler::kNumClasses>, labeler::kNumClasses>;

inline Confusion confusion(const LabelMask& pred, const LabelMask& truth) {
    if (!pred.same_shape(truth))
        throw shape_error("confusion: mask dimensions differ");
    Confusion m{};
    for (std::size_t i = 0; i < pred.size(); ++i)
        ++m[truth[i]][pred[i]];
    return m;
}

struct ClassMetrics {
    std::optional<double> auc;  // absent when the class is degenerate in the pool
    RocCurve roc;               // empty when degenerate
    double jaccard = 0.0;
    std::uint64_t truth_pixels = 0;
    std::uint64_t pred_pixels = 0;
};

struct MetricsReport {
    std::array<ClassMetrics, labeler::kNumClasses> per_class;
    Confusion conf{};
    double pixel_accuracy = 0.0;
    double macro_auc = 0.0;    // mean pooled AUC over non-degenerate classes
    double mean_jaccard = 0.0; // mean over all classes (empty-union = 1)
    std::vector<double> per_image_macro_auc;
    double mean_image_macro_auc = 0.0;
};

// Inference over every patch: pooled per-class ROC/AUC across all pixels,
// per-image macro AUC, pooled Jaccard, confusion, accuracy.
inline MetricsReport evaluate(const nnet::UNetModel<float>& model,
                              const std::vector<sampler::LoadedPatch>& patches) {
    if (patches.empty())
        throw argument_error("evaluate: no patches");
    const int n = static_cast<int>(patches.size());

    struct PerPatch {
        std::vector<float> probs; // class-major: [c][pixel]
        std::vector<std::uint8_t> pred;
        std::size_t pixels = 0;
    };
    std::vector<PerPatch> results(static_cast<std::size_t>(n));
    parallel_for(n, [&](int i) {
        const sampler::LoadedPatch& p = patches[static_cast<std::size_t>(i)];
        nnet::Tensor<float> x = trainer::patch_input(p, model.config.in_channels);
        nnet::Tensor<float> logits = nnet::unet_forward(model, x, false);
        nnet::Tensor<float> probs = nnet::softmax_probs(logits);
        PerPatch& r = results[static_cast<std::size_t>(i)];
        r.probs.assign(probs.data.begin(), probs.data.end());
        r.pred = nnet::argmax_labels(logits);
        r.pixels = p.mask.size();
    });

    MetricsReport report;
    JaccardCounts jc;
    std::size_t total_pixels = 0, correct = 0;
    for (int i = 0; i < n; ++i) {
        const auto& truth = patches[static_cast<std::size_t>(i)].mask.cells();
        const auto& r = results[static_cast<std::size_t>(i)];
        jc.add(r.pred, truth);
        for (std::size_t px = 0; px < r.pixels; ++px) {
            ++report.conf[truth[px]][r.pred[px]];
            if (truth[px] == r.pred[px])
                ++correct;
        }
        total_pixels += r.pixels;
    }
    report.pixel_accuracy = static_cast<double>(correct) / static_cast<double>(total_pixels);
    const auto jac = jc.jaccard_per_class();
    for (int c = 0; c < labeler::kNumClasses; ++c) {
        report.per_class[c].jaccard = jac[c];
        report.per_class[c].truth_pixels = jc.truth_count[c];
        report.per_class[c].pred_pixels = jc.pred_count[c];
        report.mean_jaccard += jac[c];
    }
    report.mean_jaccard /= labeler::kNumClasses;

    // Pooled per-class ROC/AUC.
    int auc_classes = 0;
    for (int c = 0; c < labeler::kNumClasses; ++c) {
        std::vector<double> scores;
        std::vector<std::uint8_t> truth_bits;
        scores.reserve(total_pixels);
        truth_bits.reserve(total_pixels);
        for (int i = 0; i < n; ++i) {
            const auto& r = results[static_cast<std::size_t>(i)];
            const auto& truth = patches[static_cast<std::size_t>(i)].mask.cells();
            const float* pc = r.probs.data() + static_cast<std::size_t>(c) * r.pixels;
            for (std::size_t px = 0; px < r.pixels; ++px) {
                scores.push_back(static_cast<double>(pc[px]));
                truth_bits.push_back(truth[px] == c ? 1 : 0);
            }
        }
        try {
            report.per_class[c].roc = roc_curve(scores, truth_bits);
            report.per_class[c].auc = auc(report.per_class[c].roc);
            report.macro_auc += *report.per_class[c].auc;
            ++auc_classes;
        } catch (const degenerate_error&) {
            // class absent (or universal) in the pool; skipped in aggregates
        }
    }
    if (auc_classes > 0)
        report.macro_auc /= auc_classes;

    // Per-image macro AUC over that image's non-degenerate classes.
    for (int i = 0; i < n; ++i) {
        const auto& r = results[static_cast<std::size_t>(i)];
        const auto& truth = patches[static_cast<std::size_t>(i)].mask.cells();
        double sum = 0.0;
        int used = 0;
        for (int c = 0; c < labeler::kNumClasses; ++c) {
            std::vector<double> scores(r.pixels);
            std::vector<std::uint8_t> bits(r.pixels);
            const float* pc = r.probs.data() + static_cast<std::size_t>(c) * r.pixels;
            for (std::size_t px = 0; px < r.pixels; ++px) {
                scores[px] = static_cast<double>(pc[px]);
                bits[px] = truth[px] == c ? 1 : 0;
            }
            try {
                sum += auc(roc_curve(scores, bits));
                ++used;
            } catch (const degenerate_error&) {
            }
        }
        if (used > 0)
            report.per_image_macro_auc.push_back(sum / used);
    }
    if (!report.per_image_macro_auc.empty())
        report.mean_image_macro_auc =
            std::accumulate(report.per_image_macro_auc.begin(),
                            report.per_image_macro_auc.end(), 0.0) /
            static_cast<double>(report.per_image_macro_auc.size());
    return report;
}

// --- report files ---

inline std::string format_metrics(const MetricsReport& r) {
    std::string out = "class\tname\tauc\tjaccard\ttruth_pixels\tpred_pixels\n";
    char line[200];
    for (int c = 0; c < labeler::kNumClasses; ++c) {
        const ClassMetrics& m = r.per_class[c];
        if (m.auc)
            std::snprintf(line, sizeof line, "%d\t%s\t%.6f\t%.6f\t%llu\t%llu\n", c,
                          std::string(labeler::kClassNames[c]).c_str(), *m.auc, m.jaccard,
                          static_cast<unsigned long long>(m.truth_pixels),
                          static_cast<unsigned long long>(m.pred_pixels));
        else
            std::snprintf(line, sizeof line, "%d\t%s\t-\t%.6f\t%llu\t%llu\n", c,
                          std::string(labeler::kClassNames[c]).c_str(), m.jaccard,
                          static_cast<unsigned long long>(m.truth_pixels),
                          static_cast<unsigned long long>(m.pred_pixels));
        out += line;
    }
    std::snprintf(line, sizeof line, "pixel_accuracy\t%.6f\n", r.pixel_accuracy);
    out += line;
    std::snprintf(line, sizeof line, "macro_auc\t%.6f\n", r.macro_auc);
    out += line;
    std::snprintf(line, sizeof line, "mean_jaccard\t%.6f\n", r.mean_jaccard);
    out += line;
    std::snprintf(line, sizeof line, "mean_image_macro_auc\t%.6f\n", r.mean_image_macro_auc);
    out += line;
    out += "confusion\t(rows = truth, columns = prediction)\n";
    for (int t = 0; t < labeler::kNumClasses; ++t) {
        std::string row = std::string(labeler::kClassNames[t]);
        for (int p = 0; p < labeler::kNumClasses; ++p)
            row += "\t" + std::to_string(r.conf[t][p]);
        out += row + "\n";
    }
    return out;
}

inline std::string format_roc_points(const RocCurve& curve) {
    std::string out = "threshold\tfpr\ttpr\n";
    char line[100];
    for (const RocPoint& p : curve.points) {
        if (std::isinf(p.threshold))
            std::snprintf(line, sizeof line, "inf\t%.6f\t%.6f\n", p.fpr, p.tpr);
        else
            std::snprintf(line, sizeof line, "%.9f\t%.6f\t%.6f\n", p.threshold, p.fpr, p.tpr);
        out += line;
    }
    return out;
}

// Minimal ROC line plot: white background, gray diagonal, black frame,
// curve in the class mask color.
inline TerrainImage plot_roc(const RocCurve& curve, Rgb color, int size = 400) {
    TerrainImage img(size, size, Rgb{255, 255, 255});
    auto put = [&](int x, int y, Rgb c) {
        if (x >= 0 && x < size && y >= 0 && y < size)
            img.at(x, y) = c;
    };
    for (int i = 0; i < size; ++i) {
        put(i, 0, Rgb{0, 0, 0});
        put(i, size - 1, Rgb{0, 0, 0});
        put(0, i, Rgb{0, 0, 0});
        put(size - 1, i, Rgb{0, 0, 0});
        put(i, size - 1 - i, Rgb{200, 200, 200});
    }
    auto draw_line = [&](double x0, double y0, double x1, double y1) {
        const int steps = std::max(
            1, static_cast<int>(std::ceil(std::max(std::abs(x1 - x0), std::abs(y1 - y0)) *
                                          (size - 1))));
        for (int s = 0; s <= steps; ++s) {
            const double t = static_cast<double>(s) / steps;
            const double fx = x0 + (x1 - x0) * t;
            const double fy = y0 + (y1 - y0) * t;
            put(static_cast<int>(std::lround(fx * (size - 1))),
                static_cast<int>(std::lround((1.0 - fy) * (size - 1))), color);
        }
    };
    for (std::size_t i = 1; i < curve.points.size(); ++i)
        draw_line(curve.points[i - 1].fpr, curve.points[i - 1].tpr, curve.points[i].fpr,
                  curve.points[i].tpr);
    return img;
}

inline void write_metrics_files(const std::filesystem::path& dir, const MetricsReport& report,
                                bool plot) {
    std::filesystem::create_directories(dir);
    io::write_text_atomic(dir / "metrics.tsv", format_metrics(report));
    for (int c = 0; c < labeler::kNumClasses; ++c) {
        if (!report.per_class[c].auc)
            continue;
        const std::string name(labeler::kClassNames[c]);
        io::write_text_atomic(dir / ("roc_" + name + ".tsv"),
                              format_roc_points(report.per_class[c].roc));
        if (plot)
            io::write_netpbm(dir / ("roc_" + name + ".ppm"),
                             io::to_pnm(plot_roc(report.per_class[c].roc,
                                                 labeler::kMaskClassColors[c])));
    }
}

} // namespace terratwin::evalkit
