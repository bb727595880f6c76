#pragma once
// Integer intersection/union accumulators for pooled per-class Jaccard.
// Order-independent counts, so parallel accumulation then merge is exact.

#include <array>
#include <cstdint>
#include <span>

#include "terratwin/classes.hpp"

namespace terratwin::evalkit {

struct JaccardCounts {
    std::array<std::uint64_t, labeler::kNumClasses> intersection{};
    std::array<std::uint64_t, labeler::kNumClasses> pred_count{};
    std::array<std::uint64_t, labeler::kNumClasses> truth_count{};

    void add(std::span<const std::uint8_t> pred, std::span<const std::uint8_t> truth) {
        for (std::size_t i = 0; i < pred.size(); ++i) {
            ++pred_count[pred[i]];
            ++truth_count[truth[i]];
            if (pred[i] == truth[i])
                ++intersection[pred[i]];
        }
    }

    void merge(const JaccardCounts& o) {
        for (int c = 0; c < labeler::kNumClasses; ++c) {
            intersection[c] += o.intersection[c];
            pred_count[c] += o.pred_count[c];
            truth_count[c] += o.truth_count[c];
        }
    }

    // |pred ∧ truth| / |pred ∨ truth|; 1 when both sides are empty.
    std::array<double, labeler::kNumClasses> jaccard_per_class() const {
        std::array<double, labeler::kNumClasses> out{};
        for (int c = 0; c < labeler::kNumClasses; ++c) {
            const std::uint64_t uni = pred_count[c] + truth_count[c] - intersection[c];
            out[c] = uni == 0 ? 1.0
                              : static_cast<double>(intersection[c]) / static_cast<double>(uni);
        }
        return out;
    }
};

} // namespace terratwin::evalkit
