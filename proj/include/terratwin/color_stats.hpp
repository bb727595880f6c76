#pragma once
// Per-channel mean/stddev of a set of RGB images. Computed once from the
// training terrain patches and carried in the checkpoint header so tiled
// inference can match test imagery to the training distribution.

#include <array>
#include <cmath>
#include <cstdint>

#include "terratwin/grid.hpp"

namespace terratwin::tiler {

struct ColorStats {
    std::array<double, 3> mean{0.0, 0.0, 0.0};
    std::array<double, 3> stddev{0.0, 0.0, 0.0};

    bool degenerate(int channel) const noexcept { return !(stddev[channel] > 0.0); }
};

// Streaming accumulator; population standard deviation.
class ColorStatsAccumulator {
public:
    void add(const Rgb& px) noexcept {
        const double v[3] = {static_cast<double>(px.r), static_cast<double>(px.g),
                             static_cast<double>(px.b)};
        for (int c = 0; c < 3; ++c) {
            sum_[c] += v[c];
            sum_sq_[c] += v[c] * v[c];
        }
        ++count_;
    }
    void add(const TerrainImage& img) noexcept {
        for (std::size_t i = 0; i < img.size(); ++i)
            add(img[i]);
    }

    ColorStats finish() const noexcept {
        ColorStats s;
        if (count_ == 0)
            return s;
        const double n = static_cast<double>(count_);
        for (int c = 0; c < 3; ++c) {
            s.mean[c] = sum_[c] / n;
            const double var = sum_sq_[c] / n - s.mean[c] * s.mean[c];
            s.stddev[c] = var > 0.0 ? std::sqrt(var) : 0.0;
        }
        return s;
    }

private:
    std::array<double, 3> sum_{0.0, 0.0, 0.0};
    std::array<double, 3> sum_sq_{0.0, 0.0, 0.0};
    std::uint64_t count_ = 0;
};

} // namespace terratwin::tiler
