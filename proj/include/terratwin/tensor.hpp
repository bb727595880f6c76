#pragma once
// Dense rank-4 tensor, the sole carrier for activations, parameters and
// gradients. Activations use (N, C, H, W); convolution kernels use
// (Kh, Kw, Cin, Cout). float for training/checkpoints, double for the
// gradient-check harness.

#include <array>
#include <cmath>
#include <cstdlib>
#include <string>
#include <vector>

#include "terratwin/errors.hpp"

namespace terratwin::nnet {

template <class T>
struct Tensor {
    std::array<int, 4> dim{0, 0, 0, 0};
    std::vector<T> data;

    Tensor() = default;
    Tensor(int d0, int d1, int d2, int d3)
        : dim{d0, d1, d2, d3},
          data(static_cast<std::size_t>(d0) * d1 * d2 * d3, T(0)) {
        if (d0 < 0 || d1 < 0 || d2 < 0 || d3 < 0)
            throw shape_error("tensor extents must be non-negative");
    }

    std::size_t size() const noexcept { return data.size(); }

    T& at(int i0, int i1, int i2, int i3) noexcept {
        return data[((static_cast<std::size_t>(i0) * dim[1] + i1) * dim[2] + i2) * dim[3] + i3];
    }
    const T& at(int i0, int i1, int i2, int i3) const noexcept {
        return data[((static_cast<std::size_t>(i0) * dim[1] + i1) * dim[2] + i2) * dim[3] + i3];
    }

    // Start of the (i0, i1) plane, a dim[2] x dim[3] row-major block.
    T* plane(int i0, int i1) noexcept {
        return data.data() + (static_cast<std::size_t>(i0) * dim[1] + i1) *
                                 (static_cast<std::size_t>(dim[2]) * dim[3]);
    }
    const T* plane(int i0, int i1) const noexcept {
        return data.data() + (static_cast<std::size_t>(i0) * dim[1] + i1) *
                                 (static_cast<std::size_t>(dim[2]) * dim[3]);
    }

    bool same_shape(const Tensor& o) const noexcept { return dim == o.dim; }

    bool all_finite() const noexcept {
        for (const T& v : data)
            if (!std::isfinite(v))
                return false;
        return true;
    }

    std::string shape_str() const {
        return "(" + std::to_string(dim[0]) + "," + std::to_string(dim[1]) + "," +
               std::to_string(dim[2]) + "," + std::to_string(dim[3]) + ")";
    }
};

// Debug hook: when TERRAIN_TWIN_DEBUG_CHECKS is set, layer outputs are
// verified finite after every op.
inline bool debug_checks_enabled() {
    static const bool enabled = std::getenv("TERRAIN_TWIN_DEBUG_CHECKS") != nullptr;
    return enabled;
}

template <class T>
inline void debug_check_finite(const Tensor<T>& t, const char* what) {
    if (debug_checks_enabled() && !t.all_finite())
        throw divergence_error(std::string("non-finite values after ") + what);
}

} // namespace terratwin::nnet
