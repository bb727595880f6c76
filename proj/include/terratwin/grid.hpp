#pragma once
// Row-major 2D grid container shared by all pipeline stages.
// Convention: x = column (west->east), y = row (north->south), index = y*width + x.

#include <cstdint>
#include <vector>

#include "terratwin/errors.hpp"

namespace terratwin {

template <class T>
class Grid {
public:
    Grid() = default;
    Grid(int width, int height, T fill = T{})
        : width_(width), height_(height), cells_(check_extent(width, height), fill) {}

    int width() const noexcept { return width_; }
    int height() const noexcept { return height_; }
    std::size_t size() const noexcept { return cells_.size(); }
    bool empty() const noexcept { return cells_.empty(); }

    T& at(int x, int y) { return cells_[idx(x, y)]; }
    const T& at(int x, int y) const { return cells_[idx(x, y)]; }
    T& operator[](std::size_t i) { return cells_[i]; }
    const T& operator[](std::size_t i) const { return cells_[i]; }

    std::vector<T>& cells() noexcept { return cells_; }
    const std::vector<T>& cells() const noexcept { return cells_; }

    template <class U>
    bool same_shape(const Grid<U>& other) const noexcept {
        return width_ == other.width() && height_ == other.height();
    }
    friend bool operator==(const Grid& a, const Grid& b) {
        return a.width_ == b.width_ && a.height_ == b.height_ && a.cells_ == b.cells_;
    }

private:
    static std::size_t check_extent(int w, int h) {
        if (w < 0 || h < 0)
            throw argument_error("grid extents must be non-negative");
        return static_cast<std::size_t>(w) * static_cast<std::size_t>(h);
    }
    std::size_t idx(int x, int y) const noexcept {
        return static_cast<std::size_t>(y) * width_ + static_cast<std::size_t>(x);
    }

    int width_ = 0;
    int height_ = 0;
    std::vector<T> cells_;
};

struct Rgb {
    std::uint8_t r = 0, g = 0, b = 0;
    friend bool operator==(const Rgb&, const Rgb&) = default;
};

// Per-pixel terrain class indices (values 0..6).
using LabelMask = Grid<std::uint8_t>;
using TerrainImage = Grid<Rgb>;

} // namespace terratwin
