#pragma once
// The seven terrain classes and both fixed palettes. Class indices are
// stable across the whole pipeline (masks on disk store these values).

#include <array>
#include <cstdint>
#include <string_view>

#include "terratwin/grid.hpp"

namespace terratwin::labeler {

enum class TerrainClass : std::uint8_t {
    Water = 0,
    Grassland = 1,
    Forest = 2,
    Hills = 3,
    Desert = 4,
    Mountain = 5,
    Tundra = 6,
};

inline constexpr int kNumClasses = 7;

// Render palette, indexed by class.
inline constexpr std::array<Rgb, kNumClasses> kTerrainPalette = {{
    {17, 141, 215},  // Water
    {225, 227, 155}, // Grassland
    {127, 173, 123}, // Forest
    {185, 122, 87},  // Hills
    {230, 200, 181}, // Desert
    {150, 150, 150}, // Mountain
    {193, 190, 175}, // Tundra
}};

// Mask palette: background + one saturated color per class.
inline constexpr Rgb kMaskBackground = {0, 0, 0};
inline constexpr std::array<Rgb, kNumClasses + 1> kMaskPalette = {{
    {0, 0, 0},       // Background
    {0, 0, 255},     // Water
    {0, 255, 0},     // Grassland
    {0, 255, 255},   // Forest
    {255, 0, 0},     // Hills
    {255, 255, 0},   // Desert
    {255, 0, 255},   // Mountain
    {255, 255, 255}, // Tundra
}};

// Mask colors indexed directly by class (no background entry).
inline constexpr std::array<Rgb, kNumClasses> kMaskClassColors = {{
    {0, 0, 255},
    {0, 255, 0},
    {0, 255, 255},
    {255, 0, 0},
    {255, 255, 0},
    {255, 0, 255},
    {255, 255, 255},
}};

inline constexpr std::array<std::string_view, kNumClasses> kClassNames = {
    "water", "grassland", "forest", "hills", "desert", "mountain", "tundra"};

inline constexpr std::string_view class_name(TerrainClass c) {
    return kClassNames[static_cast<int>(c)];
}

} // namespace terratwin::labeler
