#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "surfcdm/grid.hpp"

namespace surfcdm {

using Gray8 = Grid<std::uint8_t>;

struct Rgb8 {
    int width = 0;
    int height = 0;
    std::vector<std::array<std::uint8_t, 3>> pixels;

    Rgb8() = default;
    Rgb8(int w, int h) : width(w), height(h), pixels(static_cast<std::size_t>(w) * h, {0, 0, 0}) {}
    std::array<std::uint8_t, 3>& operator()(int x, int y) { return pixels[static_cast<std::size_t>(y) * width + x]; }
};

void write_png(const std::filesystem::path& path, const Gray8& image);
void write_png(const std::filesystem::path& path, const Rgb8& image);
/// Reads an 8-bit grayscale PNG (other formats are converted to 8-bit gray).
Gray8 read_png(const std::filesystem::path& path);

/// Quantize [0,1] intensities to 8 bits (round to nearest).
Gray8 to_gray8(const CartesianImage& image);
CartesianImage from_gray8(const Gray8& image);
/// Mask {0,1} <-> {0,255}; any nonzero byte reads as foreground.
Gray8 mask_to_gray8(const CartesianMask& mask);
CartesianMask mask_from_gray8(const Gray8& image);

/// Write `contents` to `path` through a temporary file and rename.
void write_text_atomic(const std::filesystem::path& path, const std::string& contents);

}  // namespace surfcdm
