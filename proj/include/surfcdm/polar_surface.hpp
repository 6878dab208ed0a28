#pragma once

// Polar graph-column representation of star-shaped objects.
//
// A PolarRaster stores X columns (rays from the centroid at angle 2*pi*x/X)
// of L samples each, ordered from the centroid outward. Storage is a Grid
// with width L and height X, so one column is one contiguous row.

#include <vector>

#include "surfcdm/grid.hpp"

namespace surfcdm {

struct Centroid {
    double a = 0.0;  // x, pixels
    double b = 0.0;  // y, pixels

    friend bool operator==(const Centroid&, const Centroid&) = default;
};

struct PolarGridConfig {
    int num_columns = 256;
    int column_length = 200;
    double radial_step = 1.0;
    Centroid centroid{};

    void validate() const;

    /// Columns span from the centroid to the shorter half-extent of the image.
    static PolarGridConfig for_image(int width, int height, Centroid centroid,
                                     int num_columns = 256, int column_length = 200);

    friend bool operator==(const PolarGridConfig&, const PolarGridConfig&) = default;
};

enum class ChannelKind { Image, Mask, Perturbation };

struct PolarRaster {
    PolarGridConfig config;
    ChannelKind kind = ChannelKind::Image;
    Grid<float> values;  // width = column_length, height = num_columns

    PolarRaster() = default;
    PolarRaster(const PolarGridConfig& cfg, ChannelKind k, float fill = 0.0f)
        : config(cfg), kind(k), values(cfg.column_length, cfg.num_columns, fill) {}

    int num_columns() const noexcept { return config.num_columns; }
    int column_length() const noexcept { return config.column_length; }

    float& at(int column, int sample) { return values(sample, column); }
    float at(int column, int sample) const { return values(sample, column); }
    std::span<const float> column(int x) const { return values.row(x); }
};

/// Terrain surface: one real-valued boundary position per column, in [0, L).
struct Surface {
    std::vector<double> y;
    int column_length = 0;

    Surface() = default;
    Surface(std::vector<double> heights, int length) : y(std::move(heights)), column_length(length) {}
    static Surface constant(int num_columns, int length, double value) {
        return Surface(std::vector<double>(static_cast<std::size_t>(num_columns), value), length);
    }

    std::size_t size() const noexcept { return y.size(); }
    double operator[](std::size_t i) const { return y[i]; }
    double& operator[](std::size_t i) { return y[i]; }

    bool valid() const;

    friend bool operator==(const Surface&, const Surface&) = default;
};

enum class StarCheck { Skip, Enforce };

/// Foreground center of mass. With StarCheck::Enforce, `rays` rays are cast from
/// the centroid and each must leave the foreground exactly once.
Centroid compute_centroid(const CartesianMask& mask, StarCheck check = StarCheck::Skip, int rays = 256);

/// Number of rays (out of `rays`) cast from `center` whose foreground->background
/// crossing count is not exactly one. Zero means star-shaped about `center`.
int star_violations(const CartesianMask& mask, Centroid center, int rays = 256);

PolarRaster to_polar(const CartesianImage& image, const PolarGridConfig& cfg);
/// Mask variant: bilinear interpolation then threshold at 0.5.
PolarRaster to_polar(const CartesianMask& mask, const PolarGridConfig& cfg);

/// Per-column foreground count, clamped to [0, L-1].
Surface extract_surface(const PolarRaster& mask);

/// Column x is foreground for sample indices y < round(S(x)).
PolarRaster surface_to_polar_mask(const Surface& surface, const PolarGridConfig& cfg);

/// Rasterize the surface of `mask` back onto a width x height Cartesian grid.
CartesianMask from_polar(const PolarRaster& mask, int width, int height);

/// Cartesian rasterization of a surface with angular linear interpolation.
/// Sample y covers radii [(y - 0.5) * step, (y + 0.5) * step), so a pixel is
/// foreground iff radius / step + 0.5 < S(angle).
CartesianMask surface_to_cartesian(const Surface& surface, const PolarGridConfig& cfg, int width, int height);

/// True when every column has at most one foreground->background transition
/// and starts in the foreground whenever it has any foreground.
bool is_terrain(const PolarRaster& mask);

}  // namespace surfcdm
