#include "surfcdm/polar_surface.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace surfcdm {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Bilinear lookup with zero padding outside the grid.
template <typename T>
double sample_bilinear(const Grid<T>& grid, double px, double py) {
    const double fx = std::floor(px);
    const double fy = std::floor(py);
    const int x0 = static_cast<int>(fx);
    const int y0 = static_cast<int>(fy);
    const double tx = px - fx;
    const double ty = py - fy;
    auto value = [&](int x, int y) -> double {
        return grid.contains(x, y) ? static_cast<double>(grid(x, y)) : 0.0;
    };
    return (1.0 - ty) * ((1.0 - tx) * value(x0, y0) + tx * value(x0 + 1, y0)) +
           ty * ((1.0 - tx) * value(x0, y0 + 1) + tx * value(x0 + 1, y0 + 1));
}

template <typename T>
PolarRaster resample(const Grid<T>& source, const PolarGridConfig& cfg, ChannelKind kind) {
    cfg.validate();
    const Centroid& c = cfg.centroid;
    if (c.a < 0.0 || c.b < 0.0 || c.a > source.width() - 1 || c.b > source.height() - 1) {
        throw Error(ErrorKind::InvalidConfig, "centroid lies outside the image");
    }
    PolarRaster out(cfg, kind);
    for (int x = 0; x < cfg.num_columns; ++x) {
        const double theta = kTwoPi * x / cfg.num_columns;
        const double ux = std::cos(theta) * cfg.radial_step;
        const double uy = std::sin(theta) * cfg.radial_step;
        for (int y = 0; y < cfg.column_length; ++y) {
            const double v = sample_bilinear(source, cfg.centroid.a + y * ux, cfg.centroid.b + y * uy);
            if (kind == ChannelKind::Mask) {
                out.at(x, y) = v >= 0.5 ? 1.0f : 0.0f;
            } else {
                out.at(x, y) = static_cast<float>(v);
            }
        }
    }
    return out;
}

}  // namespace

void PolarGridConfig::validate() const {
    if (num_columns < 8) throw Error(ErrorKind::InvalidConfig, "num_columns must be >= 8");
    if (column_length < 8) throw Error(ErrorKind::InvalidConfig, "column_length must be >= 8");
    if (!(radial_step > 0.0) || !std::isfinite(radial_step)) {
        throw Error(ErrorKind::InvalidConfig, "radial_step must be > 0");
    }
    if (!std::isfinite(centroid.a) || !std::isfinite(centroid.b)) {
        throw Error(ErrorKind::InvalidConfig, "centroid must be finite");
    }
}

PolarGridConfig PolarGridConfig::for_image(int width, int height, Centroid centroid, int num_columns,
                                           int column_length) {
    PolarGridConfig cfg;
    cfg.num_columns = num_columns;
    cfg.column_length = column_length;
    cfg.radial_step = 0.5 * std::min(width, height) / static_cast<double>(column_length);
    cfg.centroid = centroid;
    cfg.validate();
    return cfg;
}

bool Surface::valid() const {
    if (y.empty() || column_length <= 0) return false;
    return std::all_of(y.begin(), y.end(), [&](double v) {
        return std::isfinite(v) && v >= 0.0 && v < static_cast<double>(column_length);
    });
}

int star_violations(const CartesianMask& mask, Centroid center, int rays) {
    const double reach = std::hypot(mask.width(), mask.height()) + 2.0;
    constexpr double step = 0.25;
    auto inside = [&](double px, double py) {
        const int x = static_cast<int>(std::lround(px));
        const int y = static_cast<int>(std::lround(py));
        return mask.contains(x, y) && mask(x, y) != 0;
    };
    int violations = 0;
    for (int k = 0; k < rays; ++k) {
        const double theta = kTwoPi * k / rays;
        const double ux = std::cos(theta);
        const double uy = std::sin(theta);
        bool prev = inside(center.a, center.b);
        if (!prev) {
            ++violations;
            continue;
        }
        // Background gaps shorter than this are staircase artifacts of grazing rays.
        constexpr double gap_tolerance = 1.5;
        int crossings = 0;
        double gap = -1.0;  // length of the current background run, < 0 while inside
        for (double r = step; r <= reach; r += step) {
            const bool cur = inside(center.a + r * ux, center.b + r * uy);
            if (prev && !cur) gap = 0.0;
            if (!cur && gap >= 0.0) gap += step;
            if (cur && !prev && gap >= 0.0 && gap < gap_tolerance) gap = -1.0;
            if (!cur && gap >= gap_tolerance && gap < gap_tolerance + step) ++crossings;
            prev = cur;
        }
        if (gap >= 0.0 && gap < gap_tolerance) ++crossings;
        if (crossings != 1) ++violations;
    }
    return violations;
}

Centroid compute_centroid(const CartesianMask& mask, StarCheck check, int rays) {
    double sx = 0.0;
    double sy = 0.0;
    std::size_t n = 0;
    for (int y = 0; y < mask.height(); ++y) {
        for (int x = 0; x < mask.width(); ++x) {
            if (mask(x, y) == 0) continue;
            sx += x;
            sy += y;
            ++n;
        }
    }
    if (n == 0) throw Error(ErrorKind::EmptyMask, "mask has no foreground");
    const Centroid c{sx / static_cast<double>(n), sy / static_cast<double>(n)};
    if (check == StarCheck::Enforce) {
        const int bad = star_violations(mask, c, rays);
        if (bad > 0) {
            throw Error(ErrorKind::NonStarShaped,
                        std::to_string(bad) + " of " + std::to_string(rays) + " rays fail the crossing test");
        }
    }
    return c;
}

PolarRaster to_polar(const CartesianImage& image, const PolarGridConfig& cfg) {
    return resample(image, cfg, ChannelKind::Image);
}

PolarRaster to_polar(const CartesianMask& mask, const PolarGridConfig& cfg) {
    return resample(mask, cfg, ChannelKind::Mask);
}

Surface extract_surface(const PolarRaster& mask) {
    const int L = mask.column_length();
    Surface s(std::vector<double>(static_cast<std::size_t>(mask.num_columns()), 0.0), L);
    for (int x = 0; x < mask.num_columns(); ++x) {
        const auto col = mask.column(x);
        const auto ones = std::count_if(col.begin(), col.end(), [](float v) { return v >= 0.5f; });
        s[static_cast<std::size_t>(x)] = static_cast<double>(std::min<long>(ones, L - 1));
    }
    return s;
}

PolarRaster surface_to_polar_mask(const Surface& surface, const PolarGridConfig& cfg) {
    cfg.validate();
    if (static_cast<int>(surface.size()) != cfg.num_columns) {
        throw Error(ErrorKind::LengthMismatch, "surface length differs from num_columns");
    }
    PolarRaster out(cfg, ChannelKind::Mask);
    for (int x = 0; x < cfg.num_columns; ++x) {
        const long top = std::clamp<long>(std::lround(surface[static_cast<std::size_t>(x)]), 0, cfg.column_length);
        for (long y = 0; y < top; ++y) out.at(x, static_cast<int>(y)) = 1.0f;
    }
    return out;
}

CartesianMask surface_to_cartesian(const Surface& surface, const PolarGridConfig& cfg, int width, int height) {
    cfg.validate();
    if (width <= 0 || height <= 0) throw Error(ErrorKind::InvalidConfig, "output size must be positive");
    const int X = cfg.num_columns;
    if (static_cast<int>(surface.size()) != X) {
        throw Error(ErrorKind::LengthMismatch, "surface length differs from num_columns");
    }
    CartesianMask out(width, height, 0);
    for (int py = 0; py < height; ++py) {
        for (int px = 0; px < width; ++px) {
            const double dx = px - cfg.centroid.a;
            const double dy = py - cfg.centroid.b;
            const double radius = std::hypot(dx, dy) / cfg.radial_step;
            double theta = std::atan2(dy, dx);
            if (theta < 0.0) theta += kTwoPi;
            const double u = theta * X / kTwoPi;
            const double fu = std::floor(u);
            const int c0 = static_cast<int>(fu) % X;
            const int c1 = (c0 + 1) % X;
            const double t = u - fu;
            const double s = (1.0 - t) * surface[static_cast<std::size_t>(c0)] + t * surface[static_cast<std::size_t>(c1)];
            out(px, py) = (radius + 0.5 < s) ? 1 : 0;
        }
    }
    return out;
}

CartesianMask from_polar(const PolarRaster& mask, int width, int height) {
    if (mask.kind == ChannelKind::Image) throw Error(ErrorKind::InvalidConfig, "from_polar needs a mask raster");
    return surface_to_cartesian(extract_surface(mask), mask.config, width, height);
}

bool is_terrain(const PolarRaster& mask) {
    for (int x = 0; x < mask.num_columns(); ++x) {
        const auto col = mask.column(x);
        bool seen_background = false;
        for (float v : col) {
            const bool fg = v >= 0.5f;
            if (fg && seen_background) return false;
            if (!fg) seen_background = true;
        }
    }
    return true;
}

}  // namespace surfcdm
