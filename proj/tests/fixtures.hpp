#pragma once

#include <cmath>
#include <cstdint>

#include "surfcdm/grid.hpp"
#include "surfcdm/polar_surface.hpp"
#include "surfcdm/rng.hpp"
#include "surfcdm/synthdata.hpp"

namespace fixtures {

using surfcdm::CartesianImage;
using surfcdm::CartesianMask;

inline CartesianMask disk(int w, int h, double cx, double cy, double r) {
    CartesianMask m(w, h, 0);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            if (std::hypot(x - cx, y - cy) < r) m(x, y) = 1;
    return m;
}

inline CartesianMask ellipse(int w, int h, double cx, double cy, double rx, double ry) {
    CartesianMask m(w, h, 0);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const double u = (x - cx) / rx;
            const double v = (y - cy) / ry;
            if (u * u + v * v < 1.0) m(x, y) = 1;
        }
    return m;
}

inline CartesianMask rect(int w, int h, int x0, int y0, int rw, int rh) {
    CartesianMask m(w, h, 0);
    for (int y = y0; y < y0 + rh; ++y)
        for (int x = x0; x < x0 + rw; ++x) m(x, y) = 1;
    return m;
}

/// Random star mask from the generator's shape family.
inline CartesianMask star_mask(std::uint64_t seed, int w = 256, int h = 256) {
    surfcdm::Rng rng(seed);
    const auto spec = surfcdm::ShapeSpec::random(rng, w, h);
    const surfcdm::Centroid c = spec.center.value_or(surfcdm::Centroid{(w - 1) / 2.0, (h - 1) / 2.0});
    return surfcdm::rasterize_shape(spec, c, w, h);
}

inline CartesianMask random_mask(surfcdm::Rng& rng, int w, int h, double p) {
    CartesianMask m(w, h, 0);
    for (auto& v : m.values()) v = rng.bernoulli(p) ? 1 : 0;
    return m;
}

inline double overlap_dsc(const CartesianMask& a, const CartesianMask& b) {
    double inter = 0, sa = 0, sb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        inter += (a.values()[i] && b.values()[i]) ? 1 : 0;
        sa += a.values()[i] ? 1 : 0;
        sb += b.values()[i] ? 1 : 0;
    }
    return sa + sb == 0 ? 1.0 : 2.0 * inter / (sa + sb);
}

}  // namespace fixtures
