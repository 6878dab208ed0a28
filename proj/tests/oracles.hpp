#pragma once

// Brute-force reference implementations used to pin the fast metrics.

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>
#include <vector>

#include "surfcdm/grid.hpp"

namespace oracles {

using surfcdm::CartesianMask;

inline double dsc(const CartesianMask& a, const CartesianMask& b) {
    long inter = 0, na = 0, nb = 0;
    for (int y = 0; y < a.height(); ++y)
        for (int x = 0; x < a.width(); ++x) {
            na += a(x, y) != 0;
            nb += b(x, y) != 0;
            inter += a(x, y) != 0 && b(x, y) != 0;
        }
    if (na + nb == 0) return 1.0;
    return 2.0 * static_cast<double>(inter) / static_cast<double>(na + nb);
}

inline double iou(const CartesianMask& a, const CartesianMask& b) {
    long inter = 0, uni = 0;
    for (int y = 0; y < a.height(); ++y)
        for (int x = 0; x < a.width(); ++x) {
            inter += a(x, y) != 0 && b(x, y) != 0;
            uni += a(x, y) != 0 || b(x, y) != 0;
        }
    if (uni == 0) return 1.0;
    return static_cast<double>(inter) / static_cast<double>(uni);
}

inline std::vector<std::pair<int, int>> boundary(const CartesianMask& m) {
    std::vector<std::pair<int, int>> out;
    const int dx[4] = {1, -1, 0, 0};
    const int dy[4] = {0, 0, 1, -1};
    for (int y = 0; y < m.height(); ++y)
        for (int x = 0; x < m.width(); ++x) {
            if (!m(x, y)) continue;
            for (int k = 0; k < 4; ++k) {
                const int u = x + dx[k], v = y + dy[k];
                if (u < 0 || v < 0 || u >= m.width() || v >= m.height() || !m(u, v)) {
                    out.emplace_back(x, y);
                    break;
                }
            }
        }
    return out;
}

inline double percentile95(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const double pos = 0.95 * static_cast<double>(v.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(pos);
    const std::size_t hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

/// All-pairs nearest boundary distances, pooled over both directions.
inline double hd95(const CartesianMask& a, const CartesianMask& b) {
    const auto ba = boundary(a);
    const auto bb = boundary(b);
    std::vector<double> pooled;
    auto directed = [&](const auto& from, const auto& to) {
        for (auto [x, y] : from) {
            long best = std::numeric_limits<long>::max();
            for (auto [u, v] : to) best = std::min(best, long(x - u) * (x - u) + long(y - v) * (y - v));
            pooled.push_back(std::sqrt(static_cast<double>(best)));
        }
    };
    directed(ba, bb);
    directed(bb, ba);
    return percentile95(pooled);
}

}  // namespace oracles
