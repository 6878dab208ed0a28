#include "surfcdm/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

namespace surfcdm {

namespace {

struct Overlap {
    std::size_t a = 0;
    std::size_t b = 0;
    std::size_t both = 0;
};

Overlap overlap(const CartesianMask& a, const CartesianMask& b) {
    require_same_shape(a, b, "masks differ in size");
    Overlap o;
    for (std::size_t k = 0; k < a.size(); ++k) {
        const bool fa = a.values()[k] != 0;
        const bool fb = b.values()[k] != 0;
        o.a += fa;
        o.b += fb;
        o.both += fa && fb;
    }
    return o;
}

// 1-D squared distance transform (lower envelope of parabolas).
void edt_1d(const std::vector<double>& f, std::vector<double>& d, std::vector<int>& v, std::vector<double>& z) {
    const int n = static_cast<int>(f.size());
    constexpr double inf = std::numeric_limits<double>::infinity();
    int k = -1;
    for (int q = 0; q < n; ++q) {
        if (f[static_cast<std::size_t>(q)] == inf) continue;
        if (k < 0) {
            k = 0;
            v[0] = q;
            z[0] = -inf;
            z[1] = inf;
            continue;
        }
        auto intersect = [&](int p) {
            return ((f[static_cast<std::size_t>(q)] + double(q) * q) - (f[static_cast<std::size_t>(p)] + double(p) * p)) /
                   (2.0 * (q - p));
        };
        double s = intersect(v[static_cast<std::size_t>(k)]);
        // z[0] = -inf bounds the search.
        while (s <= z[static_cast<std::size_t>(k)]) {
            --k;
            s = intersect(v[static_cast<std::size_t>(k)]);
        }
        ++k;
        v[static_cast<std::size_t>(k)] = q;
        z[static_cast<std::size_t>(k)] = s;
        z[static_cast<std::size_t>(k) + 1] = inf;
    }
    if (k < 0) {
        std::fill(d.begin(), d.end(), inf);
        return;
    }
    int j = 0;
    for (int q = 0; q < n; ++q) {
        while (z[static_cast<std::size_t>(j) + 1] < q) ++j;
        const int p = v[static_cast<std::size_t>(j)];
        d[static_cast<std::size_t>(q)] = double(q - p) * (q - p) + f[static_cast<std::size_t>(p)];
    }
}

// Exact squared Euclidean distance to the nearest seed pixel.
Grid<double> squared_distance_to(const std::vector<std::pair<int, int>>& seeds, int width, int height) {
    constexpr double inf = std::numeric_limits<double>::infinity();
    Grid<double> g(width, height, inf);
    for (auto [x, y] : seeds) g(x, y) = 0.0;
    const int n = std::max(width, height);
    std::vector<double> f(static_cast<std::size_t>(n)), d(static_cast<std::size_t>(n)), z(static_cast<std::size_t>(n) + 1);
    std::vector<int> v(static_cast<std::size_t>(n));
    f.resize(static_cast<std::size_t>(height));
    d.resize(static_cast<std::size_t>(height));
    for (int x = 0; x < width; ++x) {
        for (int y = 0; y < height; ++y) f[static_cast<std::size_t>(y)] = g(x, y);
        edt_1d(f, d, v, z);
        for (int y = 0; y < height; ++y) g(x, y) = d[static_cast<std::size_t>(y)];
    }
    f.resize(static_cast<std::size_t>(width));
    d.resize(static_cast<std::size_t>(width));
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) f[static_cast<std::size_t>(x)] = g(x, y);
        edt_1d(f, d, v, z);
        for (int x = 0; x < width; ++x) g(x, y) = d[static_cast<std::size_t>(x)];
    }
    return g;
}

}  // namespace

double dsc(const CartesianMask& a, const CartesianMask& b) {
    const Overlap o = overlap(a, b);
    if (o.a + o.b == 0) return 1.0;
    return 2.0 * static_cast<double>(o.both) / static_cast<double>(o.a + o.b);
}

double iou(const CartesianMask& a, const CartesianMask& b) {
    const Overlap o = overlap(a, b);
    const std::size_t uni = o.a + o.b - o.both;
    if (uni == 0) return 1.0;
    return static_cast<double>(o.both) / static_cast<double>(uni);
}

std::vector<std::pair<int, int>> boundary_pixels(const CartesianMask& mask) {
    std::vector<std::pair<int, int>> out;
    auto bg = [&](int x, int y) { return !mask.contains(x, y) || mask(x, y) == 0; };
    for (int y = 0; y < mask.height(); ++y)
        for (int x = 0; x < mask.width(); ++x) {
            if (mask(x, y) == 0) continue;
            if (bg(x - 1, y) || bg(x + 1, y) || bg(x, y - 1) || bg(x, y + 1)) out.emplace_back(x, y);
        }
    return out;
}

double percentile(std::vector<double> values, double q) {
    if (values.empty()) throw Error(ErrorKind::EmptyMask, "percentile of an empty set");
    std::sort(values.begin(), values.end());
    const double pos = (q / 100.0) * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, values.size() - 1);
    const double t = pos - static_cast<double>(lo);
    return values[lo] + t * (values[hi] - values[lo]);
}

double hd95(const CartesianMask& a, const CartesianMask& b) {
    require_same_shape(a, b, "masks differ in size");
    const auto ba = boundary_pixels(a);
    const auto bb = boundary_pixels(b);
    if (ba.empty() || bb.empty()) throw Error(ErrorKind::EmptyMask, "hd95 needs two non-empty masks");
    const Grid<double> da = squared_distance_to(ba, a.width(), a.height());
    const Grid<double> db = squared_distance_to(bb, a.width(), a.height());
    std::vector<double> pooled;
    pooled.reserve(ba.size() + bb.size());
    for (auto [x, y] : ba) pooled.push_back(std::sqrt(db(x, y)));
    for (auto [x, y] : bb) pooled.push_back(std::sqrt(da(x, y)));
    return percentile(std::move(pooled), 95.0);
}

MetricsRecord compute_metrics(const CartesianMask& prediction, const CartesianMask& truth) {
    MetricsRecord r;
    r.dsc = dsc(prediction, truth);
    r.iou = iou(prediction, truth);
    const bool empty_pred = foreground_count(prediction) == 0;
    const bool empty_truth = foreground_count(truth) == 0;
    if (empty_pred && empty_truth) {
        r.hd95 = 0.0;
    } else if (empty_pred || empty_truth) {
        r.hd95 = std::hypot(truth.width(), truth.height());
    } else {
        r.hd95 = hd95(prediction, truth);
    }
    return r;
}

UncertaintyMap uncertainty(std::span<const CartesianMask> masks) {
    if (masks.size() < 2) throw Error(ErrorKind::TooFewRuns, "uncertainty needs at least two runs");
    for (const auto& m : masks) require_same_shape(m, masks.front(), "ensemble masks differ in size");
    const int W = masks.front().width();
    const int H = masks.front().height();
    UncertaintyMap u{Grid<double>(W, H, 0.0), Grid<double>(W, H, 0.0), static_cast<int>(masks.size())};
    const double k = static_cast<double>(masks.size());
    for (std::size_t p = 0; p < u.mean.size(); ++p) {
        double ones = 0.0;
        for (const auto& m : masks) ones += m.values()[p] ? 1.0 : 0.0;
        const double mean = ones / k;
        u.mean.values()[p] = mean;
        u.sd.values()[p] = std::sqrt(std::max(0.0, mean * (1.0 - mean)));
    }
    return u;
}

MeanSd mean_sd(std::span<const double> values) {
    MeanSd r;
    if (values.empty()) return r;
    for (double v : values) r.mean += v;
    r.mean /= static_cast<double>(values.size());
    double ss = 0.0;
    for (double v : values) ss += (v - r.mean) * (v - r.mean);
    r.sd = std::sqrt(ss / static_cast<double>(values.size()));
    return r;
}

EvaluationReport summarize(std::vector<std::string> ids, std::vector<MetricsRecord> records) {
    EvaluationReport rep;
    std::vector<double> d, j, h;
    for (const auto& r : records) {
        d.push_back(r.dsc);
        j.push_back(r.iou);
        h.push_back(r.hd95);
    }
    rep.dsc = mean_sd(d);
    rep.iou = mean_sd(j);
    rep.hd95 = mean_sd(h);
    rep.ids = std::move(ids);
    rep.records = std::move(records);
    return rep;
}

std::string report_to_csv(const EvaluationReport& report) {
    std::string out = "image_id,dsc,iou,hd95\n";
    char buf[256];
    for (std::size_t k = 0; k < report.records.size(); ++k) {
        const auto& r = report.records[k];
        std::snprintf(buf, sizeof buf, "%s,%.6f,%.6f,%.6f\n", report.ids[k].c_str(), r.dsc, r.iou, r.hd95);
        out += buf;
    }
    std::snprintf(buf, sizeof buf, "MEAN±SD,%.6f±%.6f,%.6f±%.6f,%.6f±%.6f\n", report.dsc.mean, report.dsc.sd,
                  report.iou.mean, report.iou.sd, report.hd95.mean, report.hd95.sd);
    out += buf;
    return out;
}

}  // namespace surfcdm
