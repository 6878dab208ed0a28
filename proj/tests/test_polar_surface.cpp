#include <doctest.h>

#include <cmath>
#include <numbers>

#include "fixtures.hpp"
#include "surfcdm/errors.hpp"
#include "surfcdm/polar_surface.hpp"

using namespace surfcdm;

namespace {

PolarGridConfig grid(int X, int L, double step, Centroid c) {
    PolarGridConfig g;
    g.num_columns = X;
    g.column_length = L;
    g.radial_step = step;
    g.centroid = c;
    return g;
}

}  // namespace

TEST_CASE("compute_centroid on fixed masks") {
    CHECK(compute_centroid(CartesianMask(4, 4, 1)) == Centroid{1.5, 1.5});

    CartesianMask single(6, 6, 0);
    single(2, 3) = 1;
    CHECK(compute_centroid(single) == Centroid{2.0, 3.0});

    const auto r = fixtures::rect(8, 8, 0, 0, 3, 5);
    const Centroid c = compute_centroid(r);
    CHECK(c.a == doctest::Approx(1.0));
    CHECK(c.b == doctest::Approx(2.0));
}

TEST_CASE("compute_centroid errors") {
    CHECK_THROWS_AS(compute_centroid(CartesianMask(8, 8, 0)), Error);
    try {
        compute_centroid(CartesianMask(8, 8, 0));
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::EmptyMask);
    }

    // An annulus is not star-shaped about its centroid (which is not even inside it).
    CartesianMask ring = fixtures::disk(64, 64, 32, 32, 20);
    const auto hole = fixtures::disk(64, 64, 32, 32, 10);
    for (std::size_t i = 0; i < ring.size(); ++i)
        if (hole.values()[i]) ring.values()[i] = 0;
    CHECK_NOTHROW(compute_centroid(ring));
    try {
        compute_centroid(ring, StarCheck::Enforce);
        FAIL("expected NonStarShaped");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::NonStarShaped);
    }
    CHECK_NOTHROW(compute_centroid(fixtures::disk(64, 64, 30, 33, 12), StarCheck::Enforce));
}

TEST_CASE("compute_centroid lies inside the bounding box") {
    Rng rng(11);
    for (int t = 0; t < 50; ++t) {
        const auto m = fixtures::random_mask(rng, 12, 9, 0.3);
        if (foreground_count(m) == 0) continue;
        int x0 = 99, x1 = -1, y0 = 99, y1 = -1;
        for (int y = 0; y < m.height(); ++y)
            for (int x = 0; x < m.width(); ++x)
                if (m(x, y)) {
                    x0 = std::min(x0, x), x1 = std::max(x1, x);
                    y0 = std::min(y0, y), y1 = std::max(y1, y);
                }
        const Centroid c = compute_centroid(m);
        CHECK(c.a >= x0);
        CHECK(c.a <= x1);
        CHECK(c.b >= y0);
        CHECK(c.b <= y1);
    }
}

TEST_CASE("generated masks pass the star-shape validator") {
    for (std::uint64_t s = 0; s < 40; ++s) {
        const auto m = fixtures::star_mask(s);
        CHECK(star_violations(m, compute_centroid(m)) == 0);
    }
}

TEST_CASE("PolarGridConfig validation") {
    CHECK_THROWS_AS(grid(4, 20, 1.0, {5, 5}).validate(), Error);
    CHECK_THROWS_AS(grid(16, 4, 1.0, {5, 5}).validate(), Error);
    CHECK_THROWS_AS(grid(16, 16, 0.0, {5, 5}).validate(), Error);
    CHECK_NOTHROW(grid(16, 16, 0.5, {5, 5}).validate());
    const auto g = PolarGridConfig::for_image(256, 128, {100, 60}, 256, 200);
    CHECK(g.radial_step == doctest::Approx(0.5 * 128 / 200));
    // centroid outside the image
    CHECK_THROWS_AS(to_polar(CartesianImage(16, 16, 0.5f), grid(16, 16, 1.0, {20, 5})), Error);
}

TEST_CASE("to_polar of a constant image") {
    const CartesianImage img(64, 48, 0.7f);
    const auto g = grid(32, 40, 0.5, {30.0, 20.0});
    const PolarRaster p = to_polar(img, g);
    CHECK(p.kind == ChannelKind::Image);
    for (int x = 0; x < g.num_columns; ++x) {
        const double th = 2.0 * std::numbers::pi * x / g.num_columns;
        for (int y = 0; y < g.column_length; ++y) {
            const double px = 30.0 + y * 0.5 * std::cos(th);
            const double py = 20.0 + y * 0.5 * std::sin(th);
            // strictly inside the image, away from the zero-padded border
            if (px >= 0.0 && py >= 0.0 && px <= 63.0 && py <= 47.0) CHECK(p.at(x, y) == doctest::Approx(0.7f));
        }
    }
    // beyond the border everything reads as zero
    const auto far = grid(8, 200, 1.0, {30.0, 20.0});
    CHECK(to_polar(img, far).at(0, 150) == 0.0f);
}

TEST_CASE("to_polar of a centered disk is a uniform terrain") {
    const double r = 20.0;
    const auto m = fixtures::disk(64, 64, 32.0, 32.0, r);
    const auto g = grid(64, 30, 1.0, {32.0, 32.0});
    const PolarRaster p = to_polar(m, g);
    CHECK(p.kind == ChannelKind::Mask);
    CHECK(is_terrain(p));
    const Surface s = extract_surface(p);
    for (int x = 0; x < g.num_columns; ++x) CHECK(std::abs(s[x] - r) <= 1.0);
}

TEST_CASE("to_polar crossings match a dense ray-march oracle") {
    const double cx = 13.3, cy = 17.8, rx = 9.0, ry = 6.0;
    const auto m = fixtures::ellipse(32, 32, cx, cy, rx, ry);
    const Centroid c = compute_centroid(m);
    const auto g = grid(48, 24, 0.5, c);
    const Surface s = extract_surface(to_polar(m, g));
    for (int x = 0; x < g.num_columns; ++x) {
        const double th = 2.0 * std::numbers::pi * x / g.num_columns;
        // first exit of the mask, bilinear-thresholded and marched at 1/10 of a sample
        double exit_r = 0.0;
        for (double r = 0.0; r < g.column_length * g.radial_step; r += g.radial_step / 10.0) {
            const double px = c.a + r * std::cos(th);
            const double py = c.b + r * std::sin(th);
            const int x0 = static_cast<int>(std::floor(px));
            const int y0 = static_cast<int>(std::floor(py));
            const double tx = px - x0, ty = py - y0;
            auto at = [&](int u, int v) { return m.contains(u, v) ? double(m(u, v)) : 0.0; };
            const double v = (1 - ty) * ((1 - tx) * at(x0, y0) + tx * at(x0 + 1, y0)) +
                             ty * ((1 - tx) * at(x0, y0 + 1) + tx * at(x0 + 1, y0 + 1));
            if (v < 0.5) break;
            exit_r = r;
        }
        CHECK(std::abs(s[x] - exit_r / g.radial_step) <= 1.0 + 1e-9);
    }
}

TEST_CASE("to_polar rotation equivariance") {
    // Rotating the source by 2*pi*k/X shifts columns by k. Use an ellipse rendered at two angles.
    const int X = 64;
    const int k = 8;
    const double phi = 2.0 * std::numbers::pi * k / X;
    const double cx = 40.0, cy = 40.0;
    CartesianMask a(80, 80, 0), b(80, 80, 0);
    for (int y = 0; y < 80; ++y)
        for (int x = 0; x < 80; ++x) {
            const double dx = x - cx, dy = y - cy;
            auto inside = [](double u, double v) { return (u / 25) * (u / 25) + (v / 14) * (v / 14) < 1.0; };
            a(x, y) = inside(dx, dy);
            const double ux = std::cos(phi) * dx + std::sin(phi) * dy;  // rotate back by -phi
            const double uy = -std::sin(phi) * dx + std::cos(phi) * dy;
            b(x, y) = inside(ux, uy);
        }
    const auto g = grid(X, 32, 1.0, {cx, cy});
    const Surface sa = extract_surface(to_polar(a, g));
    const Surface sb = extract_surface(to_polar(b, g));
    for (int x = 0; x < X; ++x) CHECK(std::abs(sb[(x + k) % X] - sa[x]) <= 1.0);
}

TEST_CASE("extract_surface counts foreground samples") {
    const auto g = grid(8, 10, 1.0, {5, 5});
    PolarRaster p(g, ChannelKind::Mask);
    CHECK(extract_surface(p) == Surface::constant(8, 10, 0.0));

    const int bits[10] = {1, 1, 0, 1, 0, 0, 1, 0, 0, 0};
    for (int y = 0; y < 10; ++y) p.at(3, y) = static_cast<float>(bits[y]);
    for (int y = 0; y < 4; ++y) p.at(5, y) = 1.0f;
    for (int y = 0; y < 10; ++y) p.at(6, y) = 1.0f;
    const Surface s = extract_surface(p);
    CHECK(s[3] == 4.0);
    CHECK(s[5] == 4.0);
    CHECK(s[6] == 9.0);  // clamped to L-1
    CHECK(s[0] == 0.0);

    Rng rng(3);
    for (int t = 0; t < 20; ++t) {
        PolarRaster q(g, ChannelKind::Mask);
        for (auto& v : q.values.values()) v = rng.bernoulli(0.3) ? 1.0f : 0.0f;
        const Surface sq = extract_surface(q);
        for (int x = 0; x < 8; ++x) {
            int pop = 0;
            for (int y = 0; y < 10; ++y) pop += q.at(x, y) != 0.0f;
            CHECK(sq[x] == std::min(pop, 9));
        }
    }
}

TEST_CASE("surface_to_polar_mask") {
    const auto g = grid(16, 20, 1.0, {10, 10});
    const PolarRaster half = surface_to_polar_mask(Surface::constant(16, 20, 10.0), g);
    for (int x = 0; x < 16; ++x)
        for (int y = 0; y < 20; ++y) CHECK(half.at(x, y) == (y < 10 ? 1.0f : 0.0f));

    Surface s = Surface::constant(16, 20, 7.0);
    s[4] = 0.0;
    const PolarRaster p = surface_to_polar_mask(s, g);
    for (int y = 0; y < 20; ++y) CHECK(p.at(4, y) == 0.0f);

    // round() semantics
    s[5] = 2.4;
    s[6] = 2.6;
    const PolarRaster q = surface_to_polar_mask(s, g);
    CHECK(extract_surface(q)[5] == 2.0);
    CHECK(extract_surface(q)[6] == 3.0);
}

TEST_CASE("integer surface round trip and terrain property") {
    Rng rng(5);
    const auto g = grid(32, 40, 1.0, {20, 20});
    for (int t = 0; t < 100; ++t) {
        std::vector<double> ys(32);
        for (auto& y : ys) y = rng.uniform_int(0, 39);
        const Surface s(ys, 40);
        const PolarRaster m = surface_to_polar_mask(s, g);
        CHECK(is_terrain(m));
        CHECK(extract_surface(m) == s);
    }
}

TEST_CASE("from_polar of a constant surface is a disk") {
    const auto g = PolarGridConfig::for_image(256, 256, {127.5, 127.5}, 256, 200);
    CHECK(g.radial_step == doctest::Approx(0.64));
    const double r = 150.0;
    const CartesianMask out = surface_to_cartesian(Surface::constant(256, 200, r), g, 256, 256);
    const auto analytic = fixtures::disk(256, 256, 127.5, 127.5, r * g.radial_step);
    CHECK(fixtures::overlap_dsc(out, analytic) >= 0.98);

    const auto unit = grid(256, 200, 1.0, {127.5, 127.5});
    const CartesianMask d = surface_to_cartesian(Surface::constant(256, 200, 60.0), unit, 256, 256);
    CHECK(fixtures::overlap_dsc(d, fixtures::disk(256, 256, 127.5, 127.5, 60.0)) >= 0.98);

    const CartesianMask empty = surface_to_cartesian(Surface::constant(256, 200, 0.0), unit, 256, 256);
    CHECK(foreground_count(empty) == 0);
}

TEST_CASE("from_polar inverts to_polar on generator masks") {
    double total = 0.0;
    const int n = 20;
    for (int s = 0; s < n; ++s) {
        const auto m = fixtures::star_mask(1000 + s);
        const auto g = PolarGridConfig::for_image(256, 256, compute_centroid(m), 256, 200);
        const CartesianMask back = from_polar(to_polar(m, g), 256, 256);
        total += fixtures::overlap_dsc(back, m);
    }
    CHECK(total / n >= 0.98);
}

TEST_CASE("from_polar rejects non-mask rasters") {
    const auto g = grid(16, 16, 1.0, {8, 8});
    CHECK_THROWS_AS(from_polar(PolarRaster(g, ChannelKind::Image), 16, 16), Error);
}
