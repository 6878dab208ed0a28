#include <doctest.h>

#include <cmath>
#include <vector>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "surfcdm/errors.hpp"
#include "surfcdm/metrics.hpp"

using namespace surfcdm;

namespace {

CartesianMask from_rows(const std::vector<std::string>& rows) {
    CartesianMask m(static_cast<int>(rows[0].size()), static_cast<int>(rows.size()), 0);
    for (int y = 0; y < m.height(); ++y)
        for (int x = 0; x < m.width(); ++x) m(x, y) = rows[y][x] == '#';
    return m;
}

}  // namespace

TEST_CASE("dsc and iou on hand-counted masks") {
    // |A| = 4, |B| = 6, overlap 3
    const auto a = from_rows({"##..", "##..", "....", "...."});
    const auto b = from_rows({"###.", "#...", "##..", "...."});
    CHECK(dsc(a, b) == doctest::Approx(0.6));
    CHECK(iou(a, b) == doctest::Approx(3.0 / 7.0));
    CHECK(dsc(a, a) == 1.0);
    CHECK(iou(a, a) == 1.0);

    const auto c = from_rows({"....", "....", "##..", "##.."});
    CHECK(dsc(a, c) == 0.0);
    CHECK(iou(a, c) == 0.0);

    const CartesianMask e(4, 4, 0);
    CHECK(dsc(e, e) == 1.0);
    CHECK(iou(e, e) == 1.0);
    CHECK(dsc(a, e) == 0.0);
    CHECK(iou(a, e) == 0.0);

    CHECK_THROWS_AS(dsc(a, CartesianMask(5, 4, 0)), Error);
    CHECK_THROWS_AS(iou(a, CartesianMask(5, 4, 0)), Error);
}

TEST_CASE("iou = dsc / (2 - dsc) and iou <= dsc") {
    Rng rng(21);
    for (int t = 0; t < 100; ++t) {
        const auto a = fixtures::random_mask(rng, 10, 10, 0.4);
        const auto b = fixtures::random_mask(rng, 10, 10, 0.4);
        const double d = dsc(a, b);
        const double j = iou(a, b);
        CHECK(j == doctest::Approx(d / (2.0 - d)));
        CHECK(j <= d + 1e-15);
        CHECK(dsc(a, b) == dsc(b, a));
        CHECK(iou(a, b) == iou(b, a));
    }
}

TEST_CASE("hd95 examples") {
    const auto a = fixtures::disk(30, 30, 14, 14, 8);
    CHECK(hd95(a, a) == 0.0);

    CartesianMask p(20, 20, 0), q(20, 20, 0);
    p(3, 4) = 1;
    q(6, 8) = 1;
    CHECK(hd95(p, q) == 5.0);

    CHECK_THROWS_AS(hd95(p, CartesianMask(20, 20, 0)), Error);
    try {
        hd95(CartesianMask(20, 20, 0), q);
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::EmptyMask);
    }
}

TEST_CASE("boundary pixels follow the 4-neighbour rule") {
    const auto m = from_rows({"#####", "#####", "#####", "....."});
    const auto b = boundary_pixels(m);
    // interior pixels (1..3, 1) are the only non-boundary foreground
    CHECK(b.size() == 12);
    CHECK(b == oracles::boundary(m));
}

TEST_CASE("metrics match brute-force oracles on random 16x16 pairs") {
    Rng rng(99);
    for (int t = 0; t < 200; ++t) {
        const double p = rng.uniform(0.05, 0.7);
        auto a = fixtures::random_mask(rng, 16, 16, p);
        auto b = fixtures::random_mask(rng, 16, 16, rng.uniform(0.05, 0.7));
        a(rng.uniform_int(0, 15), rng.uniform_int(0, 15)) = 1;
        b(rng.uniform_int(0, 15), rng.uniform_int(0, 15)) = 1;
        CHECK(dsc(a, b) == oracles::dsc(a, b));
        CHECK(iou(a, b) == oracles::iou(a, b));
        CHECK(hd95(a, b) == oracles::hd95(a, b));
        CHECK(hd95(a, b) == hd95(b, a));
    }
}

TEST_CASE("metrics are translation invariant") {
    const auto a = fixtures::ellipse(40, 40, 15, 16, 8, 5);
    const auto b = fixtures::disk(40, 40, 17, 15, 6);
    const auto a2 = fixtures::ellipse(40, 40, 15 + 7, 16 + 4, 8, 5);
    const auto b2 = fixtures::disk(40, 40, 17 + 7, 15 + 4, 6);
    CHECK(dsc(a, b) == dsc(a2, b2));
    CHECK(iou(a, b) == iou(a2, b2));
    CHECK(hd95(a, b) == hd95(a2, b2));
}

TEST_CASE("percentile uses linear interpolation") {
    CHECK(percentile({1, 2, 3, 4, 5}, 50) == 3.0);
    CHECK(percentile({0, 10}, 95) == doctest::Approx(9.5));
    CHECK(percentile({7}, 95) == 7.0);
    CHECK_THROWS_AS(percentile({}, 95), Error);
}

TEST_CASE("compute_metrics maps empty predictions to the diagonal") {
    const auto t = fixtures::disk(30, 40, 15, 20, 6);
    const MetricsRecord r = compute_metrics(CartesianMask(30, 40, 0), t);
    CHECK(r.dsc == 0.0);
    CHECK(r.iou == 0.0);
    CHECK(r.hd95 == doctest::Approx(50.0));
    const MetricsRecord same = compute_metrics(t, t);
    CHECK(same.dsc == 1.0);
    CHECK(same.hd95 == 0.0);
}

TEST_CASE("uncertainty map") {
    const auto a = fixtures::disk(16, 16, 8, 8, 4);
    std::vector<CartesianMask> same(5, a);
    const UncertaintyMap u = uncertainty(same);
    CHECK(u.runs == 5);
    for (double v : u.sd.values()) CHECK(v == 0.0);
    for (int y = 0; y < 16; ++y)
        for (int x = 0; x < 16; ++x) CHECK(u.mean(x, y) == a(x, y));

    std::vector<CartesianMask> runs;
    for (int k = 0; k < 20; ++k) {
        CartesianMask m(4, 4, 0);
        m(1, 2) = k % 2;
        m(3, 3) = 1;
        m(0, 0) = k < 5;
        runs.push_back(m);
    }
    const UncertaintyMap h = uncertainty(runs);
    CHECK(h.sd(1, 2) == doctest::Approx(0.5));
    CHECK(h.mean(1, 2) == doctest::Approx(0.5));
    CHECK(h.sd(3, 3) == 0.0);
    CHECK(h.sd(0, 0) == doctest::Approx(std::sqrt(0.25 * 0.75)));
    for (double v : h.sd.values()) CHECK(v <= 0.5 + 1e-12);

    std::vector<CartesianMask> one{a};
    CHECK_THROWS_AS(uncertainty(one), Error);
    std::vector<CartesianMask> mixed{a, CartesianMask(8, 8, 0)};
    CHECK_THROWS_AS(uncertainty(mixed), Error);
}

TEST_CASE("report aggregation and CSV") {
    const EvaluationReport one = summarize({"s1"}, {{0.9, 0.8, 3.0}});
    CHECK(one.dsc.mean == doctest::Approx(0.9));
    CHECK(one.dsc.sd == 0.0);
    CHECK(one.hd95.mean == doctest::Approx(3.0));

    const EvaluationReport rep = summarize({"a", "b", "c"}, {{0.9, 0.8, 2.0}, {0.7, 0.6, 4.0}, {0.8, 0.7, 6.0}});
    CHECK(rep.dsc.mean == doctest::Approx(0.8));
    CHECK(rep.dsc.sd == doctest::Approx(std::sqrt(0.02 / 3.0)));
    const std::string csv = report_to_csv(rep);
    CHECK(csv.rfind("image_id,dsc,iou,hd95\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 1 + 3 + 1);
    CHECK(csv.find("\nMEAN±SD,") != std::string::npos);

    const double vals[] = {1.0, 3.0};
    const MeanSd ms = mean_sd(vals);
    CHECK(ms.mean == 2.0);
    CHECK(ms.sd == 1.0);
}
