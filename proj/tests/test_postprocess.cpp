#include <doctest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "fieldpipe/error.hpp"
#include "fieldpipe/postprocess.hpp"
#include "support/oracles.hpp"

using namespace fieldpipe;

namespace {

constexpr double kPs = 10.0;

GridGeometry grid(int w, int h) { return {1000.0, 2000.0, kPs, w, h, 32631}; }

ClassMask filled(int w, int h, std::uint8_t code) { return ClassMask(grid(w, h), code); }

void paint(ClassMask& m, int c0, int r0, int c1, int r1, std::uint8_t code) {
    for (int r = r0; r < r1; ++r) {
        for (int c = c0; c < c1; ++c) m.set(c, r, code);
    }
}

Raster probabilities(const GridGeometry& g, std::vector<std::array<float, 3>> px) {
    std::vector<Band> bands(3, Band(g.width, g.height));
    for (std::size_t i = 0; i < px.size(); ++i) {
        for (int k = 0; k < 3; ++k) bands[k].values()[i] = px[i][k];
    }
    return Raster(g, bands, {"P0", "P1", "P2"});
}

int chessboard_to(const ClassMask& m, int c, int r, const std::vector<int>& labels, int label) {
    int best = 1 << 20;
    for (int y = 0; y < m.height(); ++y) {
        for (int x = 0; x < m.width(); ++x) {
            if (labels[static_cast<std::size_t>(y) * m.width() + x] == label) {
                best = std::min(best, std::max(std::abs(x - c), std::abs(y - r)));
            }
        }
    }
    return best;
}

}  // namespace

TEST_CASE("argmax") {
    const auto g = grid(3, 1);
    const auto m = argmax_classes(probabilities(g, {{0.1f, 0.2f, 0.7f}, {0.4f, 0.4f, 0.2f}, {0.5f, 0.25f, 0.25f}}));
    CHECK(m.at(0, 0) == 2);
    CHECK(m.at(1, 0) == 1);
    CHECK(m.at(2, 0) == 0);
    CHECK_THROWS_AS(argmax_classes(probabilities(grid(1, 1), {{0.5f, 0.5f, 0.5f}})), Error);
    CHECK_THROWS_AS(argmax_classes(Raster(grid(1, 1), {Band(1, 1)}, {"x"})), Error);
}

TEST_CASE("one-hot round trip") {
    std::mt19937_64 rng(3);
    ClassMask m = filled(13, 7, 0);
    for (int r = 0; r < 7; ++r) {
        for (int c = 0; c < 13; ++c) {
            const int v = static_cast<int>(rng() % 4);
            m.set(c, r, v == 3 ? kMaskNodata : static_cast<std::uint8_t>(v));
        }
    }
    CHECK(argmax_classes(one_hot(m)) == m);
}

TEST_CASE("closing") {
    SUBCASE("radius 0 is identity") {
        ClassMask m = filled(5, 5, 1);
        m.set(2, 2, kBoundary);
        CHECK(close_boundary_gaps(m, 0) == m);
    }
    SUBCASE("two pixel gap in a line is closed") {
        ClassMask m = filled(9, 9, kInterior);
        for (int c = 0; c < 9; ++c) {
            if (c != 4 && c != 5) m.set(c, 4, kBoundary);
        }
        CHECK_FALSE(oracle::eight_connected(m.codes(), 9, 9, kBoundary));
        const ClassMask closed = close_boundary_gaps(m, 1);
        CHECK(oracle::eight_connected(closed.codes(), 9, 9, kBoundary));
        for (int r = 0; r < 9; ++r) {
            for (int c = 0; c < 9; ++c) {
                if (m.at(c, r) == kBoundary) CHECK(closed.at(c, r) == kBoundary);
            }
        }
    }
    SUBCASE("no boundary pixels leaves the mask unchanged") {
        ClassMask m = filled(8, 8, kNonCrop);
        paint(m, 2, 2, 6, 6, kInterior);
        CHECK(close_boundary_gaps(m, 2) == m);
    }
}

TEST_CASE("single block polygonizes to its pixel area") {
    ClassMask m = filled(14, 14, kNonCrop);
    paint(m, 2, 3, 12, 13, kInterior);
    const auto fields = polygonize_fields(m, 0);
    REQUIRE(fields.size() == 1);
    CHECK(polygon_area(fields[0].polygon) == doctest::Approx(100 * kPs * kPs));
    CHECK(fields[0].area_ha == doctest::Approx(1.0));
    CHECK(fields[0].source_component_px == 100);
    CHECK(signed_area(fields[0].polygon.exterior) > 0.0);
}

TEST_CASE("expansion matches nearest-component assignment") {
    for (int gap : {2, 3, 4}) {
        for (int expand : {1, 2}) {
            ClassMask m = filled(30, 14, kBoundary);
            paint(m, 2, 2, 8, 12, kInterior);
            paint(m, 8 + gap, 2, 14 + gap, 12, kInterior);
            paint(m, 20, 0, 30, 14, kNonCrop);
            int components = 0;
            const auto labels = oracle::label_components(m.codes(), m.width(), m.height(), kInterior, &components);
            REQUIRE(components == 2);
            const auto fields = polygonize_fields(m, expand);
            REQUIRE(fields.size() == 2);
            // Component 1 is the left block, which contains pixel (3, 3).
            const Point left = m.geometry().pixel_center(3, 3);
            int field_label[2];
            for (int k = 0; k < 2; ++k) field_label[k] = oracle::inside(fields[k].polygon, left) ? 1 : 2;
            CHECK(field_label[0] != field_label[1]);
            for (int r = 0; r < m.height(); ++r) {
                for (int c = 0; c < m.width(); ++c) {
                    int owner = labels[static_cast<std::size_t>(r) * m.width() + c];
                    if (owner == 0 && m.at(c, r) == kBoundary) {
                        const int d1 = chessboard_to(m, c, r, labels, 1);
                        const int d2 = chessboard_to(m, c, r, labels, 2);
                        if (d1 <= expand && d1 < d2) owner = 1;
                        if (d2 <= expand && d2 < d1) owner = 2;
                    }
                    const Point center = m.geometry().pixel_center(c, r);
                    int hits = 0;
                    int hit_owner = 0;
                    for (std::size_t k = 0; k < fields.size(); ++k) {
                        if (oracle::inside(fields[k].polygon, center)) {
                            ++hits;
                            hit_owner = field_label[k];
                        }
                    }
                    CHECK(hits <= 1);
                    CHECK(hit_owner == owner);
                }
            }
        }
    }
}

TEST_CASE("isolated blocks give one polygon each") {
    std::mt19937_64 rng(9);
    for (int trial = 0; trial < 10; ++trial) {
        ClassMask m = filled(48, 48, kNonCrop);
        for (int r = 0; r < 6; ++r) {
            for (int c = 0; c < 6; ++c) {
                if ((r + c) % 2 == 0 && rng() % 3 != 0) paint(m, c * 8 + 1, r * 8 + 1, c * 8 + 6, r * 8 + 6, kInterior);
            }
        }
        int expected = 0;
        oracle::label_components(m.codes(), 48, 48, kInterior, &expected);
        CHECK(polygonize_fields(m, 1).size() == static_cast<std::size_t>(expected));
    }
}

TEST_CASE("shapes with holes and pinches keep their pixel area") {
    std::mt19937_64 rng(21);
    for (int trial = 0; trial < 30; ++trial) {
        ClassMask m = filled(24, 24, kNonCrop);
        for (int r = 1; r < 23; ++r) {
            for (int c = 1; c < 23; ++c) {
                if (rng() % 3 != 0) m.set(c, r, kInterior);
            }
        }
        int components = 0;
        const auto labels = oracle::label_components(m.codes(), 24, 24, kInterior, &components);
        const auto fields = polygonize_fields(m, 0);
        REQUIRE(fields.size() == static_cast<std::size_t>(components));
        double total = 0.0;
        for (const auto& f : fields) total += polygon_area(f.polygon);
        const auto counts = m.code_counts();
        CHECK(total == doctest::Approx(counts[kInterior] * kPs * kPs));
        for (int r = 0; r < 24; ++r) {
            for (int c = 0; c < 24; ++c) {
                const Point p = m.geometry().pixel_center(c, r);
                int hits = 0;
                for (const auto& f : fields) hits += oracle::inside(f.polygon, p);
                CHECK(hits == (m.at(c, r) == kInterior ? 1 : 0));
            }
        }
    }
}

TEST_CASE("simplification") {
    FieldPolygon square{1, {{{0, 0}, {30, 0}, {30, 30}, {0, 30}, {0, 0}}, {}}, 0.09, 9};
    SUBCASE("tolerance 0 is identity") {
        CHECK(simplify_polygon(square, 0.0).polygon == square.polygon);
    }
    SUBCASE("triangle is already minimal") {
        FieldPolygon tri{2, {{{0, 0}, {50, 0}, {0, 50}, {0, 0}}, {}}, 0.125, 0};
        CHECK(simplify_polygon(tri, 10.0).polygon == tri.polygon);
    }
    SUBCASE("staircase collapses within tolerance") {
        Ring ring{{0, 0}};
        for (int k = 0; k < 10; ++k) {
            ring.push_back({(k + 1) * kPs, k * kPs});
            ring.push_back({(k + 1) * kPs, (k + 1) * kPs});
        }
        ring.push_back({0, 10 * kPs});
        ring.push_back({0, 0});
        FieldPolygon stair{3, {ring, {}}, polygon_area({ring, {}}) / 1e4, 0};
        const FieldPolygon s = simplify_polygon(stair, kPs);
        CHECK(s.polygon.exterior.size() < ring.size());
        CHECK(ring_problem(s.polygon.exterior).empty());
        for (const auto& v : ring) {
            double best = INFINITY;
            for (std::size_t i = 0; i + 1 < s.polygon.exterior.size(); ++i) {
                best = std::min(best, oracle::segment_distance(v, s.polygon.exterior[i], s.polygon.exterior[i + 1]));
            }
            CHECK(best <= kPs + 1e-9);
        }
        CHECK(s.area_ha == doctest::Approx(polygon_area(s.polygon) / 1e4));
    }
}

TEST_CASE("fragment elimination") {
    const FieldPolygon field{1, {{{0, 0}, {200, 0}, {200, 100}, {0, 100}, {0, 0}}, {}}, 2.0, 200};
    const FieldPolygon sliver{2, {{{200, 0}, {210, 0}, {210, 10}, {200, 10}, {200, 0}}, {}}, 0.01, 1};
    const FieldPolygon lonely{3, {{{500, 500}, {510, 500}, {510, 510}, {500, 510}, {500, 500}}, {}}, 0.01, 1};
    SUBCASE("nothing below threshold") {
        const auto r = eliminate_fragments({field}, 0.05);
        REQUIRE(r.fields.size() == 1);
        CHECK(r.fields[0].polygon == field.polygon);
    }
    SUBCASE("sliver merges into its neighbour") {
        const auto r = eliminate_fragments({field, sliver}, 0.05);
        REQUIRE(r.fields.size() == 1);
        CHECK(r.fields[0].field_id == 1);
        CHECK(r.fields[0].area_ha == doctest::Approx(2.01));
        CHECK(polygon_area(r.fields[0].polygon) == doctest::Approx(20100.0));
        CHECK(r.merged == 1);
    }
    SUBCASE("isolated sliver is dropped") {
        const auto r = eliminate_fragments({field, lonely}, 0.05);
        CHECK(r.fields.size() == 1);
        CHECK(r.dropped == 1);
        CHECK(r.dropped_area_ha == doctest::Approx(0.01));
    }
}

TEST_CASE("field statistics") {
    const auto s = field_stats_from_areas({1.0, 2.0, 3.0});
    CHECK(s.median_ha == 2.0);
    CHECK(s.mean_ha == 2.0);
    CHECK(s.total_ha == 6.0);

    const auto h = field_stats_from_areas({0.2, 0.2, 0.4, 9.0}, {0.0, 0.5, 5.0});
    REQUIRE(h.histogram.size() == 3);
    CHECK(h.histogram[0].percent == doctest::Approx(75.0));
    CHECK(h.histogram[1].percent == doctest::Approx(0.0));
    CHECK(h.histogram[2].percent == doctest::Approx(25.0));
    CHECK(std::isinf(h.histogram[2].upper));
    CHECK_THROWS_AS(field_stats_from_areas({}), Error);

    std::mt19937_64 rng(1);
    std::lognormal_distribution<double> area(0.0, 1.5);
    std::vector<double> areas(1001);
    for (auto& a : areas) a = area(rng);
    const auto big = field_stats_from_areas(areas);
    double sum = 0.0;
    for (const auto& b : big.histogram) sum += b.percent;
    CHECK(std::abs(sum - 100.0) < 1e-6);
    CHECK(big.median_ha == oracle::median(areas));
    CHECK(stats_to_svg(big).find("<svg") != std::string::npos);
}

TEST_CASE("geojson round trip") {
    ClassMask m = filled(30, 30, kNonCrop);
    paint(m, 1, 1, 12, 12, kInterior);
    paint(m, 15, 3, 28, 25, kInterior);
    paint(m, 18, 8, 22, 12, kNonCrop);  // a hole
    const auto fields = polygonize_fields(m, 0);
    REQUIRE(fields.size() == 2);
    const auto back = fields_from_geojson(fields_to_geojson(fields, 32631));
    REQUIRE(back.size() == 2);
    for (std::size_t i = 0; i < 2; ++i) {
        CHECK(back[i].field_id == fields[i].field_id);
        CHECK(back[i].polygon == fields[i].polygon);
        CHECK(back[i].area_ha == doctest::Approx(fields[i].area_ha));
    }
}

TEST_CASE("run_postprocess") {
    ClassMask truth = filled(40, 40, kNonCrop);
    paint(truth, 2, 2, 18, 38, kBoundary);
    paint(truth, 3, 3, 17, 37, kInterior);
    paint(truth, 22, 2, 38, 38, kBoundary);
    paint(truth, 23, 3, 37, 37, kInterior);
    PostprocessParams p{1, 1, kPs, 0.5};
    SUBCASE("two fields") {
        const auto r = run_postprocess(one_hot(truth), p);
        CHECK(r.fields.size() == 2);
        CHECK(r.components == 2);
    }
    SUBCASE("threshold above every field") {
        p.min_area_ha = 100.0;
        const auto r = run_postprocess(one_hot(truth), p);
        CHECK(r.fields.empty());
        CHECK(r.dropped == 2);
    }
}
