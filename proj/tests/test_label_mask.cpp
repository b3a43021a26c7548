#include <doctest.h>

#include <cmath>
#include <fstream>
#include <numbers>
#include <random>

#include "fieldpipe/error.hpp"
#include "fieldpipe/label_mask.hpp"
#include "support/oracles.hpp"
#include "support/synthetic.hpp"

using namespace fieldpipe;

namespace {

std::filesystem::path write_json(const std::string& name, const std::string& text) {
    const auto dir = synth::scratch_dir("parcels-" + name);
    const auto path = dir / (name + ".geojson");
    std::ofstream(path) << text;
    return path;
}

std::string feature(int id, const std::string& category, const std::string& ring) {
    return R"({"type":"Feature","id":)" + std::to_string(id) + R"(,"properties":{"category":")" +
           category + R"("},"geometry":{"type":"Polygon","coordinates":[)" + ring + "]}}";
}

const std::string kSquare = "[[0,0],[10,0],[10,10],[0,10],[0,0]]";

ParcelSet one_parcel(Polygon p) {
    ParcelSet s;
    s.crs_code = 32631;
    s.parcels.push_back({1, {std::move(p)}, true});
    return s;
}

}  // namespace

TEST_CASE("load_parcels applies the crop rule") {
    const auto path = write_json(
        "three", R"({"type":"FeatureCollection","crs":{"type":"name","properties":{"name":"EPSG:32631"}},"features":[)" +
                     feature(1, "Cropland", kSquare) + "," + feature(2, "Grass", kSquare) + "," +
                     feature(3, "Cropland", kSquare) + "]}");
    const auto load = load_parcels(path, {"category", {"Cropland"}});
    REQUIRE(load.set.parcels.size() == 3);
    CHECK(load.set.crs_code == 32631);
    int crop = 0;
    for (const auto& p : load.set.parcels) crop += p.crop;
    CHECK(crop == 2);
    CHECK(load.rejected.empty());
}

TEST_CASE("load_parcels rejects invalid rings by id") {
    const std::string bowtie = "[[0,0],[10,10],[10,0],[0,10],[0,0]]";
    const auto path = write_json("bowtie", R"({"type":"FeatureCollection","features":[)" +
                                               feature(7, "Cropland", bowtie) + "," +
                                               feature(8, "Cropland", kSquare) + "]}");
    const auto load = load_parcels(path, {"category", {"Cropland"}});
    REQUIRE(load.rejected.size() == 1);
    CHECK(load.rejected[0].id == 7);
    REQUIRE(load.set.parcels.size() == 1);
    CHECK(load.set.parcels[0].id == 8);
}

TEST_CASE("load_parcels contract errors") {
    auto kind = [](const std::filesystem::path& p, const CropRule& rule) {
        try {
            load_parcels(p, rule);
        } catch (const Error& e) {
            return e.kind();
        }
        return ErrorKind::Config;
    };
    CHECK(kind(write_json("empty", R"({"type":"FeatureCollection","features":[]})"), {"category", {"x"}}) ==
          ErrorKind::Empty);
    CHECK(kind(write_json("zero", ""), {"category", {"x"}}) == ErrorKind::Empty);
    const auto one = write_json("one", R"({"type":"FeatureCollection","features":[)" +
                                           feature(1, "Cropland", kSquare) + "]}");
    CHECK(kind(one, {"landuse", {"x"}}) == ErrorKind::Contract);
    const auto dup = write_json("dup", R"({"type":"FeatureCollection","features":[)" +
                                           feature(1, "Cropland", kSquare) + "," +
                                           feature(1, "Cropland", kSquare) + "]}");
    const auto load = load_parcels(dup, {"category", {"Cropland"}});
    CHECK(load.set.parcels.size() == 1);
    REQUIRE(load.rejected.size() == 1);
    CHECK(load.rejected[0].reason == "duplicate id");
}

TEST_CASE("boundaries come from crop rings only") {
    ParcelSet s = one_parcel(synth::rect(0, 0, 1, 1));
    auto lines = polygons_to_boundaries(s);
    REQUIRE(lines.size() == 1);
    CHECK(lines[0].size() == 5);
    CHECK(lines[0].front() == lines[0].back());

    Polygon holed = synth::rect(0, 0, 10, 10);
    auto hole = synth::rect(3, 3, 6, 6).exterior;
    std::reverse(hole.begin(), hole.end());
    holed.holes.push_back(hole);
    CHECK(polygons_to_boundaries(one_parcel(holed)).size() == 2);

    s.parcels[0].crop = false;
    CHECK(polygons_to_boundaries(s).empty());
}

TEST_CASE("buffered segment area matches the capsule formula") {
    const double L = 100.0;
    for (double w : {1.0, 5.0, 10.0, 30.0}) {
        const BoundaryBand band = buffer_boundaries({{{0, 0}, {L, 0}}}, w);
        const double expected = 2 * w * L + std::numbers::pi * w * w;
        CHECK(std::abs(band.area() - expected) / expected < 0.02);
        CHECK(band.contains({0, 0}));
        CHECK(band.contains({L, 0}));
        CHECK_FALSE(band.contains({L / 2, w * 1.01}));
    }
}

TEST_CASE("shared edges produce one corridor") {
    ParcelSet s;
    s.crs_code = 1;
    s.parcels.push_back({1, {synth::rect(0, 0, 100, 100)}, true});
    s.parcels.push_back({2, {synth::rect(100, 0, 200, 100)}, true});
    const BoundaryBand both = buffer_boundaries(polygons_to_boundaries(s), 5.0);
    const double a = buffer_boundaries({s.parcels[0].parts[0].exterior}, 5.0).area();
    const double b = buffer_boundaries({s.parcels[1].parts[0].exterior}, 5.0).area();
    CHECK(both.area() < a + b - 100.0 * 10.0 * 0.9);
    for (const auto& l : polygons_to_boundaries(s)) {
        for (const auto& v : l) CHECK(both.contains(v));
    }
}

TEST_CASE("half width must be positive") {
    CHECK_THROWS_AS(buffer_boundaries({{{0, 0}, {1, 0}}}, 0.0), Error);
    const GridGeometry g{0, 100, 10, 10, 10, 1};
    CHECK_THROWS_AS(build_class_mask({}, g, 0.0), Error);
}

TEST_CASE("100 m square on a 10 m grid") {
    const GridGeometry g{0, 200, 10, 20, 20, 32631};
    const ParcelSet s = one_parcel(synth::rect(50, 50, 150, 150));
    const ClassMask m = build_class_mask(s, g, 10.0);
    CHECK(m.codes().size() == 400);
    const auto expected = oracle::classify_pixels(s, g, 10.0);
    CHECK(std::equal(expected.begin(), expected.end(), m.codes().begin()));
    // Square spans columns/rows 5..14; the ring is one pixel inside and one outside.
    int interior = 0;
    for (int r = 0; r < 20; ++r) {
        for (int c = 0; c < 20; ++c) {
            const bool inner = c >= 6 && c <= 13 && r >= 6 && r <= 13;
            const bool ring = !inner && c >= 4 && c <= 15 && r >= 4 && r <= 15;
            if (inner) {
                CHECK(m.at(c, r) == kInterior);
                ++interior;
            } else if (ring) {
                CHECK(m.at(c, r) == kBoundary);
            } else {
                CHECK(m.at(c, r) == kNonCrop);
            }
        }
    }
    CHECK(interior == 64);
}

TEST_CASE("empty parcel set yields an all non-crop mask") {
    const GridGeometry g{0, 100, 10, 10, 10, 1};
    const ClassMask m = build_class_mask({}, g, 10.0);
    CHECK(m.code_counts()[kNonCrop] == 100);
}

TEST_CASE("parcel narrower than the band is all boundary") {
    const GridGeometry g{0, 100, 10, 10, 10, 32631};
    const ParcelSet s = one_parcel(synth::rect(40, 40, 55, 55));
    const ClassMask m = build_class_mask(s, g, 10.0);
    CHECK(m.code_counts()[kInterior] == 0);
    const auto expected = oracle::classify_pixels(s, g, 10.0);
    CHECK(std::equal(expected.begin(), expected.end(), m.codes().begin()));
    for (int r = 0; r < 10; ++r) {
        for (int c = 0; c < 10; ++c) {
            if (polygon_contains(s.parcels[0].parts[0], g.pixel_center(c, r))) CHECK(m.at(c, r) == kBoundary);
        }
    }
}

TEST_CASE("crs mismatch is rejected") {
    const GridGeometry g{0, 100, 10, 10, 10, 32632};
    CHECK_THROWS_AS(build_class_mask(one_parcel(synth::rect(0, 0, 50, 50)), g, 10.0), Error);
}

TEST_CASE("overlapping crop parcels are reported") {
    ParcelSet s;
    s.crs_code = 1;
    s.parcels.push_back({4, {synth::rect(0, 0, 100, 100)}, true});
    s.parcels.push_back({9, {synth::rect(50, 50, 150, 150)}, true});
    MaskDiagnostics d;
    build_class_mask(s, {0, 200, 5, 40, 40, 1}, 5.0, &d);
    REQUIRE(d.overlaps.size() == 1);
    CHECK(d.overlaps[0] == std::pair<std::int64_t, std::int64_t>{4, 9});
}

TEST_CASE("random layouts match the pixel-center oracle") {
    std::mt19937_64 rng(2024);
    for (int trial = 0; trial < 40; ++trial) {
        const auto layout = synth::random_layout(rng);
        const ClassMask m = build_class_mask(layout.parcels, layout.geometry, layout.half_width,
                                             nullptr, 1 + trial % 3);
        const auto expected = oracle::classify_pixels(layout.parcels, layout.geometry, layout.half_width);
        CHECK(std::equal(expected.begin(), expected.end(), m.codes().begin()));
    }
}
