#include <doctest.h>

#include <random>

#include <json.hpp>

#include "fieldpipe/error.hpp"
#include "fieldpipe/geotiff.hpp"
#include "fieldpipe/metrics.hpp"
#include "fieldpipe/postprocess.hpp"
#include "support/oracles.hpp"
#include "support/synthetic.hpp"

using namespace fieldpipe;

namespace {

ClassMask mask_of(int w, int h, std::vector<std::uint8_t> codes) {
    return ClassMask({0.0, 10.0 * h, 10.0, w, h, 32631}, std::move(codes));
}

struct TileFixture {
    std::filesystem::path dir;
    TileManifest manifest;
    std::vector<ClassMask> truths;
};

/// Writes mask tiles for the given masks and a manifest listing them.
TileFixture write_tiles(const std::string& name, const std::vector<ClassMask>& masks) {
    TileFixture f;
    f.dir = synth::scratch_dir("metrics-" + name);
    std::filesystem::create_directories(f.dir / "tiles");
    std::filesystem::create_directories(f.dir / "pred");
    const int size = masks.front().width();
    f.manifest.spec = {size, size, EdgePolicy::SnapToEdge};
    f.manifest.source_geometry = {0.0, 1000.0, 10.0, size * static_cast<int>(masks.size()), size, 32631};
    for (std::size_t i = 0; i < masks.size(); ++i) {
        TileRecord r;
        r.window = {static_cast<int>(i) * size, 0, size};
        r.tile_id = tile_id_for(r.window);
        r.split = Split::Test;
        r.mask_path = "tiles/" + r.tile_id + "_mask.tif";
        r.image_path = "tiles/" + r.tile_id + "_img.tif";
        write_raster(masks[i].to_raster(), f.dir / r.mask_path);
        f.manifest.records.push_back(r);
    }
    f.truths = masks;
    return f;
}

void write_prediction(const TileFixture& f, std::size_t i, const ClassMask& pred) {
    write_raster(one_hot(pred), f.dir / "pred" / (f.manifest.records[i].tile_id + "_pred.tif"));
}

}  // namespace

TEST_CASE("confusion counting") {
    SUBCASE("identity") {
        const auto m = mask_of(4, 4, std::vector<std::uint8_t>(16, 1));
        const auto c = accumulate_confusion(m, m);
        CHECK(c.classes[1].tp == 16);
        CHECK(c.classes[1].fp == 0);
        CHECK(c.classes[1].fn == 0);
    }
    SUBCASE("total confusion") {
        const auto c = accumulate_confusion(mask_of(2, 2, {2, 2, 2, 2}), mask_of(2, 2, {1, 1, 1, 1}));
        CHECK(c.classes[1].fn == 4);
        CHECK(c.classes[2].fp == 4);
    }
    SUBCASE("nodata is excluded") {
        const auto c = accumulate_confusion(mask_of(2, 2, {0, 1, 2, 0}), mask_of(2, 2, {0, 1, 2, 255}));
        CHECK(c.valid_pixels == 3);
    }
    SUBCASE("size mismatch") {
        CHECK_THROWS_AS(accumulate_confusion(mask_of(2, 2, {0, 0, 0, 0}), mask_of(1, 2, {0, 0})), Error);
    }
}

TEST_CASE("iou arithmetic") {
    ConfusionCounts c;
    c.classes[1] = {3, 1, 2, 0};
    CHECK(*iou(c, 1) == 0.5);
    CHECK_FALSE(iou(c, 0).has_value());
    ConfusionCounts m;
    m.classes[0] = {5, 0, 0, 0};
    m.classes[1] = {1, 1, 0, 0};
    CHECK(mean_iou(m) == 0.75);
    CHECK(iou(accumulate_confusion(mask_of(1, 2, {0, 1}), mask_of(1, 2, {0, 1})), 0) == 1.0);
}

TEST_CASE("random 8x8 masks match the set oracle") {
    std::mt19937_64 rng(77);
    std::uniform_int_distribution<int> code(0, 2);
    for (int trial = 0; trial < 500; ++trial) {
        std::vector<std::uint8_t> p(64);
        std::vector<std::uint8_t> t(64);
        for (auto& v : p) v = static_cast<std::uint8_t>(code(rng));
        for (auto& v : t) v = static_cast<std::uint8_t>(code(rng));
        if (trial % 5 == 0) t[trial % 64] = 255;
        const auto counts = accumulate_confusion(p, t, {});
        const auto expected = oracle::set_iou(p, t);
        for (int k = 0; k < 3; ++k) CHECK(iou(counts, k) == expected[k]);
        CHECK(mean_iou(counts) == *oracle::set_mean_iou(p, t));
    }
}

TEST_CASE("evaluate_manifest") {
    std::vector<ClassMask> masks;
    masks.push_back(mask_of(4, 4, {0, 0, 1, 1, 0, 2, 1, 1, 0, 2, 2, 2, 0, 0, 0, 0}));
    masks.push_back(mask_of(4, 4, {1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 2, 2, 2, 2}));
    const auto f = write_tiles("eval", masks);

    SUBCASE("perfect predictions") {
        for (std::size_t i = 0; i < masks.size(); ++i) write_prediction(f, i, masks[i]);
        const auto report = evaluate_manifest(f.manifest, f.dir, f.dir / "pred", SplitFilter::Test);
        CHECK(report.mean_iou == 1.0);
        CHECK(*report.per_tile_mean_iou == 1.0);
        for (int k = 0; k < 3; ++k) CHECK(*report.per_class_iou[k] == 1.0);
        const auto doc = nlohmann::json::parse(report_to_json(report));
        CHECK(doc["mean_iou"].get<double>() == 1.0);
        CHECK(doc["per_tile"].size() == 2);
        CHECK(doc["per_class_iou"].contains("2"));
        CHECK(doc.contains("per_tile_mean_iou"));
        CHECK(doc["valid_pixels"].get<int>() == 32);
    }
    SUBCASE("missing prediction names the tile") {
        write_prediction(f, 0, masks[0]);
        try {
            evaluate_manifest(f.manifest, f.dir, f.dir / "pred", SplitFilter::All);
            FAIL("expected a missing input error");
        } catch (const Error& e) {
            CHECK(e.kind() == ErrorKind::MissingInput);
            CHECK(std::string(e.what()).find(f.manifest.records[1].tile_id) != std::string::npos);
        }
    }
    SUBCASE("split filter selects nothing") {
        CHECK_THROWS_AS(evaluate_manifest(f.manifest, f.dir, f.dir / "pred", SplitFilter::Train), Error);
    }
    SUBCASE("all-zero predictions") {
        for (std::size_t i = 0; i < masks.size(); ++i) write_prediction(f, i, ClassMask(masks[i].geometry()));
        const auto report = evaluate_manifest(f.manifest, f.dir, f.dir / "pred", SplitFilter::Test);
        CHECK(*report.per_class_iou[0] < 1.0);
        CHECK(*report.per_class_iou[1] == 0.0);
        CHECK(*report.per_class_iou[2] == 0.0);
    }
    SUBCASE("global and per-tile averages differ on imbalanced tiles") {
        // Tile 0 perfect; tile 1 predicted all interior.
        write_prediction(f, 0, masks[0]);
        write_prediction(f, 1, mask_of(4, 4, std::vector<std::uint8_t>(16, 1)));
        const auto report = evaluate_manifest(f.manifest, f.dir, f.dir / "pred", SplitFilter::Test);
        // Hand count over 32 pixels: class 0 tp 8; class 1 tp 16 fp 4;
        // class 2 tp 4 fn 4.
        CHECK(*report.per_class_iou[0] == 1.0);
        CHECK(*report.per_class_iou[1] == doctest::Approx(16.0 / 20.0));
        CHECK(*report.per_class_iou[2] == doctest::Approx(4.0 / 8.0));
        CHECK(report.mean_iou == doctest::Approx((1.0 + 0.8 + 0.5) / 3.0));
        // Tile 1: class 1 = 12/16, class 2 = 0/4 -> mean 0.375; tile 0 = 1.
        CHECK(*report.per_tile_mean_iou == doctest::Approx((1.0 + 0.375) / 2.0));
        CHECK(report.mean_iou != doctest::Approx(*report.per_tile_mean_iou));
    }
}
