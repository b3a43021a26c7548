#include "synthetic.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>
#include <unistd.h>

#include "fieldpipe/geotiff.hpp"

namespace synth {

using fieldpipe::GridGeometry;
using fieldpipe::Parcel;
using fieldpipe::Polygon;

Polygon rect(double x0, double y0, double x1, double y1) {
    return {{{x0, y0}, {x1, y0}, {x1, y1}, {x0, y1}, {x0, y0}}, {}};
}

Polygon l_shape(double x0, double y0, double x1, double y1, double cx, double cy) {
    return {{{x0, y0}, {x1, y0}, {x1, cy}, {cx, cy}, {cx, y1}, {x0, y1}, {x0, y0}}, {}};
}

Layout random_layout(std::mt19937_64& rng) {
    auto uni = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
    const double sizes[] = {1.0, 3.0, 10.0};
    Layout out;
    out.geometry.pixel_size = sizes[uni(0, 2)];
    out.geometry.width = uni(16, 64);
    out.geometry.height = uni(16, 64);
    out.geometry.origin_x = 1000.0 * uni(0, 500);
    out.geometry.origin_y = 1000.0 * uni(1000, 5000);
    out.geometry.crs_code = 32632;
    out.parcels.crs_code = 32632;
    const double ps = out.geometry.pixel_size;
    out.half_width = std::uniform_real_distribution<double>(ps, 2.0 * ps)(rng);

    // Fractions avoid 0.5 so that no vertex lies on a pixel-center line.
    const double fractions[] = {0.0, 0.2, 0.7};
    auto coord_x = [&](int px) { return out.geometry.origin_x + (px + fractions[uni(0, 2)]) * ps; };
    auto coord_y = [&](int px) { return out.geometry.origin_y - (px + fractions[uni(0, 2)]) * ps; };

    const int shapes = uni(0, 10);
    for (int k = 0; k < shapes; ++k) {
        const int w = uni(3, std::max(3, out.geometry.width / 2));
        const int h = uni(3, std::max(3, out.geometry.height / 2));
        const int c0 = uni(-2, out.geometry.width - w + 1);
        const int r0 = uni(-2, out.geometry.height - h + 1);
        const double x0 = coord_x(c0);
        const double x1 = coord_x(c0 + w);
        const double y1 = coord_y(r0);       // top
        const double y0 = coord_y(r0 + h);   // bottom
        Polygon poly;
        if (uni(0, 1) == 0) {
            poly = rect(x0, y0, x1, y1);
            if (w >= 9 && h >= 9 && uni(0, 3) == 0) {
                const double hx0 = coord_x(c0 + 3);
                const double hx1 = coord_x(c0 + w - 3);
                const double hy1 = coord_y(r0 + 3);
                const double hy0 = coord_y(r0 + h - 3);
                auto hole = rect(hx0, hy0, hx1, hy1).exterior;
                std::reverse(hole.begin(), hole.end());
                poly.holes.push_back(hole);
            }
        } else {
            const double cx = coord_x(c0 + uni(1, w - 1));
            const double cy = coord_y(r0 + uni(1, h - 1));
            poly = l_shape(x0, y0, x1, y1, cx, cy);
        }
        Parcel p;
        p.id = k + 1;
        p.parts.push_back(std::move(poly));
        p.crop = uni(0, 4) != 0;
        out.parcels.parcels.push_back(std::move(p));
    }
    return out;
}

FieldScene field_grid(int size_px, double pixel_size, int cols, int rows, int margin_px,
                      std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    FieldScene scene;
    scene.geometry = GridGeometry{600000.0, 5800000.0, pixel_size, size_px, size_px, 32631};
    scene.parcels.crs_code = 32631;
    const int cell_w = size_px / cols;
    const int cell_h = size_px / rows;
    std::int64_t id = 0;
    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) {
            auto uni = [&](int lo, int hi) {
                return std::uniform_int_distribution<int>(lo, std::max(lo, hi))(rng);
            };
            const int w = uni((cell_w - 2 * margin_px) / 2, cell_w - 2 * margin_px);
            const int h = uni((cell_h - 2 * margin_px) / 2, cell_h - 2 * margin_px);
            const int c0 = c * cell_w + uni(margin_px, cell_w - margin_px - w);
            const int r0 = r * cell_h + uni(margin_px, cell_h - margin_px - h);
            const auto& g = scene.geometry;
            Parcel p;
            p.id = ++id;
            p.crop = true;
            p.parts.push_back(rect(g.origin_x + c0 * pixel_size, g.origin_y - (r0 + h) * pixel_size,
                                   g.origin_x + (c0 + w) * pixel_size, g.origin_y - r0 * pixel_size));
            scene.parcels.parcels.push_back(std::move(p));
        }
    }
    return scene;
}

std::string parcels_geojson(const fieldpipe::ParcelSet& parcels) {
    using nlohmann::json;
    json features = json::array();
    for (const auto& p : parcels.parcels) {
        json polys = json::array();
        for (const auto& part : p.parts) {
            json rings = json::array();
            auto ring_json = [](const fieldpipe::Ring& r) {
                json out = json::array();
                for (const auto& pt : r) out.push_back({pt.x, pt.y});
                return out;
            };
            rings.push_back(ring_json(part.exterior));
            for (const auto& h : part.holes) rings.push_back(ring_json(h));
            polys.push_back(std::move(rings));
        }
        json geometry = p.parts.size() == 1
                            ? json{{"type", "Polygon"}, {"coordinates", polys[0]}}
                            : json{{"type", "MultiPolygon"}, {"coordinates", polys}};
        features.push_back({{"type", "Feature"},
                            {"id", p.id},
                            {"properties", {{"crop", p.crop ? "yes" : "no"}}},
                            {"geometry", std::move(geometry)}});
    }
    json doc{{"type", "FeatureCollection"},
             {"crs",
              {{"type", "name"},
               {"properties", {{"name", "EPSG:" + std::to_string(parcels.crs_code)}}}}},
             {"features", std::move(features)}};
    return doc.dump(1);
}

fieldpipe::Raster spectral_scene(const FieldScene& scene, double season, std::uint64_t seed) {
    const auto& g = scene.geometry;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, 60.0);
    std::vector<fieldpipe::Band> bands(4, fieldpipe::Band(g.width, g.height));
    for (int row = 0; row < g.height; ++row) {
        for (int col = 0; col < g.width; ++col) {
            const auto c = g.pixel_center(col, row);
            bool field = false;
            for (const auto& p : scene.parcels.parcels) {
                const auto& e = p.parts.front().exterior;
                if (c.x > e[0].x && c.x < e[2].x && c.y > e[0].y && c.y < e[2].y) field = true;
            }
            const double red = field ? 900.0 - 500.0 * season : 1800.0;
            const double nir = field ? 2500.0 + 2500.0 * season : 2400.0;
            const double vals[4] = {red, 1200.0, 900.0, nir};
            for (int b = 0; b < 4; ++b) {
                bands[b].at(col, row) = static_cast<float>(std::max(1.0, vals[b] + noise(rng)));
            }
        }
    }
    return fieldpipe::Raster(g, std::move(bands), {"R", "G", "B", "NIR"}, 0.0,
                             fieldpipe::SampleType::UInt16);
}

std::filesystem::path write_project(const std::filesystem::path& dir, int size_px,
                                    std::uint64_t seed) {
    namespace fs = std::filesystem;
    fs::create_directories(dir / "scenes");
    const int per_axis = std::max(1, size_px / 128);
    const FieldScene scene = field_grid(size_px, 10.0, per_axis, per_axis, 4, seed);
    const char* dates[] = {"2021-10-02", "2021-04-14", "2021-07-20"};
    const double seasons[] = {0.3, 0.2, 0.9};
    std::ostringstream scenes;
    for (int d = 0; d < 3; ++d) {
        scenes << '"' << dates[d] << "\" = [";
        for (int k = 0; k < 2; ++k) {
            const std::string name = std::string("scenes/") + dates[d] + "_" + std::to_string(k) + ".tif";
            fieldpipe::write_raster(spectral_scene(scene, seasons[d], seed * 31 + d * 7 + k), dir / name);
            scenes << (k ? ", " : "") << '"' << name << '"';
        }
        scenes << "]\n";
    }
    {
        std::ofstream out(dir / "parcels.geojson");
        out << parcels_geojson(scene.parcels);
    }
    const fs::path config = dir / "fieldpipe.toml";
    std::ofstream out(config);
    out << "preset = \"sentinel2\"\n"
        << "work_dir = \"work\"\n"
        << "dates = [\"2021-04-14\", \"2021-07-20\", \"2021-10-02\"]\n\n"
        << "[ndvi]\nscale_divisor = 10000\nwrite_band_stack = true\n\n"
        << "[scenes]\n" << scenes.str() << "\n"
        << "[paths]\nparcels = \"parcels.geojson\"\n\n"
        << "[labels]\ncrop_attribute = \"crop\"\ncrop_values = [\"yes\"]\n\n"
        << "[split]\nfractions = [0.7, 0.2, 0.1]\ncell_size = 2\nseed = 7\n";
    return config;
}

namespace {

// Never destroyed, so the exit handler can still read it.
const std::filesystem::path& scratch_root() {
    static const auto* root = [] {
        auto* p = new std::filesystem::path(std::filesystem::temp_directory_path() /
                                            ("fieldpipe-test-" + std::to_string(::getpid())));
        std::atexit([] {
            std::error_code ec;
            std::filesystem::remove_all(scratch_root(), ec);
        });
        return p;
    }();
    return *root;
}

}  // namespace

std::filesystem::path scratch_dir(const std::string& name) {
    namespace fs = std::filesystem;
    const fs::path dir = scratch_root() / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace synth
