#include "fieldpipe/tiling.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

#include "fieldpipe/error.hpp"

namespace fieldpipe {

namespace {

using nlohmann::json;

std::vector<int> axis_offsets(int extent, const TileSpec& spec) {
    std::vector<int> offsets;
    if (extent < spec.tile_size) return offsets;
    for (int o = 0; o + spec.tile_size <= extent; o += spec.stride) offsets.push_back(o);
    if (spec.edge_policy == EdgePolicy::SnapToEdge && offsets.back() + spec.tile_size < extent) {
        offsets.push_back(extent - spec.tile_size);
    }
    return offsets;
}

const char* to_string(EdgePolicy p) {
    return p == EdgePolicy::SnapToEdge ? "snap-to-edge" : "drop-partial";
}

EdgePolicy parse_edge_policy(const std::string& s) {
    if (s == "snap-to-edge") return EdgePolicy::SnapToEdge;
    if (s == "drop-partial") return EdgePolicy::DropPartial;
    throw Error(ErrorKind::Schema, "unknown edge policy '" + s + "'");
}

std::size_t split_index(Split s) { return static_cast<std::size_t>(s); }

void apply_splits(TileManifest& manifest, const SplitConfig& config) {
    const double sum = std::accumulate(config.fractions.begin(), config.fractions.end(), 0.0);
    if (std::abs(sum - 1.0) > 1e-9) {
        throw Error(ErrorKind::Contract, "split fractions must sum to 1, got " + std::to_string(sum));
    }
    for (double f : config.fractions) {
        if (!(f > 0.0)) throw Error(ErrorKind::Contract, "split fractions must be positive");
    }
    if (config.cell_size < 1) throw Error(ErrorKind::Contract, "cell_size must be >= 1");

    manifest.fractions = config.fractions;
    manifest.cell_size = config.cell_size;
    manifest.seed = config.seed;

    const int cell_px = manifest.spec.stride * config.cell_size;
    std::map<std::pair<int, int>, std::vector<std::size_t>> cells;  // keyed (row cell, col cell)
    for (std::size_t i = 0; i < manifest.records.size(); ++i) {
        auto& r = manifest.records[i];
        r.grid_cell = {r.window.col_off / cell_px, r.window.row_off / cell_px};
        cells[{r.grid_cell[1], r.grid_cell[0]}].push_back(i);
    }

    std::vector<const std::vector<std::size_t>*> order;
    order.reserve(cells.size());
    for (const auto& [key, members] : cells) order.push_back(&members);

    // Fisher-Yates on raw engine output keeps the shuffle identical across
    // standard library implementations.
    std::mt19937_64 rng(config.seed);
    for (std::size_t i = order.size(); i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(rng() % i);
        std::swap(order[i - 1], order[j]);
    }

    // Cell quotas by largest remainder; every split gets a cell when there are
    // at least three.
    const std::size_t n = order.size();
    std::array<std::size_t, 3> quota{0, 0, 0};
    std::array<double, 3> remainder{0.0, 0.0, 0.0};
    std::size_t given = 0;
    for (std::size_t s = 0; s < 3; ++s) {
        const double exact = config.fractions[s] * static_cast<double>(n);
        quota[s] = static_cast<std::size_t>(std::floor(exact + 1e-9));
        remainder[s] = exact - static_cast<double>(quota[s]);
        given += quota[s];
    }
    while (given < n) {
        std::size_t best = 0;
        for (std::size_t s = 1; s < 3; ++s) {
            if (remainder[s] > remainder[best]) best = s;
        }
        quota[best]++;
        remainder[best] = -1.0;
        given++;
    }
    if (n >= 3) {
        for (std::size_t s = 0; s < 3; ++s) {
            if (quota[s] > 0) continue;
            const auto largest = static_cast<std::size_t>(
                std::max_element(quota.begin(), quota.end()) - quota.begin());
            quota[largest]--;
            quota[s]++;
        }
    }
    std::size_t k = 0;
    for (std::size_t s = 0; s < 3; ++s) {
        for (std::size_t q = 0; q < quota[s]; ++q, ++k) {
            for (std::size_t idx : *order[k]) manifest.records[idx].split = static_cast<Split>(s);
        }
    }
    manifest.summary = summarize_splits(manifest.records);
}

json geometry_to_json(const GridGeometry& g) {
    return {{"origin_x", g.origin_x}, {"origin_y", g.origin_y}, {"pixel_size", g.pixel_size},
            {"width", g.width},       {"height", g.height},     {"crs_code", g.crs_code}};
}

GridGeometry geometry_from_json(const json& j) {
    return {j.at("origin_x").get<double>(), j.at("origin_y").get<double>(),
            j.at("pixel_size").get<double>(), j.at("width").get<int>(),
            j.at("height").get<int>(), j.at("crs_code").get<int>()};
}

}  // namespace

void TileSpec::validate() const {
    if (tile_size < 1 || stride < 1 || stride > tile_size) {
        throw Error(ErrorKind::Contract, "tile spec needs 0 < stride <= tile_size");
    }
}

const char* to_string(Split split) {
    switch (split) {
        case Split::Train: return "train";
        case Split::Val: return "val";
        case Split::Test: return "test";
    }
    return "train";
}

Split parse_split(const std::string& text) {
    if (text == "train") return Split::Train;
    if (text == "val") return Split::Val;
    if (text == "test") return Split::Test;
    throw Error(ErrorKind::Schema, "unknown split '" + text + "'");
}

std::vector<Window> plan_tiles(const GridGeometry& geometry, const TileSpec& spec,
                               std::vector<std::string>* warnings) {
    spec.validate();
    const auto cols = axis_offsets(geometry.width, spec);
    const auto rows = axis_offsets(geometry.height, spec);
    std::vector<Window> windows;
    if (cols.empty() || rows.empty()) {
        if (warnings) {
            warnings->push_back("raster " + std::to_string(geometry.width) + "x" +
                                std::to_string(geometry.height) + " is smaller than tile size " +
                                std::to_string(spec.tile_size) + "; no tiles planned");
        }
        return windows;
    }
    windows.reserve(cols.size() * rows.size());
    for (int r : rows) {
        for (int c : cols) windows.push_back({c, r, spec.tile_size});
    }
    return windows;
}

std::pair<Raster, ClassMask> extract_tile(const Raster& image, const ClassMask& mask,
                                          const Window& window) {
    const GridGeometry& g = image.geometry();
    if (!(g == mask.geometry())) {
        throw Error(ErrorKind::Geometry, "image and mask are not aligned on one grid");
    }
    if (window.size < 1 || window.col_off < 0 || window.row_off < 0 ||
        window.col_off + window.size > g.width || window.row_off + window.size > g.height) {
        throw Error(ErrorKind::Contract, "tile window " + tile_id_for(window) + " exceeds the raster");
    }
    const GridGeometry tile_geometry = g.window(window.col_off, window.row_off, window.size, window.size);
    std::vector<Band> bands;
    for (const auto& src : image.bands()) {
        Band b(window.size, window.size);
        for (int r = 0; r < window.size; ++r) {
            for (int c = 0; c < window.size; ++c) {
                b.at(c, r) = src.at(window.col_off + c, window.row_off + r);
            }
        }
        bands.push_back(std::move(b));
    }
    std::vector<std::uint8_t> codes;
    codes.reserve(tile_geometry.pixel_count());
    for (int r = 0; r < window.size; ++r) {
        for (int c = 0; c < window.size; ++c) {
            codes.push_back(mask.at(window.col_off + c, window.row_off + r));
        }
    }
    Raster tile(tile_geometry, std::move(bands), image.band_names(), image.nodata(),
                image.sample_type());
    return {tile.with_band_dates(image.band_dates()), ClassMask(tile_geometry, std::move(codes))};
}

double tile_area_km2(int tile_size, double pixel_size) {
    if (tile_size <= 0 || !(pixel_size > 0.0)) {
        throw Error(ErrorKind::Contract, "tile size and pixel size must be positive");
    }
    const double side_m = static_cast<double>(tile_size) * pixel_size;
    return side_m * side_m / 1e6;
}

std::string tile_id_for(const Window& window) {
    return "r" + std::to_string(window.row_off) + "_c" + std::to_string(window.col_off);
}

TileManifest assign_splits(const std::vector<Window>& windows, const GridGeometry& geometry,
                           const TileSpec& spec, const SplitConfig& config,
                           const std::string& path_prefix) {
    spec.validate();
    TileManifest manifest;
    manifest.spec = spec;
    manifest.source_geometry = geometry;
    manifest.records.reserve(windows.size());
    for (const auto& w : windows) {
        TileRecord r;
        r.tile_id = tile_id_for(w);
        r.window = w;
        const GridGeometry tg = geometry.window(w.col_off, w.row_off, w.size, w.size);
        r.geo_bounds = tg.bounds();
        r.image_path = path_prefix + r.tile_id + "_img.tif";
        r.mask_path = path_prefix + r.tile_id + "_mask.tif";
        manifest.records.push_back(std::move(r));
    }
    apply_splits(manifest, config);
    return manifest;
}

void reassign_splits(TileManifest& manifest, const SplitConfig& config) {
    apply_splits(manifest, config);
}

SplitSummary summarize_splits(const std::vector<TileRecord>& records) {
    SplitSummary summary;
    std::map<std::array<int, 2>, Split> cell_split;
    for (const auto& r : records) {
        summary.tiles[split_index(r.split)]++;
        cell_split.emplace(r.grid_cell, r.split);
    }
    for (const auto& [cell, split] : cell_split) summary.cells[split_index(split)]++;

    // Windows sorted by row offset; only rows within one tile height can intersect.
    std::vector<std::size_t> idx(records.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        return records[a].window.row_off < records[b].window.row_off;
    });
    for (std::size_t i = 0; i < idx.size(); ++i) {
        const auto& a = records[idx[i]];
        for (std::size_t j = i + 1; j < idx.size(); ++j) {
            const auto& b = records[idx[j]];
            if (b.window.row_off >= a.window.row_off + a.window.size) break;
            if (a.split != b.split && a.window.intersects(b.window)) summary.cross_split_overlaps++;
        }
    }
    return summary;
}

std::string manifest_to_json(const TileManifest& m) {
    json doc;
    doc["schema"] = kManifestSchema;
    doc["spec"] = {{"tile_size", m.spec.tile_size},
                   {"stride", m.spec.stride},
                   {"edge_policy", to_string(m.spec.edge_policy)}};
    doc["source_geometry"] = geometry_to_json(m.source_geometry);
    doc["fractions"] = m.fractions;
    doc["cell_size"] = m.cell_size;
    doc["seed"] = m.seed;
    doc["summary"] = {{"tiles", m.records.size()},
                      {"train", m.summary.tiles[0]},
                      {"val", m.summary.tiles[1]},
                      {"test", m.summary.tiles[2]},
                      {"cells", {{"train", m.summary.cells[0]},
                                 {"val", m.summary.cells[1]},
                                 {"test", m.summary.cells[2]}}},
                      {"cross_split_overlaps", m.summary.cross_split_overlaps}};
    json records = json::array();
    for (const auto& r : m.records) {
        records.push_back({{"tile_id", r.tile_id},
                           {"window", {r.window.col_off, r.window.row_off, r.window.size}},
                           {"geo_bounds", {r.geo_bounds.x0, r.geo_bounds.y0, r.geo_bounds.x1, r.geo_bounds.y1}},
                           {"split", to_string(r.split)},
                           {"grid_cell", r.grid_cell},
                           {"image_path", r.image_path},
                           {"mask_path", r.mask_path}});
    }
    doc["records"] = std::move(records);
    return doc.dump(2) + "\n";
}

TileManifest manifest_from_json(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::exception& e) {
        throw Error(ErrorKind::Schema, std::string("malformed manifest: ") + e.what());
    }
    if (!doc.is_object() || !doc.contains("schema")) {
        throw Error(ErrorKind::Schema, "manifest has no schema field");
    }
    const std::string schema = doc["schema"].is_string() ? doc["schema"].get<std::string>() : "";
    if (schema != kManifestSchema) {
        throw Error(ErrorKind::Schema, "unsupported manifest schema '" + schema + "', expected " +
                                           kManifestSchema);
    }
    TileManifest m;
    try {
        const auto& spec = doc.at("spec");
        m.spec = {spec.at("tile_size").get<int>(), spec.at("stride").get<int>(),
                  parse_edge_policy(spec.at("edge_policy").get<std::string>())};
        m.source_geometry = geometry_from_json(doc.at("source_geometry"));
        m.fractions = doc.at("fractions").get<std::array<double, 3>>();
        m.cell_size = doc.at("cell_size").get<int>();
        m.seed = doc.at("seed").get<std::uint64_t>();
        std::unordered_set<std::string> ids;
        for (const auto& r : doc.at("records")) {
            TileRecord rec;
            rec.tile_id = r.at("tile_id").get<std::string>();
            if (!ids.insert(rec.tile_id).second) {
                throw Error(ErrorKind::Schema, "duplicate tile_id '" + rec.tile_id + "' in manifest");
            }
            const auto w = r.at("window").get<std::array<int, 3>>();
            rec.window = {w[0], w[1], w[2]};
            const auto b = r.at("geo_bounds").get<std::array<double, 4>>();
            rec.geo_bounds = {b[0], b[1], b[2], b[3]};
            rec.split = parse_split(r.at("split").get<std::string>());
            rec.grid_cell = r.at("grid_cell").get<std::array<int, 2>>();
            rec.image_path = r.at("image_path").get<std::string>();
            rec.mask_path = r.at("mask_path").get<std::string>();
            m.records.push_back(std::move(rec));
        }
    } catch (const json::exception& e) {
        throw Error(ErrorKind::Schema, std::string("malformed manifest: ") + e.what());
    }
    const double sum = m.fractions[0] + m.fractions[1] + m.fractions[2];
    if (std::abs(sum - 1.0) > 1e-9) throw Error(ErrorKind::Schema, "manifest fractions do not sum to 1");
    m.summary = summarize_splits(m.records);
    return m;
}

void write_manifest(const TileManifest& manifest, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorKind::Io, path.string() + ": cannot open for writing");
    out << manifest_to_json(manifest);
    if (!out) throw Error(ErrorKind::Io, path.string() + ": write failed");
}

TileManifest read_manifest(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::Io, path.string() + ": cannot open manifest");
    std::stringstream ss;
    ss << in.rdbuf();
    return manifest_from_json(ss.str());
}

}  // namespace fieldpipe
