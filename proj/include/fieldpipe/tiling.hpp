#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "fieldpipe/class_mask.hpp"
#include "fieldpipe/raster.hpp"

namespace fieldpipe {

enum class EdgePolicy { SnapToEdge, DropPartial };

struct TileSpec {
    int tile_size = 256;
    int stride = 128;
    EdgePolicy edge_policy = EdgePolicy::SnapToEdge;

    friend bool operator==(const TileSpec&, const TileSpec&) = default;

    /// Throws Error(Contract) unless 0 < stride <= tile_size.
    void validate() const;
};

/// Square source window in pixels.
struct Window {
    int col_off = 0;
    int row_off = 0;
    int size = 0;

    friend bool operator==(const Window&, const Window&) = default;

    bool intersects(const Window& o) const {
        return col_off < o.col_off + o.size && o.col_off < col_off + size &&
               row_off < o.row_off + o.size && o.row_off < row_off + size;
    }
};

enum class Split { Train, Val, Test };

const char* to_string(Split split);
Split parse_split(const std::string& text);

struct TileRecord {
    std::string tile_id;
    Window window;
    Bounds geo_bounds;
    Split split = Split::Train;
    std::array<int, 2> grid_cell{0, 0};  ///< (column cell, row cell)
    std::string image_path;
    std::string mask_path;

    friend bool operator==(const TileRecord&, const TileRecord&) = default;
};

struct SplitSummary {
    std::array<std::size_t, 3> tiles{0, 0, 0};  ///< indexed by Split
    std::array<std::size_t, 3> cells{0, 0, 0};
    /// Pairs of overlapping windows that landed in different splits (cell borders).
    std::size_t cross_split_overlaps = 0;

    friend bool operator==(const SplitSummary&, const SplitSummary&) = default;
};

struct TileManifest {
    TileSpec spec;
    GridGeometry source_geometry;
    std::vector<TileRecord> records;
    std::array<double, 3> fractions{0.7, 0.2, 0.1};
    int cell_size = 4;
    std::uint64_t seed = 0;
    SplitSummary summary;

    friend bool operator==(const TileManifest&, const TileManifest&) = default;
};

inline constexpr const char* kManifestSchema = "fieldpipe-manifest/1";

/// Row-major windows at multiples of stride. Snap-to-edge clamps one final
/// window per axis to the raster edge; drop-partial omits it. A raster smaller
/// than the tile yields an empty plan and a warning.
std::vector<Window> plan_tiles(const GridGeometry& geometry, const TileSpec& spec,
                               std::vector<std::string>* warnings = nullptr);

/// Crops image and mask to `window`. Errors: Geometry when image and mask
/// grids differ, Contract for an out-of-bounds window.
std::pair<Raster, ClassMask> extract_tile(const Raster& image, const ClassMask& mask,
                                          const Window& window);

/// (tile_size * pixel_size)^2 / 1e6.
double tile_area_km2(int tile_size, double pixel_size);

std::string tile_id_for(const Window& window);

struct SplitConfig {
    std::array<double, 3> fractions{0.7, 0.2, 0.1};
    int cell_size = 4;  ///< cell edge in stride units
    std::uint64_t seed = 0;
};

/// Groups windows into location cells of cell_size x cell_size stride units,
/// shuffles the cells with a seeded generator and deals whole cells to the
/// splits by largest-remainder quotas of the cell count. When at least three
/// cells exist every split receives one. Tile file paths are
/// `{path_prefix}{tile_id}_img.tif` and `{path_prefix}{tile_id}_mask.tif`.
TileManifest assign_splits(const std::vector<Window>& windows, const GridGeometry& geometry,
                           const TileSpec& spec, const SplitConfig& config,
                           const std::string& path_prefix = "tiles/");

/// Recomputes split labels and summary of an existing manifest in place.
void reassign_splits(TileManifest& manifest, const SplitConfig& config);

SplitSummary summarize_splits(const std::vector<TileRecord>& records);

std::string manifest_to_json(const TileManifest& manifest);
TileManifest manifest_from_json(const std::string& text);
void write_manifest(const TileManifest& manifest, const std::filesystem::path& path);
/// Errors: Io, Schema (bad version, malformed, duplicate tile_id).
TileManifest read_manifest(const std::filesystem::path& path);

}  // namespace fieldpipe
