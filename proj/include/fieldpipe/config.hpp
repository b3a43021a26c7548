#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "fieldpipe/date.hpp"
#include "fieldpipe/label_mask.hpp"
#include "fieldpipe/postprocess.hpp"
#include "fieldpipe/tiling.hpp"

namespace fieldpipe {

struct SensorProfile {
    std::string name;
    double pixel_size = 10.0;
    int tile_size = 256;
    int stride = 128;
    double half_width = 10.0;
    double min_area_ha = 0.5;
};

/// "sentinel2" (10 m, 256, 128, 10 m) or "planetscope" (3 m, 384, 128, 3 m).
/// Error(Config) for any other name.
SensorProfile sensor_preset(const std::string& name);

struct SceneGroup {
    Date date;
    std::vector<std::filesystem::path> scenes;
};

struct PipelineConfig {
    SensorProfile sensor = sensor_preset("sentinel2");
    double scale_divisor = 1.0;
    double nodata = kDefaultNodata;
    bool write_band_stack = false;

    std::vector<SceneGroup> scene_groups;  ///< in config order; exactly 3
    std::filesystem::path parcels;
    std::filesystem::path reference;  ///< grid for make-mask; defaults to the NDVI stack
    std::filesystem::path work_dir = "work";
    CropRule crop_rule{"crop", {"true"}};

    EdgePolicy edge_policy = EdgePolicy::SnapToEdge;
    SplitConfig split{{0.7, 0.2, 0.1}, 4, 0};

    PostprocessParams postprocess;
    std::vector<double> bin_edges = kDefaultBinEdges;
    bool histogram_svg = true;

    std::filesystem::path ndvi_stack_path() const { return work_dir / "ndvi_stack.tif"; }
    std::filesystem::path band_stack_path() const { return work_dir / "band_stack.tif"; }
    std::filesystem::path mask_path() const { return work_dir / "mask.tif"; }
    std::filesystem::path tiles_dir() const { return work_dir / "tiles"; }
    std::filesystem::path manifest_path() const { return work_dir / "manifest.json"; }
    std::filesystem::path reference_path() const {
        return reference.empty() ? ndvi_stack_path() : reference;
    }

    TileSpec tile_spec() const { return {sensor.tile_size, sensor.stride, edge_policy}; }

    /// Error(Config) naming the offending key.
    void validate() const;
    /// Exactly three scene groups with distinct dates and at least one scene
    /// each; every date listed under `dates` must have a group.
    void validate_scenes() const;

    std::vector<Date> declared_dates;  ///< optional `dates = [...]` list
};

/// Parses the TOML subset used by pipeline configs: `[section]` headers,
/// `key = value` with strings, numbers, booleans and flat arrays, `#` comments.
/// Relative paths resolve against `base_dir`.
PipelineConfig parse_config(const std::string& text, const std::filesystem::path& base_dir);
PipelineConfig load_config(const std::filesystem::path& path);

}  // namespace fieldpipe
