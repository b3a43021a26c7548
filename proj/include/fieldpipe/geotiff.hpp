#pragma once

#include <filesystem>

#include "fieldpipe/raster.hpp"

namespace fieldpipe {

enum class TiffLayout { Strips, Tiles };

struct WriteOptions {
    TiffLayout layout = TiffLayout::Strips;
    int block_size = 256;  ///< tile edge for TiffLayout::Tiles, multiple of 16
    bool compress = true;  ///< deflate
};

/// Reads a GeoTIFF (strip or tiled, contiguous or planar) into float bands.
///
/// Georeferencing comes from ModelPixelScale + ModelTiepoint and the
/// GeoKeyDirectory (ProjectedCSType or GeographicType key). Nodata comes from
/// the GDAL_NODATA tag, band names from GDAL_METADATA band descriptions, and
/// band dates from a `{path}.bands.json` sidecar when one exists.
///
/// Errors: Io for a missing file, Format for unsupported encodings,
/// Georeferencing when the transform or CRS key is absent.
Raster read_raster(const std::filesystem::path& path);

/// Writes `raster` so that read_raster reproduces it exactly. A sidecar
/// `{path}.bands.json` with names and ISO dates is written when the raster
/// carries band dates, and removed otherwise.
void write_raster(const Raster& raster, const std::filesystem::path& path,
                  const WriteOptions& options = {});

std::filesystem::path sidecar_path(const std::filesystem::path& raster_path);

}  // namespace fieldpipe
