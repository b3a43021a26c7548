#pragma once

#include <array>
#include <optional>
#include <span>
#include <vector>

#include "fieldpipe/raster.hpp"

namespace fieldpipe {

/// NDVI = (NIR - Red) / (NIR + Red) per pixel. Inputs are divided by
/// `scale_divisor` first (10000 for scaled surface reflectance). Nodata in
/// either input, or a zero denominator, yields `output_nodata` (defaults to
/// the input sentinel).
Band compute_ndvi(const Band& red, const Band& nir, double nodata = kDefaultNodata,
                  double scale_divisor = 1.0, std::optional<double> output_nodata = std::nullopt);

/// NDVI of a raster that carries bands named "R" and "NIR".
Band compute_ndvi(const Raster& scene, double scale_divisor = 1.0);

/// Per-pixel, per-band median over the valid samples of `scenes`. An even
/// valid count takes the mean of the middle pair; a pixel with no valid
/// sample is nodata. Scenes must share geometry, band names and nodata.
Raster median_composite(std::span<const Raster> scenes);

struct DatedBand {
    Date date;
    Band band;
};

struct DatedRaster {
    Date date;
    Raster raster;
};

/// Three NDVI bands named NDVI1..NDVI3 in strictly ascending date order.
struct NdviStack {
    Raster raster;
    std::array<Date, 3> dates;
};

NdviStack stack_ndvi(std::vector<DatedBand> bands, const GridGeometry& geometry,
                     double nodata = kDefaultNodata);

/// Twelve-band stack R1,G1,B1,NIR1, ..., R3,G3,B3,NIR3 grouped by ascending
/// date. Each input must carry exactly the bands R, G, B, NIR in that order.
Raster stack_bands(std::vector<DatedRaster> rasters);

inline const std::array<const char*, 4> kSpectralBands = {"R", "G", "B", "NIR"};

}  // namespace fieldpipe
