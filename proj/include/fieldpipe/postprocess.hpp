#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "fieldpipe/class_mask.hpp"
#include "fieldpipe/polygon.hpp"
#include "fieldpipe/raster.hpp"

namespace fieldpipe {

inline constexpr double kProbabilityTolerance = 1e-4;

/// Per-pixel class with the highest probability from a 3-band softmax raster;
/// ties go to the higher class code. Nodata in any band gives 255. Throws
/// Error(Contract) when probabilities are negative or do not sum to 1.
ClassMask argmax_classes(const Raster& prediction);

/// Inverse of argmax_classes for a hard mask: 3 float bands, nodata -9999.
Raster one_hot(const ClassMask& mask);

/// Morphological closing of the code-2 set with a (2r+1)^2 square. Only
/// pixels that end up inside the closed set change, and they become code 2.
ClassMask close_boundary_gaps(const ClassMask& mask, int radius);

struct FieldPolygon {
    std::int64_t field_id = 0;
    Polygon polygon;
    double area_ha = 0.0;
    std::int64_t source_component_px = 0;
};

/// Labels 4-connected code-1 components, grows each by up to `expand_px`
/// pixels (chessboard distance) into code-2 pixels without crossing another
/// component, and traces every region along pixel edges. Pixels reached by
/// two components at the same distance stay unclaimed. field_ids are 1-based
/// in row-major order of each component's first pixel.
std::vector<FieldPolygon> polygonize_fields(const ClassMask& mask, int expand_px);

/// Douglas-Peucker per ring. When a ring would self-intersect the tolerance
/// is halved and retried down to zero.
FieldPolygon simplify_polygon(const FieldPolygon& field, double tolerance);

struct EliminationResult {
    std::vector<FieldPolygon> fields;
    std::size_t merged = 0;
    std::size_t dropped = 0;
    double dropped_area_ha = 0.0;
};

/// Merges every polygon smaller than `min_area_ha` into the neighbour with
/// the longest shared border, smallest first (ties by field_id). Fragments
/// with no shared border are dropped.
EliminationResult eliminate_fragments(std::vector<FieldPolygon> fields, double min_area_ha);

struct HistogramBin {
    double lower = 0.0;
    double upper = 0.0;  ///< +inf for the final open-ended bin
    std::size_t count = 0;
    double percent = 0.0;
};

struct FieldSizeStats {
    std::size_t count = 0;
    double median_ha = 0.0;
    double mean_ha = 0.0;
    double total_ha = 0.0;
    std::vector<HistogramBin> histogram;
};

inline const std::vector<double> kDefaultBinEdges = {0.0, 0.1, 0.5, 1.0, 2.0, 5.0, 10.0, 20.0};

/// Errors: Empty for no fields, Contract for non-increasing edges.
FieldSizeStats field_stats(const std::vector<FieldPolygon>& fields,
                           const std::vector<double>& bin_edges = kDefaultBinEdges);
FieldSizeStats field_stats_from_areas(std::vector<double> areas_ha,
                                      const std::vector<double>& bin_edges = kDefaultBinEdges);

struct PostprocessParams {
    int close_radius = 1;
    int expand_px = 1;
    double simplify_tolerance = 10.0;  ///< map units
    double min_area_ha = 0.5;
};

/// Defaults scaled to the sensor: expand = ceil(half_width / pixel_size),
/// tolerance = pixel_size, minimum area 0.05 ha at <= 5 m pixels, else 0.5 ha.
PostprocessParams default_postprocess_params(double pixel_size, double half_width);

struct PostprocessResult {
    ClassMask classes;
    std::vector<FieldPolygon> fields;
    std::size_t components = 0;
    std::size_t merged = 0;
    std::size_t dropped = 0;
};

/// argmax -> close_boundary_gaps -> polygonize_fields -> simplify_polygon ->
/// eliminate_fragments.
PostprocessResult run_postprocess(const Raster& prediction, const PostprocessParams& params);

std::string fields_to_geojson(const std::vector<FieldPolygon>& fields, int crs_code);
std::vector<FieldPolygon> fields_from_geojson(const std::string& text);
std::string stats_to_json(const FieldSizeStats& stats);
/// Bar chart of the percentage histogram.
std::string stats_to_svg(const FieldSizeStats& stats);

}  // namespace fieldpipe
