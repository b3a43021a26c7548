#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "fieldpipe/class_mask.hpp"
#include "fieldpipe/polygon.hpp"

namespace fieldpipe {

struct Parcel {
    std::int64_t id = 0;
    std::vector<Polygon> parts;  ///< one entry for Polygon features, several for MultiPolygon
    bool crop = false;
};

struct ParcelSet {
    std::vector<Parcel> parcels;
    int crs_code = 4326;
};

/// Feature whose `attribute` property equals one of `values` is a crop parcel.
/// Numbers and booleans are compared by their JSON text.
struct CropRule {
    std::string attribute;
    std::vector<std::string> values;

    bool matches(const std::string& property_text) const;
};

struct RejectedParcel {
    std::int64_t id = 0;
    std::string reason;
};

struct ParcelLoad {
    ParcelSet set;
    std::vector<RejectedParcel> rejected;
};

/// Reads a GeoJSON FeatureCollection of Polygon / MultiPolygon features.
/// Invalid rings are rejected (reported, not repaired). Errors: Io, Schema for
/// malformed GeoJSON, Contract for an attribute no feature carries or
/// duplicate ids, Empty when no valid parcel remains.
ParcelLoad load_parcels(const std::filesystem::path& path, const CropRule& rule);

/// Validates ids and rings of an in-memory set; throws Error(Contract).
void validate_parcels(const ParcelSet& parcels);

/// One closed polyline per ring of every crop parcel, vertex order preserved.
std::vector<Polyline> polygons_to_boundaries(const ParcelSet& parcels);

/// Round-joined corridor of half-width `half_width` around a set of polylines.
///
/// Membership is decided exactly (distance to the nearest source segment
/// <= half_width); `polygons` is the unioned polygonal approximation with
/// 16 segments per quarter circle, used for areas and export.
class BoundaryBand {
public:
    BoundaryBand(std::vector<Polyline> lines, double half_width);

    double half_width() const { return half_width_; }
    const std::vector<Polyline>& lines() const { return lines_; }
    const std::vector<Polygon>& polygons() const { return polygons_; }

    bool contains(const Point& p) const;
    double area() const;

private:
    std::vector<Polyline> lines_;
    double half_width_;
    std::vector<Polygon> polygons_;
};

/// Throws Error(Contract) for half_width <= 0.
BoundaryBand buffer_boundaries(std::vector<Polyline> lines, double half_width);

struct MaskDiagnostics {
    /// Pairs of crop parcel ids whose interiors overlap on at least one pixel.
    std::vector<std::pair<std::int64_t, std::int64_t>> overlaps;
};

/// Three-class mask by pixel-center sampling: 2 inside the boundary band,
/// else 1 inside a crop parcel, else 0. Errors: Geometry on CRS mismatch,
/// Contract for half_width <= 0.
ClassMask build_class_mask(const ParcelSet& parcels, const GridGeometry& geometry,
                           double half_width, MaskDiagnostics* diagnostics = nullptr,
                           int jobs = 1);

}  // namespace fieldpipe
