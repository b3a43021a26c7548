#pragma once

#include <compare>
#include <cstddef>
#include <optional>

namespace fieldpipe {

struct Point {
    double x = 0.0;
    double y = 0.0;

    friend bool operator==(const Point&, const Point&) = default;
};

struct PixelIndex {
    int col = 0;
    int row = 0;

    friend bool operator==(const PixelIndex&, const PixelIndex&) = default;
};

/// Map-unit rectangle, x0 < x1 and y0 < y1.
struct Bounds {
    double x0 = 0.0;
    double y0 = 0.0;
    double x1 = 0.0;
    double y1 = 0.0;

    friend bool operator==(const Bounds&, const Bounds&) = default;
};

/// North-up affine pixel grid with square pixels. Row 0 is the northern edge.
struct GridGeometry {
    double origin_x = 0.0;    ///< easting of the upper-left corner
    double origin_y = 0.0;    ///< northing of the upper-left corner
    double pixel_size = 1.0;  ///< map units per pixel, positive
    int width = 1;
    int height = 1;
    int crs_code = 0;         ///< EPSG code, 0 when unknown

    friend bool operator==(const GridGeometry&, const GridGeometry&) = default;

    /// Throws Error(Contract) when pixel_size <= 0 or a dimension is < 1.
    void validate() const;

    std::size_t pixel_count() const {
        return static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
    }

    Point pixel_center(int col, int row) const {
        return {origin_x + (col + 0.5) * pixel_size, origin_y - (row + 0.5) * pixel_size};
    }

    /// Pixel containing (x, y), or nullopt outside the extent.
    std::optional<PixelIndex> pixel_at(double x, double y) const;

    Bounds bounds() const {
        return {origin_x, origin_y - height * pixel_size, origin_x + width * pixel_size, origin_y};
    }

    /// Sub-grid starting at (col_off, row_off). Does not check containment.
    GridGeometry window(int col_off, int row_off, int w, int h) const {
        return {origin_x + col_off * pixel_size, origin_y - row_off * pixel_size, pixel_size, w, h,
                crs_code};
    }

    bool same_shape(const GridGeometry& other) const {
        return width == other.width && height == other.height;
    }
};

}  // namespace fieldpipe
