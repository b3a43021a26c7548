#pragma once

#include <string>
#include <vector>

#include "fieldpipe/grid.hpp"

namespace fieldpipe {

/// Closed ring: first vertex equals last vertex.
using Ring = std::vector<Point>;
using Polyline = std::vector<Point>;

struct Polygon {
    Ring exterior;
    std::vector<Ring> holes;

    friend bool operator==(const Polygon&, const Polygon&) = default;
};

/// Shoelace area, positive for counter-clockwise rings (y up).
double signed_area(const Ring& ring);
/// |exterior| - sum |holes|.
double polygon_area(const Polygon& polygon);

bool ring_is_closed(const Ring& ring);

/// Empty string when the ring is closed, has >= 4 vertices, non-zero area and
/// no self-intersection; otherwise a short reason.
std::string ring_problem(const Ring& ring);

/// Even-odd point-in-polygon (holes excluded). Points on an edge are unspecified.
bool polygon_contains(const Polygon& polygon, const Point& p);

double point_segment_distance(const Point& p, const Point& a, const Point& b);

/// Length of the collinear overlap between the edges of two rings.
double shared_border_length(const Ring& a, const Ring& b, double tolerance);

Bounds ring_bounds(const Ring& ring);

}  // namespace fieldpipe
