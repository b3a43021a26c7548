#include "fieldpipe/polygon.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace fieldpipe {

namespace {

double cross(const Point& o, const Point& a, const Point& b) {
    return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}

int sign(double v) { return (v > 0.0) - (v < 0.0); }

bool on_segment(const Point& p, const Point& a, const Point& b) {
    return std::min(a.x, b.x) <= p.x && p.x <= std::max(a.x, b.x) && std::min(a.y, b.y) <= p.y &&
           p.y <= std::max(a.y, b.y);
}

bool segments_intersect(const Point& p1, const Point& p2, const Point& q1, const Point& q2) {
    const int d1 = sign(cross(q1, q2, p1));
    const int d2 = sign(cross(q1, q2, p2));
    const int d3 = sign(cross(p1, p2, q1));
    const int d4 = sign(cross(p1, p2, q2));
    if (d1 * d2 < 0 && d3 * d4 < 0) return true;
    if (d1 == 0 && on_segment(p1, q1, q2)) return true;
    if (d2 == 0 && on_segment(p2, q1, q2)) return true;
    if (d3 == 0 && on_segment(q1, p1, p2)) return true;
    if (d4 == 0 && on_segment(q2, p1, p2)) return true;
    return false;
}

bool ring_contains(const Ring& ring, const Point& p) {
    bool inside = false;
    for (std::size_t i = 0, j = ring.size() - 1; i < ring.size(); j = i++) {
        const Point& a = ring[i];
        const Point& b = ring[j];
        if ((a.y > p.y) != (b.y > p.y)) {
            const double x = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
            if (p.x < x) inside = !inside;
        }
    }
    return inside;
}

}  // namespace

double signed_area(const Ring& ring) {
    if (ring.size() < 3) return 0.0;
    double twice = 0.0;
    for (std::size_t i = 0; i + 1 < ring.size(); ++i) {
        twice += ring[i].x * ring[i + 1].y - ring[i + 1].x * ring[i].y;
    }
    if (!ring_is_closed(ring)) {
        twice += ring.back().x * ring.front().y - ring.front().x * ring.back().y;
    }
    return 0.5 * twice;
}

double polygon_area(const Polygon& polygon) {
    double area = std::abs(signed_area(polygon.exterior));
    for (const auto& h : polygon.holes) area -= std::abs(signed_area(h));
    return area;
}

bool ring_is_closed(const Ring& ring) { return ring.size() >= 2 && ring.front() == ring.back(); }

std::string ring_problem(const Ring& ring) {
    if (!ring_is_closed(ring)) return "ring is not closed";
    if (ring.size() < 4) return "ring has fewer than 4 vertices";
    const std::size_t n = ring.size() - 1;  // segment count
    for (std::size_t i = 0; i < n; ++i) {
        if (ring[i] == ring[i + 1]) return "ring repeats a vertex";
    }
    if (signed_area(ring) == 0.0) return "ring has zero area";
    for (std::size_t i = 0; i < n; ++i) {
        const Point& a = ring[i];
        const Point& b = ring[i + 1];
        for (std::size_t j = i + 1; j < n; ++j) {
            const Point& c = ring[j];
            const Point& d = ring[j + 1];
            const bool adjacent = j == i + 1 || (i == 0 && j == n - 1);
            if (adjacent) {
                // Shared vertex is fine; a fold-back along the same line is not.
                const Point& shared = j == i + 1 ? b : a;
                const Point& other_a = j == i + 1 ? a : b;
                const Point& other_c = j == i + 1 ? d : c;
                if (cross(shared, other_a, other_c) == 0.0) {
                    const double dot = (other_a.x - shared.x) * (other_c.x - shared.x) +
                                       (other_a.y - shared.y) * (other_c.y - shared.y);
                    if (dot > 0.0) return "ring folds back on itself";
                }
                continue;
            }
            if (segments_intersect(a, b, c, d)) return "ring self-intersects";
        }
    }
    return {};
}

bool polygon_contains(const Polygon& polygon, const Point& p) {
    if (polygon.exterior.size() < 4 || !ring_contains(polygon.exterior, p)) return false;
    for (const auto& h : polygon.holes) {
        if (h.size() >= 4 && ring_contains(h, p)) return false;
    }
    return true;
}

double point_segment_distance(const Point& p, const Point& a, const Point& b) {
    const double dx = b.x - a.x;
    const double dy = b.y - a.y;
    const double len2 = dx * dx + dy * dy;
    double t = 0.0;
    if (len2 > 0.0) t = std::clamp(((p.x - a.x) * dx + (p.y - a.y) * dy) / len2, 0.0, 1.0);
    const double qx = a.x + t * dx - p.x;
    const double qy = a.y + t * dy - p.y;
    return std::sqrt(qx * qx + qy * qy);
}

double shared_border_length(const Ring& a, const Ring& b, double tolerance) {
    double total = 0.0;
    for (std::size_t i = 0; i + 1 < a.size(); ++i) {
        const Point& p0 = a[i];
        const Point& p1 = a[i + 1];
        const double len = std::hypot(p1.x - p0.x, p1.y - p0.y);
        if (len == 0.0) continue;
        const double ux = (p1.x - p0.x) / len;
        const double uy = (p1.y - p0.y) / len;
        for (std::size_t j = 0; j + 1 < b.size(); ++j) {
            const Point& q0 = b[j];
            const Point& q1 = b[j + 1];
            const double off0 = std::abs((q0.x - p0.x) * uy - (q0.y - p0.y) * ux);
            const double off1 = std::abs((q1.x - p0.x) * uy - (q1.y - p0.y) * ux);
            if (off0 > tolerance || off1 > tolerance) continue;
            const double t0 = (q0.x - p0.x) * ux + (q0.y - p0.y) * uy;
            const double t1 = (q1.x - p0.x) * ux + (q1.y - p0.y) * uy;
            const double lo = std::max(0.0, std::min(t0, t1));
            const double hi = std::min(len, std::max(t0, t1));
            if (hi > lo) total += hi - lo;
        }
    }
    return total;
}

Bounds ring_bounds(const Ring& ring) {
    Bounds b{std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity(),
             -std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
    for (const auto& p : ring) {
        b.x0 = std::min(b.x0, p.x);
        b.y0 = std::min(b.y0, p.y);
        b.x1 = std::max(b.x1, p.x);
        b.y1 = std::max(b.y1, p.y);
    }
    return b;
}

}  // namespace fieldpipe
