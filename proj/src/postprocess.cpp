#include "fieldpipe/postprocess.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <unordered_map>

#include <json.hpp>

#include "boost_geometry.hpp"
#include "fieldpipe/error.hpp"

namespace fieldpipe {

// ---------------------------------------------------------------------------
// Class decoding

ClassMask argmax_classes(const Raster& prediction) {
    if (prediction.band_count() != 3) {
        throw Error(ErrorKind::Contract, "prediction raster must have 3 probability bands");
    }
    const GridGeometry& g = prediction.geometry();
    std::vector<std::uint8_t> codes(g.pixel_count(), kMaskNodata);
    const auto b0 = prediction.band(0).values();
    const auto b1 = prediction.band(1).values();
    const auto b2 = prediction.band(2).values();
    const double nodata = prediction.nodata();
    for (std::size_t i = 0; i < codes.size(); ++i) {
        const float p[3] = {b0[i], b1[i], b2[i]};
        if (is_nodata(p[0], nodata) || is_nodata(p[1], nodata) || is_nodata(p[2], nodata)) continue;
        const double sum = static_cast<double>(p[0]) + p[1] + p[2];
        if (p[0] < 0.0f || p[1] < 0.0f || p[2] < 0.0f || std::abs(sum - 1.0) > kProbabilityTolerance) {
            throw Error(ErrorKind::Contract,
                        "pixel " + std::to_string(i % g.width) + "," + std::to_string(i / g.width) +
                            ": probabilities must be non-negative and sum to 1");
        }
        std::uint8_t best = 0;
        for (std::uint8_t k = 1; k < 3; ++k) {
            if (p[k] >= p[best]) best = k;
        }
        codes[i] = best;
    }
    return ClassMask(g, std::move(codes));
}

Raster one_hot(const ClassMask& mask) {
    const GridGeometry& g = mask.geometry();
    std::vector<Band> bands(3, Band(g.width, g.height, 0.0f));
    const auto codes = mask.codes();
    for (std::size_t i = 0; i < codes.size(); ++i) {
        if (codes[i] == kMaskNodata) {
            for (auto& b : bands) b.values()[i] = static_cast<float>(kDefaultNodata);
        } else {
            bands[codes[i]].values()[i] = 1.0f;
        }
    }
    return Raster(g, std::move(bands), {"P0", "P1", "P2"}, kDefaultNodata);
}

// ---------------------------------------------------------------------------
// Closing

namespace {

/// Summed-area table over a w x h 0/1 image.
class IntegralImage {
public:
    IntegralImage(const std::vector<std::uint8_t>& bits, int w, int h)
        : w_(w), sums_(static_cast<std::size_t>(w + 1) * (h + 1), 0) {
        for (int y = 0; y < h; ++y) {
            std::int64_t row = 0;
            for (int x = 0; x < w; ++x) {
                row += bits[static_cast<std::size_t>(y) * w + x];
                at(x + 1, y + 1) = at(x + 1, y) + row;
            }
        }
    }

    /// Sum over [x0, x1) x [y0, y1), clamped by the caller.
    std::int64_t sum(int x0, int y0, int x1, int y1) const {
        return get(x1, y1) - get(x0, y1) - get(x1, y0) + get(x0, y0);
    }

private:
    std::int64_t& at(int x, int y) { return sums_[static_cast<std::size_t>(y) * (w_ + 1) + x]; }
    std::int64_t get(int x, int y) const { return sums_[static_cast<std::size_t>(y) * (w_ + 1) + x]; }

    int w_;
    std::vector<std::int64_t> sums_;
};

}  // namespace

ClassMask close_boundary_gaps(const ClassMask& mask, int radius) {
    if (radius < 0) throw Error(ErrorKind::Contract, "closing radius must be >= 0");
    if (radius == 0) return mask;
    const int w = mask.width();
    const int h = mask.height();
    // Pad by the radius so the dilated set can spill past the edge and the
    // erosion never removes an original pixel.
    const int pw = w + 2 * radius;
    const int ph = h + 2 * radius;
    std::vector<std::uint8_t> set(static_cast<std::size_t>(pw) * ph, 0);
    for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) {
            set[static_cast<std::size_t>(r + radius) * pw + c + radius] = mask.at(c, r) == kBoundary;
        }
    }
    const IntegralImage original(set, pw, ph);
    std::vector<std::uint8_t> dilated(set.size(), 0);
    for (int y = 0; y < ph; ++y) {
        for (int x = 0; x < pw; ++x) {
            dilated[static_cast<std::size_t>(y) * pw + x] =
                original.sum(std::max(0, x - radius), std::max(0, y - radius),
                             std::min(pw, x + radius + 1), std::min(ph, y + radius + 1)) > 0;
        }
    }
    const IntegralImage grown(dilated, pw, ph);
    const std::int64_t full = static_cast<std::int64_t>(2 * radius + 1) * (2 * radius + 1);
    ClassMask out = mask;
    for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) {
            const std::uint8_t code = mask.at(c, r);
            if (code == kBoundary || code == kMaskNodata) continue;
            const int x = c + radius;
            const int y = r + radius;
            if (grown.sum(x - radius, y - radius, x + radius + 1, y + radius + 1) == full) {
                out.set(c, r, kBoundary);
            }
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Polygonization

namespace {

struct Vertex {
    int x;
    int y;
    friend bool operator==(const Vertex&, const Vertex&) = default;
};

struct Edge {
    Vertex from;
    Vertex to;
};

/// Links the directed pixel edges of one region into closed rings. At a
/// vertex with two outgoing edges the left turn (screen coordinates) is
/// taken, which keeps diagonally touching pixels of the region connected.
std::vector<std::vector<Vertex>> link_rings(const std::vector<Edge>& edges, int grid_w) {
    auto key = [grid_w](const Vertex& v) {
        return static_cast<std::int64_t>(v.y) * (grid_w + 1) + v.x;
    };
    std::unordered_map<std::int64_t, std::vector<std::size_t>> outgoing;
    outgoing.reserve(edges.size());
    for (std::size_t i = 0; i < edges.size(); ++i) outgoing[key(edges[i].from)].push_back(i);

    std::vector<char> used(edges.size(), 0);
    std::vector<std::vector<Vertex>> rings;
    for (std::size_t start = 0; start < edges.size(); ++start) {
        if (used[start]) continue;
        std::vector<Vertex> ring{edges[start].from};
        std::size_t current = start;
        used[current] = 1;
        while (true) {
            const Edge& e = edges[current];
            ring.push_back(e.to);
            const int dx1 = e.to.x - e.from.x;
            const int dy1 = e.to.y - e.from.y;
            std::size_t next = edges.size();
            for (std::size_t cand : outgoing[key(e.to)]) {
                if (used[cand] && cand != start) continue;
                if (next == edges.size()) {
                    next = cand;
                    continue;
                }
                const Edge& c = edges[cand];
                if (dx1 * (c.to.y - c.from.y) - dy1 * (c.to.x - c.from.x) < 0) next = cand;
            }
            if (next == start || next == edges.size()) break;
            used[next] = 1;
            current = next;
        }
        rings.push_back(std::move(ring));
    }
    return rings;
}

/// Drops vertices in the middle of straight runs. Input and output are closed.
std::vector<Vertex> drop_collinear(const std::vector<Vertex>& ring) {
    const std::size_t n = ring.size() - 1;
    std::vector<Vertex> out;
    for (std::size_t i = 0; i < n; ++i) {
        const Vertex& prev = ring[(i + n - 1) % n];
        const Vertex& cur = ring[i];
        const Vertex& next = ring[(i + 1) % n];
        const long cross = static_cast<long>(cur.x - prev.x) * (next.y - cur.y) -
                           static_cast<long>(cur.y - prev.y) * (next.x - cur.x);
        if (cross != 0) out.push_back(cur);
    }
    if (!out.empty()) out.push_back(out.front());
    return out;
}

}  // namespace

std::vector<FieldPolygon> polygonize_fields(const ClassMask& mask, int expand_px) {
    if (expand_px < 0) throw Error(ErrorKind::Contract, "expand_px must be >= 0");
    const int w = mask.width();
    const int h = mask.height();
    const auto idx = [w](int c, int r) { return static_cast<std::size_t>(r) * w + c; };

    // 4-connected components of code 1, numbered in row-major discovery order.
    std::vector<std::int32_t> label(static_cast<std::size_t>(w) * h, 0);
    std::vector<std::int64_t> component_px{0};
    std::vector<std::size_t> stack;
    std::int32_t next_label = 0;
    for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) {
            if (mask.at(c, r) != kInterior || label[idx(c, r)] != 0) continue;
            ++next_label;
            component_px.push_back(0);
            label[idx(c, r)] = next_label;
            stack.push_back(idx(c, r));
            while (!stack.empty()) {
                const std::size_t p = stack.back();
                stack.pop_back();
                component_px[next_label]++;
                const int pc = static_cast<int>(p % w);
                const int pr = static_cast<int>(p / w);
                const int nb[4][2] = {{pc + 1, pr}, {pc - 1, pr}, {pc, pr + 1}, {pc, pr - 1}};
                for (const auto& q : nb) {
                    if (q[0] < 0 || q[0] >= w || q[1] < 0 || q[1] >= h) continue;
                    const std::size_t qi = idx(q[0], q[1]);
                    if (label[qi] == 0 && mask.codes()[qi] == kInterior) {
                        label[qi] = next_label;
                        stack.push_back(qi);
                    }
                }
            }
        }
    }

    // Layered, component-fair growth into code-2 pixels (chessboard distance).
    constexpr std::int32_t kContested = -1;
    std::vector<std::size_t> frontier;
    for (std::size_t i = 0; i < label.size(); ++i) {
        if (label[i] > 0) frontier.push_back(i);
    }
    std::vector<std::int32_t> claim(label.size(), 0);
    std::vector<std::size_t> touched;
    for (int layer = 0; layer < expand_px && !frontier.empty(); ++layer) {
        touched.clear();
        for (std::size_t p : frontier) {
            const int pc = static_cast<int>(p % w);
            const int pr = static_cast<int>(p / w);
            for (int dr = -1; dr <= 1; ++dr) {
                for (int dc = -1; dc <= 1; ++dc) {
                    const int qc = pc + dc;
                    const int qr = pr + dr;
                    if ((dc == 0 && dr == 0) || qc < 0 || qc >= w || qr < 0 || qr >= h) continue;
                    const std::size_t q = idx(qc, qr);
                    if (label[q] != 0 || mask.codes()[q] != kBoundary) continue;
                    if (claim[q] == 0) {
                        claim[q] = label[p];
                        touched.push_back(q);
                    } else if (claim[q] != label[p]) {
                        claim[q] = kContested;
                    }
                }
            }
        }
        // Keep only claims 4-connected to their region so every region stays
        // 4-connected; the rest may be claimed again in a later layer.
        frontier.clear();
        std::vector<std::size_t> reach;
        for (std::size_t q : touched) {
            if (claim[q] <= 0) continue;
            const int qc = static_cast<int>(q % w);
            const int qr = static_cast<int>(q / w);
            const int nb[4][2] = {{qc + 1, qr}, {qc - 1, qr}, {qc, qr + 1}, {qc, qr - 1}};
            for (const auto& n : nb) {
                if (n[0] >= 0 && n[0] < w && n[1] >= 0 && n[1] < h && label[idx(n[0], n[1])] == claim[q]) {
                    reach.push_back(q);
                    break;
                }
            }
        }
        for (std::size_t q : reach) label[q] = claim[q];
        while (!reach.empty()) {
            const std::size_t q = reach.back();
            reach.pop_back();
            frontier.push_back(q);
            const int qc = static_cast<int>(q % w);
            const int qr = static_cast<int>(q / w);
            const int nb[4][2] = {{qc + 1, qr}, {qc - 1, qr}, {qc, qr + 1}, {qc, qr - 1}};
            for (const auto& n : nb) {
                if (n[0] < 0 || n[0] >= w || n[1] < 0 || n[1] >= h) continue;
                const std::size_t m = idx(n[0], n[1]);
                if (label[m] == 0 && claim[m] == label[q]) {
                    label[m] = claim[m];
                    reach.push_back(m);
                }
            }
        }
        for (std::size_t q : touched) {
            if (claim[q] == kContested) {
                label[q] = kContested;  // never claimed
            } else if (label[q] == 0) {
                claim[q] = 0;
            }
        }
    }

    // Directed pixel edges per region, region on the right in screen coordinates.
    std::vector<std::vector<Edge>> edges(static_cast<std::size_t>(next_label) + 1);
    auto region_at = [&](int c, int r) -> std::int32_t {
        if (c < 0 || c >= w || r < 0 || r >= h) return 0;
        return std::max(0, label[idx(c, r)]);
    };
    for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) {
            const std::int32_t l = region_at(c, r);
            if (l == 0) continue;
            auto& e = edges[static_cast<std::size_t>(l)];
            if (region_at(c, r - 1) != l) e.push_back({{c, r}, {c + 1, r}});
            if (region_at(c + 1, r) != l) e.push_back({{c + 1, r}, {c + 1, r + 1}});
            if (region_at(c, r + 1) != l) e.push_back({{c + 1, r + 1}, {c, r + 1}});
            if (region_at(c - 1, r) != l) e.push_back({{c, r + 1}, {c, r}});
        }
    }

    const GridGeometry& g = mask.geometry();
    std::vector<FieldPolygon> fields;
    fields.reserve(static_cast<std::size_t>(next_label));
    for (std::int32_t l = 1; l <= next_label; ++l) {
        std::vector<Ring> rings;
        for (const auto& pixel_ring : link_rings(edges[static_cast<std::size_t>(l)], w)) {
            if (pixel_ring.size() < 4 || !(pixel_ring.front() == pixel_ring.back())) continue;
            const auto corners = drop_collinear(pixel_ring);
            if (corners.size() < 4) continue;
            Ring ring;
            ring.reserve(corners.size());
            // Reverse: the traversal is clockwise in map coordinates.
            for (auto it = corners.rbegin(); it != corners.rend(); ++it) {
                ring.push_back({g.origin_x + it->x * g.pixel_size, g.origin_y - it->y * g.pixel_size});
            }
            rings.push_back(std::move(ring));
        }
        if (rings.empty()) continue;
        const auto outer = std::max_element(rings.begin(), rings.end(), [](const Ring& a, const Ring& b) {
            return signed_area(a) < signed_area(b);
        });
        FieldPolygon field;
        field.field_id = l;
        field.polygon.exterior = *outer;
        for (auto it = rings.begin(); it != rings.end(); ++it) {
            if (it != outer) field.polygon.holes.push_back(*it);
        }
        field.area_ha = polygon_area(field.polygon) / 1e4;
        field.source_component_px = component_px[static_cast<std::size_t>(l)];
        fields.push_back(std::move(field));
    }
    return fields;
}

// ---------------------------------------------------------------------------
// Simplification

namespace {

void douglas_peucker(const Ring& pts, std::size_t first, std::size_t last, double tolerance,
                     std::vector<char>& keep) {
    if (last <= first + 1) return;
    double max_d = -1.0;
    std::size_t max_i = first;
    for (std::size_t i = first + 1; i < last; ++i) {
        const double d = point_segment_distance(pts[i], pts[first], pts[last]);
        if (d > max_d) {
            max_d = d;
            max_i = i;
        }
    }
    if (max_d > tolerance) {
        keep[max_i] = 1;
        douglas_peucker(pts, first, max_i, tolerance, keep);
        douglas_peucker(pts, max_i, last, tolerance, keep);
    }
}

Ring simplify_ring_once(const Ring& ring, double tolerance) {
    // ring is closed; pts[n] == pts[0]
    const std::size_t n = ring.size() - 1;
    std::size_t far = 0;
    double far_d = -1.0;
    for (std::size_t i = 1; i < n; ++i) {
        const double d = std::hypot(ring[i].x - ring[0].x, ring[i].y - ring[0].y);
        if (d > far_d) {
            far_d = d;
            far = i;
        }
    }
    std::vector<char> keep(ring.size(), 0);
    keep[0] = keep[far] = keep[n] = 1;
    douglas_peucker(ring, 0, far, tolerance, keep);
    douglas_peucker(ring, far, n, tolerance, keep);
    Ring out;
    for (std::size_t i = 0; i <= n; ++i) {
        if (keep[i]) out.push_back(ring[i]);
    }
    return out;
}

Ring simplify_ring(const Ring& ring, double tolerance) {
    if (tolerance <= 0.0 || ring.size() <= 4) return ring;
    const Bounds b = ring_bounds(ring);
    const double floor = 1e-9 * std::max({1.0, b.x1 - b.x0, b.y1 - b.y0});
    for (double tol = tolerance; tol > floor; tol /= 2.0) {
        Ring candidate = simplify_ring_once(ring, tol);
        if (candidate.size() >= 4 && ring_problem(candidate).empty()) return candidate;
    }
    return ring;
}

}  // namespace

FieldPolygon simplify_polygon(const FieldPolygon& field, double tolerance) {
    if (tolerance < 0.0) throw Error(ErrorKind::Contract, "simplification tolerance must be >= 0");
    if (tolerance == 0.0) return field;
    FieldPolygon out = field;
    out.polygon.exterior = simplify_ring(field.polygon.exterior, tolerance);
    for (auto& h : out.polygon.holes) h = simplify_ring(h, tolerance);
    out.area_ha = polygon_area(out.polygon) / 1e4;
    return out;
}

// ---------------------------------------------------------------------------
// Fragment elimination

namespace {

constexpr double kBorderTolerance = 1e-6;

bool bounds_touch(const Bounds& a, const Bounds& b) {
    return a.x0 <= b.x1 + kBorderTolerance && b.x0 <= a.x1 + kBorderTolerance &&
           a.y0 <= b.y1 + kBorderTolerance && b.y0 <= a.y1 + kBorderTolerance;
}

double polygon_shared_border(const Polygon& a, const Polygon& b) {
    if (!bounds_touch(ring_bounds(a.exterior), ring_bounds(b.exterior))) return 0.0;
    double total = 0.0;
    auto rings_of = [](const Polygon& p) {
        std::vector<const Ring*> rings{&p.exterior};
        for (const auto& h : p.holes) rings.push_back(&h);
        return rings;
    };
    for (const Ring* ra : rings_of(a)) {
        for (const Ring* rb : rings_of(b)) total += shared_border_length(*ra, *rb, kBorderTolerance);
    }
    return total;
}

}  // namespace

EliminationResult eliminate_fragments(std::vector<FieldPolygon> fields, double min_area_ha) {
    if (min_area_ha < 0.0) throw Error(ErrorKind::Contract, "min_area_ha must be >= 0");
    namespace bg = boost::geometry;
    EliminationResult result;
    while (true) {
        std::size_t victim = fields.size();
        for (std::size_t i = 0; i < fields.size(); ++i) {
            if (fields[i].area_ha >= min_area_ha) continue;
            if (victim == fields.size() || fields[i].area_ha < fields[victim].area_ha ||
                (fields[i].area_ha == fields[victim].area_ha &&
                 fields[i].field_id < fields[victim].field_id)) {
                victim = i;
            }
        }
        if (victim == fields.size()) break;

        std::size_t target = fields.size();
        double best = 0.0;
        for (std::size_t j = 0; j < fields.size(); ++j) {
            if (j == victim) continue;
            const double shared = polygon_shared_border(fields[victim].polygon, fields[j].polygon);
            if (shared > best + kBorderTolerance ||
                (shared > kBorderTolerance && std::abs(shared - best) <= kBorderTolerance &&
                 target < fields.size() && fields[j].field_id < fields[target].field_id)) {
                best = shared;
                target = j;
            }
        }

        if (target == fields.size()) {
            result.dropped++;
            result.dropped_area_ha += fields[victim].area_ha;
            fields.erase(fields.begin() + static_cast<std::ptrdiff_t>(victim));
            continue;
        }

        detail::BgMultiPolygon merged;
        bg::union_(detail::to_bg(fields[target].polygon), detail::to_bg(fields[victim].polygon), merged);
        FieldPolygon& keep = fields[target];
        const double before = keep.area_ha + fields[victim].area_ha;
        if (!merged.empty()) {
            const auto largest = std::max_element(merged.begin(), merged.end(), [](const auto& a, const auto& b) {
                return bg::area(a) < bg::area(b);
            });
            keep.polygon = detail::from_bg(*largest);
            keep.area_ha = polygon_area(keep.polygon) / 1e4;
            if (merged.size() > 1) result.dropped_area_ha += before - keep.area_ha;
        }
        keep.source_component_px += fields[victim].source_component_px;
        result.merged++;
        fields.erase(fields.begin() + static_cast<std::ptrdiff_t>(victim));
    }
    result.fields = std::move(fields);
    return result;
}

// ---------------------------------------------------------------------------
// Statistics

FieldSizeStats field_stats_from_areas(std::vector<double> areas, const std::vector<double>& edges) {
    if (areas.empty()) throw Error(ErrorKind::Empty, "field statistics need at least one field");
    if (edges.empty()) throw Error(ErrorKind::Contract, "histogram needs at least one bin edge");
    for (std::size_t i = 1; i < edges.size(); ++i) {
        if (!(edges[i] > edges[i - 1])) {
            throw Error(ErrorKind::Contract, "histogram bin edges must be strictly increasing");
        }
    }
    FieldSizeStats stats;
    stats.count = areas.size();
    std::sort(areas.begin(), areas.end());
    const std::size_t mid = areas.size() / 2;
    stats.median_ha = areas.size() % 2 ? areas[mid] : (areas[mid - 1] + areas[mid]) / 2.0;
    stats.total_ha = std::accumulate(areas.begin(), areas.end(), 0.0);
    stats.mean_ha = stats.total_ha / static_cast<double>(areas.size());

    for (std::size_t i = 0; i < edges.size(); ++i) {
        const double upper =
            i + 1 < edges.size() ? edges[i + 1] : std::numeric_limits<double>::infinity();
        stats.histogram.push_back({edges[i], upper, 0, 0.0});
    }
    for (double a : areas) {
        // Areas below the first edge fall into the first bin.
        auto it = std::upper_bound(edges.begin(), edges.end(), a);
        const std::size_t bin = it == edges.begin() ? 0 : static_cast<std::size_t>(it - edges.begin()) - 1;
        stats.histogram[bin].count++;
    }
    for (auto& bin : stats.histogram) {
        bin.percent = 100.0 * static_cast<double>(bin.count) / static_cast<double>(stats.count);
    }
    return stats;
}

FieldSizeStats field_stats(const std::vector<FieldPolygon>& fields, const std::vector<double>& edges) {
    std::vector<double> areas;
    areas.reserve(fields.size());
    for (const auto& f : fields) areas.push_back(f.area_ha);
    return field_stats_from_areas(std::move(areas), edges);
}

// ---------------------------------------------------------------------------
// Pipeline

PostprocessParams default_postprocess_params(double pixel_size, double half_width) {
    PostprocessParams p;
    p.close_radius = 1;
    p.expand_px = static_cast<int>(std::ceil(half_width / pixel_size - 1e-9));
    p.simplify_tolerance = pixel_size;
    p.min_area_ha = pixel_size <= 5.0 ? 0.05 : 0.5;
    return p;
}

PostprocessResult run_postprocess(const Raster& prediction, const PostprocessParams& params) {
    PostprocessResult result{argmax_classes(prediction), {}, 0, 0, 0};
    result.classes = close_boundary_gaps(result.classes, params.close_radius);
    auto fields = polygonize_fields(result.classes, params.expand_px);
    result.components = fields.size();
    for (auto& f : fields) f = simplify_polygon(f, params.simplify_tolerance);
    auto eliminated = eliminate_fragments(std::move(fields), params.min_area_ha);
    result.fields = std::move(eliminated.fields);
    result.merged = eliminated.merged;
    result.dropped = eliminated.dropped;
    return result;
}

// ---------------------------------------------------------------------------
// Serialization

namespace {

nlohmann::json ring_to_json(const Ring& ring) {
    nlohmann::json coords = nlohmann::json::array();
    for (const auto& p : ring) coords.push_back({p.x, p.y});
    return coords;
}

Ring ring_from_json(const nlohmann::json& coords) {
    Ring ring;
    for (const auto& c : coords) ring.push_back({c.at(0).get<double>(), c.at(1).get<double>()});
    return ring;
}

}  // namespace

std::string fields_to_geojson(const std::vector<FieldPolygon>& fields, int crs_code) {
    using nlohmann::json;
    json doc;
    doc["type"] = "FeatureCollection";
    doc["crs"] = {{"type", "name"},
                  {"properties", {{"name", "urn:ogc:def:crs:EPSG::" + std::to_string(crs_code)}}}};
    json features = json::array();
    for (const auto& f : fields) {
        json rings = json::array();
        rings.push_back(ring_to_json(f.polygon.exterior));
        for (const auto& h : f.polygon.holes) rings.push_back(ring_to_json(h));
        features.push_back({{"type", "Feature"},
                            {"id", f.field_id},
                            {"properties", {{"field_id", f.field_id}, {"area_ha", f.area_ha}}},
                            {"geometry", {{"type", "Polygon"}, {"coordinates", std::move(rings)}}}});
    }
    doc["features"] = std::move(features);
    return doc.dump(2) + "\n";
}

std::vector<FieldPolygon> fields_from_geojson(const std::string& text) {
    using nlohmann::json;
    std::vector<FieldPolygon> fields;
    try {
        const json doc = json::parse(text);
        for (const auto& f : doc.at("features")) {
            FieldPolygon field;
            const auto& props = f.at("properties");
            field.field_id = props.value("field_id", static_cast<std::int64_t>(fields.size() + 1));
            const auto& rings = f.at("geometry").at("coordinates");
            field.polygon.exterior = ring_from_json(rings.at(0));
            for (std::size_t i = 1; i < rings.size(); ++i) field.polygon.holes.push_back(ring_from_json(rings[i]));
            field.area_ha = props.contains("area_ha") ? props["area_ha"].get<double>()
                                                      : polygon_area(field.polygon) / 1e4;
            fields.push_back(std::move(field));
        }
    } catch (const json::exception& e) {
        throw Error(ErrorKind::Schema, std::string("malformed field GeoJSON: ") + e.what());
    }
    return fields;
}

std::string stats_to_json(const FieldSizeStats& stats) {
    using nlohmann::json;
    json bins = json::array();
    for (const auto& b : stats.histogram) {
        bins.push_back({{"lower_ha", b.lower},
                        {"upper_ha", std::isinf(b.upper) ? json(nullptr) : json(b.upper)},
                        {"count", b.count},
                        {"percent", b.percent}});
    }
    json doc{{"count", stats.count},
             {"median_ha", stats.median_ha},
             {"mean_ha", stats.mean_ha},
             {"total_ha", stats.total_ha},
             {"histogram", std::move(bins)}};
    return doc.dump(2) + "\n";
}

std::string stats_to_svg(const FieldSizeStats& stats) {
    const int bar_w = 60;
    const int gap = 10;
    const int plot_h = 240;
    const int left = 50;
    const int top = 30;
    const int n = static_cast<int>(stats.histogram.size());
    const int width = left + n * (bar_w + gap) + gap;
    const int height = top + plot_h + 60;
    double max_pct = 0.0;
    for (const auto& b : stats.histogram) max_pct = std::max(max_pct, b.percent);
    if (max_pct <= 0.0) max_pct = 1.0;

    std::ostringstream os;
    os.setf(std::ios::fixed);
    os.precision(1);
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
       << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
    os << "<text x=\"" << left << "\" y=\"18\" font-size=\"13\">Field size distribution (n="
       << stats.count << ", median " << stats.median_ha << " ha)</text>\n";
    os << "<line x1=\"" << left << "\" y1=\"" << top + plot_h << "\" x2=\"" << width << "\" y2=\""
       << top + plot_h << "\" stroke=\"black\"/>\n";
    for (int i = 0; i < n; ++i) {
        const auto& b = stats.histogram[static_cast<std::size_t>(i)];
        const double bh = plot_h * b.percent / max_pct;
        const int x = left + gap + i * (bar_w + gap);
        os << "<rect x=\"" << x << "\" y=\"" << top + plot_h - bh << "\" width=\"" << bar_w
           << "\" height=\"" << bh << "\" fill=\"#4a7f3a\"/>\n";
        os << "<text x=\"" << x + bar_w / 2 << "\" y=\"" << top + plot_h - bh - 4
           << "\" text-anchor=\"middle\">" << b.percent << "%</text>\n";
        std::ostringstream label;
        label << b.lower << (std::isinf(b.upper) ? "+" : "-");
        if (!std::isinf(b.upper)) label << b.upper;
        os << "<text x=\"" << x + bar_w / 2 << "\" y=\"" << top + plot_h + 16
           << "\" text-anchor=\"middle\">" << label.str() << "</text>\n";
    }
    os << "<text x=\"" << width / 2 << "\" y=\"" << height - 12
       << "\" text-anchor=\"middle\">field size (ha)</text>\n";
    os << "</svg>\n";
    return os.str();
}

}  // namespace fieldpipe
