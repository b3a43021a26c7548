#include "fieldpipe/label_mask.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <mutex>
#include <regex>
#include <set>
#include <unordered_set>

#include <json.hpp>

#include "boost_geometry.hpp"
#include "fieldpipe/error.hpp"
#include "parallel.hpp"

namespace fieldpipe {

namespace {

using nlohmann::json;

constexpr int kBufferPointsPerCircle = 64;

std::string property_text(const json& value) {
    if (value.is_string()) return value.get<std::string>();
    if (value.is_boolean()) return value.get<bool>() ? "true" : "false";
    return value.dump();
}

int parse_geojson_crs(const json& doc) {
    if (!doc.contains("crs") || !doc["crs"].is_object()) return 4326;
    const auto& props = doc["crs"].value("properties", json::object());
    const std::string name = props.value("name", std::string{});
    static const std::regex epsg(R"(EPSG:+(\d+))", std::regex::icase);
    std::smatch m;
    if (std::regex_search(name, m, epsg)) return std::stoi(m[1].str());
    if (name.find("CRS84") != std::string::npos) return 4326;
    throw Error(ErrorKind::Schema, "unrecognised GeoJSON crs '" + name + "'");
}

Ring parse_ring(const json& coords) {
    Ring ring;
    for (const auto& c : coords) {
        if (!c.is_array() || c.size() < 2) throw Error(ErrorKind::Schema, "bad coordinate");
        const Point p{c[0].get<double>(), c[1].get<double>()};
        if (!ring.empty() && ring.back() == p) continue;
        ring.push_back(p);
    }
    return ring;
}

Polygon parse_polygon(const json& rings) {
    if (!rings.is_array() || rings.empty()) throw Error(ErrorKind::Schema, "polygon without rings");
    Polygon poly;
    poly.exterior = parse_ring(rings[0]);
    for (std::size_t i = 1; i < rings.size(); ++i) poly.holes.push_back(parse_ring(rings[i]));
    return poly;
}

std::string polygon_problem(const Polygon& p) {
    if (auto why = ring_problem(p.exterior); !why.empty()) return "exterior " + why;
    for (const auto& h : p.holes) {
        if (auto why = ring_problem(h); !why.empty()) return "hole " + why;
    }
    return {};
}

struct Segment {
    Point a;
    Point b;
};

/// x-extent of {q : dist(q, segment) <= w} on the horizontal line at y.
bool capsule_row_interval(const Segment& s, double w, double y, double& lo, double& hi) {
    lo = std::numeric_limits<double>::infinity();
    hi = -lo;
    for (const Point& end : {s.a, s.b}) {
        const double dy = y - end.y;
        if (std::abs(dy) <= w) {
            const double half = std::sqrt(w * w - dy * dy);
            lo = std::min(lo, end.x - half);
            hi = std::max(hi, end.x + half);
        }
    }
    const double len = std::hypot(s.b.x - s.a.x, s.b.y - s.a.y);
    if (len > 0.0) {
        const double nx = -(s.b.y - s.a.y) / len * w;
        const double ny = (s.b.x - s.a.x) / len * w;
        const Point quad[4] = {{s.a.x + nx, s.a.y + ny},
                               {s.b.x + nx, s.b.y + ny},
                               {s.b.x - nx, s.b.y - ny},
                               {s.a.x - nx, s.a.y - ny}};
        for (int i = 0; i < 4; ++i) {
            const Point& p = quad[i];
            const Point& q = quad[(i + 1) % 4];
            if ((p.y - y) * (q.y - y) > 0.0) continue;
            if (p.y == q.y) {
                lo = std::min({lo, p.x, q.x});
                hi = std::max({hi, p.x, q.x});
            } else {
                const double x = p.x + (y - p.y) * (q.x - p.x) / (q.y - p.y);
                lo = std::min(lo, x);
                hi = std::max(hi, x);
            }
        }
    }
    return lo <= hi;
}

struct CropShape {
    std::int64_t id;
    std::vector<Segment> edges;
    double y_min;
    double y_max;
};

}  // namespace

bool CropRule::matches(const std::string& property_text) const {
    return std::find(values.begin(), values.end(), property_text) != values.end();
}

ParcelLoad load_parcels(const std::filesystem::path& path, const CropRule& rule) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::Io, path.string() + ": cannot open parcel file");
    if (in.peek() == std::ifstream::traits_type::eof()) {
        throw Error(ErrorKind::Empty, path.string() + ": empty parcel file");
    }
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::exception& e) {
        throw Error(ErrorKind::Schema, path.string() + ": malformed GeoJSON: " + e.what());
    }
    if (doc.value("type", std::string{}) != "FeatureCollection" || !doc.contains("features")) {
        throw Error(ErrorKind::Schema, path.string() + ": not a GeoJSON FeatureCollection");
    }
    const auto& features = doc["features"];
    if (features.empty()) throw Error(ErrorKind::Empty, path.string() + ": no features");

    ParcelLoad load;
    load.set.crs_code = parse_geojson_crs(doc);
    bool attribute_seen = false;
    std::unordered_set<std::int64_t> ids;

    for (std::size_t i = 0; i < features.size(); ++i) {
        const auto& f = features[i];
        const json props = f.contains("properties") && f["properties"].is_object()
                               ? f["properties"]
                               : json::object();
        std::int64_t id = static_cast<std::int64_t>(i) + 1;
        if (f.contains("id") && f["id"].is_number_integer()) {
            id = f["id"].get<std::int64_t>();
        } else if (props.contains("id") && props["id"].is_number_integer()) {
            id = props["id"].get<std::int64_t>();
        }

        Parcel parcel;
        parcel.id = id;
        if (props.contains(rule.attribute)) {
            attribute_seen = true;
            parcel.crop = rule.matches(property_text(props[rule.attribute]));
        }

        if (!ids.insert(id).second) {
            load.rejected.push_back({id, "duplicate id"});
            continue;
        }
        const json geometry = f.value("geometry", json());
        if (!geometry.is_object()) {
            load.rejected.push_back({id, "missing geometry"});
            continue;
        }
        const std::string type = geometry.value("type", std::string{});
        try {
            if (type == "Polygon") {
                parcel.parts.push_back(parse_polygon(geometry.at("coordinates")));
            } else if (type == "MultiPolygon") {
                for (const auto& part : geometry.at("coordinates")) {
                    parcel.parts.push_back(parse_polygon(part));
                }
            } else {
                load.rejected.push_back({id, "unsupported geometry type '" + type + "'"});
                continue;
            }
        } catch (const std::exception& e) {
            load.rejected.push_back({id, std::string("malformed coordinates: ") + e.what()});
            continue;
        }
        std::string problem;
        for (const auto& part : parcel.parts) {
            problem = polygon_problem(part);
            if (!problem.empty()) break;
        }
        if (parcel.parts.empty()) problem = "empty multipolygon";
        if (!problem.empty()) {
            load.rejected.push_back({id, problem});
            continue;
        }
        load.set.parcels.push_back(std::move(parcel));
    }

    if (!attribute_seen) {
        throw Error(ErrorKind::Contract,
                    path.string() + ": no feature carries attribute '" + rule.attribute + "'");
    }
    if (load.set.parcels.empty()) {
        throw Error(ErrorKind::Empty, path.string() + ": zero valid parcels");
    }
    return load;
}

void validate_parcels(const ParcelSet& parcels) {
    std::unordered_set<std::int64_t> ids;
    for (const auto& p : parcels.parcels) {
        if (!ids.insert(p.id).second) {
            throw Error(ErrorKind::Contract, "duplicate parcel id " + std::to_string(p.id));
        }
        for (const auto& part : p.parts) {
            if (auto why = polygon_problem(part); !why.empty()) {
                throw Error(ErrorKind::Contract, "parcel " + std::to_string(p.id) + ": " + why);
            }
        }
    }
}

std::vector<Polyline> polygons_to_boundaries(const ParcelSet& parcels) {
    std::vector<Polyline> lines;
    for (const auto& p : parcels.parcels) {
        if (!p.crop) continue;
        for (const auto& part : p.parts) {
            lines.push_back(part.exterior);
            for (const auto& h : part.holes) lines.push_back(h);
        }
    }
    return lines;
}

BoundaryBand::BoundaryBand(std::vector<Polyline> lines, double half_width)
    : lines_(std::move(lines)), half_width_(half_width) {
    if (!(half_width_ > 0.0)) {
        throw Error(ErrorKind::Contract, "buffer half_width must be positive");
    }
    namespace bg = boost::geometry;
    bg::strategy::buffer::distance_symmetric<double> distance(half_width_);
    bg::strategy::buffer::side_straight side;
    bg::strategy::buffer::join_round join(kBufferPointsPerCircle);
    bg::strategy::buffer::end_round end(kBufferPointsPerCircle);
    bg::strategy::buffer::point_circle circle(kBufferPointsPerCircle);
    // Buffering a multi-linestring whose closed rings share edges yields
    // garbage, so each outline is buffered alone and the pieces are unioned.
    detail::BgMultiPolygon result;
    for (const auto& line : lines_) {
        detail::BgLine l;
        for (const auto& p : line) l.emplace_back(p.x, p.y);
        if (l.size() < 2) continue;
        detail::BgMultiPolygon piece;
        bg::buffer(l, piece, distance, side, join, end, circle);
        if (result.empty()) {
            result = std::move(piece);
            continue;
        }
        detail::BgMultiPolygon merged;
        bg::union_(result, piece, merged);
        result = std::move(merged);
    }
    for (const auto& poly : result) polygons_.push_back(detail::from_bg(poly));
}

bool BoundaryBand::contains(const Point& p) const {
    for (const auto& line : lines_) {
        for (std::size_t i = 0; i + 1 < line.size(); ++i) {
            if (point_segment_distance(p, line[i], line[i + 1]) <= half_width_) return true;
        }
    }
    return false;
}

double BoundaryBand::area() const {
    double total = 0.0;
    for (const auto& p : polygons_) total += polygon_area(p);
    return total;
}

BoundaryBand buffer_boundaries(std::vector<Polyline> lines, double half_width) {
    return BoundaryBand(std::move(lines), half_width);
}

ClassMask build_class_mask(const ParcelSet& parcels, const GridGeometry& geometry, double half_width,
                           MaskDiagnostics* diagnostics, int jobs) {
    geometry.validate();
    if (!(half_width > 0.0)) throw Error(ErrorKind::Contract, "buffer half_width must be positive");
    if (!parcels.parcels.empty() && parcels.crs_code != geometry.crs_code) {
        throw Error(ErrorKind::Geometry, "parcel CRS EPSG:" + std::to_string(parcels.crs_code) +
                                             " differs from grid CRS EPSG:" +
                                             std::to_string(geometry.crs_code));
    }

    std::vector<CropShape> shapes;
    std::vector<Segment> band_segments;
    for (const auto& p : parcels.parcels) {
        if (!p.crop) continue;
        CropShape shape{p.id, {}, std::numeric_limits<double>::infinity(),
                        -std::numeric_limits<double>::infinity()};
        for (const auto& part : p.parts) {
            auto add_ring = [&](const Ring& ring) {
                for (std::size_t i = 0; i + 1 < ring.size(); ++i) {
                    shape.edges.push_back({ring[i], ring[i + 1]});
                    shape.y_min = std::min(shape.y_min, ring[i].y);
                    shape.y_max = std::max(shape.y_max, ring[i].y);
                }
            };
            add_ring(part.exterior);
            for (const auto& h : part.holes) add_ring(h);
        }
        band_segments.insert(band_segments.end(), shape.edges.begin(), shape.edges.end());
        shapes.push_back(std::move(shape));
    }

    const int width = geometry.width;
    const double ps = geometry.pixel_size;
    const double w = half_width;
    std::vector<std::uint8_t> codes(geometry.pixel_count(), kNonCrop);
    std::set<std::pair<std::int64_t, std::int64_t>> overlaps;
    std::mutex overlap_mutex;

    // Column of the first pixel center >= x, and of the last center <= x.
    auto first_col_at_or_after = [&](double x) {
        return static_cast<long long>(std::ceil((x - geometry.origin_x) / ps - 0.5));
    };
    auto last_col_at_or_before = [&](double x) {
        return static_cast<long long>(std::floor((x - geometry.origin_x) / ps - 0.5));
    };
    auto center_x = [&](long long c) { return geometry.origin_x + (static_cast<double>(c) + 0.5) * ps; };

    detail::parallel_chunks(geometry.height, jobs, [&](int row_begin, int row_end) {
        std::vector<std::uint8_t> band(static_cast<std::size_t>(width));
        std::vector<int> owner(static_cast<std::size_t>(width));
        std::vector<double> crossings;
        std::set<std::pair<std::int64_t, std::int64_t>> local_overlaps;

        for (int row = row_begin; row < row_end; ++row) {
            const double y = geometry.origin_y - (row + 0.5) * ps;
            std::fill(band.begin(), band.end(), 0);
            std::fill(owner.begin(), owner.end(), -1);

            for (const auto& s : band_segments) {
                if (y < std::min(s.a.y, s.b.y) - w || y > std::max(s.a.y, s.b.y) + w) continue;
                double lo = 0.0;
                double hi = 0.0;
                if (!capsule_row_interval(s, w, y, lo, hi)) continue;
                const long long c0 = first_col_at_or_after(lo);
                const long long c1 = last_col_at_or_before(hi);
                // Interval interior is certain; recheck the end columns exactly.
                for (long long c = std::max(0LL, c0 + 1); c <= std::min<long long>(width - 1, c1 - 1); ++c) {
                    band[static_cast<std::size_t>(c)] = 1;
                }
                for (long long c : {c0 - 1, c0, c1, c1 + 1}) {
                    if (c < 0 || c >= width) continue;
                    if (point_segment_distance({center_x(c), y}, s.a, s.b) <= w) {
                        band[static_cast<std::size_t>(c)] = 1;
                    }
                }
            }

            for (std::size_t k = 0; k < shapes.size(); ++k) {
                const auto& shape = shapes[k];
                if (y < shape.y_min || y > shape.y_max) continue;
                crossings.clear();
                for (const auto& e : shape.edges) {
                    if ((e.a.y > y) != (e.b.y > y)) {
                        crossings.push_back(e.a.x + (y - e.a.y) * (e.b.x - e.a.x) / (e.b.y - e.a.y));
                    }
                }
                std::sort(crossings.begin(), crossings.end());
                for (std::size_t i = 0; i + 1 < crossings.size(); i += 2) {
                    const long long c0 = std::max(0LL, first_col_at_or_after(crossings[i]));
                    long long c1 = last_col_at_or_before(crossings[i + 1]);
                    if (c1 >= 0 && center_x(c1) >= crossings[i + 1]) --c1;
                    c1 = std::min<long long>(width - 1, c1);
                    for (long long c = c0; c <= c1; ++c) {
                        auto& o = owner[static_cast<std::size_t>(c)];
                        if (o >= 0 && o != static_cast<int>(k) && !band[static_cast<std::size_t>(c)]) {
                            local_overlaps.emplace(std::min(shapes[o].id, shape.id),
                                                   std::max(shapes[o].id, shape.id));
                        }
                        o = static_cast<int>(k);
                    }
                }
            }

            std::uint8_t* out = codes.data() + static_cast<std::size_t>(row) * width;
            for (int c = 0; c < width; ++c) {
                if (band[static_cast<std::size_t>(c)]) {
                    out[c] = kBoundary;
                } else if (owner[static_cast<std::size_t>(c)] >= 0) {
                    out[c] = kInterior;
                }
            }
        }
        std::lock_guard lock(overlap_mutex);
        overlaps.insert(local_overlaps.begin(), local_overlaps.end());
    });

    if (diagnostics) diagnostics->overlaps.assign(overlaps.begin(), overlaps.end());
    return ClassMask(geometry, std::move(codes));
}

}  // namespace fieldpipe
