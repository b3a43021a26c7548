#pragma once

#include <boost/geometry.hpp>
#include <boost/geometry/geometries/point_xy.hpp>

#include "fieldpipe/polygon.hpp"

namespace fieldpipe::detail {

namespace bg = boost::geometry;

using BgPoint = bg::model::d2::point_xy<double>;
using BgLine = bg::model::linestring<BgPoint>;
using BgMultiLine = bg::model::multi_linestring<BgLine>;
using BgPolygon = bg::model::polygon<BgPoint, /*ClockWise=*/false, /*Closed=*/true>;
using BgMultiPolygon = bg::model::multi_polygon<BgPolygon>;

inline BgPolygon to_bg(const Polygon& p) {
    BgPolygon out;
    for (const auto& v : p.exterior) out.outer().emplace_back(v.x, v.y);
    for (const auto& h : p.holes) {
        out.inners().emplace_back();
        for (const auto& v : h) out.inners().back().emplace_back(v.x, v.y);
    }
    bg::correct(out);
    return out;
}

inline Ring from_bg_ring(const BgPolygon::ring_type& r) {
    Ring out;
    out.reserve(r.size());
    for (const auto& v : r) out.push_back({v.x(), v.y()});
    return out;
}

inline Polygon from_bg(const BgPolygon& p) {
    Polygon out;
    out.exterior = from_bg_ring(p.outer());
    for (const auto& h : p.inners()) out.holes.push_back(from_bg_ring(h));
    return out;
}

}  // namespace fieldpipe::detail
