#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>

#include "fieldpipe/class_mask.hpp"
#include "fieldpipe/error.hpp"
#include "fieldpipe/grid.hpp"
#include "fieldpipe/raster.hpp"

namespace fieldpipe {

std::string_view to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::Io: return "io";
        case ErrorKind::Format: return "format";
        case ErrorKind::Georeferencing: return "georeferencing";
        case ErrorKind::Dimension: return "dimension";
        case ErrorKind::Geometry: return "geometry";
        case ErrorKind::Contract: return "contract";
        case ErrorKind::Config: return "config";
        case ErrorKind::Schema: return "schema";
        case ErrorKind::MissingInput: return "missing-input";
        case ErrorKind::Empty: return "empty";
    }
    return "unknown";
}

// ---------------------------------------------------------------------------
// GridGeometry

void GridGeometry::validate() const {
    if (!(pixel_size > 0.0) || !std::isfinite(pixel_size)) {
        throw Error(ErrorKind::Contract, "grid pixel_size must be positive");
    }
    if (width < 1 || height < 1) {
        throw Error(ErrorKind::Contract, "grid dimensions must be at least 1x1");
    }
}

std::optional<PixelIndex> GridGeometry::pixel_at(double x, double y) const {
    const double fc = (x - origin_x) / pixel_size;
    const double fr = (origin_y - y) / pixel_size;
    if (fc < 0.0 || fr < 0.0) return std::nullopt;
    const auto col = static_cast<long long>(std::floor(fc));
    const auto row = static_cast<long long>(std::floor(fr));
    if (col >= width || row >= height) return std::nullopt;
    return PixelIndex{static_cast<int>(col), static_cast<int>(row)};
}

// ---------------------------------------------------------------------------
// Date

namespace {

bool is_leap(int y) { return (y % 4 == 0 && y % 100 != 0) || y % 400 == 0; }

int days_in_month(int y, int m) {
    static constexpr int kDays[] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
    return m == 2 && is_leap(y) ? 29 : kDays[m - 1];
}

}  // namespace

Date Date::parse(std::string_view text) {
    Date d;
    char tail = 0;
    const std::string s(text);
    if (s.size() != 10 || s[4] != '-' || s[7] != '-' ||
        std::sscanf(s.c_str(), "%4d-%2d-%2d%c", &d.year, &d.month, &d.day, &tail) != 3) {
        throw Error(ErrorKind::Contract, "malformed ISO-8601 date '" + s + "'");
    }
    if (d.month < 1 || d.month > 12 || d.day < 1 || d.day > days_in_month(d.year, d.month)) {
        throw Error(ErrorKind::Contract, "impossible calendar date '" + s + "'");
    }
    return d;
}

std::string Date::to_string() const {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02d-%02d", year, month, day);
    return buf;
}

// ---------------------------------------------------------------------------
// Band / Raster

Band::Band(int width, int height, float fill)
    : width_(width), height_(height),
      values_(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), fill) {}

Band::Band(int width, int height, std::vector<float> values)
    : width_(width), height_(height), values_(std::move(values)) {
    if (values_.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height)) {
        throw Error(ErrorKind::Dimension, "band sample count does not match width x height");
    }
}

Raster::Raster(GridGeometry geometry, std::vector<Band> bands, std::vector<std::string> band_names,
               double nodata, SampleType sample_type)
    : geometry_(geometry),
      bands_(std::move(bands)),
      band_names_(std::move(band_names)),
      nodata_(nodata),
      sample_type_(sample_type) {
    geometry_.validate();
    if (bands_.empty()) throw Error(ErrorKind::Contract, "raster needs at least one band");
    for (const auto& b : bands_) {
        if (b.width() != geometry_.width || b.height() != geometry_.height) {
            throw Error(ErrorKind::Dimension, "band dimensions differ from raster geometry");
        }
    }
    if (band_names_.size() != bands_.size()) {
        throw Error(ErrorKind::Contract, "band_names length must equal band count");
    }
    std::set<std::string> unique(band_names_.begin(), band_names_.end());
    if (unique.size() != band_names_.size()) {
        throw Error(ErrorKind::Contract, "band names must be unique");
    }
}

int Raster::find_band(const std::string& name) const {
    const auto it = std::find(band_names_.begin(), band_names_.end(), name);
    return it == band_names_.end() ? -1 : static_cast<int>(it - band_names_.begin());
}

Raster Raster::with_band_dates(std::vector<Date> dates) const {
    if (!dates.empty() && dates.size() != bands_.size()) {
        throw Error(ErrorKind::Contract, "band_dates length must equal band count");
    }
    Raster copy = *this;
    copy.band_dates_ = std::move(dates);
    return copy;
}

std::vector<std::string> default_band_names(std::size_t count) {
    std::vector<std::string> names;
    names.reserve(count);
    for (std::size_t i = 0; i < count; ++i) names.push_back("B" + std::to_string(i + 1));
    return names;
}

// ---------------------------------------------------------------------------
// ClassMask

ClassMask::ClassMask(GridGeometry geometry, std::uint8_t fill)
    : geometry_(geometry), codes_(geometry.pixel_count(), fill) {
    geometry_.validate();
    if (!is_valid_code(fill)) throw Error(ErrorKind::Contract, "invalid class code");
}

ClassMask::ClassMask(GridGeometry geometry, std::vector<std::uint8_t> codes)
    : geometry_(geometry), codes_(std::move(codes)) {
    geometry_.validate();
    if (codes_.size() != geometry_.pixel_count()) {
        throw Error(ErrorKind::Dimension, "mask code count does not match geometry");
    }
    for (auto c : codes_) {
        if (!is_valid_code(c)) {
            throw Error(ErrorKind::Contract, "invalid class code " + std::to_string(c));
        }
    }
}

void ClassMask::set(int col, int row, std::uint8_t code) {
    if (!is_valid_code(code)) throw Error(ErrorKind::Contract, "invalid class code");
    codes_[index(col, row)] = code;
}

std::vector<std::size_t> ClassMask::code_counts() const {
    std::vector<std::size_t> counts(4, 0);
    for (auto c : codes_) counts[c == kMaskNodata ? 3 : c]++;
    return counts;
}

Raster ClassMask::to_raster() const {
    std::vector<float> values(codes_.begin(), codes_.end());
    std::vector<Band> bands;
    bands.emplace_back(geometry_.width, geometry_.height, std::move(values));
    return Raster(geometry_, std::move(bands), {"class"}, kMaskNodata, SampleType::UInt8);
}

ClassMask ClassMask::from_raster(const Raster& raster) {
    const Band& band = raster.band(0);
    std::vector<std::uint8_t> codes(band.size());
    auto values = band.values();
    for (std::size_t i = 0; i < values.size(); ++i) {
        const float v = values[i];
        if (is_nodata(v, raster.nodata())) {
            codes[i] = kMaskNodata;
            continue;
        }
        const float r = std::round(v);
        if (r != v || r < 0.0f || r > 255.0f || !is_valid_code(static_cast<std::uint8_t>(r))) {
            throw Error(ErrorKind::Contract, "raster value is not a class code");
        }
        codes[i] = static_cast<std::uint8_t>(r);
    }
    return ClassMask(raster.geometry(), std::move(codes));
}

}  // namespace fieldpipe
