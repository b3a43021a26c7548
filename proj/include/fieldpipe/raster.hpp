#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "fieldpipe/date.hpp"
#include "fieldpipe/grid.hpp"

namespace fieldpipe {

inline constexpr double kDefaultNodata = -9999.0;

/// On-disk sample encoding. In memory every band is float.
enum class SampleType { UInt8, UInt16, Int16, Float32 };

/// One 2-D array of samples, row-major.
class Band {
public:
    Band() = default;
    Band(int width, int height, float fill = 0.0f);
    Band(int width, int height, std::vector<float> values);

    int width() const { return width_; }
    int height() const { return height_; }
    std::size_t size() const { return values_.size(); }

    float at(int col, int row) const { return values_[index(col, row)]; }
    float& at(int col, int row) { return values_[index(col, row)]; }

    std::span<const float> values() const { return values_; }
    std::span<float> values() { return values_; }

    bool same_shape(const Band& other) const {
        return width_ == other.width_ && height_ == other.height_;
    }

    friend bool operator==(const Band&, const Band&) = default;

private:
    std::size_t index(int col, int row) const {
        return static_cast<std::size_t>(row) * static_cast<std::size_t>(width_) +
               static_cast<std::size_t>(col);
    }

    int width_ = 0;
    int height_ = 0;
    std::vector<float> values_;
};

inline bool is_nodata(float value, double nodata) { return value == static_cast<float>(nodata); }

/// Georeferenced multi-band raster. Invariants are checked on construction.
class Raster {
public:
    Raster(GridGeometry geometry, std::vector<Band> bands, std::vector<std::string> band_names,
           double nodata = kDefaultNodata, SampleType sample_type = SampleType::Float32);

    const GridGeometry& geometry() const { return geometry_; }
    const std::vector<Band>& bands() const { return bands_; }
    const Band& band(std::size_t i) const { return bands_.at(i); }
    const std::vector<std::string>& band_names() const { return band_names_; }
    double nodata() const { return nodata_; }
    SampleType sample_type() const { return sample_type_; }
    std::size_t band_count() const { return bands_.size(); }

    /// Index of the band named `name`, or -1.
    int find_band(const std::string& name) const;

    /// Per-band acquisition dates. Empty, or one entry per band.
    const std::vector<Date>& band_dates() const { return band_dates_; }
    Raster with_band_dates(std::vector<Date> dates) const;

    friend bool operator==(const Raster&, const Raster&) = default;

private:
    GridGeometry geometry_;
    std::vector<Band> bands_;
    std::vector<std::string> band_names_;
    std::vector<Date> band_dates_;
    double nodata_;
    SampleType sample_type_;
};

/// Default names "B1".."Bn" for files without band descriptions.
std::vector<std::string> default_band_names(std::size_t count);

}  // namespace fieldpipe
