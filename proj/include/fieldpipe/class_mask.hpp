#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "fieldpipe/grid.hpp"
#include "fieldpipe/raster.hpp"

namespace fieldpipe {

inline constexpr std::uint8_t kNonCrop = 0;
inline constexpr std::uint8_t kInterior = 1;
inline constexpr std::uint8_t kBoundary = 2;
inline constexpr std::uint8_t kMaskNodata = 255;
inline constexpr int kClassCount = 3;

/// Single-band label raster with codes {0, 1, 2} and 255 for undefined pixels.
class ClassMask {
public:
    explicit ClassMask(GridGeometry geometry, std::uint8_t fill = kNonCrop);
    /// Throws Error(Contract) on a code outside {0,1,2,255} or a size mismatch.
    ClassMask(GridGeometry geometry, std::vector<std::uint8_t> codes);

    const GridGeometry& geometry() const { return geometry_; }
    int width() const { return geometry_.width; }
    int height() const { return geometry_.height; }

    std::uint8_t at(int col, int row) const { return codes_[index(col, row)]; }
    void set(int col, int row, std::uint8_t code);

    std::span<const std::uint8_t> codes() const { return codes_; }

    /// Histogram of codes 0, 1, 2 and 255 (in that order).
    std::vector<std::size_t> code_counts() const;

    /// Single UInt8 band named "class", nodata 255.
    Raster to_raster() const;
    /// Rounds band 0 to integer codes; throws Error(Contract) on invalid codes.
    static ClassMask from_raster(const Raster& raster);

    friend bool operator==(const ClassMask&, const ClassMask&) = default;

private:
    std::size_t index(int col, int row) const {
        return static_cast<std::size_t>(row) * static_cast<std::size_t>(geometry_.width) +
               static_cast<std::size_t>(col);
    }

    GridGeometry geometry_;
    std::vector<std::uint8_t> codes_;
};

inline bool is_valid_code(std::uint8_t code) {
    return code <= kBoundary || code == kMaskNodata;
}

}  // namespace fieldpipe
