#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace fieldpipe {

enum class ErrorKind {
    Io,              // missing file, unwritable path, short read
    Format,          // unreadable or unsupported encoding
    Georeferencing,  // raster lacks geotransform or CRS
    Dimension,       // band/raster/mask size disagreement
    Geometry,        // grid geometry or CRS mismatch between inputs
    Contract,        // precondition violated by the caller
    Config,          // pipeline configuration problem
    Schema,          // manifest/report schema mismatch or malformed document
    MissingInput,    // expected per-tile input not present
    Empty,           // an input set that must be non-empty is empty
};

std::string_view to_string(ErrorKind kind);

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

}  // namespace fieldpipe
