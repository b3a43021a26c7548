#include "fieldpipe/geotiff.hpp"

#include <tiffio.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <memory>
#include <mutex>
#include <regex>
#include <sstream>

#include <json.hpp>

#include "fieldpipe/error.hpp"

namespace fieldpipe {

namespace {

constexpr ttag_t kModelPixelScaleTag = 33550;
constexpr ttag_t kModelTiepointTag = 33922;
constexpr ttag_t kModelTransformationTag = 34264;
constexpr ttag_t kGeoKeyDirectoryTag = 34735;
constexpr ttag_t kGdalMetadataTag = 42112;
constexpr ttag_t kGdalNodataTag = 42113;

constexpr std::uint16_t kGTModelTypeKey = 1024;
constexpr std::uint16_t kGTRasterTypeKey = 1025;
constexpr std::uint16_t kGeographicTypeKey = 2048;
constexpr std::uint16_t kProjectedCSTypeKey = 3072;
constexpr std::uint16_t kUserDefined = 32767;

const TIFFFieldInfo kGeoFieldInfo[] = {
    {kModelPixelScaleTag, -1, -1, TIFF_DOUBLE, FIELD_CUSTOM, 1, 1,
     const_cast<char*>("ModelPixelScaleTag")},
    {kModelTiepointTag, -1, -1, TIFF_DOUBLE, FIELD_CUSTOM, 1, 1,
     const_cast<char*>("ModelTiepointTag")},
    {kModelTransformationTag, -1, -1, TIFF_DOUBLE, FIELD_CUSTOM, 1, 1,
     const_cast<char*>("ModelTransformationTag")},
    {kGeoKeyDirectoryTag, -1, -1, TIFF_SHORT, FIELD_CUSTOM, 1, 1,
     const_cast<char*>("GeoKeyDirectoryTag")},
    {kGdalMetadataTag, -1, -1, TIFF_ASCII, FIELD_CUSTOM, 1, 0, const_cast<char*>("GDALMetadata")},
    {kGdalNodataTag, -1, -1, TIFF_ASCII, FIELD_CUSTOM, 1, 0, const_cast<char*>("GDALNoDataValue")},
};

TIFFExtendProc g_parent_extender = nullptr;
thread_local std::string g_last_tiff_error;

void geo_tag_extender(TIFF* tif) {
    TIFFMergeFieldInfo(tif, kGeoFieldInfo, sizeof(kGeoFieldInfo) / sizeof(kGeoFieldInfo[0]));
    if (g_parent_extender) g_parent_extender(tif);
}

void tiff_error_handler(const char* module, const char* fmt, va_list ap) {
    char buf[512];
    std::vsnprintf(buf, sizeof buf, fmt, ap);
    g_last_tiff_error = std::string(module ? module : "libtiff") + ": " + buf;
}

void install_libtiff_hooks() {
    static std::once_flag once;
    std::call_once(once, [] {
        g_parent_extender = TIFFSetTagExtender(geo_tag_extender);
        TIFFSetErrorHandler(tiff_error_handler);
        TIFFSetWarningHandler(nullptr);
    });
}

struct TiffCloser {
    void operator()(TIFF* tif) const {
        if (tif) TIFFClose(tif);
    }
};
using TiffHandle = std::unique_ptr<TIFF, TiffCloser>;

std::string tiff_error(const std::string& context) {
    std::string msg = context;
    if (!g_last_tiff_error.empty()) msg += " (" + g_last_tiff_error + ")";
    g_last_tiff_error.clear();
    return msg;
}

bool is_geographic(int crs) { return crs >= 4000 && crs < 5000; }

std::string xml_escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

std::string xml_unescape(std::string s) {
    const std::pair<const char*, const char*> entities[] = {
        {"&lt;", "<"}, {"&gt;", ">"}, {"&quot;", "\""}, {"&apos;", "'"}, {"&amp;", "&"}};
    for (const auto& [from, to] : entities) {
        std::size_t pos = 0;
        while ((pos = s.find(from, pos)) != std::string::npos) {
            s.replace(pos, std::strlen(from), to);
            pos += std::strlen(to);
        }
    }
    return s;
}

std::string format_nodata(double nodata) {
    std::ostringstream os;
    os.precision(17);
    os << nodata;
    return os.str();
}

// Sample codecs ------------------------------------------------------------

struct SampleCodec {
    std::uint16_t bits;
    std::uint16_t format;
};

SampleCodec codec_for(SampleType type) {
    switch (type) {
        case SampleType::UInt8: return {8, SAMPLEFORMAT_UINT};
        case SampleType::UInt16: return {16, SAMPLEFORMAT_UINT};
        case SampleType::Int16: return {16, SAMPLEFORMAT_INT};
        case SampleType::Float32: return {32, SAMPLEFORMAT_IEEEFP};
    }
    return {32, SAMPLEFORMAT_IEEEFP};
}

template <typename T>
T saturate(float v) {
    const double lo = static_cast<double>(std::numeric_limits<T>::lowest());
    const double hi = static_cast<double>(std::numeric_limits<T>::max());
    return static_cast<T>(std::clamp(std::round(static_cast<double>(v)), lo, hi));
}

void encode_samples(SampleType type, const float* src, std::size_t n, std::size_t src_stride,
                    unsigned char* dst) {
    for (std::size_t i = 0; i < n; ++i) {
        const float v = src[i * src_stride];
        switch (type) {
            case SampleType::UInt8: dst[i] = saturate<std::uint8_t>(v); break;
            case SampleType::UInt16: {
                const auto s = saturate<std::uint16_t>(v);
                std::memcpy(dst + 2 * i, &s, 2);
                break;
            }
            case SampleType::Int16: {
                const auto s = saturate<std::int16_t>(v);
                std::memcpy(dst + 2 * i, &s, 2);
                break;
            }
            case SampleType::Float32: std::memcpy(dst + 4 * i, &v, 4); break;
        }
    }
}

struct SourceLayout {
    std::uint16_t bits = 8;
    std::uint16_t format = SAMPLEFORMAT_UINT;

    std::size_t bytes() const { return bits / 8; }

    float decode(const unsigned char* p) const {
        switch (format) {
            case SAMPLEFORMAT_UINT:
                if (bits == 8) return static_cast<float>(*p);
                if (bits == 16) { std::uint16_t v; std::memcpy(&v, p, 2); return static_cast<float>(v); }
                if (bits == 32) { std::uint32_t v; std::memcpy(&v, p, 4); return static_cast<float>(v); }
                break;
            case SAMPLEFORMAT_INT:
                if (bits == 8) return static_cast<float>(static_cast<std::int8_t>(*p));
                if (bits == 16) { std::int16_t v; std::memcpy(&v, p, 2); return static_cast<float>(v); }
                if (bits == 32) { std::int32_t v; std::memcpy(&v, p, 4); return static_cast<float>(v); }
                break;
            case SAMPLEFORMAT_IEEEFP:
                if (bits == 32) { float v; std::memcpy(&v, p, 4); return v; }
                if (bits == 64) { double v; std::memcpy(&v, p, 8); return static_cast<float>(v); }
                break;
        }
        return 0.0f;
    }

    bool supported() const {
        if (format == SAMPLEFORMAT_UINT || format == SAMPLEFORMAT_INT) {
            return bits == 8 || bits == 16 || bits == 32;
        }
        if (format == SAMPLEFORMAT_IEEEFP) return bits == 32 || bits == 64;
        return false;
    }

    SampleType memory_type() const {
        if (format == SAMPLEFORMAT_UINT && bits == 8) return SampleType::UInt8;
        if (format == SAMPLEFORMAT_UINT && bits == 16) return SampleType::UInt16;
        if (format == SAMPLEFORMAT_INT && bits == 16) return SampleType::Int16;
        return SampleType::Float32;
    }
};

// Georeferencing ---------------------------------------------------------------

struct GeoInfo {
    double origin_x = 0.0;
    double origin_y = 0.0;
    double pixel_size = 0.0;
    int crs_code = 0;
};

GeoInfo read_georeferencing(TIFF* tif, const std::string& name) {
    std::uint16_t key_count = 0;
    std::uint16_t* keys = nullptr;
    if (!TIFFGetField(tif, kGeoKeyDirectoryTag, &key_count, &keys) || key_count < 4) {
        throw Error(ErrorKind::Georeferencing, name + ": no GeoKeyDirectory (coordinate system)");
    }
    int crs = -1;
    int raster_type = 1;
    const int n_keys = keys[3];
    for (int k = 0; k < n_keys && 4 * (k + 2) <= key_count; ++k) {
        const std::uint16_t* e = keys + 4 * (k + 1);
        if (e[1] != 0) continue;  // value stored in another tag
        if (e[0] == kProjectedCSTypeKey || e[0] == kGeographicTypeKey) {
            crs = e[3] == kUserDefined ? 0 : e[3];
        } else if (e[0] == kGTRasterTypeKey) {
            raster_type = e[3];
        }
    }
    if (crs < 0) throw Error(ErrorKind::Georeferencing, name + ": no CRS code in GeoKeyDirectory");

    GeoInfo info;
    info.crs_code = crs;
    std::uint16_t n = 0;
    double* values = nullptr;
    double sx = 0.0;
    double sy = 0.0;
    if (TIFFGetField(tif, kModelPixelScaleTag, &n, &values) && n >= 2) {
        sx = values[0];
        sy = values[1];
        double* tie = nullptr;
        std::uint16_t nt = 0;
        if (!TIFFGetField(tif, kModelTiepointTag, &nt, &tie) || nt < 6) {
            throw Error(ErrorKind::Georeferencing, name + ": pixel scale without tiepoint");
        }
        info.origin_x = tie[3] - tie[0] * sx;
        info.origin_y = tie[4] + tie[1] * sy;
    } else if (TIFFGetField(tif, kModelTransformationTag, &n, &values) && n >= 16) {
        if (values[1] != 0.0 || values[4] != 0.0) {
            throw Error(ErrorKind::Format, name + ": rotated geotransforms are not supported");
        }
        sx = values[0];
        sy = -values[5];
        info.origin_x = values[3];
        info.origin_y = values[7];
    } else {
        throw Error(ErrorKind::Georeferencing, name + ": no geotransform tags");
    }
    if (!(sx > 0.0) || std::abs(sx - sy) > 1e-9 * sx) {
        throw Error(ErrorKind::Format, name + ": only square north-up pixels are supported");
    }
    info.pixel_size = sx;
    if (raster_type == 2) {  // PixelIsPoint: tiepoint refers to the pixel center
        info.origin_x -= 0.5 * sx;
        info.origin_y += 0.5 * sx;
    }
    return info;
}

void write_georeferencing(TIFF* tif, const GridGeometry& g) {
    double scale[3] = {g.pixel_size, g.pixel_size, 0.0};
    double tie[6] = {0.0, 0.0, 0.0, g.origin_x, g.origin_y, 0.0};
    TIFFSetField(tif, kModelPixelScaleTag, 3, scale);
    TIFFSetField(tif, kModelTiepointTag, 6, tie);

    const bool geographic = is_geographic(g.crs_code);
    const auto crs = static_cast<std::uint16_t>(g.crs_code > 0 && g.crs_code < 65535 ? g.crs_code
                                                                                      : kUserDefined);
    std::uint16_t keys[] = {
        1, 1, 0, 3,
        kGTModelTypeKey, 0, 1, static_cast<std::uint16_t>(geographic ? 2 : 1),
        kGTRasterTypeKey, 0, 1, 1,
        static_cast<std::uint16_t>(geographic ? kGeographicTypeKey : kProjectedCSTypeKey), 0, 1, crs,
    };
    TIFFSetField(tif, kGeoKeyDirectoryTag, static_cast<std::uint16_t>(std::size(keys)), keys);
}

std::vector<std::string> parse_band_descriptions(const char* xml, std::size_t band_count) {
    std::vector<std::string> names(band_count);
    if (!xml) return names;
    static const std::regex item(
        R"re(<Item\s+name="DESCRIPTION"\s+sample="(\d+)"\s+role="description"\s*>([^<]*)</Item>)re");
    const std::string text(xml);
    for (auto it = std::sregex_iterator(text.begin(), text.end(), item); it != std::sregex_iterator();
         ++it) {
        const auto sample = std::stoul((*it)[1].str());
        if (sample < band_count) names[sample] = xml_unescape((*it)[2].str());
    }
    return names;
}

std::string band_description_xml(const std::vector<std::string>& names) {
    std::string xml = "<GDALMetadata>\n";
    for (std::size_t i = 0; i < names.size(); ++i) {
        xml += "  <Item name=\"DESCRIPTION\" sample=\"" + std::to_string(i) +
               "\" role=\"description\">" + xml_escape(names[i]) + "</Item>\n";
    }
    xml += "</GDALMetadata>";
    return xml;
}

struct Sidecar {
    std::vector<std::string> names;
    std::vector<Date> dates;
};

std::optional<Sidecar> read_sidecar(const std::filesystem::path& raster_path) {
    const auto path = sidecar_path(raster_path);
    std::ifstream in(path);
    if (!in) return std::nullopt;
    try {
        const auto doc = nlohmann::json::parse(in);
        Sidecar s;
        for (const auto& b : doc.at("bands")) {
            s.names.push_back(b.at("name").get<std::string>());
            if (b.contains("date") && !b["date"].is_null()) {
                s.dates.push_back(Date::parse(b["date"].get<std::string>()));
            }
        }
        if (!s.dates.empty() && s.dates.size() != s.names.size()) s.dates.clear();
        return s;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::Format, path.string() + ": malformed band sidecar: " + e.what());
    }
}

}  // namespace

std::filesystem::path sidecar_path(const std::filesystem::path& raster_path) {
    return raster_path.string() + ".bands.json";
}

Raster read_raster(const std::filesystem::path& path) {
    install_libtiff_hooks();
    const std::string name = path.string();
    if (!std::filesystem::exists(path)) throw Error(ErrorKind::MissingInput, name + ": no such file");
    TiffHandle tif(TIFFOpen(name.c_str(), "r"));
    if (!tif) throw Error(ErrorKind::Format, tiff_error(name + ": not a readable TIFF"));
    TIFF* t = tif.get();

    std::uint32_t width = 0;
    std::uint32_t height = 0;
    std::uint16_t spp = 1;
    std::uint16_t planar = PLANARCONFIG_CONTIG;
    SourceLayout layout;
    TIFFGetField(t, TIFFTAG_IMAGEWIDTH, &width);
    TIFFGetField(t, TIFFTAG_IMAGELENGTH, &height);
    TIFFGetFieldDefaulted(t, TIFFTAG_SAMPLESPERPIXEL, &spp);
    TIFFGetFieldDefaulted(t, TIFFTAG_PLANARCONFIG, &planar);
    TIFFGetFieldDefaulted(t, TIFFTAG_BITSPERSAMPLE, &layout.bits);
    TIFFGetFieldDefaulted(t, TIFFTAG_SAMPLEFORMAT, &layout.format);
    if (width == 0 || height == 0 || spp == 0) throw Error(ErrorKind::Format, name + ": empty image");
    if (!layout.supported()) {
        throw Error(ErrorKind::Format, name + ": unsupported sample encoding (" +
                                           std::to_string(layout.bits) + " bit, format " +
                                           std::to_string(layout.format) + ")");
    }

    const GeoInfo geo = read_georeferencing(t, name);
    GridGeometry geometry{geo.origin_x, geo.origin_y, geo.pixel_size, static_cast<int>(width),
                          static_cast<int>(height), geo.crs_code};

    std::vector<Band> bands(spp, Band(geometry.width, geometry.height));
    const std::size_t bps = layout.bytes();
    const bool separate = planar == PLANARCONFIG_SEPARATE;

    if (TIFFIsTiled(t)) {
        std::uint32_t tw = 0;
        std::uint32_t th = 0;
        TIFFGetField(t, TIFFTAG_TILEWIDTH, &tw);
        TIFFGetField(t, TIFFTAG_TILELENGTH, &th);
        std::vector<unsigned char> buf(static_cast<std::size_t>(TIFFTileSize(t)));
        const int planes = separate ? spp : 1;
        for (int plane = 0; plane < planes; ++plane) {
            for (std::uint32_t y = 0; y < height; y += th) {
                for (std::uint32_t x = 0; x < width; x += tw) {
                    if (TIFFReadTile(t, buf.data(), x, y, 0, static_cast<std::uint16_t>(plane)) < 0) {
                        throw Error(ErrorKind::Format, tiff_error(name + ": tile read failed"));
                    }
                    const std::uint32_t rows = std::min(th, height - y);
                    const std::uint32_t cols = std::min(tw, width - x);
                    for (std::uint32_t r = 0; r < rows; ++r) {
                        for (std::uint32_t c = 0; c < cols; ++c) {
                            if (separate) {
                                const unsigned char* p = buf.data() + (r * tw + c) * bps;
                                bands[plane].at(x + c, y + r) = layout.decode(p);
                            } else {
                                for (int s = 0; s < spp; ++s) {
                                    const unsigned char* p = buf.data() + ((r * tw + c) * spp + s) * bps;
                                    bands[s].at(x + c, y + r) = layout.decode(p);
                                }
                            }
                        }
                    }
                }
            }
        }
    } else {
        std::vector<unsigned char> buf(static_cast<std::size_t>(TIFFScanlineSize(t)));
        const int planes = separate ? spp : 1;
        for (int plane = 0; plane < planes; ++plane) {
            for (std::uint32_t r = 0; r < height; ++r) {
                if (TIFFReadScanline(t, buf.data(), r, static_cast<std::uint16_t>(plane)) < 0) {
                    throw Error(ErrorKind::Format, tiff_error(name + ": scanline read failed"));
                }
                for (std::uint32_t c = 0; c < width; ++c) {
                    if (separate) {
                        bands[plane].at(c, r) = layout.decode(buf.data() + c * bps);
                    } else {
                        for (int s = 0; s < spp; ++s) {
                            bands[s].at(c, r) = layout.decode(buf.data() + (c * spp + s) * bps);
                        }
                    }
                }
            }
        }
    }

    double nodata = kDefaultNodata;
    char* nodata_text = nullptr;
    if (TIFFGetField(t, kGdalNodataTag, &nodata_text) && nodata_text) {
        nodata = std::strtod(nodata_text, nullptr);
    }

    char* xml = nullptr;
    TIFFGetField(t, kGdalMetadataTag, &xml);
    std::vector<std::string> names = parse_band_descriptions(xml, spp);
    std::vector<Date> dates;
    if (auto side = read_sidecar(path); side && side->names.size() == spp) {
        for (std::size_t i = 0; i < spp; ++i) {
            if (names[i].empty()) names[i] = side->names[i];
        }
        dates = side->dates;
    }
    const auto fallback = default_band_names(spp);
    for (std::size_t i = 0; i < spp; ++i) {
        if (names[i].empty()) names[i] = fallback[i];
    }

    Raster raster(geometry, std::move(bands), std::move(names), nodata, layout.memory_type());
    return dates.empty() ? raster : raster.with_band_dates(std::move(dates));
}

void write_raster(const Raster& raster, const std::filesystem::path& path,
                  const WriteOptions& options) {
    install_libtiff_hooks();
    const std::string name = path.string();
    const GridGeometry& g = raster.geometry();
    const auto spp = static_cast<std::uint16_t>(raster.band_count());
    const SampleCodec codec = codec_for(raster.sample_type());
    const std::size_t bps = codec.bits / 8;

    {
        TiffHandle tif(TIFFOpen(name.c_str(), "w"));
        if (!tif) throw Error(ErrorKind::Io, tiff_error(name + ": cannot open for writing"));
        TIFF* t = tif.get();

        TIFFSetField(t, TIFFTAG_IMAGEWIDTH, static_cast<std::uint32_t>(g.width));
        TIFFSetField(t, TIFFTAG_IMAGELENGTH, static_cast<std::uint32_t>(g.height));
        TIFFSetField(t, TIFFTAG_SAMPLESPERPIXEL, spp);
        TIFFSetField(t, TIFFTAG_BITSPERSAMPLE, codec.bits);
        TIFFSetField(t, TIFFTAG_SAMPLEFORMAT, codec.format);
        TIFFSetField(t, TIFFTAG_PLANARCONFIG, PLANARCONFIG_SEPARATE);
        TIFFSetField(t, TIFFTAG_PHOTOMETRIC, PHOTOMETRIC_MINISBLACK);
        if (spp > 1) {
            std::vector<std::uint16_t> extra(spp - 1, EXTRASAMPLE_UNSPECIFIED);
            TIFFSetField(t, TIFFTAG_EXTRASAMPLES, static_cast<std::uint16_t>(extra.size()),
                         extra.data());
        }
        const bool deflate = options.compress && TIFFIsCODECConfigured(COMPRESSION_ADOBE_DEFLATE);
        TIFFSetField(t, TIFFTAG_COMPRESSION, deflate ? COMPRESSION_ADOBE_DEFLATE : COMPRESSION_NONE);

        write_georeferencing(t, g);
        TIFFSetField(t, kGdalNodataTag, format_nodata(raster.nodata()).c_str());
        TIFFSetField(t, kGdalMetadataTag, band_description_xml(raster.band_names()).c_str());

        if (options.layout == TiffLayout::Tiles) {
            const int block = std::max(16, options.block_size / 16 * 16);
            TIFFSetField(t, TIFFTAG_TILEWIDTH, static_cast<std::uint32_t>(block));
            TIFFSetField(t, TIFFTAG_TILELENGTH, static_cast<std::uint32_t>(block));
            std::vector<unsigned char> buf(static_cast<std::size_t>(block) * block * bps);
            for (std::uint16_t s = 0; s < spp; ++s) {
                const Band& band = raster.band(s);
                for (int y = 0; y < g.height; y += block) {
                    for (int x = 0; x < g.width; x += block) {
                        std::fill(buf.begin(), buf.end(), 0);
                        const int rows = std::min(block, g.height - y);
                        const int cols = std::min(block, g.width - x);
                        for (int r = 0; r < rows; ++r) {
                            const float* src = &band.values()[static_cast<std::size_t>(y + r) * g.width + x];
                            encode_samples(raster.sample_type(), src, cols, 1,
                                           buf.data() + static_cast<std::size_t>(r) * block * bps);
                        }
                        if (TIFFWriteTile(t, buf.data(), x, y, 0, s) < 0) {
                            throw Error(ErrorKind::Io, tiff_error(name + ": tile write failed"));
                        }
                    }
                }
            }
        } else {
            TIFFSetField(t, TIFFTAG_ROWSPERSTRIP, TIFFDefaultStripSize(t, 0));
            std::vector<unsigned char> buf(static_cast<std::size_t>(g.width) * bps);
            for (std::uint16_t s = 0; s < spp; ++s) {
                const Band& band = raster.band(s);
                for (int r = 0; r < g.height; ++r) {
                    encode_samples(raster.sample_type(),
                                   &band.values()[static_cast<std::size_t>(r) * g.width], g.width, 1,
                                   buf.data());
                    if (TIFFWriteScanline(t, buf.data(), static_cast<std::uint32_t>(r), s) < 0) {
                        throw Error(ErrorKind::Io, tiff_error(name + ": scanline write failed"));
                    }
                }
            }
        }
        if (!TIFFWriteDirectory(t)) throw Error(ErrorKind::Io, tiff_error(name + ": write failed"));
    }

    const auto side = sidecar_path(path);
    if (raster.band_dates().empty()) {
        std::error_code ec;
        std::filesystem::remove(side, ec);
        return;
    }
    nlohmann::json doc;
    doc["bands"] = nlohmann::json::array();
    for (std::size_t i = 0; i < raster.band_count(); ++i) {
        doc["bands"].push_back(
            {{"name", raster.band_names()[i]}, {"date", raster.band_dates()[i].to_string()}});
    }
    std::ofstream out(side);
    if (!out) throw Error(ErrorKind::Io, side.string() + ": cannot open for writing");
    out << doc.dump(2) << '\n';
    if (!out) throw Error(ErrorKind::Io, side.string() + ": write failed");
}

}  // namespace fieldpipe
