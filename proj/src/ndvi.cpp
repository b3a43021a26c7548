#include "fieldpipe/ndvi.hpp"

#include <algorithm>
#include <set>
#include <string>

#include "fieldpipe/error.hpp"

namespace fieldpipe {

Band compute_ndvi(const Band& red, const Band& nir, double nodata, double scale_divisor,
                  std::optional<double> output_nodata) {
    if (!red.same_shape(nir)) {
        throw Error(ErrorKind::Dimension, "red and NIR bands differ in size");
    }
    if (!(scale_divisor > 0.0)) throw Error(ErrorKind::Contract, "scale divisor must be positive");
    Band out(red.width(), red.height(), static_cast<float>(output_nodata.value_or(nodata)));
    auto r = red.values();
    auto n = nir.values();
    auto o = out.values();
    for (std::size_t i = 0; i < o.size(); ++i) {
        if (is_nodata(r[i], nodata) || is_nodata(n[i], nodata)) continue;
        const double red_v = r[i] / scale_divisor;
        const double nir_v = n[i] / scale_divisor;
        const double sum = nir_v + red_v;
        if (sum == 0.0) continue;
        o[i] = static_cast<float>(std::clamp((nir_v - red_v) / sum, -1.0, 1.0));
    }
    return out;
}

Band compute_ndvi(const Raster& scene, double scale_divisor) {
    const int red = scene.find_band("R");
    const int nir = scene.find_band("NIR");
    if (red < 0 || nir < 0) {
        throw Error(ErrorKind::Contract, "scene needs bands named R and NIR for NDVI");
    }
    return compute_ndvi(scene.band(red), scene.band(nir), scene.nodata(), scale_divisor);
}

Raster median_composite(std::span<const Raster> scenes) {
    if (scenes.empty()) throw Error(ErrorKind::Empty, "median composite of zero scenes");
    const Raster& first = scenes.front();
    for (const auto& s : scenes) {
        if (!(s.geometry() == first.geometry())) {
            throw Error(ErrorKind::Geometry, "composite scenes do not share one grid");
        }
        if (s.band_names() != first.band_names() || s.nodata() != first.nodata()) {
            throw Error(ErrorKind::Contract, "composite scenes differ in band layout or nodata");
        }
    }
    if (scenes.size() == 1) return first;

    const double nodata = first.nodata();
    std::vector<Band> out;
    out.reserve(first.band_count());
    std::vector<float> valid;
    valid.reserve(scenes.size());
    for (std::size_t b = 0; b < first.band_count(); ++b) {
        Band composite(first.geometry().width, first.geometry().height, static_cast<float>(nodata));
        auto dst = composite.values();
        for (std::size_t i = 0; i < dst.size(); ++i) {
            valid.clear();
            for (const auto& s : scenes) {
                const float v = s.band(b).values()[i];
                if (!is_nodata(v, nodata)) valid.push_back(v);
            }
            if (valid.empty()) continue;
            const std::size_t mid = valid.size() / 2;
            std::nth_element(valid.begin(), valid.begin() + mid, valid.end());
            double m = valid[mid];
            if (valid.size() % 2 == 0) {
                const float lower = *std::max_element(valid.begin(), valid.begin() + mid);
                m = (static_cast<double>(lower) + m) / 2.0;
            }
            dst[i] = static_cast<float>(m);
        }
        out.push_back(std::move(composite));
    }
    return Raster(first.geometry(), std::move(out), first.band_names(), nodata, first.sample_type())
        .with_band_dates(first.band_dates());
}

NdviStack stack_ndvi(std::vector<DatedBand> bands, const GridGeometry& geometry, double nodata) {
    if (bands.size() != 3) {
        throw Error(ErrorKind::Contract,
                    "NDVI stack needs exactly 3 dated bands, got " + std::to_string(bands.size()));
    }
    for (const auto& b : bands) {
        if (b.band.width() != geometry.width || b.band.height() != geometry.height) {
            throw Error(ErrorKind::Dimension, "NDVI band size differs from stack geometry");
        }
    }
    std::stable_sort(bands.begin(), bands.end(),
                     [](const DatedBand& a, const DatedBand& b) { return a.date < b.date; });
    for (std::size_t i = 1; i < bands.size(); ++i) {
        if (bands[i].date == bands[i - 1].date) {
            throw Error(ErrorKind::Contract, "duplicate NDVI date " + bands[i].date.to_string());
        }
    }
    const std::array<Date, 3> ordered{bands[0].date, bands[1].date, bands[2].date};
    std::vector<Band> out;
    std::vector<Date> dates;
    for (auto& b : bands) {
        out.push_back(std::move(b.band));
        dates.push_back(b.date);
    }
    return NdviStack{Raster(geometry, std::move(out), {"NDVI1", "NDVI2", "NDVI3"}, nodata)
                         .with_band_dates(std::move(dates)),
                     ordered};
}

Raster stack_bands(std::vector<DatedRaster> rasters) {
    if (rasters.size() != 3) {
        throw Error(ErrorKind::Contract, "band stack needs exactly 3 dated rasters");
    }
    const std::vector<std::string> layout(kSpectralBands.begin(), kSpectralBands.end());
    for (const auto& r : rasters) {
        if (r.raster.band_names() != layout) {
            throw Error(ErrorKind::Contract, "band stack inputs must carry bands R,G,B,NIR");
        }
        if (!(r.raster.geometry() == rasters.front().raster.geometry())) {
            throw Error(ErrorKind::Geometry, "band stack inputs do not share one grid");
        }
    }
    std::stable_sort(rasters.begin(), rasters.end(),
                     [](const DatedRaster& a, const DatedRaster& b) { return a.date < b.date; });
    for (std::size_t i = 1; i < rasters.size(); ++i) {
        if (rasters[i].date == rasters[i - 1].date) {
            throw Error(ErrorKind::Contract, "duplicate band stack date " + rasters[i].date.to_string());
        }
    }
    std::vector<Band> bands;
    std::vector<std::string> names;
    std::vector<Date> dates;
    for (std::size_t d = 0; d < rasters.size(); ++d) {
        for (std::size_t b = 0; b < layout.size(); ++b) {
            bands.push_back(rasters[d].raster.band(b));
            names.push_back(layout[b] + std::to_string(d + 1));
            dates.push_back(rasters[d].date);
        }
    }
    const Raster& first = rasters.front().raster;
    return Raster(first.geometry(), std::move(bands), std::move(names), first.nodata(),
                  first.sample_type())
        .with_band_dates(std::move(dates));
}

}  // namespace fieldpipe
