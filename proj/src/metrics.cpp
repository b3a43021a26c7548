#include "fieldpipe/metrics.hpp"

#include <cstdio>
#include <sstream>

#include <json.hpp>

#include "fieldpipe/error.hpp"
#include "fieldpipe/geotiff.hpp"
#include "fieldpipe/postprocess.hpp"

namespace fieldpipe {

ConfusionCounts& ConfusionCounts::operator+=(const ConfusionCounts& other) {
    for (int k = 0; k < kClassCount; ++k) {
        classes[k].tp += other.classes[k].tp;
        classes[k].fp += other.classes[k].fp;
        classes[k].fn += other.classes[k].fn;
        classes[k].tn += other.classes[k].tn;
    }
    valid_pixels += other.valid_pixels;
    return *this;
}

ConfusionCounts accumulate_confusion(std::span<const std::uint8_t> pred,
                                     std::span<const std::uint8_t> truth, ConfusionCounts counts) {
    if (pred.size() != truth.size()) {
        throw Error(ErrorKind::Dimension, "prediction and truth masks differ in size");
    }
    // joint[p][t] over valid pixels, then expand to per-class counts.
    std::uint64_t joint[kClassCount][kClassCount] = {};
    std::uint64_t valid = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const std::uint8_t p = pred[i];
        const std::uint8_t t = truth[i];
        if (p == kMaskNodata || t == kMaskNodata) continue;
        if (p > kBoundary || t > kBoundary) {
            throw Error(ErrorKind::Contract, "mask holds a code outside {0,1,2,255}");
        }
        joint[p][t]++;
        valid++;
    }
    for (int k = 0; k < kClassCount; ++k) {
        std::uint64_t pred_k = 0;
        std::uint64_t truth_k = 0;
        for (int o = 0; o < kClassCount; ++o) {
            pred_k += joint[k][o];
            truth_k += joint[o][k];
        }
        const std::uint64_t tp = joint[k][k];
        auto& c = counts.classes[k];
        c.tp += tp;
        c.fp += pred_k - tp;
        c.fn += truth_k - tp;
        c.tn += valid - pred_k - truth_k + tp;
    }
    counts.valid_pixels += valid;
    return counts;
}

ConfusionCounts accumulate_confusion(const ClassMask& pred, const ClassMask& truth,
                                     ConfusionCounts counts) {
    if (!pred.geometry().same_shape(truth.geometry())) {
        throw Error(ErrorKind::Dimension, "prediction and truth masks differ in size");
    }
    return accumulate_confusion(pred.codes(), truth.codes(), counts);
}

std::optional<double> iou(const ConfusionCounts& counts, int class_code) {
    if (class_code < 0 || class_code >= kClassCount) {
        throw Error(ErrorKind::Contract, "unknown class code " + std::to_string(class_code));
    }
    const auto& c = counts.classes[class_code];
    const std::uint64_t denom = c.tp + c.fp + c.fn;
    if (denom == 0) return std::nullopt;
    return static_cast<double>(c.tp) / static_cast<double>(denom);
}

double mean_iou(const ConfusionCounts& counts) {
    double sum = 0.0;
    int defined = 0;
    for (int k = 0; k < kClassCount; ++k) {
        if (auto v = iou(counts, k)) {
            sum += *v;
            ++defined;
        }
    }
    if (defined == 0) throw Error(ErrorKind::Contract, "mean IoU undefined: no class present");
    return sum / defined;
}

SplitFilter parse_split_filter(const std::string& text) {
    if (text == "all") return SplitFilter::All;
    if (text == "train") return SplitFilter::Train;
    if (text == "val") return SplitFilter::Val;
    if (text == "test") return SplitFilter::Test;
    throw Error(ErrorKind::Contract, "unknown split filter '" + text + "'");
}

namespace {

bool selected(SplitFilter filter, Split split) {
    switch (filter) {
        case SplitFilter::All: return true;
        case SplitFilter::Train: return split == Split::Train;
        case SplitFilter::Val: return split == Split::Val;
        case SplitFilter::Test: return split == Split::Test;
    }
    return true;
}

ClassMask load_prediction(const std::filesystem::path& path) {
    const Raster raster = read_raster(path);
    if (raster.band_count() == 3) return argmax_classes(raster);
    if (raster.band_count() == 1) return ClassMask::from_raster(raster);
    throw Error(ErrorKind::Format, path.string() + ": prediction must have 1 or 3 bands");
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
    const std::filesystem::path path(p);
    return path.is_absolute() ? path : base / path;
}

}  // namespace

IouReport evaluate_manifest(const TileManifest& manifest, const std::filesystem::path& base_dir,
                            const std::filesystem::path& predictions_dir, SplitFilter filter) {
    std::vector<const TileRecord*> tiles;
    std::vector<std::string> missing;
    for (const auto& r : manifest.records) {
        if (!selected(filter, r.split)) continue;
        tiles.push_back(&r);
        if (!std::filesystem::exists(predictions_dir / (r.tile_id + "_pred.tif"))) {
            missing.push_back(r.tile_id);
        }
    }
    if (!missing.empty()) {
        std::string list;
        for (const auto& id : missing) list += (list.empty() ? "" : ", ") + id;
        throw Error(ErrorKind::MissingInput,
                    std::to_string(missing.size()) + " prediction(s) missing: " + list);
    }
    if (tiles.empty()) throw Error(ErrorKind::Empty, "no tiles selected for evaluation");

    IouReport report;
    ConfusionCounts global;
    double tile_sum = 0.0;
    int tile_defined = 0;
    for (const TileRecord* r : tiles) {
        const ClassMask truth = ClassMask::from_raster(read_raster(resolve(base_dir, r->mask_path)));
        const ClassMask pred = load_prediction(predictions_dir / (r->tile_id + "_pred.tif"));
        if (!pred.geometry().same_shape(truth.geometry())) {
            throw Error(ErrorKind::Dimension, "tile " + r->tile_id + ": prediction is " +
                                                  std::to_string(pred.width()) + "x" +
                                                  std::to_string(pred.height()) + ", mask is " +
                                                  std::to_string(truth.width()) + "x" +
                                                  std::to_string(truth.height()));
        }
        const ConfusionCounts counts = accumulate_confusion(pred, truth);
        global += counts;
        TileIou t{r->tile_id, std::nullopt};
        if (counts.valid_pixels > 0) {
            t.mean_iou = mean_iou(counts);
            tile_sum += *t.mean_iou;
            ++tile_defined;
        }
        report.per_tile.push_back(std::move(t));
    }
    for (int k = 0; k < kClassCount; ++k) report.per_class_iou[k] = iou(global, k);
    report.mean_iou = mean_iou(global);
    if (tile_defined > 0) report.per_tile_mean_iou = tile_sum / tile_defined;
    report.valid_pixels = global.valid_pixels;
    return report;
}

std::string report_to_json(const IouReport& report) {
    using nlohmann::json;
    auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
    json doc;
    doc["per_class_iou"] = {{"0", opt(report.per_class_iou[0])},
                            {"1", opt(report.per_class_iou[1])},
                            {"2", opt(report.per_class_iou[2])}};
    doc["mean_iou"] = report.mean_iou;
    doc["per_tile_mean_iou"] = opt(report.per_tile_mean_iou);
    json tiles = json::array();
    for (const auto& t : report.per_tile) {
        tiles.push_back({{"tile_id", t.tile_id}, {"mean_iou", opt(t.mean_iou)}});
    }
    doc["per_tile"] = std::move(tiles);
    doc["valid_pixels"] = report.valid_pixels;
    return doc.dump(2) + "\n";
}

std::string report_to_table(const IouReport& report) {
    static const char* kNames[] = {"non-crop", "interior", "boundary"};
    std::ostringstream os;
    char line[128];
    os << "class        IoU\n";
    for (int k = 0; k < kClassCount; ++k) {
        if (report.per_class_iou[k]) {
            std::snprintf(line, sizeof line, "%d %-9s %7.4f\n", k, kNames[k], *report.per_class_iou[k]);
        } else {
            std::snprintf(line, sizeof line, "%d %-9s %7s\n", k, kNames[k], "n/a");
        }
        os << line;
    }
    std::snprintf(line, sizeof line, "mean (global counts)    %7.4f\n", report.mean_iou);
    os << line;
    if (report.per_tile_mean_iou) {
        std::snprintf(line, sizeof line, "mean (per-tile average) %7.4f\n", *report.per_tile_mean_iou);
        os << line;
    }
    os << "tiles: " << report.per_tile.size() << ", valid pixels: " << report.valid_pixels << "\n";
    return os.str();
}

}  // namespace fieldpipe
