#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fieldpipe/class_mask.hpp"
#include "fieldpipe/tiling.hpp"

namespace fieldpipe {

struct ClassCounts {
    std::uint64_t tp = 0;
    std::uint64_t fp = 0;
    std::uint64_t fn = 0;
    std::uint64_t tn = 0;

    friend bool operator==(const ClassCounts&, const ClassCounts&) = default;
};

struct ConfusionCounts {
    std::array<ClassCounts, kClassCount> classes{};
    std::uint64_t valid_pixels = 0;

    ConfusionCounts& operator+=(const ConfusionCounts& other);
    friend ConfusionCounts operator+(ConfusionCounts a, const ConfusionCounts& b) { return a += b; }
    friend bool operator==(const ConfusionCounts&, const ConfusionCounts&) = default;
};

/// Adds the pixels of (pred, truth) to `counts`, skipping any pixel that is
/// 255 on either side. Error(Dimension) when sizes differ.
ConfusionCounts accumulate_confusion(std::span<const std::uint8_t> pred,
                                     std::span<const std::uint8_t> truth, ConfusionCounts counts);
ConfusionCounts accumulate_confusion(const ClassMask& pred, const ClassMask& truth,
                                     ConfusionCounts counts = {});

/// TP / (TP + FP + FN); nullopt when the class is absent from both sides.
std::optional<double> iou(const ConfusionCounts& counts, int class_code);

/// Macro mean over defined classes. Error(Contract) when none is defined.
double mean_iou(const ConfusionCounts& counts);

struct TileIou {
    std::string tile_id;
    std::optional<double> mean_iou;
};

struct IouReport {
    std::array<std::optional<double>, kClassCount> per_class_iou{};
    double mean_iou = 0.0;                     ///< from globally accumulated counts
    std::optional<double> per_tile_mean_iou;   ///< average of per-tile means
    std::vector<TileIou> per_tile;
    std::uint64_t valid_pixels = 0;
};

enum class SplitFilter { All, Train, Val, Test };

SplitFilter parse_split_filter(const std::string& text);

/// Evaluates `{predictions_dir}/{tile_id}_pred.tif` against each selected
/// tile mask. A 3-band prediction is decoded by argmax; a 1-band prediction
/// is taken as class codes. Relative mask paths resolve against `base_dir`
/// (the directory holding the manifest).
/// Error(MissingInput) names every missing prediction.
IouReport evaluate_manifest(const TileManifest& manifest, const std::filesystem::path& base_dir,
                            const std::filesystem::path& predictions_dir, SplitFilter filter);

std::string report_to_json(const IouReport& report);
std::string report_to_table(const IouReport& report);

}  // namespace fieldpipe
