#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "fieldpipe/config.hpp"
#include "fieldpipe/metrics.hpp"

namespace fieldpipe {

struct RunOptions {
    int jobs = 1;
    bool dry_run = false;
    std::ostream* log = nullptr;  ///< progress and summaries; nullptr for silence
};

struct CommandResult {
    std::vector<std::filesystem::path> outputs;
    std::vector<std::string> warnings;
};

/// Median-composites each date group, computes NDVI and writes the 3-band
/// stack (plus the 12-band stack when configured).
CommandResult cmd_ndvi_stack(const PipelineConfig& config, const RunOptions& options);

/// Rasterizes the parcel layer onto the reference grid.
CommandResult cmd_make_mask(const PipelineConfig& config, const RunOptions& options);

/// Plans tiles over the NDVI stack and mask, assigns splits, writes tile
/// pairs under `tiles/` and the manifest.
CommandResult cmd_tile(const PipelineConfig& config, const RunOptions& options);

/// Reassigns split labels of the existing manifest from the config.
CommandResult cmd_split(const PipelineConfig& config, const RunOptions& options);

CommandResult cmd_evaluate(const PipelineConfig& config, const std::filesystem::path& manifest,
                           const std::filesystem::path& predictions_dir, SplitFilter filter,
                           const RunOptions& options);

CommandResult cmd_postprocess(const PipelineConfig& config,
                              const std::filesystem::path& prediction_file,
                              const RunOptions& options);

CommandResult cmd_stats(const PipelineConfig& config, const std::filesystem::path& fields_file,
                        const RunOptions& options);

}  // namespace fieldpipe
