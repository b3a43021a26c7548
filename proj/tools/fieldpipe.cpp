#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "fieldpipe/error.hpp"
#include "fieldpipe/pipeline.hpp"

namespace fs = std::filesystem;
using namespace fieldpipe;

int main(int argc, char** argv) {
    CLI::App app{"fieldpipe: field boundary dataset preparation and post-processing"};
    app.require_subcommand(1);

    std::string config_path;
    std::string work_dir;
    int jobs = 1;
    std::optional<std::uint64_t> seed;
    bool dry_run = false;
    bool quiet = false;
    app.add_option("-c,--config", config_path, "Pipeline config (TOML)")->check(CLI::ExistingFile);
    app.add_option("-w,--work-dir", work_dir, "Override the configured work directory");
    app.add_option("-j,--jobs", jobs, "Worker threads")->check(CLI::PositiveNumber);
    app.add_option("--seed", seed, "Override the split seed");
    app.add_flag("-n,--dry-run", dry_run, "Validate inputs and print the plan without writing");
    app.add_flag("-q,--quiet", quiet, "Only print errors and warnings");

    auto* ndvi = app.add_subcommand("ndvi-stack", "Composite scene groups and write the NDVI stack");
    auto* mask = app.add_subcommand("make-mask", "Rasterize parcels into the 3-class mask");
    auto* tile = app.add_subcommand("tile", "Cut tile pairs and write the manifest");
    auto* split = app.add_subcommand("split", "Reassign spatial splits in the manifest");

    auto* evaluate = app.add_subcommand("evaluate", "Score predicted tiles against mask tiles");
    std::string predictions;
    std::string manifest;
    std::string split_name = "test";
    evaluate->add_option("predictions", predictions, "Directory of {tile_id}_pred.tif files")
        ->required();
    evaluate->add_option("-m,--manifest", manifest, "Tile manifest (default: work/manifest.json)");
    evaluate->add_option("-s,--split", split_name, "train, val, test or all")
        ->check(CLI::IsMember({"train", "val", "test", "all"}));

    auto* post = app.add_subcommand("postprocess", "Vectorize a prediction into field polygons");
    std::string prediction;
    post->add_option("prediction", prediction, "Probability or class raster")->required();

    auto* stats = app.add_subcommand("stats", "Field size statistics for a field layer");
    std::string fields;
    stats->add_option("fields", fields, "Field GeoJSON (default: work/fields.geojson)");

    CLI11_PARSE(app, argc, argv);

    try {
        PipelineConfig config = config_path.empty() ? parse_config("", fs::current_path())
                                                    : load_config(config_path);
        if (!work_dir.empty()) config.work_dir = work_dir;
        if (seed) config.split.seed = *seed;

        RunOptions options;
        options.jobs = jobs;
        options.dry_run = dry_run;
        options.log = &std::cout;

        std::ostringstream sink;
        if (quiet) options.log = &sink;

        CommandResult result;
        if (*ndvi) result = cmd_ndvi_stack(config, options);
        else if (*mask) result = cmd_make_mask(config, options);
        else if (*tile) result = cmd_tile(config, options);
        else if (*split) result = cmd_split(config, options);
        else if (*evaluate) {
            const fs::path m = manifest.empty() ? config.manifest_path() : fs::path(manifest);
            result = cmd_evaluate(config, m, predictions, parse_split_filter(split_name), options);
        } else if (*post) result = cmd_postprocess(config, prediction, options);
        else if (*stats) {
            const fs::path f = fields.empty() ? config.work_dir / "fields.geojson" : fs::path(fields);
            result = cmd_stats(config, f, options);
        }
        if (quiet) {
            for (const auto& w : result.warnings) std::cerr << "warning: " << w << '\n';
        }
        return 0;
    } catch (const Error& e) {
        std::cerr << "error (" << to_string(e.kind()) << "): " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
