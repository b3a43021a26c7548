#include "fieldpipe/pipeline.hpp"

#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "fieldpipe/error.hpp"
#include "fieldpipe/geotiff.hpp"
#include "fieldpipe/ndvi.hpp"
#include "parallel.hpp"

namespace fieldpipe {

namespace {

namespace fs = std::filesystem;

void log(const RunOptions& opts, const std::string& line) {
    if (opts.log) *opts.log << line << '\n';
}

void warn(CommandResult& result, const RunOptions& opts, const std::string& message) {
    result.warnings.push_back(message);
    log(opts, "warning: " + message);
}

void ensure_parent(const fs::path& path) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
}

void write_text(const fs::path& path, const std::string& text) {
    ensure_parent(path);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorKind::Io, path.string() + ": cannot open for writing");
    out << text;
    if (!out) throw Error(ErrorKind::Io, path.string() + ": write failed");
}

std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::MissingInput, path.string() + ": cannot open");
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void require_file(const fs::path& path, const std::string& what) {
    if (!fs::exists(path)) {
        throw Error(ErrorKind::MissingInput, what + " not found: " + path.string());
    }
}

void check_written(const fs::path& path) {
    std::error_code ec;
    if (!fs::is_regular_file(path, ec) || fs::file_size(path, ec) == 0) {
        throw Error(ErrorKind::Io, path.string() + ": output missing or empty after write");
    }
}

/// Re-reads a written raster and checks its shape and band count.
void verify_raster(const fs::path& path, const GridGeometry& geometry, std::size_t bands) {
    const Raster back = read_raster(path);
    if (!(back.geometry() == geometry) || back.band_count() != bands) {
        throw Error(ErrorKind::Io, path.string() + ": written raster does not read back as written");
    }
}

Raster rethrow_with_context(const fs::path& path, const std::string& context) {
    try {
        return read_raster(path);
    } catch (const Error& e) {
        throw Error(e.kind(), context + ": " + e.what());
    }
}

/// Scenes either name their bands R,G,B,NIR or carry exactly four unnamed
/// bands in that order.
Raster as_spectral(const Raster& scene, const fs::path& path) {
    const std::vector<std::string> layout(kSpectralBands.begin(), kSpectralBands.end());
    if (scene.band_names() == layout) return scene;
    if (scene.band_count() == layout.size() &&
        scene.band_names() == default_band_names(layout.size())) {
        return Raster(scene.geometry(), scene.bands(), layout, scene.nodata(), scene.sample_type());
    }
    if (scene.find_band("R") >= 0 && scene.find_band("NIR") >= 0 && scene.find_band("G") >= 0 &&
        scene.find_band("B") >= 0) {
        std::vector<Band> bands;
        for (const auto& name : layout) bands.push_back(scene.band(scene.find_band(name)));
        return Raster(scene.geometry(), std::move(bands), layout, scene.nodata(),
                      scene.sample_type());
    }
    throw Error(ErrorKind::Contract,
                path.string() + ": scene must carry bands R, G, B, NIR (found " +
                    std::to_string(scene.band_count()) + " bands)");
}

std::string format_double(double v, int precision) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(precision) << v;
    return os.str();
}

std::string split_counts(const SplitSummary& s) {
    std::ostringstream os;
    os << "train " << s.tiles[0] << " tiles / " << s.cells[0] << " cells, val " << s.tiles[1]
       << " / " << s.cells[1] << ", test " << s.tiles[2] << " / " << s.cells[2];
    return os.str();
}

}  // namespace

CommandResult cmd_ndvi_stack(const PipelineConfig& config, const RunOptions& options) {
    config.validate_scenes();
    CommandResult result;
    if (options.dry_run) {
        for (const auto& g : config.scene_groups) {
            log(options, "composite " + g.date.to_string() + " from " +
                             std::to_string(g.scenes.size()) + " scene(s)");
            for (const auto& s : g.scenes) require_file(s, "scene for " + g.date.to_string());
        }
        log(options, "would write " + config.ndvi_stack_path().string());
        if (config.write_band_stack) log(options, "would write " + config.band_stack_path().string());
        return result;
    }

    std::vector<DatedBand> ndvi;
    std::vector<DatedRaster> composites;
    std::optional<GridGeometry> grid;
    for (const auto& group : config.scene_groups) {
        const std::string context = "scene group " + group.date.to_string();
        std::vector<Raster> scenes;
        for (const auto& path : group.scenes) {
            require_file(path, context + " scene");
            Raster scene = as_spectral(rethrow_with_context(path, context), path);
            if (grid && !(scene.geometry() == *grid)) {
                throw Error(ErrorKind::Geometry,
                            path.string() + ": grid differs from the first scene of the stack");
            }
            grid = scene.geometry();
            scenes.push_back(std::move(scene));
        }
        Raster composite = median_composite(scenes);
        const int red = composite.find_band("R");
        const int nir = composite.find_band("NIR");
        ndvi.push_back({group.date, compute_ndvi(composite.band(red), composite.band(nir),
                                                 composite.nodata(), config.scale_divisor,
                                                 config.nodata)});
        log(options, context + ": composited " + std::to_string(scenes.size()) + " scene(s)");
        if (config.write_band_stack) composites.push_back({group.date, std::move(composite)});
    }

    const NdviStack stack = stack_ndvi(std::move(ndvi), *grid, config.nodata);
    const fs::path out = config.ndvi_stack_path();
    ensure_parent(out);
    write_raster(stack.raster, out);
    verify_raster(out, *grid, 3);
    result.outputs.push_back(out);
    log(options, "wrote " + out.string() + " (" + std::to_string(grid->width) + "x" +
                     std::to_string(grid->height) + ", dates " + stack.dates[0].to_string() + ", " +
                     stack.dates[1].to_string() + ", " + stack.dates[2].to_string() + ")");

    if (config.write_band_stack) {
        const Raster bands = stack_bands(std::move(composites));
        const fs::path path = config.band_stack_path();
        write_raster(bands, path);
        verify_raster(path, *grid, 12);
        result.outputs.push_back(path);
        log(options, "wrote " + path.string());
    }
    return result;
}

CommandResult cmd_make_mask(const PipelineConfig& config, const RunOptions& options) {
    CommandResult result;
    if (config.parcels.empty()) throw Error(ErrorKind::Config, "paths.parcels is not set");
    require_file(config.parcels, "parcel layer");
    const fs::path reference = config.reference_path();
    require_file(reference, "reference grid");
    const GridGeometry geometry = read_raster(reference).geometry();

    ParcelSet parcels;
    parcels.crs_code = geometry.crs_code;
    try {
        ParcelLoad load = load_parcels(config.parcels, config.crop_rule);
        for (const auto& r : load.rejected) {
            warn(result, options, "parcel " + std::to_string(r.id) + " rejected: " + r.reason);
        }
        parcels = std::move(load.set);
    } catch (const Error& e) {
        if (e.kind() != ErrorKind::Empty) throw;
        warn(result, options, std::string(e.what()) + "; writing an all non-crop mask");
    }
    if (geometry.crs_code != 0 && parcels.crs_code != geometry.crs_code) {
        throw Error(ErrorKind::Georeferencing,
                    config.parcels.string() + ": parcels are in EPSG:" +
                        std::to_string(parcels.crs_code) + " but the grid is EPSG:" +
                        std::to_string(geometry.crs_code));
    }
    std::size_t crop = 0;
    for (const auto& p : parcels.parcels) crop += p.crop;
    log(options, std::to_string(parcels.parcels.size()) + " parcels, " + std::to_string(crop) +
                     " crop, boundary half-width " + format_double(config.sensor.half_width, 2));
    if (options.dry_run) {
        log(options, "would write " + config.mask_path().string());
        return result;
    }

    MaskDiagnostics diagnostics;
    const ClassMask mask =
        build_class_mask(parcels, geometry, config.sensor.half_width, &diagnostics, options.jobs);
    if (!diagnostics.overlaps.empty()) {
        std::ostringstream os;
        os << diagnostics.overlaps.size() << " overlapping crop parcel pair(s), e.g. "
           << diagnostics.overlaps.front().first << "/" << diagnostics.overlaps.front().second;
        warn(result, options, os.str());
    }
    const fs::path out = config.mask_path();
    ensure_parent(out);
    write_raster(mask.to_raster(), out);
    verify_raster(out, geometry, 1);
    result.outputs.push_back(out);
    const auto counts = mask.code_counts();
    log(options, "wrote " + out.string() + " (non-crop " + std::to_string(counts[kNonCrop]) +
                     ", interior " + std::to_string(counts[kInterior]) + ", boundary " +
                     std::to_string(counts[kBoundary]) + " px)");
    return result;
}

CommandResult cmd_tile(const PipelineConfig& config, const RunOptions& options) {
    CommandResult result;
    const fs::path image_path = config.ndvi_stack_path();
    const fs::path mask_path = config.mask_path();
    require_file(image_path, "NDVI stack");
    require_file(mask_path, "class mask");
    const Raster image = read_raster(image_path);
    const ClassMask mask = ClassMask::from_raster(read_raster(mask_path));
    if (!(image.geometry() == mask.geometry())) {
        throw Error(ErrorKind::Geometry, mask_path.string() + ": grid differs from " +
                                             image_path.string());
    }

    const TileSpec spec = config.tile_spec();
    std::vector<std::string> plan_warnings;
    const auto windows = plan_tiles(image.geometry(), spec, &plan_warnings);
    for (const auto& w : plan_warnings) warn(result, options, w);
    TileManifest manifest = assign_splits(windows, image.geometry(), spec, config.split);

    const double area = tile_area_km2(spec.tile_size, image.geometry().pixel_size);
    log(options, std::to_string(manifest.records.size()) + " tiles of " +
                     std::to_string(spec.tile_size) + " px (" + format_double(area, 4) +
                     " km2 each), stride " + std::to_string(spec.stride));
    log(options, split_counts(manifest.summary));
    if (manifest.summary.cross_split_overlaps > 0) {
        warn(result, options,
             std::to_string(manifest.summary.cross_split_overlaps) +
                 " overlapping tile pair(s) straddle split cells");
    }
    if (options.dry_run) {
        log(options, "would write " + std::to_string(2 * manifest.records.size()) + " tiles under " +
                         config.tiles_dir().string() + " and " + config.manifest_path().string());
        return result;
    }

    fs::create_directories(config.tiles_dir());
    const fs::path base = config.manifest_path().parent_path();
    const auto& records = manifest.records;
    detail::parallel_chunks(static_cast<int>(records.size()), options.jobs, [&](int begin, int end) {
        for (int i = begin; i < end; ++i) {
            const auto& rec = records[static_cast<std::size_t>(i)];
            auto [tile_image, tile_mask] = extract_tile(image, mask, rec.window);
            write_raster(tile_image, base / rec.image_path);
            write_raster(tile_mask.to_raster(), base / rec.mask_path);
            check_written(base / rec.image_path);
            check_written(base / rec.mask_path);
        }
    });
    write_manifest(manifest, config.manifest_path());
    if (!(read_manifest(config.manifest_path()) == manifest)) {
        throw Error(ErrorKind::Io, config.manifest_path().string() + ": manifest does not read back");
    }
    result.outputs.push_back(config.tiles_dir());
    result.outputs.push_back(config.manifest_path());
    log(options, "wrote " + config.manifest_path().string());
    return result;
}

CommandResult cmd_split(const PipelineConfig& config, const RunOptions& options) {
    CommandResult result;
    require_file(config.manifest_path(), "tile manifest");
    TileManifest manifest = read_manifest(config.manifest_path());
    reassign_splits(manifest, config.split);
    log(options, split_counts(manifest.summary));
    if (options.dry_run) {
        log(options, "would rewrite " + config.manifest_path().string());
        return result;
    }
    write_manifest(manifest, config.manifest_path());
    result.outputs.push_back(config.manifest_path());
    log(options, "wrote " + config.manifest_path().string());
    return result;
}

CommandResult cmd_evaluate(const PipelineConfig& config, const fs::path& manifest_path,
                           const fs::path& predictions_dir, SplitFilter filter,
                           const RunOptions& options) {
    CommandResult result;
    require_file(manifest_path, "tile manifest");
    if (!fs::is_directory(predictions_dir)) {
        throw Error(ErrorKind::MissingInput, "prediction directory not found: " +
                                                 predictions_dir.string());
    }
    const TileManifest manifest = read_manifest(manifest_path);
    const fs::path out = config.work_dir / "iou_report.json";
    if (options.dry_run) {
        log(options, "would evaluate " + predictions_dir.string() + " and write " + out.string());
        return result;
    }
    const IouReport report =
        evaluate_manifest(manifest, manifest_path.parent_path(), predictions_dir, filter);
    write_text(out, report_to_json(report));
    check_written(out);
    result.outputs.push_back(out);
    log(options, report_to_table(report));
    return result;
}

CommandResult cmd_postprocess(const PipelineConfig& config, const fs::path& prediction_file,
                              const RunOptions& options) {
    CommandResult result;
    require_file(prediction_file, "prediction raster");
    const Raster prediction = read_raster(prediction_file);
    const fs::path fields_path = config.work_dir / "fields.geojson";
    const fs::path stats_path = config.work_dir / "field_stats.json";
    const fs::path svg_path = config.work_dir / "field_stats.svg";
    const auto& p = config.postprocess;
    log(options, "close radius " + std::to_string(p.close_radius) + " px, expand " +
                     std::to_string(p.expand_px) + " px, simplify " +
                     format_double(p.simplify_tolerance, 2) + ", min area " +
                     format_double(p.min_area_ha, 3) + " ha");
    if (options.dry_run) {
        log(options, "would write " + fields_path.string() + " and " + stats_path.string());
        return result;
    }

    const PostprocessResult pp = run_postprocess(prediction, p);
    log(options, std::to_string(pp.components) + " interior components, " +
                     std::to_string(pp.merged) + " merged, " + std::to_string(pp.dropped) +
                     " dropped, " + std::to_string(pp.fields.size()) + " fields");
    if (pp.fields.empty()) {
        warn(result, options, "no field reaches the minimum area; writing an empty field set");
    }
    write_text(fields_path, fields_to_geojson(pp.fields, prediction.geometry().crs_code));
    check_written(fields_path);
    result.outputs.push_back(fields_path);

    if (pp.fields.empty()) {
        write_text(stats_path, stats_to_json(FieldSizeStats{}));
    } else {
        const FieldSizeStats stats = field_stats(pp.fields, config.bin_edges);
        write_text(stats_path, stats_to_json(stats));
        if (config.histogram_svg) {
            write_text(svg_path, stats_to_svg(stats));
            result.outputs.push_back(svg_path);
        }
    }
    check_written(stats_path);
    result.outputs.push_back(stats_path);
    log(options, "wrote " + fields_path.string());
    return result;
}

CommandResult cmd_stats(const PipelineConfig& config, const fs::path& fields_file,
                        const RunOptions& options) {
    CommandResult result;
    require_file(fields_file, "field layer");
    const auto fields = fields_from_geojson(read_text(fields_file));
    const fs::path stats_path = config.work_dir / "field_stats.json";
    const fs::path svg_path = config.work_dir / "field_stats.svg";
    if (options.dry_run) {
        log(options, std::to_string(fields.size()) + " fields; would write " + stats_path.string());
        return result;
    }
    if (fields.empty()) {
        warn(result, options, fields_file.string() + " holds no fields");
        write_text(stats_path, stats_to_json(FieldSizeStats{}));
    } else {
        const FieldSizeStats stats = field_stats(fields, config.bin_edges);
        write_text(stats_path, stats_to_json(stats));
        if (config.histogram_svg) {
            write_text(svg_path, stats_to_svg(stats));
            result.outputs.push_back(svg_path);
        }
        log(options, std::to_string(stats.count) + " fields, median " +
                         format_double(stats.median_ha, 3) + " ha, mean " +
                         format_double(stats.mean_ha, 3) + " ha");
    }
    check_written(stats_path);
    result.outputs.push_back(stats_path);
    log(options, "wrote " + stats_path.string());
    return result;
}

}  // namespace fieldpipe
