#include "plume/cli.hpp"

#include <chrono>
#include <csignal>
#include <cstdio>
#include <iostream>
#include <thread>

#include <CLI11.hpp>

#include "plume/errors.hpp"
#include "plume/export.hpp"
#include "plume/serialize.hpp"
#include "plume/service.hpp"

namespace plume::cli {

namespace {

using json::Json;

int exit_code(const Error& e) {
    if (dynamic_cast<const ValidationError*>(&e) || dynamic_cast<const ParseError*>(&e) ||
        dynamic_cast<const ArgumentError*>(&e)) {
        return kExitValidation;
    }
    if (dynamic_cast<const FitError*>(&e) || dynamic_cast<const ExtrapolationError*>(&e) ||
        dynamic_cast<const InsufficientDataError*>(&e) || dynamic_cast<const TriangulationError*>(&e)) {
        return kExitFit;
    }
    return kExitIo;
}

void print_diagnostics(std::ostream& os, std::span<const Diagnostic> diags) {
    for (const auto& d : diags) {
        os << to_string(d.severity) << " " << d.code;
        if (!d.file.empty()) {
            os << " " << d.file;
            if (d.row) os << ":" << d.row;
        }
        os << ": " << d.message << "\n";
    }
}

// Writes to `path`, or to `out` when path is empty or "-".
void emit(std::ostream& out, const std::string& path, const std::string& content) {
    if (path.empty() || path == "-") {
        out << content;
        return;
    }
    write_file(path, content);
}

std::string dump(const Json& j) { return j.dump(1) + "\n"; }

struct AnalyzeArgs {
    std::string dir, out, granularity = "quarter", lambda = "auto", basis, aquifer, scale = "log", options_file;
    double nd_fraction = 0.5;
    bool napl = false;
};

AnalysisOptions analyze_options(const AnalyzeArgs& a) {
    Json j = Json::object();
    if (!a.options_file.empty()) {
        try {
            j = Json::parse(read_file(a.options_file));
        } catch (const nlohmann::json::exception& e) {
            throw ArgumentError(a.options_file + ": " + e.what());
        }
    }
    j["granularity"] = a.granularity;
    j["nd_fraction"] = a.nd_fraction;
    if (a.napl) j["napl_substitute"] = true;
    if (!a.aquifer.empty()) j["aquifer"] = a.aquifer;
    j["scale"] = a.scale;
    if (a.lambda != "auto") {
        char* end = nullptr;
        double v = std::strtod(a.lambda.c_str(), &end);
        if (a.lambda.empty() || *end) throw ArgumentError("--lambda must be 'auto' or a number");
        j["lambda"] = v;
    }
    if (!a.basis.empty()) {
        Json b = Json::array();
        std::size_t pos = 0;
        while (pos <= a.basis.size()) {
            auto c = a.basis.find(',', pos);
            if (c == std::string::npos) c = a.basis.size();
            const auto item = a.basis.substr(pos, c - pos);
            char* end = nullptr;
            long v = std::strtol(item.c_str(), &end, 10);
            if (item.empty() || *end) throw ArgumentError("--basis must be mx,my,mt");
            b.push_back(v);
            pos = c + 1;
        }
        j["basis"] = b;
    }
    return json::options_from_json(j);
}

volatile std::sig_atomic_t g_stop = 0;

} // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    ::CLI::App app{"Spatiotemporal groundwater monitoring analysis"};
    app.name("plume");
    app.require_subcommand(1);

    std::string validate_dir;
    auto* validate = app.add_subcommand("validate", "Check a data directory; exit 0 iff no errors");
    validate->add_option("dir", validate_dir, "Directory holding monitoring.csv and wells.csv")->required();

    AnalyzeArgs an;
    auto* analyze = app.add_subcommand("analyze", "Fit every model and write the analysis directory");
    analyze->add_option("dir", an.dir, "Input data directory")->required();
    analyze->add_option("--out", an.out, "Output analysis directory")->required();
    analyze->add_option("--granularity", an.granularity, "month | quarter | year")->capture_default_str();
    analyze->add_option("--nd-fraction", an.nd_fraction, "Non-detect multiplier: 0.5 or 1.0")->capture_default_str();
    analyze->add_flag("--napl-substitute", an.napl, "Substitute solute gaps at NAPL-bearing samples");
    analyze->add_option("--lambda", an.lambda, "'auto' (GCV) or a fixed value")->capture_default_str();
    analyze->add_option("--basis", an.basis, "Basis sizes mx,my,mt (mt 0: automatic)");
    analyze->add_option("--aquifer", an.aquifer, "Aquifer zone to analyse");
    analyze->add_option("--scale", an.scale, "Trend scale: log | linear")->capture_default_str();
    analyze->add_option("--options", an.options_file, "JSON options file; flags take precedence");

    std::string slice_dir, slice_solute, slice_out, slice_svg;
    std::size_t slice_k = 0;
    int slice_nx = 50, slice_ny = 50;
    bool slice_nomask = false;
    auto* slice = app.add_subcommand("slice", "Time-slice grid of one solute");
    slice->add_option("analysis", slice_dir, "Analysis directory")->required();
    slice->add_option("--solute", slice_solute)->required();
    slice->add_option("--interval", slice_k, "Interval index")->required();
    slice->add_option("--nx", slice_nx)->capture_default_str();
    slice->add_option("--ny", slice_ny)->capture_default_str();
    slice->add_flag("--no-mask", slice_nomask, "Keep points outside the well convex hull");
    slice->add_option("--out", slice_out, "JSON output file (default: stdout)");
    slice->add_option("--svg", slice_svg, "Also write an SVG rendering here");

    std::string frames_dir, frames_solute, frames_out;
    int frames_nx = 50, frames_ny = 50;
    bool frames_svg = false;
    auto* frames = app.add_subcommand("frames", "One slice grid per interval with a shared colour scale");
    frames->add_option("analysis", frames_dir)->required();
    frames->add_option("--solute", frames_solute)->required();
    frames->add_option("--nx", frames_nx)->capture_default_str();
    frames->add_option("--ny", frames_ny)->capture_default_str();
    frames->add_option("--out", frames_out, "Output directory (default: JSON to stdout)");
    frames->add_flag("--svg", frames_svg, "Also write frame_NNN.svg files (needs --out)");

    std::string snap_dir, snap_thresholds, snap_out;
    auto* snapshot = app.add_subcommand("snapshot", "Latest-interval grids and the three indicator matrices");
    snapshot->add_option("analysis", snap_dir)->required();
    snapshot->add_option("--thresholds", snap_thresholds, "JSON file mapping solute to threshold");
    snapshot->add_option("--out", snap_out, "Output file (default: stdout)");

    std::string ind_dir, ind_mode = "trend", ind_thresholds, ind_out, ind_svg;
    std::optional<std::size_t> ind_k;
    auto* indicators = app.add_subcommand("indicators", "Indicator matrix at one interval");
    indicators->add_option("analysis", ind_dir)->required();
    indicators->add_option("--interval", ind_k, "Interval index (default: last)");
    indicators->add_option("--mode", ind_mode, "trend | threshold-absolute | threshold-statistical")->capture_default_str();
    indicators->add_option("--thresholds", ind_thresholds, "JSON file mapping solute to threshold");
    indicators->add_option("--out", ind_out);
    indicators->add_option("--svg", ind_svg);

    std::string rep_dir, rep_out;
    auto* report = app.add_subcommand("report", "Per-well time-series bundles");
    report->add_option("analysis", rep_dir)->required();
    report->add_option("--out", rep_out);

    std::string serve_data = "plume-data", serve_listen = "127.0.0.1:8080";
    int serve_workers = 2;
    std::size_t serve_max_upload = 64u << 20;
    auto* serve = app.add_subcommand("serve", "Run the HTTP service");
    serve->add_option("--data", serve_data, "Data directory")->envname("PLUME_DATA")->capture_default_str();
    serve->add_option("--listen", serve_listen, "host:port")->envname("PLUME_LISTEN")->capture_default_str();
    serve->add_option("--workers", serve_workers, "Fit worker threads")->envname("PLUME_WORKERS")->capture_default_str();
    serve->add_option("--max-upload", serve_max_upload, "Maximum request body in bytes")
        ->envname("PLUME_MAX_UPLOAD")
        ->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const ::CLI::ParseError& e) {
        return app.exit(e, out, err);
    }

    auto thresholds_file = [](const std::string& path) {
        return path.empty() ? ind::Thresholds{} : json::parse_thresholds(read_file(path));
    };

    try {
        if (*validate) {
            auto tables = read_tables(validate_dir);
            auto diags = tables.parse_diagnostics;
            auto more = ::plume::validate(tables);
            diags.insert(diags.end(), more.begin(), more.end());
            print_diagnostics(out, diags);
            const bool bad = has_errors(diags);
            out << (bad ? "invalid" : "valid") << ": " << tables.records.size() << " records, " << tables.wells.size()
                << " wells\n";
            return bad ? kExitValidation : 0;
        }
        if (*analyze) {
            const auto options = analyze_options(an);
            auto ds = load_dataset(an.dir, options.dataset);
            auto a = run_analysis(std::move(ds), options);
            save_analysis(a, an.out);
            write_file(std::filesystem::path(an.out) / "diagnostics.json", dump(json::to_json(a.diagnostics)));
            print_diagnostics(err, a.diagnostics);
            bool failed = false;
            for (const auto& s : a.dataset.solutes()) {
                const auto& m = a.models.at(s);
                if (m.model) {
                    out << s << ": lambda " << format_double(m.model->lambda) << ", edf " << format_double(m.model->edf)
                        << ", n " << m.model->n << "\n";
                } else {
                    out << s << ": failed: " << m.failure << "\n";
                    failed = true;
                }
            }
            return failed ? kExitFit : 0;
        }
        if (*slice) {
            const auto a = load_analysis(slice_dir);
            exports::SliceOptions o{slice_nx, slice_ny, !slice_nomask};
            const auto g = exports::slice_grid(a, slice_solute, slice_k, o);
            emit(out, slice_out, dump(exports::to_json(g)));
            if (!slice_svg.empty()) write_file(slice_svg, exports::render_svg(g, a.dataset.overlays()));
            return 0;
        }
        if (*frames) {
            const auto a = load_analysis(frames_dir);
            const auto seq = exports::frame_sequence(a, frames_solute, {frames_nx, frames_ny, true});
            if (frames_out.empty()) {
                if (frames_svg) throw ArgumentError("--svg needs --out");
                out << dump(exports::to_json(seq));
                return 0;
            }
            std::filesystem::create_directories(frames_out);
            write_file(std::filesystem::path(frames_out) / "frames.json", dump(exports::to_json(seq)));
            if (frames_svg) {
                exports::SvgOptions so;
                so.scale = seq.scale;
                for (std::size_t k = 0; k < seq.frames.size(); ++k) {
                    char name[32];
                    std::snprintf(name, sizeof name, "frame_%03zu.svg", k);
                    write_file(std::filesystem::path(frames_out) / name,
                               exports::render_svg(seq.frames[k], a.dataset.overlays(), so));
                }
            }
            out << seq.frames.size() << " frames written to " << frames_out << "\n";
            return 0;
        }
        if (*snapshot) {
            const auto a = load_analysis(snap_dir);
            const auto snap = exports::latest_snapshot(a, thresholds_file(snap_thresholds), a.options.cutoffs);
            emit(out, snap_out, dump(exports::to_json(snap, a.dataset)));
            return 0;
        }
        if (*indicators) {
            const auto a = load_analysis(ind_dir);
            const auto k = ind_k.value_or(a.dataset.intervals().size() - 1);
            const auto m = ind::indicator_matrix(a, k, ind::parse_mode(ind_mode), thresholds_file(ind_thresholds),
                                                 a.options.cutoffs);
            emit(out, ind_out, dump(json::to_json(m, a.dataset)));
            if (!ind_svg.empty()) write_file(ind_svg, exports::render_svg(m));
            return 0;
        }
        if (*report) {
            const auto a = load_analysis(rep_dir);
            const auto r = exports::well_report(a);
            emit(out, rep_out, dump(exports::to_json(r)));
            return 0;
        }
        if (*serve) {
            auto [host, port] = service::parse_listen(serve_listen);
            service::Server server({serve_data, serve_workers, serve_max_upload});
            const int bound = server.start(host, port);
            err << "listening on " << host << ":" << bound << "\n";
            std::signal(SIGINT, [](int) { g_stop = 1; });
            std::signal(SIGTERM, [](int) { g_stop = 1; });
            while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(200));
            server.stop();
            return 0;
        }
    } catch (const DatasetError& e) {
        print_diagnostics(err, e.diagnostics());
        err << "error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const Error& e) {
        err << "error [" << e.code() << "]: " << e.what() << "\n";
        return exit_code(e);
    } catch (const std::filesystem::filesystem_error& e) {
        err << "error [IO_ERROR]: " << e.what() << "\n";
        return kExitIo;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitIo;
    }
    return 0;
}

} // namespace plume::cli
