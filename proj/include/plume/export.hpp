#pragma once

#include <optional>
#include <string>
#include <vector>

#include "plume/analysis.hpp"
#include "plume/serialize.hpp"

namespace plume::exports {

struct SliceOptions {
    int nx = 50;
    int ny = 50;
    bool mask_hull = true;
};

struct SampleMark {
    std::string well_id;
    double x = 0.0;
    double y = 0.0;
    std::string date;
    double raw = 0.0;
    double working = 0.0;
    bool censored = false;
    bool synthetic = false;
};

struct WellMark {
    std::string well_id;
    double x = 0.0;
    double y = 0.0;
};

struct NaplMark {
    std::string well_id;
    double x = 0.0;
    double y = 0.0;
    double thickness = 0.0;
};

// Concentrations on an nx x ny lattice over the well bounding box at the
// interval midpoint. values[j * nx + i] sits at (xs[i], ys[j]).
struct SliceGrid {
    std::size_t interval = 0;
    std::string label;
    double t = 0.0;
    std::string solute;
    std::string units;
    int nx = 0;
    int ny = 0;
    std::vector<double> xs;
    std::vector<double> ys;
    std::vector<double> values;
    std::vector<bool> mask;  // true: outside the well convex hull
    std::vector<WellMark> wells;
    std::vector<SampleMark> samples;
    std::vector<NaplMark> napl;
    flow::FlowField flow;

    // Min and max over unmasked values; nullopt when everything is masked.
    std::optional<std::pair<double, double>> range() const;
};

// Counter-clockwise convex hull (monotone chain); collinear points dropped.
std::vector<Point2> convex_hull(std::vector<Point2> points);
// Inside or on the boundary of a counter-clockwise convex polygon.
bool in_convex_polygon(std::span<const Point2> hull, const Point2& p);

// Throws IntervalRangeError for a bad interval and ArgumentError for nx or ny < 2.
SliceGrid slice_grid(const Analysis& analysis, const std::string& solute, std::size_t interval,
                     const SliceOptions& options = {});

struct ColorScale {
    double min = 0.0;
    double max = 0.0;
};

struct FrameSequence {
    std::string solute;
    std::string units;
    std::vector<SliceGrid> frames;
    ColorScale scale;  // global over unmasked values of every frame
};

// One frame per interval, computed in parallel.
FrameSequence frame_sequence(const Analysis& analysis, const std::string& solute, const SliceOptions& options = {});

struct Observation {
    std::string date;
    double days = 0.0;
    double raw = 0.0;
    double working = 0.0;
    bool censored = false;
    bool synthetic = false;
};

struct SoluteSeries {
    std::string solute;
    std::string units;
    std::vector<Observation> observations;
    const trend::WellTrendFit* fit = nullptr;
    std::string failure;
};

struct WellBundle {
    std::string well_id;
    double x = 0.0;
    double y = 0.0;
    std::vector<SoluteSeries> solutes;
    bool gw_requested = false;
    bool gw_missing = false;
    std::vector<Observation> gw;
    std::vector<Observation> napl;
};

// Wells sorted by id. The bundles point into `analysis`.
std::vector<WellBundle> well_report(const Analysis& analysis, bool include_gw = true);
WellBundle well_bundle(const Analysis& analysis, const std::string& well_id, bool include_gw = true);

struct Snapshot {
    std::size_t interval = 0;
    std::string label;
    std::vector<std::string> solutes;
    std::vector<std::optional<SliceGrid>> grids;  // one per solute; empty when the model failed
    std::vector<std::string> failures;
    std::vector<ind::IndicatorMatrix> matrices;   // trend, threshold-absolute, threshold-statistical
};

Snapshot latest_snapshot(const Analysis& analysis, const ind::Thresholds& thresholds,
                         const ind::Cutoffs& cutoffs, const SliceOptions& options = {});

json::Json to_json(const SliceGrid& g);
json::Json to_json(const FrameSequence& f, std::size_t offset = 0, std::size_t limit = SIZE_MAX);
json::Json to_json(const WellBundle& b);
json::Json to_json(std::span<const WellBundle> report);
json::Json to_json(const Snapshot& s, const Dataset& dataset);

struct SvgOptions {
    int width = 640;
    int height = 480;
    std::optional<ColorScale> scale;  // default: the grid's own range
};

std::string render_svg(const SliceGrid& grid, std::span<const Polyline> overlays, const SvgOptions& options = {});
std::string render_svg(const SoluteSeries& series, const SvgOptions& options = {});
std::string render_svg(const ind::IndicatorMatrix& matrix, const SvgOptions& options = {});

} // namespace plume::exports
