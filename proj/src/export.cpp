#include "plume/export.hpp"

#include <algorithm>
#include <cmath>
#include <exception>

#include "plume/errors.hpp"

namespace plume::exports {

std::optional<std::pair<double, double>> SliceGrid::range() const {
    std::optional<std::pair<double, double>> r;
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (mask[i] || !std::isfinite(values[i])) continue;
        if (!r)
            r = std::make_pair(values[i], values[i]);
        else {
            r->first = std::min(r->first, values[i]);
            r->second = std::max(r->second, values[i]);
        }
    }
    return r;
}

std::vector<Point2> convex_hull(std::vector<Point2> pts) {
    std::sort(pts.begin(), pts.end());
    pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
    if (pts.size() < 3) return pts;
    auto cross = [](const Point2& o, const Point2& a, const Point2& b) {
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0]);
    };
    std::vector<Point2> h(2 * pts.size());
    std::size_t k = 0;
    for (const auto& p : pts) {
        while (k >= 2 && cross(h[k - 2], h[k - 1], p) <= 0) --k;
        h[k++] = p;
    }
    for (std::size_t i = pts.size() - 1, lower = k + 1; i-- > 0;) {
        while (k >= lower && cross(h[k - 2], h[k - 1], pts[i]) <= 0) --k;
        h[k++] = pts[i];
    }
    h.resize(k - 1);
    return h;
}

bool in_convex_polygon(std::span<const Point2> hull, const Point2& p) {
    if (hull.size() < 3) return false;
    for (std::size_t i = 0; i < hull.size(); ++i) {
        const auto& a = hull[i];
        const auto& b = hull[(i + 1) % hull.size()];
        if ((b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0]) < 0) return false;
    }
    return true;
}

namespace {

const st::STModel& require_model(const Analysis& a, const std::string& solute) {
    if (!a.dataset.has_solute(solute)) throw NotFoundError("SOLUTE_NOT_FOUND", "unknown solute '" + solute + "'");
    const auto* m = a.model(solute);
    if (!m) {
        auto it = a.models.find(solute);
        throw FitError("no spatiotemporal model for " + solute +
                       (it != a.models.end() && !it->second.failure.empty() ? ": " + it->second.failure : ""));
    }
    return *m;
}

void check_interval(const Dataset& ds, std::size_t k) {
    if (k >= ds.intervals().size()) {
        throw IntervalRangeError("interval " + std::to_string(k) + " out of range [0, " +
                                 std::to_string(ds.intervals().size() - 1) + "]");
    }
}

std::vector<double> lattice(double lo, double hi, int n) {
    std::vector<double> v(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) v[static_cast<std::size_t>(i)] = i == n - 1 ? hi : lo + (hi - lo) * i / (n - 1);
    return v;
}

Observation observation(const MonitoringRecord& r) {
    return {r.date.iso(), static_cast<double>(r.date.days()), r.raw, r.working, r.censored, r.synthetic};
}

} // namespace

SliceGrid slice_grid(const Analysis& analysis, const std::string& solute, std::size_t interval,
                     const SliceOptions& options) {
    const auto& ds = analysis.dataset;
    const auto& model = require_model(analysis, solute);
    check_interval(ds, interval);
    if (options.nx < 2 || options.ny < 2) throw ArgumentError("nx and ny must be at least 2");

    SliceGrid g;
    g.interval = interval;
    g.label = ds.intervals()[interval].label;
    g.t = ds.intervals()[interval].midpoint();
    g.solute = solute;
    g.units = model.units;
    g.nx = options.nx;
    g.ny = options.ny;
    g.xs = lattice(model.basis.x.lo(), model.basis.x.hi(), options.nx);
    g.ys = lattice(model.basis.y.lo(), model.basis.y.hi(), options.ny);

    std::vector<st::Point3> pts;
    pts.reserve(g.xs.size() * g.ys.size());
    for (double y : g.ys)
        for (double x : g.xs) pts.push_back({x, y, g.t});
    g.values = model.predict(pts);

    std::vector<Point2> wp;
    for (const auto& w : ds.wells()) {
        wp.push_back({w.x, w.y});
        g.wells.push_back({w.well_id, w.x, w.y});
    }
    const auto hull = convex_hull(wp);
    g.mask.resize(pts.size(), false);
    if (options.mask_hull) {
        for (std::size_t i = 0; i < pts.size(); ++i) g.mask[i] = !in_convex_polygon(hull, {pts[i].x, pts[i].y});
    }

    for (const auto* r : ds.interval_records(interval, solute)) {
        const auto* w = ds.find_well(r->well_id);
        g.samples.push_back({r->well_id, w->x, w->y, r->date.iso(), r->raw, r->working, r->censored, r->synthetic});
    }
    for (const auto* r : ds.interval_records(interval, kNapl)) {
        if (r->synthetic) continue;
        const auto* w = ds.find_well(r->well_id);
        g.napl.push_back({r->well_id, w->x, w->y, r->raw});
    }
    g.flow = analysis.flow(interval);
    return g;
}

FrameSequence frame_sequence(const Analysis& analysis, const std::string& solute, const SliceOptions& options) {
    const auto& model = require_model(analysis, solute);
    FrameSequence seq;
    seq.solute = solute;
    seq.units = model.units;
    const auto n = static_cast<std::int64_t>(analysis.dataset.intervals().size());
    seq.frames.resize(static_cast<std::size_t>(n));
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(n));
#pragma omp parallel for schedule(dynamic)
    for (std::int64_t k = 0; k < n; ++k) {
        try {
            seq.frames[static_cast<std::size_t>(k)] = slice_grid(analysis, solute, static_cast<std::size_t>(k), options);
        } catch (...) {
            errors[static_cast<std::size_t>(k)] = std::current_exception();
        }
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);

    bool first = true;
    for (const auto& f : seq.frames) {
        auto r = f.range();
        if (!r) continue;
        if (first) {
            seq.scale = {r->first, r->second};
            first = false;
        } else {
            seq.scale.min = std::min(seq.scale.min, r->first);
            seq.scale.max = std::max(seq.scale.max, r->second);
        }
    }
    return seq;
}

WellBundle well_bundle(const Analysis& analysis, const std::string& well_id, bool include_gw) {
    const auto& ds = analysis.dataset;
    const auto* w = ds.find_well(well_id);
    if (!w) throw NotFoundError("WELL_NOT_FOUND", "unknown well '" + well_id + "'");
    WellBundle b;
    b.well_id = w->well_id;
    b.x = w->x;
    b.y = w->y;
    for (const auto& s : ds.solutes()) {
        SoluteSeries ss;
        ss.solute = s;
        ss.units = ds.units_of(s);
        for (const auto* r : ds.series(well_id, s)) ss.observations.push_back(observation(*r));
        if (const auto* e = analysis.trend_entry(well_id, s)) {
            ss.fit = e->fit ? &*e->fit : nullptr;
            ss.failure = e->failure;
        }
        b.solutes.push_back(std::move(ss));
    }
    b.gw_requested = include_gw;
    if (include_gw) {
        for (const auto* r : ds.series(well_id, kGroundwater)) b.gw.push_back(observation(*r));
        b.gw_missing = b.gw.empty();
    }
    for (const auto* r : ds.series(well_id, kNapl))
        if (!r->synthetic) b.napl.push_back(observation(*r));
    return b;
}

std::vector<WellBundle> well_report(const Analysis& analysis, bool include_gw) {
    std::vector<std::string> ids;
    for (const auto& w : analysis.dataset.wells()) ids.push_back(w.well_id);
    std::sort(ids.begin(), ids.end());
    std::vector<WellBundle> out;
    for (const auto& id : ids) out.push_back(well_bundle(analysis, id, include_gw));
    return out;
}

Snapshot latest_snapshot(const Analysis& analysis, const ind::Thresholds& thresholds, const ind::Cutoffs& cutoffs,
                         const SliceOptions& options) {
    const auto& ds = analysis.dataset;
    Snapshot s;
    s.interval = ds.intervals().size() - 1;
    s.label = ds.intervals().back().label;
    s.solutes = ds.solutes();
    for (const auto& sol : s.solutes) {
        try {
            s.grids.push_back(slice_grid(analysis, sol, s.interval, options));
            s.failures.emplace_back();
        } catch (const Error& e) {
            s.grids.emplace_back();
            s.failures.push_back(e.what());
        }
    }
    for (auto mode : {ind::Mode::Trend, ind::Mode::ThresholdAbsolute, ind::Mode::ThresholdStatistical}) {
        s.matrices.push_back(ind::indicator_matrix(analysis, s.interval, mode, thresholds, cutoffs));
    }
    return s;
}

json::Json to_json(const SliceGrid& g) {
    using json::Json;
    Json j;
    j["interval"] = g.interval;
    j["label"] = g.label;
    j["t"] = Date(static_cast<int>(std::floor(g.t))).iso();
    j["t_days"] = g.t;
    j["solute"] = g.solute;
    j["units"] = g.units;
    j["nx"] = g.nx;
    j["ny"] = g.ny;
    j["xs"] = g.xs;
    j["ys"] = g.ys;
    j["values"] = g.values;
    Json mask = Json::array();
    for (bool m : g.mask) mask.push_back(m ? 1 : 0);
    j["mask"] = std::move(mask);
    if (auto r = g.range()) j["range"] = {{"min", r->first}, {"max", r->second}};
    Json wells = Json::array();
    for (const auto& w : g.wells) wells.push_back({{"well_id", w.well_id}, {"x", w.x}, {"y", w.y}});
    j["wells"] = std::move(wells);
    Json samples = Json::array();
    for (const auto& s : g.samples) {
        samples.push_back({{"well_id", s.well_id},
                           {"x", s.x},
                           {"y", s.y},
                           {"date", s.date},
                           {"raw", s.raw},
                           {"working", s.working},
                           {"censored", s.censored},
                           {"synthetic", s.synthetic}});
    }
    j["samples"] = std::move(samples);
    Json napl = Json::array();
    for (const auto& n : g.napl) napl.push_back({{"well_id", n.well_id}, {"x", n.x}, {"y", n.y}, {"thickness", n.thickness}});
    j["napl"] = std::move(napl);
    Json flow;
    flow["interval"] = g.flow.interval;
    Json vs = Json::array();
    for (const auto& v : g.flow.vectors) {
        Json o{{"well_id", v.well_id}};
        for (const auto& w : g.wells) {
            if (w.well_id == v.well_id) {
                o["x"] = w.x;
                o["y"] = w.y;
            }
        }
        o["theta_degrees"] = v.theta;
        o["R"] = v.R;
        o["a"] = v.plane.a;
        o["b"] = v.plane.b;
        o["c"] = v.plane.c;
        vs.push_back(std::move(o));
    }
    flow["vectors"] = std::move(vs);
    Json sup = Json::array();
    for (const auto& s : g.flow.suppressed) sup.push_back({{"well_id", s.well_id}, {"reason", s.reason}, {"message", s.message}});
    flow["suppressed"] = std::move(sup);
    j["flow"] = std::move(flow);
    return j;
}

json::Json to_json(const FrameSequence& f, std::size_t offset, std::size_t limit) {
    using json::Json;
    Json j;
    j["solute"] = f.solute;
    j["units"] = f.units;
    j["total"] = f.frames.size();
    offset = std::min(offset, f.frames.size());
    const std::size_t end = offset + std::min(limit, f.frames.size() - offset);
    j["offset"] = offset;
    j["count"] = end - offset;
    j["color_scale"] = {{"min", f.scale.min}, {"max", f.scale.max}};
    Json frames = Json::array();
    for (std::size_t i = offset; i < end; ++i) frames.push_back(to_json(f.frames[i]));
    j["frames"] = std::move(frames);
    return j;
}

namespace {

json::Json obs_json(std::span<const Observation> obs) {
    json::Json a = json::Json::array();
    for (const auto& o : obs) {
        a.push_back({{"date", o.date},
                     {"days", o.days},
                     {"raw", o.raw},
                     {"working", o.working},
                     {"censored", o.censored},
                     {"synthetic", o.synthetic}});
    }
    return a;
}

} // namespace

json::Json to_json(const WellBundle& b) {
    using json::Json;
    Json j;
    j["well_id"] = b.well_id;
    j["x"] = b.x;
    j["y"] = b.y;
    Json sol = Json::array();
    for (const auto& s : b.solutes) {
        Json o{{"solute", s.solute}, {"units", s.units}, {"observations", obs_json(s.observations)}};
        if (s.fit)
            o["trend"] = json::to_json(*s.fit);
        else
            o["failure"] = s.failure.empty() ? "no samples" : s.failure;
        sol.push_back(std::move(o));
    }
    j["solutes"] = std::move(sol);
    if (b.gw_requested) {
        j["gw_missing"] = b.gw_missing;
        if (!b.gw_missing) j["gw"] = obs_json(b.gw);
    }
    if (!b.napl.empty()) j["napl"] = obs_json(b.napl);
    return j;
}

json::Json to_json(std::span<const WellBundle> report) {
    json::Json a = json::Json::array();
    for (const auto& b : report) a.push_back(to_json(b));
    return {{"wells", std::move(a)}};
}

json::Json to_json(const Snapshot& s, const Dataset& dataset) {
    using json::Json;
    Json j;
    j["interval"] = s.interval;
    j["label"] = s.label;
    Json grids = Json::array();
    for (std::size_t i = 0; i < s.solutes.size(); ++i) {
        Json o{{"solute", s.solutes[i]}};
        if (s.grids[i])
            o["grid"] = to_json(*s.grids[i]);
        else
            o["failure"] = s.failures[i];
        grids.push_back(std::move(o));
    }
    j["grids"] = std::move(grids);
    Json mats = Json::array();
    for (const auto& m : s.matrices) mats.push_back(json::to_json(m, dataset));
    j["matrices"] = std::move(mats);
    return j;
}

} // namespace plume::exports
