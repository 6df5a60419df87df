#include "plume/analysis.hpp"

#include <algorithm>
#include <fstream>

#include "plume/errors.hpp"
#include "plume/serialize.hpp"

namespace plume {

const TrendEntry* Analysis::trend_entry(const std::string& well, const std::string& solute) const {
    auto it = trends.find({well, solute});
    return it == trends.end() ? nullptr : &it->second;
}

const trend::WellTrendFit* Analysis::trend(const std::string& well, const std::string& solute) const {
    const auto* e = trend_entry(well, solute);
    return e && e->fit ? &*e->fit : nullptr;
}

const st::STModel* Analysis::model(const std::string& solute) const {
    auto it = models.find(solute);
    return it == models.end() || !it->second.model ? nullptr : &*it->second.model;
}

flow::FlowField Analysis::flow(std::size_t interval) const {
    const auto& iv = dataset.intervals();
    if (interval >= iv.size()) {
        throw IntervalRangeError("interval " + std::to_string(interval) + " out of range [0, " +
                                 std::to_string(iv.size() - 1) + "]");
    }
    return flow::flow_field(dataset, triangulation ? &*triangulation : nullptr, interval);
}

namespace {

struct TrendTask {
    std::string well;
    std::string solute;
};

TrendEntry fit_one(const Dataset& ds, const TrendTask& task, const trend::TrendOptions& opts, double floor_value) {
    TrendEntry e;
    const auto series = ds.series(task.well, task.solute);
    bool any = false, all_cens = true;
    std::vector<double> times, values;
    for (const auto* r : series) {
        if (!r->synthetic) {
            any = true;
            all_cens = all_cens && r->censored;
        }
        times.push_back(r->date.days());
        values.push_back(r->working);
    }
    e.all_censored = any && all_cens;
    if (series.empty()) {
        e.failure = "no samples";
        return e;
    }
    std::vector<double> mids;
    const auto first = ds.interval_of(series.front()->date);
    const auto last = ds.interval_of(series.back()->date);
    for (auto k = first; k <= last; ++k) mids.push_back(ds.intervals()[k].midpoint());
    try {
        e.fit = trend::fit_well_trend(task.well, task.solute, times, values, mids, opts, floor_value);
    } catch (const std::exception& ex) {
        e.failure = ex.what();
    }
    return e;
}

} // namespace

Analysis run_analysis(Dataset dataset, const AnalysisOptions& options) {
    options.cutoffs.check();
    Analysis a;
    a.dataset = std::move(dataset);
    a.options = options;
    a.options.dataset = a.dataset.options();
    a.diagnostics = a.dataset.diagnostics();
    const Dataset& ds = a.dataset;

    try {
        a.triangulation = flow::well_triangulation(ds);
    } catch (const Error& e) {
        a.triangulation_error = e.what();
        a.diagnostics.push_back({Severity::Warning, "FLOW_DISABLED", std::string("flow vectors disabled: ") + e.what(),
                                 "wells.csv", 0});
    }

    std::vector<std::string> wells;
    for (const auto& w : ds.wells()) wells.push_back(w.well_id);
    std::sort(wells.begin(), wells.end());

    std::vector<TrendTask> tasks;
    for (const auto& w : wells)
        for (const auto& s : ds.solutes()) tasks.push_back({w, s});
    std::map<std::string, double> floors;
    for (const auto& s : ds.solutes()) floors[s] = st::log_floor(ds, s);

    std::vector<TrendEntry> entries(tasks.size());
    const auto count = static_cast<std::int64_t>(tasks.size());
#pragma omp parallel for schedule(dynamic)
    for (std::int64_t i = 0; i < count; ++i) {
        const auto& task = tasks[static_cast<std::size_t>(i)];
        entries[static_cast<std::size_t>(i)] = fit_one(ds, task, options.trend, floors.at(task.solute));
    }
    for (std::size_t i = 0; i < tasks.size(); ++i) {
        a.trends.emplace(std::make_pair(tasks[i].well, tasks[i].solute), std::move(entries[i]));
    }

    for (const auto& s : ds.solutes()) {
        ModelEntry m;
        try {
            auto fitted = st::fit_solute(ds, s, options.smoother);
            m.model = std::move(fitted.model);
            m.search = std::move(fitted.search);
            m.warnings = std::move(fitted.warnings);
        } catch (const Error& e) {
            m.failure = e.what();
            a.diagnostics.push_back({Severity::Warning, "FIT_FAILED", s + ": " + e.what(), "", 0});
        }
        for (const auto& w : m.warnings) a.diagnostics.push_back({Severity::Warning, "SMOOTHER", s + ": " + w, "", 0});
        a.models.emplace(s, std::move(m));
    }
    return a;
}

void save_analysis(const Analysis& a, const std::filesystem::path& dir) {
    using json::Json;
    std::filesystem::create_directories(dir / "dataset");
    write_canonical(a.dataset, dir / "dataset");

    Json j;
    j["format"] = 1;
    j["options"] = json::to_json(a.options);
    j["triangulation_error"] = a.triangulation_error;
    Json trends = Json::array();
    for (const auto& [key, e] : a.trends) {
        Json t{{"well_id", key.first}, {"solute", key.second}, {"all_censored", e.all_censored}};
        if (e.fit)
            t["fit"] = json::to_json(*e.fit);
        else
            t["failure"] = e.failure;
        trends.push_back(std::move(t));
    }
    j["trends"] = std::move(trends);
    Json models = Json::array();
    for (const auto& s : a.dataset.solutes()) {
        const auto& m = a.models.at(s);
        Json o{{"solute", s}};
        if (m.model)
            o["model"] = json::to_json(*m.model);
        else
            o["failure"] = m.failure;
        o["search"] = json::to_json(m.search);
        o["warnings"] = m.warnings;
        models.push_back(std::move(o));
    }
    j["models"] = std::move(models);
    j["diagnostics"] = json::to_json(a.diagnostics);
    write_file(dir / "analysis.json", j.dump(1));
}

Analysis load_analysis(const std::filesystem::path& dir) {
    using json::Json;
    const auto path = dir / "analysis.json";
    if (!std::filesystem::exists(path)) throw IoError("no analysis at " + dir.string());
    Json j;
    try {
        j = Json::parse(read_file(path));
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(path.string() + ": " + e.what());
    }

    Analysis a;
    try {
        a.options = json::options_from_json(j.at("options"));
        a.dataset = load_dataset(dir / "dataset", a.options.dataset);
        a.triangulation_error = j.value("triangulation_error", std::string{});
        if (a.triangulation_error.empty()) a.triangulation = flow::well_triangulation(a.dataset);
        for (const auto& t : j.at("trends")) {
            TrendEntry e;
            e.all_censored = t.at("all_censored").get<bool>();
            if (t.contains("fit"))
                e.fit = json::trend_from_json(t["fit"]);
            else
                e.failure = t.value("failure", std::string{});
            a.trends.emplace(std::make_pair(t.at("well_id").get<std::string>(), t.at("solute").get<std::string>()),
                             std::move(e));
        }
        for (const auto& o : j.at("models")) {
            ModelEntry m;
            if (o.contains("model"))
                m.model = json::model_from_json(o["model"]);
            else
                m.failure = o.value("failure", std::string{});
            m.search = json::search_from_json(o.at("search"));
            m.warnings = o.value("warnings", std::vector<std::string>{});
            a.models.emplace(o.at("solute").get<std::string>(), std::move(m));
        }
        for (const auto& d : j.at("diagnostics")) a.diagnostics.push_back(json::diagnostic_from_json(d));
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
    return a;
}

} // namespace plume
