#include "plume/serialize.hpp"

#include <cmath>
#include <set>

#include "plume/csv.hpp"
#include "plume/errors.hpp"

namespace plume::json {

namespace {

Json nullable(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

std::string iso_of(double days) { return Date(static_cast<int>(std::floor(days))).iso(); }

std::vector<double> doubles(const Json& j) {
    std::vector<double> out;
    out.reserve(j.size());
    for (const auto& v : j) out.push_back(v.is_null() ? std::nan("") : v.get<double>());
    return out;
}

Severity parse_severity(const std::string& s) { return s == "error" ? Severity::Error : Severity::Warning; }

double positive_number(const Json& j, const char* key) {
    if (!j.is_number()) throw ArgumentError(std::string(key) + " must be a number");
    return j.get<double>();
}

int integer(const Json& j, const char* key) {
    if (!j.is_number_integer()) throw ArgumentError(std::string(key) + " must be an integer");
    return j.get<int>();
}

} // namespace

Json to_json(const Diagnostic& d) {
    Json j;
    j["severity"] = to_string(d.severity);
    j["code"] = d.code;
    j["message"] = d.message;
    if (!d.file.empty()) j["file"] = d.file;
    if (d.row) j["row"] = d.row;
    return j;
}

Json to_json(std::span<const Diagnostic> diags) {
    Json a = Json::array();
    for (const auto& d : diags) a.push_back(to_json(d));
    return a;
}

Diagnostic diagnostic_from_json(const Json& j) {
    Diagnostic d;
    d.severity = parse_severity(j.at("severity").get<std::string>());
    d.code = j.at("code").get<std::string>();
    d.message = j.at("message").get<std::string>();
    d.file = j.value("file", std::string{});
    d.row = j.value("row", std::size_t{0});
    return d;
}

Json to_json(const Interval& iv, std::size_t index) {
    Json j;
    j["index"] = index;
    j["label"] = iv.label;
    j["start"] = iv.start.iso();
    j["end"] = iv.end.iso();
    j["midpoint"] = iso_of(iv.midpoint());
    j["midpoint_days"] = iv.midpoint();
    return j;
}

Json to_json(const trend::MannKendallResult& mk) {
    Json j;
    j["S"] = mk.S;
    j["tau"] = mk.tau;
    j["var_S"] = mk.var_S;
    j["p_value"] = mk.p_value;
    return j;
}

Json to_json(const trend::WellTrendFit& fit) {
    Json j;
    j["well_id"] = fit.well_id;
    j["solute"] = fit.solute;
    j["scale"] = trend::to_string(fit.scale);
    Json times = Json::array();
    for (double t : fit.eval_times) times.push_back(iso_of(t));
    j["eval_times"] = std::move(times);
    j["eval_days"] = fit.eval_times;
    j["fitted"] = fit.fitted;
    j["se"] = fit.se;
    j["derivative"] = fit.derivative;
    Json lo = Json::array(), hi = Json::array(), level = Json::array();
    for (std::size_t i = 0; i < fit.eval_times.size(); ++i) {
        level.push_back(fit.level(i));
        lo.push_back(fit.lower(i));
        hi.push_back(fit.upper(i));
    }
    j["level"] = std::move(level);
    j["lower"] = std::move(lo);
    j["upper"] = std::move(hi);
    j["h"] = fit.h;
    j["n"] = fit.n;
    j["sigma2"] = fit.sigma2;
    j["mk"] = to_json(fit.mk);
    j["warnings"] = fit.warnings;
    return j;
}

trend::WellTrendFit trend_from_json(const Json& j) {
    trend::WellTrendFit f;
    f.well_id = j.at("well_id").get<std::string>();
    f.solute = j.at("solute").get<std::string>();
    f.scale = trend::parse_scale(j.at("scale").get<std::string>());
    f.eval_times = doubles(j.at("eval_days"));
    f.fitted = doubles(j.at("fitted"));
    f.se = doubles(j.at("se"));
    f.derivative = doubles(j.at("derivative"));
    f.h = j.at("h").get<double>();
    f.n = j.at("n").get<std::size_t>();
    f.sigma2 = j.at("sigma2").get<double>();
    const auto& mk = j.at("mk");
    f.mk.S = mk.at("S").get<std::int64_t>();
    f.mk.tau = mk.at("tau").get<double>();
    f.mk.var_S = mk.at("var_S").get<double>();
    f.mk.p_value = mk.at("p_value").get<double>();
    f.warnings = j.value("warnings", std::vector<std::string>{});
    return f;
}

Json to_json(const flow::FlowField& field, const Dataset& dataset) {
    Json j;
    j["interval"] = field.interval;
    if (field.interval < dataset.intervals().size()) j["label"] = dataset.intervals()[field.interval].label;
    Json vs = Json::array();
    for (const auto& v : field.vectors) {
        Json o;
        o["well_id"] = v.well_id;
        const auto* w = dataset.find_well(v.well_id);
        if (w) {
            o["x"] = w->x;
            o["y"] = w->y;
        }
        o["theta_degrees"] = v.theta;
        o["R"] = v.R;
        o["a"] = v.plane.a;
        o["b"] = v.plane.b;
        o["c"] = v.plane.c;
        vs.push_back(std::move(o));
    }
    j["vectors"] = std::move(vs);
    Json sup = Json::array();
    for (const auto& s : field.suppressed) {
        sup.push_back({{"well_id", s.well_id}, {"reason", s.reason}, {"message", s.message}});
    }
    j["suppressed"] = std::move(sup);
    return j;
}

Json to_json(const st::BSplineBasis& b) {
    Json j;
    j["lo"] = b.lo();
    j["hi"] = b.hi();
    j["count"] = b.count();
    j["degree"] = b.degree();
    j["knots"] = b.knots();
    return j;
}

st::BSplineBasis basis_from_json(const Json& j) {
    return st::BSplineBasis::from_range(j.at("lo").get<double>(), j.at("hi").get<double>(), j.at("count").get<int>(),
                                        j.at("degree").get<int>());
}

Json to_json(const st::STModel& m) {
    Json j;
    j["solute"] = m.solute;
    j["units"] = m.units;
    j["basis"] = {{"x", to_json(m.basis.x)}, {"y", to_json(m.basis.y)}, {"t", to_json(m.basis.t)}};
    j["order"] = m.order;
    j["lambda"] = m.lambda;
    j["alpha"] = std::vector<double>(m.alpha.data(), m.alpha.data() + m.alpha.size());
    j["sigma2"] = m.sigma2;
    j["edf"] = m.edf;
    j["rss"] = m.rss;
    j["gcv"] = nullable(m.gcv);
    j["penalty_norm"] = m.penalty_norm;
    j["n"] = m.n;
    j["log_scale"] = m.log_scale;
    return j;
}

st::STModel model_from_json(const Json& j) {
    st::STModel m;
    m.solute = j.at("solute").get<std::string>();
    m.units = j.at("units").get<std::string>();
    const auto& b = j.at("basis");
    m.basis.x = basis_from_json(b.at("x"));
    m.basis.y = basis_from_json(b.at("y"));
    m.basis.t = basis_from_json(b.at("t"));
    m.order = j.at("order").get<int>();
    m.lambda = j.at("lambda").get<double>();
    auto alpha = doubles(j.at("alpha"));
    if (alpha.size() != m.basis.size()) throw ParseError("model alpha length does not match its basis");
    m.alpha = Eigen::Map<Eigen::VectorXd>(alpha.data(), static_cast<Eigen::Index>(alpha.size()));
    m.sigma2 = j.at("sigma2").get<double>();
    m.edf = j.at("edf").get<double>();
    m.rss = j.at("rss").get<double>();
    m.gcv = j.at("gcv").is_null() ? std::nan("") : j.at("gcv").get<double>();
    m.penalty_norm = j.at("penalty_norm").get<double>();
    m.n = j.at("n").get<std::size_t>();
    m.log_scale = j.at("log_scale").get<bool>();
    return m;
}

Json to_json(const st::LambdaSearch& s) {
    Json j;
    j["lambda"] = s.lambda;
    j["single_value"] = s.single_value;
    Json path = Json::array();
    for (const auto& p : s.path) {
        path.push_back({{"lambda", p.lambda},
                        {"gcv", nullable(p.gcv)},
                        {"rss", p.rss},
                        {"edf", p.edf},
                        {"penalty_norm", p.penalty_norm},
                        {"admissible", p.admissible}});
    }
    j["path"] = std::move(path);
    return j;
}

st::LambdaSearch search_from_json(const Json& j) {
    st::LambdaSearch s;
    s.lambda = j.at("lambda").get<double>();
    s.single_value = j.at("single_value").get<bool>();
    for (const auto& p : j.at("path")) {
        st::LambdaPoint lp;
        lp.lambda = p.at("lambda").get<double>();
        lp.gcv = p.at("gcv").is_null() ? std::nan("") : p.at("gcv").get<double>();
        lp.rss = p.at("rss").get<double>();
        lp.edf = p.at("edf").get<double>();
        lp.penalty_norm = p.at("penalty_norm").get<double>();
        lp.admissible = p.at("admissible").get<bool>();
        s.path.push_back(lp);
    }
    return s;
}

Json to_json(const ind::IndicatorCell& c) {
    Json j;
    j["well_id"] = c.well_id;
    j["solute"] = c.solute;
    j["class"] = ind::to_string(c.cls);
    if (c.slope) j["slope"] = *c.slope;
    if (c.value) j["value"] = *c.value;
    if (c.upper) j["upper"] = *c.upper;
    if (!c.note.empty()) j["note"] = c.note;
    return j;
}

Json to_json(const ind::IndicatorMatrix& m, const Dataset& dataset) {
    Json j;
    j["interval"] = m.interval;
    j["label"] = dataset.intervals()[m.interval].label;
    j["t"] = iso_of(m.t);
    j["t_days"] = m.t;
    j["mode"] = ind::to_string(m.mode);
    j["rows"] = m.wells;
    j["cols"] = m.solutes;
    Json cells = Json::array();
    for (const auto& c : m.cells) cells.push_back(to_json(c));
    j["cells"] = std::move(cells);
    j["diagnostics"] = to_json(m.diagnostics);
    return j;
}

Json to_json(const AnalysisOptions& o) {
    Json j;
    j["granularity"] = to_string(o.dataset.granularity);
    j["nd_fraction"] = o.dataset.policy.nd_fraction;
    j["napl_substitute"] = o.dataset.policy.napl_substitute;
    j["aquifer"] = o.dataset.aquifer;
    j["scale"] = trend::to_string(o.trend.scale);
    j["bandwidth"] = o.trend.fixed_h ? Json(*o.trend.fixed_h) : Json("auto");
    if (!o.trend.bandwidths.empty()) j["bandwidth_grid"] = o.trend.bandwidths;
    j["basis"] = {o.smoother.mx, o.smoother.my, o.smoother.mt};
    j["degree"] = o.smoother.degree;
    j["order"] = o.smoother.order;
    j["lambda"] = o.smoother.lambda ? Json(*o.smoother.lambda) : Json("auto");
    if (!o.smoother.lambda_grid.empty()) j["lambda_grid"] = o.smoother.lambda_grid;
    j["cutoffs"] = {{"stable", o.cutoffs.stable}, {"strong", o.cutoffs.strong}};
    return j;
}

AnalysisOptions options_from_json(const Json& j) {
    if (!j.is_object()) throw ArgumentError("options must be a JSON object");
    static const std::set<std::string> known{"granularity", "nd_fraction", "napl_substitute", "aquifer",
                                             "scale",       "bandwidth",   "bandwidth_grid",  "basis",
                                             "degree",      "order",       "lambda",          "lambda_grid",
                                             "cutoffs"};
    for (const auto& [k, v] : j.items()) {
        if (!known.count(k)) throw ArgumentError("unknown option '" + k + "'");
    }
    AnalysisOptions o;
    if (j.contains("granularity")) {
        if (!j["granularity"].is_string()) throw ArgumentError("granularity must be a string");
        o.dataset.granularity = parse_granularity(j["granularity"].get<std::string>());
    }
    if (j.contains("nd_fraction")) o.dataset.policy.nd_fraction = positive_number(j["nd_fraction"], "nd_fraction");
    if (j.contains("napl_substitute")) {
        if (!j["napl_substitute"].is_boolean()) throw ArgumentError("napl_substitute must be a boolean");
        o.dataset.policy.napl_substitute = j["napl_substitute"].get<bool>();
    }
    o.dataset.policy.check();
    if (j.contains("aquifer")) {
        if (!j["aquifer"].is_string()) throw ArgumentError("aquifer must be a string");
        o.dataset.aquifer = j["aquifer"].get<std::string>();
    }
    if (j.contains("scale")) {
        if (!j["scale"].is_string()) throw ArgumentError("scale must be a string");
        o.trend.scale = trend::parse_scale(j["scale"].get<std::string>());
    }
    if (j.contains("bandwidth") && !(j["bandwidth"].is_string() && j["bandwidth"] == "auto")) {
        double h = positive_number(j["bandwidth"], "bandwidth");
        if (!(h > 0.0) || !std::isfinite(h)) throw ArgumentError("bandwidth must be positive");
        o.trend.fixed_h = h;
    }
    if (j.contains("bandwidth_grid")) {
        if (!j["bandwidth_grid"].is_array() || j["bandwidth_grid"].empty()) {
            throw ArgumentError("bandwidth_grid must be a nonempty array");
        }
        for (const auto& v : j["bandwidth_grid"]) {
            double h = positive_number(v, "bandwidth_grid");
            if (!(h > 0.0) || !std::isfinite(h)) throw ArgumentError("bandwidths must be positive");
            o.trend.bandwidths.push_back(h);
        }
    }
    if (j.contains("basis")) {
        const auto& b = j["basis"];
        if (!b.is_array() || b.size() != 3) throw ArgumentError("basis must be [mx, my, mt]");
        o.smoother.mx = integer(b[0], "basis");
        o.smoother.my = integer(b[1], "basis");
        o.smoother.mt = integer(b[2], "basis");
    }
    if (j.contains("degree")) o.smoother.degree = integer(j["degree"], "degree");
    if (j.contains("order")) o.smoother.order = integer(j["order"], "order");
    if (o.smoother.degree < 1 || o.smoother.degree > 7) throw ArgumentError("degree must be between 1 and 7");
    if (o.smoother.order < 1 || o.smoother.order > 3) throw ArgumentError("order must be 1, 2 or 3");
    const int need = o.smoother.degree + 1;
    if (o.smoother.mx < need || o.smoother.my < need || (o.smoother.mt != 0 && o.smoother.mt < need)) {
        throw ArgumentError("basis counts must be at least degree + 1 (mt may be 0 for automatic)");
    }
    if (o.smoother.mx <= o.smoother.order || o.smoother.my <= o.smoother.order) {
        throw ArgumentError("basis counts must exceed the penalty order");
    }
    if (j.contains("lambda") && !(j["lambda"].is_string() && j["lambda"] == "auto")) {
        double l = positive_number(j["lambda"], "lambda");
        if (!(l >= 0.0) || !std::isfinite(l)) throw ArgumentError("lambda must be nonnegative");
        o.smoother.lambda = l;
    }
    if (j.contains("lambda_grid")) {
        if (!j["lambda_grid"].is_array() || j["lambda_grid"].empty()) {
            throw ArgumentError("lambda_grid must be a nonempty array");
        }
        for (const auto& v : j["lambda_grid"]) {
            double l = positive_number(v, "lambda_grid");
            if (!(l >= 0.0) || !std::isfinite(l)) throw ArgumentError("lambda_grid values must be nonnegative");
            o.smoother.lambda_grid.push_back(l);
        }
    }
    if (j.contains("cutoffs")) {
        const auto& c = j["cutoffs"];
        if (!c.is_object()) throw ArgumentError("cutoffs must be an object");
        for (const auto& [k, v] : c.items()) {
            if (k != "stable" && k != "strong") throw ArgumentError("unknown cutoff '" + k + "'");
        }
        if (c.contains("stable")) o.cutoffs.stable = positive_number(c["stable"], "cutoffs.stable");
        if (c.contains("strong")) o.cutoffs.strong = positive_number(c["strong"], "cutoffs.strong");
    }
    o.cutoffs.check();
    return o;
}

Json summary(const Dataset& dataset) {
    Json j;
    Json wells = Json::array();
    for (const auto& w : dataset.wells()) {
        Json o{{"well_id", w.well_id}, {"x", w.x}, {"y", w.y}};
        if (dataset.has_aquifer()) o["aquifer"] = w.aquifer;
        wells.push_back(std::move(o));
    }
    j["wells"] = std::move(wells);
    Json solutes = Json::array();
    for (const auto& s : dataset.solutes()) solutes.push_back({{"name", s}, {"units", dataset.units_of(s)}});
    j["solutes"] = std::move(solutes);
    Json ivs = Json::array();
    for (std::size_t k = 0; k < dataset.intervals().size(); ++k) ivs.push_back(to_json(dataset.intervals()[k], k));
    j["intervals"] = std::move(ivs);
    bool has_gw = false, has_napl = false;
    for (const auto& r : dataset.records()) {
        has_gw = has_gw || r.constituent == kGroundwater;
        has_napl = has_napl || (r.constituent == kNapl && !r.synthetic);
    }
    j["has_gw"] = has_gw;
    j["has_napl"] = has_napl;
    j["aquifer"] = dataset.options().aquifer;
    return j;
}

ind::Thresholds parse_thresholds(std::string_view text) {
    ind::Thresholds out;
    const std::string s = csv::trim(text);
    if (s.empty()) return out;
    auto put = [&](const std::string& name, double v) {
        if (name.empty()) throw ArgumentError("threshold with an empty solute name");
        if (!(v > 0.0) || !std::isfinite(v)) throw ArgumentError("threshold for '" + name + "' must be positive");
        out[name] = v;
    };
    if (s.front() == '{') {
        Json j;
        try {
            j = Json::parse(s);
        } catch (const nlohmann::json::exception& e) {
            throw ArgumentError(std::string("thresholds: ") + e.what());
        }
        for (const auto& [k, v] : j.items()) {
            if (!v.is_number()) throw ArgumentError("threshold for '" + k + "' must be a number");
            put(k, v.get<double>());
        }
        return out;
    }
    std::size_t pos = 0;
    while (pos <= s.size()) {
        auto comma = s.find(',', pos);
        if (comma == std::string::npos) comma = s.size();
        std::string item = csv::trim(std::string_view(s).substr(pos, comma - pos));
        pos = comma + 1;
        if (item.empty()) continue;
        auto colon = item.rfind(':');
        if (colon == std::string::npos) throw ArgumentError("threshold '" + item + "' is not NAME:VALUE");
        const std::string num = csv::trim(std::string_view(item).substr(colon + 1));
        char* end = nullptr;
        double v = std::strtod(num.c_str(), &end);
        if (num.empty() || *end) throw ArgumentError("threshold '" + item + "' has a malformed value");
        put(csv::trim(std::string_view(item).substr(0, colon)), v);
    }
    return out;
}

} // namespace plume::json
