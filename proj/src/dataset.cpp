#include "plume/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "plume/csv.hpp"

namespace plume {

using json = nlohmann::json;

bool is_reserved_constituent(std::string_view name) { return name == kGroundwater || name == kNapl; }

namespace {

std::string row_ref(std::size_t row) { return row ? "row " + std::to_string(row) + ": " : std::string{}; }

bool parse_decimal(std::string_view s, double& out) {
    if (s.empty()) return false;
    if (s.front() == '+') s.remove_prefix(1);
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc{} && ptr == s.data() + s.size() && std::isfinite(out);
}

std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
    return out;
}

} // namespace

ParsedValue parse_value(std::string_view text, std::size_t row) {
    std::string s = csv::trim(text);
    if (s.size() >= 2 && (s[0] == 'n' || s[0] == 'N') && (s[1] == 'd' || s[1] == 'D')) {
        std::string rest = csv::trim(std::string_view(s).substr(2));
        if (rest.empty() || rest[0] != '<') {
            throw ParseError(row_ref(row) + "malformed non-detect token '" + std::string(text) + "'");
        }
        std::string num = csv::trim(std::string_view(rest).substr(1));
        double x = 0.0;
        if (!parse_decimal(num, x)) {
            throw ParseError(row_ref(row) + "malformed detection threshold in '" + std::string(text) + "'");
        }
        if (x <= 0.0) {
            throw ValidationError(row_ref(row) + "detection threshold must be positive in '" + std::string(text) + "'");
        }
        return {x, true};
    }
    double v = 0.0;
    if (!parse_decimal(s, v)) throw ParseError(row_ref(row) + "cannot parse value '" + std::string(text) + "'");
    return {v, false};
}

void SubstitutionPolicy::check() const {
    if (nd_fraction != 0.5 && nd_fraction != 1.0) {
        throw ArgumentError("nd_fraction must be 0.5 or 1.0, got " + format_double(nd_fraction));
    }
}

Granularity parse_granularity(std::string_view s) {
    auto l = lower(s);
    if (l == "month") return Granularity::Month;
    if (l == "quarter") return Granularity::Quarter;
    if (l == "year") return Granularity::Year;
    throw ArgumentError("unknown granularity '" + std::string(s) + "' (month|quarter|year)");
}

std::string_view to_string(Granularity g) {
    switch (g) {
    case Granularity::Month: return "month";
    case Granularity::Quarter: return "quarter";
    case Granularity::Year: return "year";
    }
    return "quarter";
}

std::string_view to_string(Severity s) { return s == Severity::Error ? "error" : "warning"; }

bool has_errors(std::span<const Diagnostic> diags) {
    return std::any_of(diags.begin(), diags.end(), [](const Diagnostic& d) { return d.severity == Severity::Error; });
}

std::vector<Interval> bin_intervals(std::span<const Date> dates, Granularity granularity) {
    if (dates.empty()) throw ArgumentError("bin_intervals needs at least one date");
    auto [lo, hi] = std::minmax_element(dates.begin(), dates.end());

    const unsigned step = granularity == Granularity::Month ? 1 : granularity == Granularity::Quarter ? 3 : 12;
    int year = lo->year();
    unsigned month = granularity == Granularity::Year ? 1 : (lo->month() - 1) / step * step + 1;

    std::vector<Interval> out;
    for (;;) {
        Date start = Date::from_ymd(year, month, 1);
        if (start > *hi) break;
        int ny = year;
        unsigned nm = month + step;
        if (nm > 12) {
            nm -= 12;
            ++ny;
        }
        Date end = Date::from_ymd(ny, nm, 1);
        char buf[32];
        switch (granularity) {
        case Granularity::Month: std::snprintf(buf, sizeof buf, "%04d-%02u", year, month); break;
        case Granularity::Quarter: std::snprintf(buf, sizeof buf, "%04dQ%u", year, (month - 1) / 3 + 1); break;
        case Granularity::Year: std::snprintf(buf, sizeof buf, "%04d", year); break;
        }
        out.push_back({start, end, buf});
        year = ny;
        month = nm;
    }
    return out;
}

std::vector<Polyline> parse_overlays(std::string_view json_text) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("overlays.json: ") + e.what());
    }
    const json* features = &doc;
    if (doc.is_object()) {
        if (!doc.contains("features")) throw ParseError("overlays.json: expected a FeatureCollection");
        features = &doc.at("features");
    }
    if (!features->is_array()) throw ParseError("overlays.json: features must be an array");

    auto read_line = [](const json& coords) {
        std::vector<Point2> pts;
        for (const auto& c : coords) {
            if (!c.is_array() || c.size() < 2) throw ParseError("overlays.json: coordinate must be [x, y]");
            pts.push_back({c[0].get<double>(), c[1].get<double>()});
        }
        return pts;
    };

    std::vector<Polyline> out;
    for (std::size_t i = 0; i < features->size(); ++i) {
        const auto& f = (*features)[i];
        const json& geom = f.contains("geometry") ? f.at("geometry") : f;
        std::string name;
        if (f.contains("properties") && f["properties"].is_object() && f["properties"].contains("name")) {
            name = f["properties"]["name"].get<std::string>();
        } else {
            name = "feature-" + std::to_string(i);
        }
        const std::string type = geom.value("type", "");
        const json& coords = geom.at("coordinates");
        if (type == "LineString") {
            out.push_back({name, read_line(coords)});
        } else if (type == "MultiLineString" || type == "Polygon") {
            for (const auto& part : coords) out.push_back({name, read_line(part)});
        } else {
            throw ParseError("overlays.json: unsupported geometry type '" + type + "'");
        }
    }
    return out;
}

namespace {

std::map<std::string, std::size_t> header_index(const csv::Row& header) {
    std::map<std::string, std::size_t> idx;
    for (std::size_t i = 0; i < header.size(); ++i) idx[lower(csv::trim(header[i]))] = i;
    return idx;
}

std::size_t require_column(const std::map<std::string, std::size_t>& idx, const std::string& name,
                           const std::string& file) {
    auto it = idx.find(lower(name));
    if (it == idx.end()) throw ParseError(file + ": missing required column '" + name + "'");
    return it->second;
}

} // namespace

RawTables parse_tables(std::string_view monitoring_csv, std::string_view wells_csv,
                       std::optional<std::string_view> overlays_json) {
    RawTables t;

    auto mrows = csv::parse(monitoring_csv);
    if (mrows.empty()) throw ParseError("monitoring.csv: header row required");
    {
        auto idx = header_index(mrows[0]);
        const std::string file = "monitoring.csv";
        auto c_well = require_column(idx, "WellID", file);
        auto c_date = require_column(idx, "SampleDate", file);
        auto c_con = require_column(idx, "Constituent", file);
        auto c_res = require_column(idx, "Result", file);
        auto c_units = require_column(idx, "Units", file);
        const std::size_t need = std::max({c_well, c_date, c_con, c_res, c_units}) + 1;

        for (std::size_t r = 1; r < mrows.size(); ++r) {
            const auto& row = mrows[r];
            const std::size_t line = r + 1;
            if (row.size() < need) {
                t.parse_diagnostics.push_back(
                    {Severity::Error, "SHORT_ROW", "expected at least " + std::to_string(need) + " fields", file, line});
                continue;
            }
            MonitoringRecord rec;
            rec.row = line;
            rec.well_id = csv::trim(row[c_well]);
            rec.constituent = csv::trim(row[c_con]);
            rec.units = csv::trim(row[c_units]);
            try {
                rec.date = Date::parse_iso(csv::trim(row[c_date]));
                auto v = parse_value(row[c_res], line);
                rec.raw = v.value;
                rec.censored = v.censored;
            } catch (const Error& e) {
                t.parse_diagnostics.push_back({Severity::Error, e.code(), e.what(), file, line});
                continue;
            }
            rec.working = rec.raw;
            t.records.push_back(std::move(rec));
        }
    }

    auto wrows = csv::parse(wells_csv);
    if (wrows.empty()) throw ParseError("wells.csv: header row required");
    {
        auto idx = header_index(wrows[0]);
        const std::string file = "wells.csv";
        auto c_well = require_column(idx, "WellID", file);
        auto c_x = require_column(idx, "X", file);
        auto c_y = require_column(idx, "Y", file);
        std::optional<std::size_t> c_aq;
        if (auto it = idx.find("aquifer"); it != idx.end()) c_aq = it->second;
        t.has_aquifer = c_aq.has_value();

        for (std::size_t r = 1; r < wrows.size(); ++r) {
            const auto& row = wrows[r];
            const std::size_t line = r + 1;
            WellLocation w;
            w.row = line;
            if (row.size() <= std::max(c_well, std::max(c_x, c_y))) {
                t.parse_diagnostics.push_back({Severity::Error, "SHORT_ROW", "missing well columns", file, line});
                continue;
            }
            w.well_id = csv::trim(row[c_well]);
            auto xs = csv::trim(row[c_x]);
            auto ys = csv::trim(row[c_y]);
            if (!parse_decimal(xs, w.x) || !parse_decimal(ys, w.y)) {
                t.parse_diagnostics.push_back({Severity::Error, "BAD_COORDINATE",
                                               "row " + std::to_string(line) + ": non-finite or malformed coordinate '" +
                                                   xs + "', '" + ys + "'",
                                               file, line});
                continue;
            }
            if (c_aq && *c_aq < row.size()) w.aquifer = csv::trim(row[*c_aq]);
            t.wells.push_back(std::move(w));
        }
    }

    if (overlays_json) t.overlays = parse_overlays(*overlays_json);
    return t;
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view content) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw IoError("write failed for " + path.string());
}

RawTables read_tables(const std::filesystem::path& dir) {
    auto m = read_file(dir / "monitoring.csv");
    auto w = read_file(dir / "wells.csv");
    if (std::filesystem::exists(dir / "overlays.json")) {
        auto o = read_file(dir / "overlays.json");
        return parse_tables(m, w, std::string_view(o));
    }
    return parse_tables(m, w);
}

std::vector<Diagnostic> validate(const RawTables& tables, Date today) {
    std::vector<Diagnostic> out = tables.parse_diagnostics;
    const std::string mfile = "monitoring.csv";
    const std::string wfile = "wells.csv";

    std::unordered_map<std::string, std::size_t> well_rows;
    for (const auto& w : tables.wells) {
        if (w.well_id.empty()) {
            out.push_back({Severity::Error, "EMPTY_WELL_ID", "well id is empty", wfile, w.row});
            continue;
        }
        auto [it, inserted] = well_rows.emplace(w.well_id, w.row);
        if (!inserted) {
            out.push_back({Severity::Error, "DUPLICATE_WELL",
                           "well '" + w.well_id + "' already defined on row " + std::to_string(it->second), wfile,
                           w.row});
        }
    }

    std::map<std::string, std::pair<std::string, std::size_t>> units_seen;
    std::map<std::tuple<std::string, int, std::string>, const MonitoringRecord*> keys;
    std::set<std::string> wells_with_records;

    for (const auto& r : tables.records) {
        if (r.well_id.empty()) {
            out.push_back({Severity::Error, "EMPTY_WELL_ID", "well id is empty", mfile, r.row});
        } else if (!well_rows.count(r.well_id)) {
            out.push_back({Severity::Error, "UNKNOWN_WELL",
                           "well '" + r.well_id + "' is not listed in wells.csv", mfile, r.row});
        } else {
            wells_with_records.insert(r.well_id);
        }
        if (r.constituent.empty()) {
            out.push_back({Severity::Error, "EMPTY_CONSTITUENT", "constituent is empty", mfile, r.row});
        }
        if (r.units.empty()) {
            out.push_back({Severity::Error, "EMPTY_UNITS", "units are empty for " + r.constituent, mfile, r.row});
        } else {
            auto [it, inserted] = units_seen.emplace(r.constituent, std::make_pair(r.units, r.row));
            if (!inserted && it->second.first != r.units) {
                out.push_back({Severity::Error, "MIXED_UNITS",
                               r.constituent + " reported in '" + r.units + "' but row " +
                                   std::to_string(it->second.second) + " uses '" + it->second.first + "'",
                               mfile, r.row});
            }
        }
        if (r.raw < 0.0) {
            out.push_back({Severity::Error, "NEGATIVE_VALUE",
                           r.constituent + " value " + format_double(r.raw) + " is negative", mfile, r.row});
        }
        if (r.censored && !r.is_solute()) {
            out.push_back({Severity::Error, "CENSORED_RESERVED",
                           "non-detect notation is only valid for solutes, not " + r.constituent, mfile, r.row});
        }
        if (r.date > today) {
            out.push_back({Severity::Warning, "FUTURE_DATE", "sample dated " + r.date.iso() + " is in the future",
                           mfile, r.row});
        }
        auto key = std::make_tuple(r.well_id, r.date.days(), r.constituent);
        auto [kit, fresh] = keys.emplace(key, &r);
        if (!fresh) {
            const auto* prev = kit->second;
            std::string note = prev->raw == r.raw && prev->censored == r.censored ? " (same value)" : " (values differ)";
            out.push_back({Severity::Warning, "DUPLICATE_ROW",
                           "duplicate of row " + std::to_string(prev->row) + " for " + r.well_id + " " +
                               r.date.iso() + " " + r.constituent + note + "; keeping the last occurrence",
                           mfile, r.row});
            kit->second = &r;
        }
    }

    for (const auto& w : tables.wells) {
        if (!w.well_id.empty() && !wells_with_records.count(w.well_id)) {
            out.push_back({Severity::Warning, "ORPHAN_WELL", "well '" + w.well_id + "' has no samples", wfile, w.row});
        }
    }
    if (tables.records.empty()) {
        out.push_back({Severity::Error, "NO_RECORDS", "monitoring.csv contains no usable records", mfile, 0});
    }
    return out;
}

std::vector<MonitoringRecord> apply_substitution(std::vector<MonitoringRecord> records,
                                                 const SubstitutionPolicy& policy,
                                                 std::vector<Diagnostic>* diagnostics) {
    policy.check();
    for (auto& r : records) {
        if (r.synthetic) continue;
        r.working = r.censored ? policy.nd_fraction * r.raw : r.raw;
    }
    if (!policy.napl_substitute) return records;

    std::vector<std::string> solutes;
    std::map<std::string, double> site_max;
    std::map<std::string, std::string> units;
    for (const auto& r : records) {
        if (!r.is_solute()) continue;
        if (!units.count(r.constituent)) {
            solutes.push_back(r.constituent);
            units[r.constituent] = r.units;
        }
        if (r.censored || r.synthetic) continue;
        auto [it, fresh] = site_max.emplace(r.constituent, r.working);
        if (!fresh) it->second = std::max(it->second, r.working);
    }

    std::set<std::tuple<std::string, int, std::string>> present;
    std::vector<std::pair<std::string, Date>> napl_events;
    std::set<std::pair<std::string, int>> napl_seen;
    for (const auto& r : records) {
        present.emplace(r.well_id, r.date.days(), r.constituent);
        if (r.constituent == kNapl && r.raw > 0.0 && napl_seen.emplace(r.well_id, r.date.days()).second) {
            napl_events.emplace_back(r.well_id, r.date);
        }
    }

    std::set<std::string> warned;
    for (const auto& [well, date] : napl_events) {
        for (const auto& s : solutes) {
            if (present.count({well, date.days(), s})) continue;
            auto it = site_max.find(s);
            if (it == site_max.end()) {
                if (diagnostics && warned.insert(s).second) {
                    diagnostics->push_back({Severity::Warning, "NAPL_NO_MAXIMUM",
                                            "no detected " + s + " values on site; NAPL substitution skipped",
                                            "monitoring.csv", 0});
                }
                continue;
            }
            MonitoringRecord syn;
            syn.well_id = well;
            syn.date = date;
            syn.constituent = s;
            syn.raw = it->second;
            syn.working = it->second;
            syn.units = units[s];
            syn.synthetic = true;
            records.push_back(std::move(syn));
            present.emplace(well, date.days(), s);
        }
    }
    return records;
}

Dataset Dataset::build(RawTables tables, const DatasetOptions& options, Date today) {
    options.policy.check();
    auto diags = validate(tables, today);
    if (has_errors(diags)) throw DatasetError("monitoring data failed validation", std::move(diags));

    Dataset ds;
    ds.options_ = options;
    ds.has_aquifer_ = tables.has_aquifer;
    ds.overlays_ = std::move(tables.overlays);

    // Aquifer zone filter.
    std::string zone = options.aquifer;
    if (tables.has_aquifer) {
        std::set<std::string> zones;
        for (const auto& w : tables.wells) zones.insert(w.aquifer);
        if (zone.empty()) {
            zone = *zones.begin();
            if (zones.size() > 1) {
                diags.push_back({Severity::Warning, "AQUIFER_DEFAULT",
                                 "multiple aquifer zones present; analysing '" + zone + "'", "wells.csv", 0});
            }
        } else if (!zones.count(zone)) {
            throw ArgumentError("aquifer zone '" + zone + "' not present in wells.csv");
        }
        ds.options_.aquifer = zone;
    } else if (!zone.empty()) {
        throw ArgumentError("aquifer '" + zone + "' requested but wells.csv has no Aquifer column");
    }

    std::set<std::string> keep;
    for (auto& w : tables.wells) {
        if (!tables.has_aquifer || w.aquifer == zone) {
            keep.insert(w.well_id);
            ds.wells_.push_back(std::move(w));
        }
    }

    // Last occurrence of a (well, date, constituent) key wins.
    std::map<std::tuple<std::string, int, std::string>, std::size_t> last;
    for (std::size_t i = 0; i < tables.records.size(); ++i) {
        const auto& r = tables.records[i];
        last[{r.well_id, r.date.days(), r.constituent}] = i;
    }
    std::vector<MonitoringRecord> recs;
    for (std::size_t i = 0; i < tables.records.size(); ++i) {
        auto& r = tables.records[i];
        if (!keep.count(r.well_id)) continue;
        if (last[{r.well_id, r.date.days(), r.constituent}] != i) continue;
        recs.push_back(std::move(r));
    }
    if (recs.empty()) throw DatasetError("no records for aquifer zone '" + zone + "'", diags);

    ds.records_ = apply_substitution(std::move(recs), options.policy, &diags);

    std::vector<Date> dates;
    dates.reserve(ds.records_.size());
    for (const auto& r : ds.records_) dates.push_back(r.date);
    ds.intervals_ = bin_intervals(dates, options.granularity);
    ds.record_interval_.reserve(ds.records_.size());
    for (const auto& r : ds.records_) ds.record_interval_.push_back(ds.interval_of(r.date));

    for (const auto& r : ds.records_) {
        if (r.is_solute() && std::find(ds.solutes_.begin(), ds.solutes_.end(), r.constituent) == ds.solutes_.end()) {
            ds.solutes_.push_back(r.constituent);
        }
    }
    ds.diagnostics_ = std::move(diags);
    return ds;
}

const WellLocation* Dataset::find_well(std::string_view id) const {
    for (const auto& w : wells_)
        if (w.well_id == id) return &w;
    return nullptr;
}

std::optional<std::size_t> Dataset::well_index(std::string_view id) const {
    for (std::size_t i = 0; i < wells_.size(); ++i)
        if (wells_[i].well_id == id) return i;
    return std::nullopt;
}

bool Dataset::has_solute(std::string_view s) const {
    return std::find(solutes_.begin(), solutes_.end(), s) != solutes_.end();
}

std::string Dataset::units_of(std::string_view constituent) const {
    for (const auto& r : records_)
        if (r.constituent == constituent) return r.units;
    return {};
}

std::size_t Dataset::interval_of(Date d) const {
    auto it = std::upper_bound(intervals_.begin(), intervals_.end(), d,
                               [](Date v, const Interval& iv) { return v < iv.start; });
    if (it == intervals_.begin()) return 0;
    return static_cast<std::size_t>(std::distance(intervals_.begin(), it)) - 1;
}

std::vector<const MonitoringRecord*> Dataset::series(std::string_view well, std::string_view constituent) const {
    std::vector<const MonitoringRecord*> out;
    for (const auto& r : records_)
        if (r.well_id == well && r.constituent == constituent) out.push_back(&r);
    std::stable_sort(out.begin(), out.end(), [](auto* a, auto* b) { return a->date < b->date; });
    return out;
}

std::vector<const MonitoringRecord*> Dataset::interval_records(std::size_t interval,
                                                               std::string_view constituent) const {
    std::vector<const MonitoringRecord*> out;
    for (std::size_t i = 0; i < records_.size(); ++i)
        if (record_interval_[i] == interval && records_[i].constituent == constituent) out.push_back(&records_[i]);
    std::stable_sort(out.begin(), out.end(), [](auto* a, auto* b) { return a->date < b->date; });
    return out;
}

Dataset load_dataset(const std::filesystem::path& dir, const DatasetOptions& options) {
    return Dataset::build(read_tables(dir), options);
}

std::string format_double(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

std::string canonical_monitoring_csv(const Dataset& ds) {
    std::ostringstream out;
    csv::write_row(out, {"WellID", "SampleDate", "Constituent", "Result", "Units"});
    for (const auto& r : ds.records()) {
        if (r.synthetic) continue;
        std::string result = r.censored ? "ND<" + format_double(r.raw) : format_double(r.raw);
        csv::write_row(out, {r.well_id, r.date.iso(), r.constituent, result, r.units});
    }
    return out.str();
}

std::string canonical_wells_csv(const Dataset& ds) {
    std::ostringstream out;
    if (ds.has_aquifer()) {
        csv::write_row(out, {"WellID", "X", "Y", "Aquifer"});
        for (const auto& w : ds.wells()) csv::write_row(out, {w.well_id, format_double(w.x), format_double(w.y), w.aquifer});
    } else {
        csv::write_row(out, {"WellID", "X", "Y"});
        for (const auto& w : ds.wells()) csv::write_row(out, {w.well_id, format_double(w.x), format_double(w.y)});
    }
    return out.str();
}

std::string overlays_json(const Dataset& ds) {
    json features = json::array();
    for (const auto& p : ds.overlays()) {
        json coords = json::array();
        for (const auto& pt : p.points) coords.push_back({pt[0], pt[1]});
        features.push_back({{"type", "Feature"},
                            {"properties", {{"name", p.name}}},
                            {"geometry", {{"type", "LineString"}, {"coordinates", coords}}}});
    }
    return json{{"type", "FeatureCollection"}, {"features", features}}.dump(1) + "\n";
}

void write_canonical(const Dataset& ds, const std::filesystem::path& dir) {
    write_file(dir / "monitoring.csv", canonical_monitoring_csv(ds));
    write_file(dir / "wells.csv", canonical_wells_csv(ds));
    if (!ds.overlays().empty()) write_file(dir / "overlays.json", overlays_json(ds));
}

} // namespace plume
