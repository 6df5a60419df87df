#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "plume/date.hpp"
#include "plume/errors.hpp"

namespace plume {

// Reserved constituent names (exact match after trimming).
inline constexpr std::string_view kGroundwater = "GW";
inline constexpr std::string_view kNapl = "NAPL";

bool is_reserved_constituent(std::string_view name);

struct ParsedValue {
    double value = 0.0;
    bool censored = false;
};

// Parses a Result cell: a decimal literal, or `ND<X` (case-insensitive,
// whitespace tolerated) meaning "below detection threshold X".
// `row` is only used in error messages.
ParsedValue parse_value(std::string_view text, std::size_t row = 0);

struct MonitoringRecord {
    std::string well_id;
    Date date;
    std::string constituent;
    double raw = 0.0;      // measured value, or the detection threshold when censored
    bool censored = false;
    std::string units;
    double working = 0.0;  // value after substitution; this is what the models see
    bool synthetic = false;
    std::size_t row = 0;   // 1-based line in monitoring.csv (header is line 1); 0 for synthetic rows

    bool is_solute() const { return !is_reserved_constituent(constituent); }
};

struct WellLocation {
    std::string well_id;
    double x = 0.0;
    double y = 0.0;
    std::string aquifer;
    std::size_t row = 0;
};

struct SubstitutionPolicy {
    double nd_fraction = 0.5;  // 0.5 or 1.0
    bool napl_substitute = false;

    void check() const;
};

enum class Granularity { Month, Quarter, Year };

Granularity parse_granularity(std::string_view s);
std::string_view to_string(Granularity g);

// Half-open calendar bin [start, end).
struct Interval {
    Date start;
    Date end;
    std::string label;

    // Mid-point on the continuous time axis (days since epoch).
    double midpoint() const { return 0.5 * (start.days() + end.days()); }
    bool contains(Date d) const { return start <= d && d < end; }
};

std::vector<Interval> bin_intervals(std::span<const Date> dates, Granularity granularity);

using Point2 = std::array<double, 2>;

struct Polyline {
    std::string name;
    std::vector<Point2> points;
};

// Accepts a GeoJSON FeatureCollection (LineString / MultiLineString / Polygon
// geometries in site coordinates) or a bare array of features.
std::vector<Polyline> parse_overlays(std::string_view json_text);

enum class Severity { Warning, Error };

struct Diagnostic {
    Severity severity = Severity::Warning;
    std::string code;
    std::string message;
    std::string file;
    std::size_t row = 0;
};

std::string_view to_string(Severity s);
bool has_errors(std::span<const Diagnostic> diags);

// Input tables as read from disk, before any filtering or substitution.
struct RawTables {
    std::vector<MonitoringRecord> records;
    std::vector<WellLocation> wells;
    std::vector<Polyline> overlays;
    bool has_aquifer = false;
    std::vector<Diagnostic> parse_diagnostics;  // rows that could not be parsed at all
};

RawTables parse_tables(std::string_view monitoring_csv, std::string_view wells_csv,
                       std::optional<std::string_view> overlays_json = std::nullopt);
RawTables read_tables(const std::filesystem::path& dir);

// Checks referential integrity, duplicates, units, signs, dates and orphan
// wells. Errors block analysis; warnings do not.
std::vector<Diagnostic> validate(const RawTables& tables, Date today = Date::today());

// Sets working values from the policy. Censored records become
// nd_fraction * threshold; with napl_substitute, solutes missing at a
// (well, date) that carries positive NAPL thickness gain a synthetic record at
// the site maximum of detected values. Idempotent.
std::vector<MonitoringRecord> apply_substitution(std::vector<MonitoringRecord> records,
                                                 const SubstitutionPolicy& policy,
                                                 std::vector<Diagnostic>* diagnostics = nullptr);

struct DatasetOptions {
    SubstitutionPolicy policy;
    Granularity granularity = Granularity::Quarter;
    std::string aquifer;  // empty: the single zone, or the first zone in sorted order
};

class DatasetError : public ValidationError {
public:
    DatasetError(const std::string& message, std::vector<Diagnostic> diags)
        : ValidationError(message), diagnostics_(std::move(diags)) {}
    const std::vector<Diagnostic>& diagnostics() const { return diagnostics_; }

private:
    std::vector<Diagnostic> diagnostics_;
};

// Validated, substituted and binned monitoring data. Immutable once built.
class Dataset {
public:
    static Dataset build(RawTables tables, const DatasetOptions& options = {}, Date today = Date::today());

    const std::vector<MonitoringRecord>& records() const { return records_; }
    const std::vector<WellLocation>& wells() const { return wells_; }
    const std::vector<Interval>& intervals() const { return intervals_; }
    const std::vector<Polyline>& overlays() const { return overlays_; }
    const std::vector<std::string>& solutes() const { return solutes_; }
    const std::vector<Diagnostic>& diagnostics() const { return diagnostics_; }
    const DatasetOptions& options() const { return options_; }
    bool has_aquifer() const { return has_aquifer_; }

    const WellLocation* find_well(std::string_view id) const;
    std::optional<std::size_t> well_index(std::string_view id) const;
    bool has_solute(std::string_view s) const;
    std::string units_of(std::string_view constituent) const;

    // Index of the interval holding `d`; the last interval is closed on the right.
    std::size_t interval_of(Date d) const;
    std::size_t record_interval(std::size_t record_index) const { return record_interval_[record_index]; }

    // Records of one well and constituent ordered by date.
    std::vector<const MonitoringRecord*> series(std::string_view well, std::string_view constituent) const;
    std::vector<const MonitoringRecord*> interval_records(std::size_t interval, std::string_view constituent) const;

private:
    std::vector<MonitoringRecord> records_;
    std::vector<WellLocation> wells_;
    std::vector<Interval> intervals_;
    std::vector<std::size_t> record_interval_;
    std::vector<Polyline> overlays_;
    std::vector<std::string> solutes_;
    std::vector<Diagnostic> diagnostics_;
    DatasetOptions options_;
    bool has_aquifer_ = false;
};

Dataset load_dataset(const std::filesystem::path& dir, const DatasetOptions& options = {});

// Writes monitoring.csv, wells.csv and (when present) overlays.json. Synthetic
// records are omitted; they are regenerated by the policy on reload.
void write_canonical(const Dataset& dataset, const std::filesystem::path& dir);
std::string canonical_monitoring_csv(const Dataset& dataset);
std::string canonical_wells_csv(const Dataset& dataset);
std::string overlays_json(const Dataset& dataset);

std::string format_double(double v);  // shortest round-trip decimal

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view content);

} // namespace plume
