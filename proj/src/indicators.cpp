#include "plume/indicators.hpp"

#include <algorithm>
#include <cmath>

#include "plume/analysis.hpp"
#include "plume/errors.hpp"

namespace plume::ind {

std::string_view to_string(Mode m) {
    switch (m) {
    case Mode::Trend: return "trend";
    case Mode::ThresholdAbsolute: return "threshold-absolute";
    case Mode::ThresholdStatistical: return "threshold-statistical";
    }
    return "trend";
}

std::string_view to_string(CellClass c) {
    switch (c) {
    case CellClass::StrongUp: return "strong-up";
    case CellClass::Up: return "up";
    case CellClass::Stable: return "stable";
    case CellClass::Down: return "down";
    case CellClass::StrongDown: return "strong-down";
    case CellClass::Above: return "above";
    case CellClass::Below: return "below";
    case CellClass::NonDetect: return "non-detect";
    case CellClass::Insufficient: return "insufficient";
    }
    return "insufficient";
}

Mode parse_mode(std::string_view s) {
    if (s == "trend") return Mode::Trend;
    if (s == "threshold-absolute" || s == "absolute") return Mode::ThresholdAbsolute;
    if (s == "threshold-statistical" || s == "statistical") return Mode::ThresholdStatistical;
    throw ArgumentError("unknown indicator mode '" + std::string(s) + "'");
}

void Cutoffs::check() const {
    if (!(stable > 0.0) || !(strong > stable) || !std::isfinite(strong)) {
        throw ArgumentError("trend cutoffs must satisfy 0 < stable < strong");
    }
}

namespace {

bool all_nondetect(Samples samples) {
    return !samples.empty() && std::all_of(samples.begin(), samples.end(), [](auto* r) { return r->censored; });
}

} // namespace

IndicatorCell trend_class(const trend::WellTrendFit* fit, double t, Samples samples, bool all_censored,
                          const Cutoffs& cutoffs) {
    cutoffs.check();
    IndicatorCell cell;
    cell.mode = Mode::Trend;
    if (fit) {
        cell.well_id = fit->well_id;
        cell.solute = fit->solute;
    }
    if (all_censored || all_nondetect(samples)) {
        cell.cls = CellClass::NonDetect;
        return cell;
    }
    if (!fit) {
        cell.note = "no trend fit";
        return cell;
    }
    auto p = fit->at(t);
    if (!p) {
        cell.note = "time-slice outside the fitted range";
        return cell;
    }
    const double s = p->derivative * kDaysPerYear;
    cell.slope = s;
    const double a = std::abs(s);
    if (a < cutoffs.stable)
        cell.cls = CellClass::Stable;
    else if (a < cutoffs.strong)
        cell.cls = s > 0 ? CellClass::Up : CellClass::Down;
    else
        cell.cls = s > 0 ? CellClass::StrongUp : CellClass::StrongDown;
    return cell;
}

IndicatorCell threshold_class(const trend::WellTrendFit* fit, double t, Samples samples,
                              std::optional<double> threshold, Mode mode) {
    if (mode == Mode::Trend) throw ArgumentError("threshold_class needs a threshold mode");
    IndicatorCell cell;
    cell.mode = mode;
    if (fit) {
        cell.well_id = fit->well_id;
        cell.solute = fit->solute;
    }
    if (!threshold) {
        cell.note = "no threshold supplied for this solute";
        return cell;
    }
    if (!(*threshold > 0.0)) throw ArgumentError("threshold must be positive");

    if (mode == Mode::ThresholdAbsolute) {
        if (samples.empty()) {
            cell.note = "no sample in the interval";
            return cell;
        }
        const auto* latest = samples.back();
        for (const auto* r : samples)
            if (r->date >= latest->date) latest = r;
        cell.value = latest->working;
        if (latest->censored) {
            cell.cls = CellClass::NonDetect;
            return cell;
        }
        cell.cls = latest->working > *threshold ? CellClass::Above : CellClass::Below;
        return cell;
    }

    if (!fit) {
        cell.note = "no trend fit";
        return cell;
    }
    auto p = fit->at(t);
    if (!p) {
        cell.note = "time-slice outside the fitted range";
        return cell;
    }
    cell.value = fit->to_concentration(p->fitted);
    cell.upper = fit->to_concentration(p->fitted + trend::kConfidenceZ * p->se);
    cell.cls = *cell.upper < *threshold ? CellClass::Below : CellClass::Above;
    return cell;
}

IndicatorMatrix indicator_matrix(const Analysis& analysis, std::size_t interval, Mode mode,
                                 const Thresholds& thresholds, const Cutoffs& cutoffs) {
    const auto& ds = analysis.dataset;
    if (interval >= ds.intervals().size()) {
        throw IntervalRangeError("interval " + std::to_string(interval) + " out of range [0, " +
                                 std::to_string(ds.intervals().size() - 1) + "]");
    }
    cutoffs.check();

    IndicatorMatrix m;
    m.interval = interval;
    m.t = ds.intervals()[interval].midpoint();
    m.mode = mode;
    for (const auto& w : ds.wells()) m.wells.push_back(w.well_id);
    std::sort(m.wells.begin(), m.wells.end());
    m.solutes = ds.solutes();

    if (mode != Mode::Trend) {
        for (const auto& s : m.solutes) {
            if (!thresholds.count(s)) {
                m.diagnostics.push_back({Severity::Warning, "MISSING_THRESHOLD", "no threshold supplied for " + s, "", 0});
            }
        }
    }

    m.cells.reserve(m.wells.size() * m.solutes.size());
    for (const auto& w : m.wells) {
        for (const auto& s : m.solutes) {
            std::vector<const MonitoringRecord*> samples;
            bool any = false, all_cens = true;
            for (const auto* r : ds.series(w, s)) {
                if (!r->synthetic) {
                    any = true;
                    all_cens = all_cens && r->censored;
                }
                if (ds.interval_of(r->date) == interval) samples.push_back(r);
            }
            const auto* fit = analysis.trend(w, s);
            IndicatorCell cell;
            if (mode == Mode::Trend) {
                cell = trend_class(fit, m.t, samples, any && all_cens, cutoffs);
            } else {
                auto it = thresholds.find(s);
                cell = threshold_class(fit, m.t, samples,
                                       it == thresholds.end() ? std::nullopt : std::optional<double>(it->second), mode);
            }
            cell.well_id = w;
            cell.solute = s;
            m.cells.push_back(std::move(cell));
        }
    }
    return m;
}

} // namespace plume::ind
