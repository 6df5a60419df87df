#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "plume/dataset.hpp"
#include "plume/welltrend.hpp"

namespace plume {
class Analysis;
}

namespace plume::ind {

enum class Mode { Trend, ThresholdAbsolute, ThresholdStatistical };

enum class CellClass { StrongUp, Up, Stable, Down, StrongDown, Above, Below, NonDetect, Insufficient };

std::string_view to_string(Mode m);
std::string_view to_string(CellClass c);
Mode parse_mode(std::string_view s);

// Annualised log-slope cutoffs: |s| < stable -> stable, |s| >= strong -> strong.
struct Cutoffs {
    double stable = 0.1;
    double strong = 0.5;

    void check() const;
};

struct IndicatorCell {
    std::string well_id;
    std::string solute;
    Mode mode = Mode::Trend;
    CellClass cls = CellClass::Insufficient;
    std::optional<double> slope;  // trend mode, model-scale units per year
    std::optional<double> value;  // threshold modes: observed value (absolute) or smoother level (statistical)
    std::optional<double> upper;  // statistical mode: upper 95% band
    std::string note;
};

using Samples = std::span<const MonitoringRecord* const>;

// `samples` are this well/solute's records inside the interval holding t;
// `all_censored` says every record of the well/solute is a non-detect.
IndicatorCell trend_class(const trend::WellTrendFit* fit, double t, Samples samples, bool all_censored,
                          const Cutoffs& cutoffs = {});

// Absolute mode compares the latest working value in the interval; statistical
// mode compares the upper band of the well smoother. Below only when strictly
// below the threshold (statistical) or not above it (absolute).
IndicatorCell threshold_class(const trend::WellTrendFit* fit, double t, Samples samples,
                              std::optional<double> threshold, Mode mode);

using Thresholds = std::map<std::string, double>;

struct IndicatorMatrix {
    std::size_t interval = 0;
    double t = 0.0;
    Mode mode = Mode::Trend;
    std::vector<std::string> wells;    // sorted by id
    std::vector<std::string> solutes;  // input order
    std::vector<IndicatorCell> cells;  // row-major, wells x solutes
    std::vector<Diagnostic> diagnostics;

    const IndicatorCell& at(std::size_t well, std::size_t solute) const { return cells[well * solutes.size() + solute]; }
};

IndicatorMatrix indicator_matrix(const Analysis& analysis, std::size_t interval, Mode mode,
                                 const Thresholds& thresholds = {}, const Cutoffs& cutoffs = {});

} // namespace plume::ind
