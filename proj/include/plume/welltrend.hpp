#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace plume::trend {

// Gaussian kernel, unnormalised: exp(-u^2 / (2 h^2)).
double kernel_weight(double u, double h);

struct LocalLinearFit {
    std::vector<double> fitted;
    std::vector<double> se;
    std::vector<double> derivative;  // per time unit of `times`
    double sigma2 = 0.0;
    double rss = 0.0;
    double trace_hat = 0.0;     // tr(H)
    double trace_hat_sq = 0.0;  // tr(H H')
};

// Weights l_i(x) such that the local-linear level estimate at x is sum_i l_i y_i.
std::vector<double> equivalent_kernel(std::span<const double> times, double x, double h);
// Matching weights for the local slope.
std::vector<double> slope_kernel(std::span<const double> times, double x, double h);

// Solves the kernel-weighted 2x2 least-squares problem at each evaluation point.
// Standard errors are pointwise: se(x) = sigma * ||l(x)||, with
// sigma^2 = RSS / (n - 2 tr(H) + tr(H H')).
LocalLinearFit local_linear_fit(std::span<const double> times, std::span<const double> values,
                                std::span<const double> eval_times, double h);

// Corrected AIC: log(sigma^2) + 2 (tr H + 1) / (n - tr H - 2), sigma^2 = RSS / n.
// Returns +inf when n - tr H - 2 <= 0.
double aicc(std::span<const double> times, std::span<const double> values, double h);

struct BandwidthChoice {
    double h = 0.0;
    bool fallback = false;  // no admissible candidate; largest one returned
    std::vector<double> criteria;
};

std::vector<double> default_bandwidth_grid(double time_range);
BandwidthChoice select_bandwidth(std::span<const double> times, std::span<const double> values,
                                 std::span<const double> candidates);

// Largest condition number of the normalised local moment matrix over the evaluation points.
double local_condition(std::span<const double> times, std::span<const double> eval_times, double h);
// Raises h until every local system has condition number below 1e8. The first
// raise jumps to 1.5x the largest gap between consecutive sample times.
double apply_bandwidth_floor(std::span<const double> times, std::span<const double> eval_times, double h);

struct MannKendallResult {
    std::int64_t S = 0;
    double tau = 0.0;
    double var_S = 0.0;
    double p_value = 1.0;
};

// Values must be ordered by time. Tau is tau-b; var_S carries the tie-group
// correction; p_value is two-sided with continuity correction.
MannKendallResult mann_kendall(std::span<const double> values);

enum class ParametricForm { Linear, LogLinear };

struct ParametricFit {
    double intercept = 0.0;
    double slope = 0.0;
    double slope_se = 0.0;
};

ParametricFit parametric_fit(std::span<const double> times, std::span<const double> values, ParametricForm form);

enum class Scale { Log, Linear };

std::string_view to_string(Scale s);
Scale parse_scale(std::string_view s);

struct TrendOptions {
    Scale scale = Scale::Log;
    std::vector<double> bandwidths;  // empty: default_bandwidth_grid
    std::optional<double> fixed_h;
    int grid_points = 101;
};

struct WellTrendFit {
    std::string well_id;
    std::string solute;
    Scale scale = Scale::Log;
    std::vector<double> eval_times;  // days since epoch
    std::vector<double> fitted;      // on the model scale
    std::vector<double> se;
    std::vector<double> derivative;  // model-scale units per day
    double h = 0.0;
    std::size_t n = 0;
    double sigma2 = 0.0;
    MannKendallResult mk;
    std::vector<std::string> warnings;

    struct Point {
        double fitted;
        double se;
        double derivative;
    };

    // Exact at grid nodes, linear between them, nullopt outside the grid.
    std::optional<Point> at(double t) const;
    // Back-transformed band, 1.96 * se.
    double lower(std::size_t i) const;
    double upper(std::size_t i) const;
    double level(std::size_t i) const;
    double to_concentration(double model_value) const;
};

inline constexpr double kConfidenceZ = 1.96;

// `values` are working concentrations; `floor_value` replaces non-positive
// values before taking logs. `extra_eval_times` (interval midpoints) are merged
// into the 101-point grid.
WellTrendFit fit_well_trend(std::string well_id, std::string solute, std::span<const double> times,
                            std::span<const double> values, std::span<const double> extra_eval_times,
                            const TrendOptions& options, double floor_value = 0.0);

} // namespace plume::trend
