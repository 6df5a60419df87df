#include "plume/welltrend.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

#include "plume/dataset.hpp"
#include "plume/errors.hpp"

namespace plume::trend {

namespace {

void check_bandwidth(double h) {
    if (!(h > 0.0) || !std::isfinite(h)) throw ArgumentError("bandwidth must be positive and finite");
}

// Kernel weights for evaluation at x, rescaled so the largest is 1. The local
// solution does not depend on a common factor and this avoids underflow far
// from the data.
void local_weights(std::span<const double> times, double x, double h, std::vector<double>& u, std::vector<double>& w) {
    const std::size_t n = times.size();
    u.resize(n);
    w.resize(n);
    double umin2 = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
        u[i] = (times[i] - x) / h;
        umin2 = std::min(umin2, u[i] * u[i]);
    }
    for (std::size_t i = 0; i < n; ++i) w[i] = std::exp(-0.5 * (u[i] * u[i] - umin2));
}

struct Moments {
    double s0 = 0, s1 = 0, s2 = 0;
    double det() const { return s0 * s2 - s1 * s1; }
};

Moments moments(const std::vector<double>& u, const std::vector<double>& w) {
    Moments m;
    for (std::size_t i = 0; i < u.size(); ++i) {
        m.s0 += w[i];
        m.s1 += w[i] * u[i];
        m.s2 += w[i] * u[i] * u[i];
    }
    return m;
}

double condition(const Moments& m) {
    // Eigenvalues of [[s0, s1], [s1, s2]] after scaling by s0.
    double a = 1.0, b = m.s1 / m.s0, c = m.s2 / m.s0;
    double mid = 0.5 * (a + c);
    double rad = std::sqrt(0.25 * (a - c) * (a - c) + b * b);
    double lo = mid - rad;
    if (!(lo > 0.0)) return std::numeric_limits<double>::infinity();
    return (mid + rad) / lo;
}

// Level and slope weights at x. Slope weights are per unit of `times`.
void local_kernels(std::span<const double> times, double x, double h, std::vector<double>& level,
                   std::vector<double>* slope) {
    std::vector<double> u, w;
    local_weights(times, x, h, u, w);
    Moments m = moments(u, w);
    double det = m.det();
    if (!(det > 0.0)) throw FitError("local linear system is singular; bandwidth too small");
    level.resize(u.size());
    if (slope) slope->resize(u.size());
    for (std::size_t i = 0; i < u.size(); ++i) {
        level[i] = w[i] * (m.s2 - m.s1 * u[i]) / det;
        if (slope) (*slope)[i] = w[i] * (m.s0 * u[i] - m.s1) / det / h;
    }
}

struct HatStats {
    double rss = 0, tr = 0, tr2 = 0;
};

HatStats hat_stats(std::span<const double> times, std::span<const double> values, double h) {
    HatStats s;
    std::vector<double> l;
    for (std::size_t j = 0; j < times.size(); ++j) {
        local_kernels(times, times[j], h, l, nullptr);
        double fit = 0, norm2 = 0;
        for (std::size_t i = 0; i < l.size(); ++i) {
            fit += l[i] * values[i];
            norm2 += l[i] * l[i];
        }
        double r = values[j] - fit;
        s.rss += r * r;
        s.tr += l[j];
        s.tr2 += norm2;
    }
    return s;
}

std::size_t distinct_count(std::span<const double> times) {
    std::vector<double> t(times.begin(), times.end());
    std::sort(t.begin(), t.end());
    return static_cast<std::size_t>(std::unique(t.begin(), t.end()) - t.begin());
}

} // namespace

double kernel_weight(double u, double h) {
    check_bandwidth(h);
    double z = u / h;
    return std::exp(-0.5 * z * z);
}

std::vector<double> equivalent_kernel(std::span<const double> times, double x, double h) {
    check_bandwidth(h);
    std::vector<double> l;
    local_kernels(times, x, h, l, nullptr);
    return l;
}

std::vector<double> slope_kernel(std::span<const double> times, double x, double h) {
    check_bandwidth(h);
    std::vector<double> l, m;
    local_kernels(times, x, h, l, &m);
    return m;
}

LocalLinearFit local_linear_fit(std::span<const double> times, std::span<const double> values,
                                std::span<const double> eval_times, double h) {
    check_bandwidth(h);
    if (times.size() != values.size()) throw ArgumentError("times and values differ in length");
    if (distinct_count(times) < 3) throw InsufficientDataError("local linear fit needs at least 3 distinct time points");

    LocalLinearFit out;
    HatStats hs = hat_stats(times, values, h);
    const double n = static_cast<double>(times.size());
    const double df = n - 2.0 * hs.tr + hs.tr2;
    out.rss = hs.rss;
    out.trace_hat = hs.tr;
    out.trace_hat_sq = hs.tr2;
    out.sigma2 = df > 1e-8 ? hs.rss / df : 0.0;
    const double sigma = std::sqrt(out.sigma2);

    const std::size_t m = eval_times.size();
    out.fitted.resize(m);
    out.se.resize(m);
    out.derivative.resize(m);
    std::vector<double> l, s;
    for (std::size_t k = 0; k < m; ++k) {
        local_kernels(times, eval_times[k], h, l, &s);
        double a = 0, b = 0, norm2 = 0;
        for (std::size_t i = 0; i < l.size(); ++i) {
            a += l[i] * values[i];
            b += s[i] * values[i];
            norm2 += l[i] * l[i];
        }
        out.fitted[k] = a;
        out.derivative[k] = b;
        out.se[k] = sigma * std::sqrt(norm2);
    }
    return out;
}

double aicc(std::span<const double> times, std::span<const double> values, double h) {
    check_bandwidth(h);
    const double n = static_cast<double>(times.size());
    HatStats hs = hat_stats(times, values, h);
    const double denom = n - hs.tr - 2.0;
    if (!(denom > 0.0)) return std::numeric_limits<double>::infinity();
    // Exact fits leave only rounding noise in the RSS; the floor keeps the
    // log term flat across bandwidths in that case.
    double scale2 = 0;
    for (double v : values) scale2 += v * v;
    scale2 /= n;
    double sigma2 = std::max(hs.rss / n, 1e-24 * scale2 + std::numeric_limits<double>::min());
    return std::log(sigma2) + 2.0 * (hs.tr + 1.0) / denom;
}

std::vector<double> default_bandwidth_grid(double time_range) {
    if (!(time_range > 0.0)) throw ArgumentError("bandwidth grid needs a positive time range");
    constexpr int k = 20;
    const double lo = std::log(time_range / 50.0);
    const double hi = std::log(2.0 * time_range);
    std::vector<double> out(k);
    for (int i = 0; i < k; ++i) out[i] = std::exp(lo + (hi - lo) * i / (k - 1));
    return out;
}

BandwidthChoice select_bandwidth(std::span<const double> times, std::span<const double> values,
                                 std::span<const double> candidates) {
    if (times.size() < 5) throw InsufficientDataError("bandwidth selection needs at least 5 observations");
    if (candidates.empty()) throw ArgumentError("bandwidth candidate grid is empty");

    BandwidthChoice out;
    out.criteria.reserve(candidates.size());
    double best = std::numeric_limits<double>::infinity();
    double best_h = 0.0;
    for (double h : candidates) {
        double c = std::numeric_limits<double>::infinity();
        try {
            c = aicc(times, values, h);
        } catch (const FitError&) {
        }
        out.criteria.push_back(c);
        if (!std::isfinite(c)) continue;
        const double tol = 1e-12 * std::max(1.0, std::abs(best));
        if (c < best - tol || (std::abs(c - best) <= tol && h > best_h)) {
            best = c;
            best_h = h;
        }
    }
    if (!std::isfinite(best)) {
        out.h = *std::max_element(candidates.begin(), candidates.end());
        out.fallback = true;
    } else {
        out.h = best_h;
    }
    return out;
}

double local_condition(std::span<const double> times, std::span<const double> eval_times, double h) {
    check_bandwidth(h);
    double worst = 1.0;
    std::vector<double> u, w;
    for (double x : eval_times) {
        local_weights(times, x, h, u, w);
        worst = std::max(worst, condition(moments(u, w)));
    }
    return worst;
}

double apply_bandwidth_floor(std::span<const double> times, std::span<const double> eval_times, double h) {
    constexpr double kMaxCondition = 1e8;
    if (local_condition(times, eval_times, h) < kMaxCondition) return h;

    std::vector<double> t(times.begin(), times.end());
    std::sort(t.begin(), t.end());
    double gap = 0;
    for (std::size_t i = 1; i < t.size(); ++i) gap = std::max(gap, t[i] - t[i - 1]);
    h = std::max(h, 1.5 * gap);
    for (int iter = 0; iter < 200 && local_condition(times, eval_times, h) >= kMaxCondition; ++iter) h *= 1.5;
    return h;
}

MannKendallResult mann_kendall(std::span<const double> values) {
    const std::size_t n = values.size();
    if (n < 2) throw InsufficientDataError("Mann-Kendall needs at least 2 observations");

    MannKendallResult r;
    for (std::size_t i = 0; i + 1 < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) r.S += (values[j] > values[i]) - (values[j] < values[i]);

    std::map<double, std::int64_t> groups;
    for (double v : values) ++groups[v];
    std::int64_t tie_pairs = 0, tie_var = 0;
    for (const auto& [v, t] : groups) {
        tie_pairs += t * (t - 1) / 2;
        tie_var += t * (t - 1) * (2 * t + 5);
    }
    const auto nn = static_cast<std::int64_t>(n);
    const std::int64_t pairs = nn * (nn - 1) / 2;
    r.var_S = static_cast<double>(nn * (nn - 1) * (2 * nn + 5) - tie_var) / 18.0;

    const double denom = std::sqrt(static_cast<double>(pairs) * static_cast<double>(pairs - tie_pairs));
    r.tau = denom > 0 ? static_cast<double>(r.S) / denom : 0.0;

    if (r.S == 0 || r.var_S <= 0) {
        r.p_value = 1.0;
    } else {
        double z = (static_cast<double>(r.S) - (r.S > 0 ? 1.0 : -1.0)) / std::sqrt(r.var_S);
        r.p_value = std::clamp(std::erfc(std::abs(z) / std::sqrt(2.0)), 0.0, 1.0);
    }
    return r;
}

ParametricFit parametric_fit(std::span<const double> times, std::span<const double> values, ParametricForm form) {
    const std::size_t n = times.size();
    if (n != values.size()) throw ArgumentError("times and values differ in length");
    if (n < 3) throw InsufficientDataError("parametric fit needs at least 3 observations");

    std::vector<double> y(values.begin(), values.end());
    if (form == ParametricForm::LogLinear) {
        for (std::size_t i = 0; i < n; ++i) {
            if (!(y[i] > 0.0)) {
                throw ArgumentError("log-linear fit requires positive values; observation " + std::to_string(i) +
                                    " is " + format_double(y[i]));
            }
            y[i] = std::log(y[i]);
        }
    }
    const double xbar = std::accumulate(times.begin(), times.end(), 0.0) / n;
    const double ybar = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += (times[i] - xbar) * (times[i] - xbar);
        sxy += (times[i] - xbar) * (y[i] - ybar);
    }
    if (!(sxx > 0)) throw InsufficientDataError("parametric fit needs distinct time points");
    ParametricFit f;
    f.slope = sxy / sxx;
    f.intercept = ybar - f.slope * xbar;
    double rss = 0;
    for (std::size_t i = 0; i < n; ++i) {
        double r = y[i] - ybar - f.slope * (times[i] - xbar);
        rss += r * r;
    }
    f.slope_se = std::sqrt(rss / static_cast<double>(n - 2) / sxx);
    return f;
}

std::string_view to_string(Scale s) { return s == Scale::Log ? "log" : "linear"; }

Scale parse_scale(std::string_view s) {
    if (s == "log") return Scale::Log;
    if (s == "linear") return Scale::Linear;
    throw ArgumentError("unknown scale '" + std::string(s) + "' (log|linear)");
}

std::optional<WellTrendFit::Point> WellTrendFit::at(double t) const {
    if (eval_times.empty() || t < eval_times.front() || t > eval_times.back()) return std::nullopt;
    auto it = std::lower_bound(eval_times.begin(), eval_times.end(), t);
    auto k = static_cast<std::size_t>(it - eval_times.begin());
    if (eval_times[k] == t) return Point{fitted[k], se[k], derivative[k]};
    double w = (t - eval_times[k - 1]) / (eval_times[k] - eval_times[k - 1]);
    auto lerp = [&](const std::vector<double>& v) { return v[k - 1] + w * (v[k] - v[k - 1]); };
    return Point{lerp(fitted), lerp(se), lerp(derivative)};
}

double WellTrendFit::to_concentration(double v) const { return scale == Scale::Log ? std::exp(v) : v; }
double WellTrendFit::level(std::size_t i) const { return to_concentration(fitted[i]); }
double WellTrendFit::lower(std::size_t i) const { return to_concentration(fitted[i] - kConfidenceZ * se[i]); }
double WellTrendFit::upper(std::size_t i) const { return to_concentration(fitted[i] + kConfidenceZ * se[i]); }

WellTrendFit fit_well_trend(std::string well_id, std::string solute, std::span<const double> times,
                            std::span<const double> values, std::span<const double> extra_eval_times,
                            const TrendOptions& options, double floor_value) {
    if (times.size() != values.size()) throw ArgumentError("times and values differ in length");
    if (distinct_count(times) < 3) {
        throw InsufficientDataError(well_id + "/" + solute + ": fewer than 3 sampling dates");
    }

    WellTrendFit fit;
    fit.well_id = std::move(well_id);
    fit.solute = std::move(solute);
    fit.scale = options.scale;
    fit.n = times.size();

    std::vector<double> y(values.begin(), values.end());
    if (options.scale == Scale::Log) {
        std::size_t floored = 0;
        for (double& v : y) {
            if (!(v > 0.0)) {
                if (!(floor_value > 0.0)) {
                    throw ArgumentError(fit.well_id + "/" + fit.solute + ": non-positive value and no floor available");
                }
                v = floor_value;
                ++floored;
            }
            v = std::log(v);
        }
        if (floored) {
            fit.warnings.push_back(std::to_string(floored) + " zero value(s) floored at " + format_double(floor_value) +
                                   " before taking logs");
        }
    }

    const auto [tmin_it, tmax_it] = std::minmax_element(times.begin(), times.end());
    const double tmin = *tmin_it, tmax = *tmax_it;
    const int k = std::max(2, options.grid_points);
    std::vector<double> grid;
    grid.reserve(k + extra_eval_times.size());
    for (int i = 0; i < k; ++i) grid.push_back(i == k - 1 ? tmax : tmin + (tmax - tmin) * i / (k - 1));
    grid.insert(grid.end(), extra_eval_times.begin(), extra_eval_times.end());
    std::sort(grid.begin(), grid.end());
    grid.erase(std::unique(grid.begin(), grid.end()), grid.end());

    double h = 0.0;
    if (options.fixed_h) {
        h = *options.fixed_h;
    } else if (fit.n >= 5) {
        auto cands = options.bandwidths.empty() ? default_bandwidth_grid(tmax - tmin) : options.bandwidths;
        auto choice = select_bandwidth(times, y, cands);
        h = choice.h;
        if (choice.fallback) fit.warnings.push_back("no admissible bandwidth; using largest candidate");
    } else {
        h = tmax - tmin;
        fit.warnings.push_back("fewer than 5 samples; bandwidth set to the sampled time span");
    }
    double floored_h = apply_bandwidth_floor(times, grid, h);
    if (floored_h != h) {
        fit.warnings.push_back("bandwidth raised from " + format_double(h) + " to " + format_double(floored_h) +
                               " days to keep local fits well conditioned");
        h = floored_h;
    }
    fit.h = h;

    auto ll = local_linear_fit(times, y, grid, h);
    fit.eval_times = std::move(grid);
    fit.fitted = std::move(ll.fitted);
    fit.se = std::move(ll.se);
    fit.derivative = std::move(ll.derivative);
    fit.sigma2 = ll.sigma2;

    // Mann-Kendall on the time-ordered series.
    std::vector<std::size_t> order(times.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return times[a] < times[b]; });
    std::vector<double> ordered;
    for (auto i : order) ordered.push_back(values[i]);
    fit.mk = mann_kendall(ordered);
    return fit;
}

} // namespace plume::trend
