#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "plume/analysis.hpp"
#include "plume/date.hpp"
#include "plume/errors.hpp"
#include "plume/fixtures.hpp"
#include "plume/indicators.hpp"
#include "support.hpp"

using namespace plume;
using namespace plume::ind;

namespace {

trend::WellTrendFit fit_series(const std::vector<double>& t, const std::vector<double>& v) {
    return trend::fit_well_trend("W1", "Benzene", t, v, {}, {});
}

MonitoringRecord record(double t, double value, bool censored = false) {
    MonitoringRecord r;
    r.well_id = "W1";
    r.constituent = "Benzene";
    r.date = Date(static_cast<int>(t));
    r.raw = value;
    r.working = censored ? value / 2 : value;
    r.censored = censored;
    return r;
}

std::vector<const MonitoringRecord*> pointers(const std::vector<MonitoringRecord>& rs) {
    std::vector<const MonitoringRecord*> out;
    for (const auto& r : rs) out.push_back(&r);
    return out;
}

trend::WellTrendFit flat_fit(double level, double se) {
    trend::WellTrendFit f;
    f.well_id = "W1";
    f.solute = "Benzene";
    f.eval_times = {0.0, 1000.0};
    f.fitted = {level, level};
    f.se = {se, se};
    f.derivative = {0.0, 0.0};
    return f;
}

CellClass mirror(CellClass c) {
    switch (c) {
    case CellClass::StrongUp: return CellClass::StrongDown;
    case CellClass::Up: return CellClass::Down;
    case CellClass::Down: return CellClass::Up;
    case CellClass::StrongDown: return CellClass::StrongUp;
    default: return c;
    }
}

} // namespace

TEST_CASE("trend class examples") {
    std::vector<double> t, flat, growing;
    for (int i = 0; i < 12; ++i) {
        t.push_back(15000.0 + 90.0 * i);
        flat.push_back(7.0);
        growing.push_back(std::exp(1.0 + (t.back() - 15000.0) / kDaysPerYear));
    }
    auto f = fit_series(t, flat);
    auto c = trend_class(&f, 15500.0, {}, false);
    CHECK(c.cls == CellClass::Stable);
    REQUIRE(c.slope);
    CHECK(std::abs(*c.slope) <= 1e-12);

    auto g = fit_series(t, growing);
    auto cg = trend_class(&g, 15500.0, {}, false);
    CHECK(cg.cls == CellClass::StrongUp);
    CHECK(*cg.slope == doctest::Approx(1.0).epsilon(1e-9));

    auto none = trend_class(nullptr, 15500.0, {}, false);
    CHECK(none.cls == CellClass::Insufficient);
    CHECK_FALSE(none.slope);

    auto outside = trend_class(&f, 30000.0, {}, false);
    CHECK(outside.cls == CellClass::Insufficient);

    std::vector<MonitoringRecord> nd{record(15500, 1.0, true), record(15510, 1.0, true)};
    auto ptrs = pointers(nd);
    CHECK(trend_class(&f, 15500.0, ptrs, false).cls == CellClass::NonDetect);
    CHECK(trend_class(nullptr, 15500.0, {}, true).cls == CellClass::NonDetect);
}

TEST_CASE("trend cutoffs") {
    std::vector<double> t;
    for (int i = 0; i < 10; ++i) t.push_back(15000.0 + 100.0 * i);
    auto classify = [&](double slope, Cutoffs cut = {}) {
        std::vector<double> v;
        for (double x : t) v.push_back(std::exp(slope * (x - 15000.0) / kDaysPerYear));
        auto f = fit_series(t, v);
        return trend_class(&f, 15400.0, {}, false, cut).cls;
    };
    CHECK(classify(0.05) == CellClass::Stable);
    CHECK(classify(-0.05) == CellClass::Stable);
    CHECK(classify(0.2) == CellClass::Up);
    CHECK(classify(-0.2) == CellClass::Down);
    CHECK(classify(0.7) == CellClass::StrongUp);
    CHECK(classify(-0.7) == CellClass::StrongDown);
    CHECK(classify(0.2, {0.3, 0.6}) == CellClass::Stable);
    CHECK(classify(0.7, {0.3, 0.8}) == CellClass::Up);
    CHECK_THROWS_AS(classify(0.2, {0.5, 0.4}), ArgumentError);
    CHECK_THROWS_AS(classify(0.2, {0.0, 0.4}), ArgumentError);
}

TEST_CASE("classes mirror under time reversal") {
    fixtures::Rng rng(21);
    for (int rep = 0; rep < 50; ++rep) {
        std::vector<double> t, v, tr, vr;
        const int n = 8 + static_cast<int>(rng.next() % 20);
        const double slope = rng.uniform(-1.5, 1.5);
        for (int i = 0; i < n; ++i) {
            t.push_back(14000.0 + 60.0 * i + rng.uniform(0, 30));
            v.push_back(std::exp(slope * (t.back() - 14000.0) / kDaysPerYear + 0.2 * rng.normal()));
        }
        const double T = t.front() + t.back();
        for (int i = n - 1; i >= 0; --i) {
            tr.push_back(T - t[static_cast<std::size_t>(i)]);
            vr.push_back(v[static_cast<std::size_t>(i)]);
        }
        auto f = fit_series(t, v);
        auto fr = fit_series(tr, vr);
        for (double q : {0.25, 0.5, 0.75}) {
            const double at = t.front() + q * (t.back() - t.front());
            auto c = trend_class(&f, at, {}, false);
            auto cr = trend_class(&fr, T - at, {}, false);
            REQUIRE(c.slope);
            CHECK(*cr.slope == doctest::Approx(-*c.slope).epsilon(1e-6).scale(1e-9));
            // Skip points whose slope sits on a cutoff to within rounding.
            const double a = std::abs(*c.slope);
            if (std::abs(a - 0.1) > 1e-6 && std::abs(a - 0.5) > 1e-6) CHECK(cr.cls == mirror(c.cls));
        }
    }
}

TEST_CASE("threshold class examples") {
    std::vector<MonitoringRecord> rs{record(15000, 9.0), record(15010, 4.0)};
    auto ptrs = pointers(rs);
    auto abs4 = threshold_class(nullptr, 15005.0, ptrs, 5.0, Mode::ThresholdAbsolute);
    CHECK(abs4.cls == CellClass::Below);
    CHECK(*abs4.value == 4.0);
    CHECK(threshold_class(nullptr, 15005.0, ptrs, 3.0, Mode::ThresholdAbsolute).cls == CellClass::Above);
    CHECK(threshold_class(nullptr, 15005.0, ptrs, 4.0, Mode::ThresholdAbsolute).cls == CellClass::Below);
    CHECK(threshold_class(nullptr, 15005.0, {}, 4.0, Mode::ThresholdAbsolute).cls == CellClass::Insufficient);

    const double ln4 = std::log(4.0);
    auto over = flat_fit(ln4, (std::log(5.1) - ln4) / trend::kConfidenceZ);
    auto cs = threshold_class(&over, 500.0, {}, 5.0, Mode::ThresholdStatistical);
    CHECK(cs.cls == CellClass::Above);
    CHECK(*cs.upper == doctest::Approx(5.1));
    CHECK(*cs.value == doctest::Approx(4.0));
    auto under = flat_fit(ln4, (std::log(4.9) - ln4) / trend::kConfidenceZ);
    CHECK(threshold_class(&under, 500.0, {}, 5.0, Mode::ThresholdStatistical).cls == CellClass::Below);

    auto missing = threshold_class(&under, 500.0, {}, std::nullopt, Mode::ThresholdStatistical);
    CHECK(missing.cls == CellClass::Insufficient);
    CHECK_FALSE(missing.note.empty());
    CHECK_THROWS_AS(threshold_class(&under, 500.0, {}, -1.0, Mode::ThresholdStatistical), ArgumentError);
    CHECK_THROWS_AS(threshold_class(&under, 500.0, {}, 1.0, Mode::Trend), ArgumentError);
}

TEST_CASE("statistical mode is conservative") {
    fixtures::Rng rng(33);
    int compared = 0;
    for (int rep = 0; rep < 200; ++rep) {
        std::vector<double> t, v;
        std::vector<MonitoringRecord> rs;
        const int n = 6 + static_cast<int>(rng.next() % 20);
        for (int i = 0; i < n; ++i) {
            t.push_back(15000.0 + 45.0 * i);
            v.push_back(std::exp(2.0 + rng.uniform(-1, 1) * (t.back() - 15000.0) / 3000.0 + 0.5 * rng.normal()));
            rs.push_back(record(t.back(), v.back()));
        }
        auto f = fit_series(t, v);
        for (int i = 0; i < n; ++i) {
            std::vector<const MonitoringRecord*> one{&rs[static_cast<std::size_t>(i)]};
            const double thr = std::exp(rng.uniform(0.5, 3.5));
            auto a = threshold_class(&f, t[static_cast<std::size_t>(i)], one, thr, Mode::ThresholdAbsolute);
            auto s = threshold_class(&f, t[static_cast<std::size_t>(i)], one, thr, Mode::ThresholdStatistical);
            if (s.cls == CellClass::Below) CHECK(*s.upper < thr);
            if (s.cls == CellClass::Above) CHECK(*s.upper >= thr);
            const double obs = v[static_cast<std::size_t>(i)];
            if (a.cls == CellClass::Above && obs <= *s.upper) {
                CHECK(s.cls != CellClass::Below);
                ++compared;
            }
        }
    }
    CHECK(compared > 100);
}

TEST_CASE("thresholds are monotone") {
    const auto& an = support::analysis("comprehensive");
    const std::size_t k = an.dataset.intervals().size() / 2;
    auto rank = [](CellClass c) { return c == CellClass::Above ? 1 : c == CellClass::Below ? 0 : -1; };
    for (Mode mode : {Mode::ThresholdAbsolute, Mode::ThresholdStatistical}) {
        std::vector<int> prev;
        for (double thr : {0.5, 2.0, 8.0, 32.0, 128.0, 512.0}) {
            Thresholds th;
            for (const auto& s : an.dataset.solutes()) th[s] = thr;
            auto m = indicator_matrix(an, k, mode, th);
            std::vector<int> cur;
            for (const auto& c : m.cells) cur.push_back(rank(c.cls));
            if (!prev.empty())
                for (std::size_t i = 0; i < cur.size(); ++i)
                    if (cur[i] >= 0 && prev[i] >= 0) CHECK(cur[i] <= prev[i]);
            prev = cur;
        }
    }
}

TEST_CASE("indicator matrix equals per-cell recomputation") {
    for (const char* name : {"basic", "comprehensive"}) {
        const auto& an = support::analysis(name);
        const auto& ds = an.dataset;
        Thresholds th;
        for (const auto& s : ds.solutes()) th[s] = 10.0;
        for (std::size_t k = 0; k < ds.intervals().size(); ++k) {
            for (Mode mode : {Mode::Trend, Mode::ThresholdAbsolute, Mode::ThresholdStatistical}) {
                auto m = indicator_matrix(an, k, mode, th);
                REQUIRE(m.cells.size() == ds.wells().size() * ds.solutes().size());
                CHECK(std::is_sorted(m.wells.begin(), m.wells.end()));
                CHECK(m.solutes == ds.solutes());
                CHECK(m.t == ds.intervals()[k].midpoint());
                for (std::size_t w = 0; w < m.wells.size(); ++w) {
                    for (std::size_t s = 0; s < m.solutes.size(); ++s) {
                        const auto& cell = m.at(w, s);
                        CHECK(cell.well_id == m.wells[w]);
                        CHECK(cell.solute == m.solutes[s]);
                        CHECK(cell.mode == mode);
                        std::vector<const MonitoringRecord*> samples;
                        for (const auto* r : ds.series(m.wells[w], m.solutes[s]))
                            if (ds.interval_of(r->date) == k) samples.push_back(r);
                        const auto* entry = an.trend_entry(m.wells[w], m.solutes[s]);
                        const auto* fit = an.trend(m.wells[w], m.solutes[s]);
                        IndicatorCell ref = mode == Mode::Trend
                                                ? trend_class(fit, m.t, samples, entry && entry->all_censored)
                                                : threshold_class(fit, m.t, samples, th.at(m.solutes[s]), mode);
                        CHECK(cell.cls == ref.cls);
                        CHECK(cell.slope == ref.slope);
                        CHECK(cell.value == ref.value);
                        CHECK(cell.upper == ref.upper);
                        if (mode == Mode::Trend && cell.slope) CHECK(std::isfinite(*cell.slope));
                        const bool trend_cls = cell.cls == CellClass::StrongUp || cell.cls == CellClass::Up ||
                                               cell.cls == CellClass::Stable || cell.cls == CellClass::Down ||
                                               cell.cls == CellClass::StrongDown;
                        const bool thr_cls = cell.cls == CellClass::Above || cell.cls == CellClass::Below;
                        if (mode == Mode::Trend) CHECK_FALSE(thr_cls);
                        else CHECK_FALSE(trend_cls);
                        if (trend_cls) CHECK(cell.slope.has_value());
                    }
                }
            }
        }
    }
}

TEST_CASE("missing thresholds are reported") {
    const auto& an = support::analysis("basic");
    auto m = indicator_matrix(an, 0, Mode::ThresholdAbsolute, {});
    CHECK(m.diagnostics.size() == an.dataset.solutes().size());
    for (const auto& c : m.cells) CHECK(c.cls == CellClass::Insufficient);
    CHECK_THROWS_AS(indicator_matrix(an, 999, Mode::Trend), IntervalRangeError);
    CHECK(parse_mode("statistical") == Mode::ThresholdStatistical);
    CHECK_THROWS_AS(parse_mode("bogus"), ArgumentError);
}
