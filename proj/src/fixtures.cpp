#include "plume/fixtures.hpp"

#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>
#include <vector>

#include "plume/date.hpp"
#include "plume/errors.hpp"

namespace plume::fixtures {

double Rng::uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

double Rng::normal() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    double u1 = 0.0;
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * 3.14159265358979323846 * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
}

namespace {

struct Solute {
    const char* name;
    double c0;      // source concentration, ug/L
    double decay;   // per year
    double speed;   // plume centre drift along +x, m per year
    double sx, sy;  // spread, m
    double dl;      // detection limit
};

struct Site {
    std::uint64_t seed;
    double x0, y0;  // coordinate offsets (UTM-like)
    double sx, sy;  // source position in local metres
    double spread = 1.0;
    std::vector<std::pair<double, double>> wells;
    std::vector<Solute> solutes;
    int start_year;
    int events;
    bool aquifer;
    bool gw;
    std::set<std::size_t> no_gw;
    std::size_t napl_wells = 0;
    int napl_events = 0;
    bool overlays;
};

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

std::string well_name(std::size_t i) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "MW-%02zu", i + 1);
    return buf;
}

Date event_date(const Site& s, int e, Rng& rng) {
    const int q = e % 4, y = s.start_year + e / 4;
    const Date start = Date::from_ymd(y, static_cast<unsigned>(3 * q + 1), 1);
    const int jitter = static_cast<int>(std::lround(rng.uniform(-12.0, 12.0)));
    return Date(start.days() + 30 + jitter);
}

double concentration(const Site& s, const Solute& sol, double x, double y, double years) {
    const double cx = s.sx + sol.speed * years;
    const double spread = s.spread * (1.0 + 0.04 * years);
    const double dx = (x - cx) / (sol.sx * spread), dy = (y - s.sy) / (sol.sy * spread);
    return sol.c0 * std::exp(-sol.decay * years) * std::exp(-0.5 * (dx * dx + dy * dy));
}

std::map<std::string, std::string> build(const Site& s) {
    Rng rng(s.seed);
    std::vector<std::pair<double, double>> wells;
    for (auto [x, y] : s.wells) wells.push_back({x + rng.uniform(-3.0, 3.0), y + rng.uniform(-3.0, 3.0)});

    // Wells ordered by distance to the source carry NAPL.
    std::vector<std::size_t> order(wells.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) {
        return std::hypot(wells[a].first - s.sx, wells[a].second - s.sy) <
               std::hypot(wells[b].first - s.sx, wells[b].second - s.sy);
    });
    std::set<std::size_t> napl(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(s.napl_wells));

    std::ostringstream w;
    w << (s.aquifer ? "WellID,X,Y,Aquifer\n" : "WellID,X,Y\n");
    for (std::size_t i = 0; i < wells.size(); ++i) {
        w << well_name(i) << "," << fmt("%.2f", s.x0 + wells[i].first) << "," << fmt("%.2f", s.y0 + wells[i].second);
        if (s.aquifer) w << ",Shallow";
        w << "\n";
    }

    std::ostringstream m;
    m << "WellID,SampleDate,Constituent,Result,Units\n";
    const Date origin = Date::from_ymd(s.start_year, 1, 1);
    for (int e = 0; e < s.events; ++e) {
        for (std::size_t i = 0; i < wells.size(); ++i) {
            const Date d = event_date(s, e, rng);
            const double years = (d.days() - origin.days()) / kDaysPerYear;
            const auto [x, y] = wells[i];
            const bool napl_now = napl.count(i) && e < s.napl_events;
            if (napl.count(i) && e < s.napl_events + 4) {
                const double thick = napl_now ? rng.uniform(0.05, 0.4) : 0.0;
                m << well_name(i) << "," << d.iso() << ",NAPL," << fmt("%.2f", thick) << ",m\n";
            }
            if (s.gw && !s.no_gw.count(i)) {
                const double level = 100.0 - 0.012 * x - 0.005 * y + 0.3 * std::sin(2.0 * 3.14159265358979 * years) +
                                     0.02 * rng.normal();
                m << well_name(i) << "," << d.iso() << ",GW," << fmt("%.3f", level) << ",m\n";
            }
            if (napl_now) continue;
            for (const auto& sol : s.solutes) {
                const bool missing = rng.uniform() < 0.04;
                const double noise = rng.normal();
                if (missing) continue;
                const double c = concentration(s, sol, x, y, years) * std::exp(0.25 * noise) + 0.2 * sol.dl;
                m << well_name(i) << "," << d.iso() << "," << sol.name << ",";
                if (c < sol.dl)
                    m << "ND<" << fmt("%g", sol.dl);
                else
                    m << fmt("%.4g", c);
                m << ",ug/L\n";
            }
        }
    }

    std::map<std::string, std::string> files;
    files["monitoring.csv"] = m.str();
    files["wells.csv"] = w.str();
    if (s.overlays) {
        auto pt = [&](double x, double y) { return "[" + fmt("%.2f", s.x0 + x) + ", " + fmt("%.2f", s.y0 + y) + "]"; };
        std::ostringstream o;
        o << "{\n  \"type\": \"FeatureCollection\",\n  \"features\": [\n";
        o << "    {\"type\": \"Feature\", \"properties\": {\"name\": \"Site road\"}, \"geometry\": {\"type\": "
             "\"LineString\", \"coordinates\": ["
          << pt(-10, 5) << ", " << pt(150, 0) << ", " << pt(320, 10) << "]}},\n";
        o << "    {\"type\": \"Feature\", \"properties\": {\"name\": \"Station building\"}, \"geometry\": {\"type\": "
             "\"Polygon\", \"coordinates\": [["
          << pt(30, 150) << ", " << pt(80, 150) << ", " << pt(80, 190) << ", " << pt(30, 190) << ", " << pt(30, 150)
          << "]]}},\n";
        o << "    {\"type\": \"Feature\", \"properties\": {\"name\": \"Tank pit\"}, \"geometry\": {\"type\": "
             "\"Polygon\", \"coordinates\": [["
          << pt(50, 105) << ", " << pt(72, 105) << ", " << pt(72, 135) << ", " << pt(50, 135) << ", " << pt(50, 105)
          << "]]}}\n";
        o << "  ]\n}\n";
        files["overlays.json"] = o.str();
    }
    return files;
}

} // namespace

std::map<std::string, std::string> generate(const std::string& name) {
    const Solute benzene{"Benzene", 2000.0, 0.25, 8.0, 40.0, 25.0, 1.0};
    const Solute toluene{"Toluene", 800.0, 0.40, 5.0, 35.0, 22.0, 1.0};
    const Solute mtbe{"MTBE", 300.0, -0.05, 15.0, 60.0, 30.0, 0.5};
    const Solute ethyl{"Ethylbenzene", 400.0, 0.30, 6.0, 30.0, 20.0, 1.0};
    const Solute xylenes{"Xylenes", 1200.0, 0.20, 6.0, 38.0, 24.0, 2.0};

    Site s;
    if (name == "basic") {
        s.seed = 20120101;
        s.x0 = 512000.0;
        s.y0 = 4170000.0;
        s.sx = 40.0;
        s.sy = 75.0;
        s.wells = {{10, 70}, {45, 80}, {80, 60}, {90, 100}, {130, 75}, {150, 40}, {170, 115}, {195, 80}};
        s.solutes = {benzene, toluene, mtbe};
        s.start_year = 2012;
        s.events = 12;
        s.aquifer = false;
        s.gw = false;
        s.overlays = false;
    } else if (name == "comprehensive") {
        s.seed = 20080101;
        s.x0 = 433000.0;
        s.y0 = 5210000.0;
        s.sx = 60.0;
        s.sy = 120.0;
        s.spread = 2.5;
        for (int j = 0; j < 5; ++j)
            for (int i = 0; i < 5; ++i) s.wells.push_back({20.0 + 65.0 * i, 20.0 + 52.0 * j});
        s.solutes = {benzene, toluene, ethyl, xylenes, mtbe};
        s.start_year = 2008;
        s.events = 24;
        s.aquifer = true;
        s.gw = true;
        s.no_gw = {4, 12, 20, 24};
        s.napl_wells = 2;
        s.napl_events = 8;
        s.overlays = true;
    } else {
        throw ArgumentError("unknown fixture '" + name + "' (basic | comprehensive)");
    }
    return build(s);
}

} // namespace plume::fixtures
