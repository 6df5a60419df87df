#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "oracles.hpp"
#include "plume/fixtures.hpp"
#include "plume/flow.hpp"
#include "support.hpp"

using namespace plume;
using namespace plume::flow;

namespace {

std::vector<std::array<double, 2>> as_arrays(const std::vector<Point2>& p) { return {p.begin(), p.end()}; }

void check_delaunay(const Triangulation& tri) {
    auto pts = as_arrays(tri.vertices);
    for (const auto& t : tri.triangles) {
        CHECK(orient(tri.vertices[t[0]], tri.vertices[t[1]], tri.vertices[t[2]]) > 0.0);
        CHECK(oracle::empty_circumcircle(pts[t[0]], pts[t[1]], pts[t[2]], pts));
    }
    for (std::size_t i = 0; i < tri.neighbors.size(); ++i)
        for (auto j : tri.neighbors[i]) {
            const auto& back = tri.neighbors[j];
            CHECK(std::binary_search(back.begin(), back.end(), i));
        }
}

// Wells plus one GW reading each in January 2010.
Dataset gw_dataset(const std::vector<Point2>& pts, const std::vector<double>& levels) {
    std::ostringstream w, m;
    w << "WellID,X,Y\n";
    m << "WellID,SampleDate,Constituent,Result,Units\n";
    for (std::size_t i = 0; i < pts.size(); ++i) {
        w << "W" << i << "," << format_double(pts[i][0]) << "," << format_double(pts[i][1]) << "\n";
        if (!std::isnan(levels[i])) m << "W" << i << ",2010-01-15,GW," << format_double(levels[i]) << ",m\n";
        m << "W" << i << ",2010-01-15,Benzene,1,ug/L\n";
    }
    return Dataset::build(parse_tables(m.str(), w.str()), {}, Date::from_ymd(2030, 1, 1));
}

FlowField field_of(const Dataset& ds) {
    auto tri = well_triangulation(ds);
    return flow_field(ds, &tri, 0);
}

double angle_diff(double a, double b) { return std::fmod(a - b + 540.0, 360.0) - 180.0; }

} // namespace

TEST_CASE("orientation predicates") {
    CHECK(orient({0, 0}, {1, 0}, {0, 1}) > 0);
    CHECK(orient({0, 0}, {0, 1}, {1, 0}) < 0);
    CHECK(orient({0, 0}, {1, 1}, {2, 2}) == 0);
    CHECK(incircle({0, 0}, {1, 0}, {0, 1}, {0.5, 0.5}) > 0);
    CHECK(incircle({0, 0}, {1, 0}, {0, 1}, {2, 2}) < 0);
}

TEST_CASE("delaunay small cases") {
    std::vector<Point2> square{{0, 0}, {1, 0}, {1, 1}, {0, 1}};
    auto t = delaunay(square);
    REQUIRE(t.triangles.size() == 2);
    // Cocircular: the diagonal through the lowest index wins.
    CHECK(t.neighbors[0] == std::vector<std::size_t>{1, 2, 3});
    CHECK(t.neighbors[1] == std::vector<std::size_t>{0, 2});
    check_delaunay(t);
    auto again = delaunay(square);
    CHECK(again.triangles == t.triangles);

    std::vector<Point2> tri{{0, 0}, {4, 0}, {1, 3}};
    auto s = delaunay(tri);
    REQUIRE(s.triangles.size() == 1);
    for (const auto& n : s.neighbors) CHECK(n.size() == 2);

    CHECK_THROWS_AS(delaunay(std::vector<Point2>{{0, 0}, {1, 1}}), TriangulationError);
    CHECK_THROWS_AS(delaunay(std::vector<Point2>{{0, 0}, {1, 1}, {2, 2}, {3, 3}}), TriangulationError);
    CHECK_THROWS_AS(delaunay(std::vector<Point2>{{0, 0}, {1, 0}, {0, 1}, {1, 0}}), TriangulationError);
}

TEST_CASE("delaunay on jittered grids and random sets") {
    fixtures::Rng rng(31);
    std::vector<Point2> grid;
    for (int j = 0; j < 5; ++j)
        for (int i = 0; i < 5; ++i) grid.push_back({i * 10.0 + rng.uniform(-2, 2), j * 10.0 + rng.uniform(-2, 2)});
    auto t = delaunay(grid);
    check_delaunay(t);
    CHECK(t.max_circumcircle_violation() <= 1e-12);

    for (int rep = 0; rep < 100; ++rep) {
        const int n = 3 + static_cast<int>(rng.next() % 40);
        std::vector<Point2> p;
        for (int i = 0; i < n; ++i) p.push_back({rng.uniform(-1e3, 1e3) + 5e5, rng.uniform(-1e3, 1e3) + 4e6});
        auto tri = delaunay(p);
        check_delaunay(tri);
        // Euler: T = 2n - 2 - hull vertices.
        std::size_t edges = 0;
        for (const auto& nb : tri.neighbors) edges += nb.size();
        edges /= 2;
        const std::size_t hull = 3 * static_cast<std::size_t>(n) - 3 - edges;
        CHECK(tri.triangles.size() == 2 * static_cast<std::size_t>(n) - 2 - hull);
    }

    // A lattice has many cocircular quadruples.
    std::vector<Point2> lattice;
    for (int j = 0; j < 4; ++j)
        for (int i = 0; i < 4; ++i) lattice.push_back({double(i), double(j)});
    auto lt = delaunay(lattice);
    CHECK(lt.triangles.size() == 18);
    check_delaunay(lt);
}

TEST_CASE("plane fit") {
    std::vector<Point2> p{{0, 0}, {1, 0}, {0, 1}};
    auto pl = fit_plane(p, std::vector<double>{10, 9, 9});
    CHECK(pl.a == doctest::Approx(10.0).epsilon(1e-14));
    CHECK(pl.b == doctest::Approx(-1.0).epsilon(1e-14));
    CHECK(pl.c == doctest::Approx(-1.0).epsilon(1e-14));

    auto flat = flow_vector(fit_plane(p, std::vector<double>{3, 3, 3}));
    CHECK(flat.flat);
    CHECK(flat.R == 0.0);

    fixtures::Rng rng(4);
    std::vector<Point2> six;
    std::vector<double> L;
    std::vector<std::array<double, 2>> six_a;
    for (int i = 0; i < 6; ++i) {
        six.push_back({rng.uniform(0, 10), rng.uniform(0, 10)});
        six_a.push_back(six.back());
        L.push_back(5 + 2 * six.back()[0] - 3 * six.back()[1]);
    }
    auto q = fit_plane(six, L);
    auto o = oracle::plane(six_a, L);
    CHECK(std::abs(q.a - 5) <= 1e-10);
    CHECK(std::abs(q.b - 2) <= 1e-10);
    CHECK(std::abs(q.c + 3) <= 1e-10);
    CHECK(std::abs(q.a - o[0]) <= 1e-10);

    for (auto& v : L) v += 0.3 * rng.normal();
    q = fit_plane(six, L);
    o = oracle::plane(six_a, L);
    CHECK(q.a == doctest::Approx(o[0]).epsilon(1e-10));
    CHECK(q.b == doctest::Approx(o[1]).epsilon(1e-10));
    CHECK(q.c == doctest::Approx(o[2]).epsilon(1e-10));

    CHECK_THROWS_AS(fit_plane(std::vector<Point2>{{0, 0}, {1, 1}}, std::vector<double>{1, 2}), InsufficientDataError);
    CHECK_THROWS_AS(fit_plane(std::vector<Point2>{{0, 0}, {1, 1}, {2, 2}}, std::vector<double>{1, 2, 3}), FitError);
}

TEST_CASE("flow vector direction and magnitude") {
    auto v = flow_vector({0, -1, -1});
    CHECK(v.R == doctest::Approx(std::sqrt(2.0)));
    CHECK(v.theta == doctest::Approx(45.0));
    auto w = flow_vector({0, 1, 0});
    CHECK(w.R == 1.0);
    CHECK(w.theta == doctest::Approx(180.0));
    auto s = flow_vector({0, 0, 1});
    CHECK(s.theta == doctest::Approx(270.0));
    auto z = flow_vector({5, 0, 0});
    CHECK(z.flat);
    for (double b : {-2.0, -0.1, 0.3, 4.0})
        for (double c : {-3.0, 0.2, 1.0}) {
            auto f = flow_vector({0, b, c});
            CHECK(f.theta >= 0.0);
            CHECK(f.theta < 360.0);
            CHECK(f.R == std::sqrt(b * b + c * c));
        }
}

TEST_CASE("flow field examples") {
    std::vector<Point2> simplex{{0, 0}, {10, 0}, {0, 10}};
    auto f = field_of(gw_dataset(simplex, {10, 9, 9}));
    REQUIRE(f.vectors.size() == 3);
    for (const auto& v : f.vectors) {
        CHECK(v.theta == doctest::Approx(f.vectors[0].theta).epsilon(1e-12));
        CHECK(v.R == doctest::Approx(f.vectors[0].R).epsilon(1e-12));
    }
    CHECK(f.vectors[0].theta == doctest::Approx(45.0));

    auto g = field_of(gw_dataset(simplex, {10, 9, std::nan("")}));
    CHECK(g.vectors.empty());
    CHECK(g.suppressed.size() == 2);
    for (const auto& s : g.suppressed) CHECK(s.reason == "INSUFFICIENT_NEIGHBORS");

    auto flat = field_of(gw_dataset(simplex, {4, 4, 4}));
    CHECK(flat.vectors.empty());
    CHECK(flat.suppressed.size() == 3);
    CHECK(flat.suppressed[0].reason == "FLAT");

    auto none = flow_field(gw_dataset(simplex, {10, 9, 9}), nullptr, 0);
    CHECK(none.vectors.empty());
    CHECK(none.suppressed.size() == 3);
    CHECK(none.suppressed[0].reason == "NO_TRIANGULATION");
}

TEST_CASE("flow field on the comprehensive fixture matches a neighbour count") {
    auto ds = load_dataset(support::fixture("comprehensive"));
    auto tri = well_triangulation(ds);
    for (std::size_t k = 0; k < ds.intervals().size(); ++k) {
        std::set<std::size_t> with_gw;
        for (const auto* r : ds.interval_records(k, "GW")) with_gw.insert(*ds.well_index(r->well_id));
        std::size_t expected = 0;
        for (auto i : with_gw) {
            std::size_t nb = 0;
            for (auto j : tri.neighbors[i]) nb += with_gw.count(j);
            if (nb >= 2) ++expected;
        }
        auto f = flow_field(ds, &tri, k);
        CHECK(f.vectors.size() == expected);
        CHECK(f.vectors.size() + f.suppressed.size() == with_gw.size());
    }
}

TEST_CASE("flow invariances") {
    fixtures::Rng rng(77);
    for (int rep = 0; rep < 20; ++rep) {
        const int n = 5 + static_cast<int>(rng.next() % 10);
        std::vector<Point2> p;
        std::vector<double> L;
        for (int i = 0; i < n; ++i) {
            p.push_back({rng.uniform(0, 500), rng.uniform(0, 500)});
            L.push_back(100 - 0.01 * p.back()[0] + 0.004 * p.back()[1] + 0.2 * rng.normal());
        }
        auto base = field_of(gw_dataset(p, L));
        REQUIRE(!base.vectors.empty());

        const double phi = rng.uniform(0, 360), r = phi * M_PI / 180.0;
        std::vector<Point2> rot, shift;
        for (auto q : p) {
            rot.push_back({std::cos(r) * q[0] - std::sin(r) * q[1], std::sin(r) * q[0] + std::cos(r) * q[1]});
            shift.push_back({q[0] + 1234.5, q[1] - 987.25});
        }
        std::vector<double> offset, scaled;
        for (double l : L) {
            offset.push_back(l + 17.0);
            scaled.push_back(2.5 * l);
        }
        auto fr = field_of(gw_dataset(rot, L));
        auto fs = field_of(gw_dataset(shift, L));
        auto fo = field_of(gw_dataset(p, offset));
        auto fk = field_of(gw_dataset(p, scaled));
        REQUIRE(fr.vectors.size() == base.vectors.size());
        REQUIRE(fs.vectors.size() == base.vectors.size());
        for (std::size_t i = 0; i < base.vectors.size(); ++i) {
            const auto& b = base.vectors[i];
            CHECK(std::abs(angle_diff(fr.vectors[i].theta, b.theta + phi)) <= 1e-9);
            CHECK(std::abs(fr.vectors[i].R - b.R) <= 1e-12 * b.R);
            CHECK(std::abs(angle_diff(fs.vectors[i].theta, b.theta)) <= 1e-9);
            CHECK(fs.vectors[i].R == doctest::Approx(b.R).epsilon(1e-9));
            CHECK(fo.vectors[i].plane.b == doctest::Approx(b.plane.b).epsilon(1e-9));
            CHECK(fo.vectors[i].plane.c == doctest::Approx(b.plane.c).epsilon(1e-9));
            CHECK(fo.vectors[i].plane.a == doctest::Approx(b.plane.a + 17.0).epsilon(1e-9));
            CHECK(std::abs(angle_diff(fk.vectors[i].theta, b.theta)) <= 1e-9);
            CHECK(fk.vectors[i].R == doctest::Approx(2.5 * b.R).epsilon(1e-12));
        }
    }
}
