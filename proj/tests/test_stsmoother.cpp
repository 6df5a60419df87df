#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "oracles.hpp"
#include "plume/errors.hpp"
#include "plume/fixtures.hpp"
#include "plume/stsmoother.hpp"
#include "support.hpp"

using namespace plume;
using namespace plume::st;

namespace {

struct Problem {
    TensorBasis basis;
    std::vector<Point3> points;
    std::vector<double> y;
    oracle::Axis ax, ay, at;
};

Problem make_problem(int n, int mx, int my, int mt, std::uint64_t seed, double (*f)(double, double, double),
                     double noise = 0.0) {
    Problem p;
    p.ax = {500.0, 800.0, mx, 3};
    p.ay = {-100.0, 150.0, my, 3};
    p.at = {14000.0, 17000.0, mt, 3};
    p.basis = {BSplineBasis::from_range(p.ax.lo, p.ax.hi, mx, 3), BSplineBasis::from_range(p.ay.lo, p.ay.hi, my, 3),
               BSplineBasis::from_range(p.at.lo, p.at.hi, mt, 3)};
    fixtures::Rng rng(seed);
    for (int i = 0; i < n; ++i) {
        Point3 q{rng.uniform(p.ax.lo, p.ax.hi), rng.uniform(p.ay.lo, p.ay.hi), rng.uniform(p.at.lo, p.at.hi)};
        p.points.push_back(q);
        p.y.push_back(f(p.basis.x.to_unit(q.x), p.basis.y.to_unit(q.y), p.basis.t.to_unit(q.t)) + noise * rng.normal());
    }
    return p;
}

double affine(double u, double v, double w) { return 1.0 + 2.0 * u - 1.5 * v + 0.75 * w; }
double smooth(double u, double v, double w) { return std::sin(3.0 * u) * std::cos(2.0 * v) + w * w; }
double zero(double, double, double) { return 0.0; }

std::vector<std::array<double, 3>> arrays(const std::vector<Point3>& p) {
    std::vector<std::array<double, 3>> out;
    for (const auto& q : p) out.push_back({q.x, q.y, q.t});
    return out;
}

Eigen::VectorXd to_vec(const std::vector<double>& v) {
    return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

double objective(const Design& d, const Penalty& p, double lambda, const Eigen::VectorXd& a) {
    return (d.y - d.B * a).squaredNorm() + lambda * (p.D * a).squaredNorm();
}

} // namespace

TEST_CASE("design rows against a dense evaluation") {
    auto p = make_problem(200, 6, 6, 8, 1, smooth);
    auto d = build_design(p.basis, p.points, p.y);
    CHECK(d.B.rows() == 200);
    CHECK(d.B.cols() == 288);
    auto dense = oracle::dense_design(p.ax, p.ay, p.at, arrays(p.points));
    Eigen::MatrixXd B = Eigen::MatrixXd(d.B);
    CHECK((B - dense).cwiseAbs().maxCoeff() <= 1e-13);
    for (Eigen::Index i = 0; i < d.B.rows(); ++i) {
        CHECK(std::abs(B.row(i).sum() - 1.0) <= 1e-10);
        CHECK(d.B.row(i).nonZeros() <= 64);
    }
    std::vector<Point3> single{{600.0, 0.0, 15000.0}};
    auto one = build_design(p.basis, single, std::vector<double>{1.0});
    CHECK(one.B.nonZeros() <= 64);

    std::vector<Point3> outside{{400.0, 0.0, 15000.0}};
    CHECK_THROWS_AS(build_design(p.basis, outside, std::vector<double>{1.0}), ExtrapolationError);
}

TEST_CASE("difference penalty") {
    auto d1 = Eigen::MatrixXd(difference_matrix(5, 1));
    auto d2 = Eigen::MatrixXd(difference_matrix(5, 2));
    CHECK(d1.row(0) == (Eigen::RowVectorXd(5) << -1, 1, 0, 0, 0).finished());
    CHECK(d2.row(1) == (Eigen::RowVectorXd(5) << 0, 1, -2, 1, 0).finished());
    CHECK(d1.isApprox(oracle::difference(5, 1)));
    CHECK(d2.isApprox(oracle::difference(5, 2)));
    CHECK(Eigen::MatrixXd(difference_matrix(7, 3)).isApprox(oracle::difference(7, 3)));
    CHECK_THROWS_AS(difference_matrix(2, 2), ArgumentError);

    TensorBasis b{BSplineBasis::from_range(0, 1, 5, 3), BSplineBasis::from_range(0, 1, 4, 3),
                  BSplineBasis::from_range(0, 1, 6, 3)};
    auto p1 = make_penalty(b, 1), p2 = make_penalty(b, 2);
    CHECK(Eigen::MatrixXd(p2.D).isApprox(oracle::penalty(5, 4, 6, 2)));
    Eigen::VectorXd ones = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(b.size()));
    CHECK((p1.D * ones).norm() == 0.0);
    CHECK((p2.D * ones).norm() == 0.0);
    Eigen::VectorXd lin(static_cast<Eigen::Index>(b.size()));
    for (int i = 0; i < 5; ++i)
        for (int j = 0; j < 4; ++j)
            for (int k = 0; k < 6; ++k) lin(static_cast<Eigen::Index>(b.index(i, j, k))) = 3.0 * i - 2.0 * j + 0.5 * k + 1.0;
    CHECK((p2.D * lin).norm() <= 1e-12);
    CHECK((p1.D * lin).norm() > 1.0);
}

TEST_CASE("lambda zero is ordinary least squares") {
    auto p = make_problem(100, 4, 4, 4, 2, smooth, 0.05);
    auto d = build_design(p.basis, p.points, p.y);
    auto m = fit(d, make_penalty(p.basis, 2), 0.0);
    auto ref = oracle::ols(oracle::dense_design(p.ax, p.ay, p.at, arrays(p.points)), to_vec(p.y));
    CHECK((m.alpha - ref).norm() / ref.norm() <= 1e-8);
    CHECK(m.edf == doctest::Approx(64.0).epsilon(1e-8));

    // Exactly representable response: interpolated at the sites.
    std::vector<double> exact(p.y.size());
    Eigen::VectorXd coef = Eigen::VectorXd::LinSpaced(64, -1.0, 1.0);
    Eigen::VectorXd fitted = d.B * coef;
    for (std::size_t i = 0; i < exact.size(); ++i) exact[i] = fitted(static_cast<Eigen::Index>(i));
    auto me = fit(build_design(p.basis, p.points, exact), make_penalty(p.basis, 2), 0.0);
    auto pred = me.predict_linear(p.points);
    for (std::size_t i = 0; i < exact.size(); ++i) CHECK(std::abs(pred[i] - exact[i]) <= 1e-8);
}

TEST_CASE("rank deficiency and argument errors") {
    auto p = make_problem(30, 6, 6, 6, 3, smooth);
    auto d = build_design(p.basis, p.points, p.y);
    auto pen = make_penalty(p.basis, 2);
    try {
        fit(d, pen, 0.0);
        FAIL("expected a rank deficiency error");
    } catch (const RankDeficiencyError& e) {
        CHECK(std::string(e.what()).find("lambda > 0") != std::string::npos);
    }
    CHECK_THROWS_AS(fit(d, pen, -1.0), ArgumentError);
    CHECK_NOTHROW(fit(d, pen, 1.0));

    // More rows than columns, but every observation at one time.
    auto flat = make_problem(400, 4, 4, 4, 4, smooth);
    for (auto& q : flat.points) q.t = 15000.0;
    auto df = build_design(flat.basis, flat.points, flat.y);
    try {
        fit(df, make_penalty(flat.basis, 2), 0.0);
        FAIL("expected a rank deficiency error");
    } catch (const RankDeficiencyError& e) {
        CHECK(std::string(e.what()).find("lambda > 0") != std::string::npos);
    }
    // The penalty null space holds functions linear in t, so lambda cannot help.
    CHECK_THROWS_AS(fit(df, make_penalty(flat.basis, 2), 1.0), RankDeficiencyError);
}

TEST_CASE("large lambda limits") {
    auto p = make_problem(300, 6, 6, 8, 4, smooth, 0.1);
    auto d = build_design(p.basis, p.points, p.y);
    auto m1 = fit(d, make_penalty(p.basis, 1), 1e12);
    const double mean = std::accumulate(p.y.begin(), p.y.end(), 0.0) / static_cast<double>(p.y.size());
    fixtures::Rng rng(40);
    std::vector<Point3> q;
    for (int i = 0; i < 1000; ++i)
        q.push_back({rng.uniform(p.ax.lo, p.ax.hi), rng.uniform(p.ay.lo, p.ay.hi), rng.uniform(p.at.lo, p.at.hi)});
    for (double v : m1.predict_linear(q)) CHECK(std::abs(v - mean) <= 1e-3 * std::abs(mean));

    auto a = make_problem(300, 6, 6, 8, 5, affine);
    auto da = build_design(a.basis, a.points, a.y);
    auto pen2 = make_penalty(a.basis, 2);
    auto grid = default_lambda_grid();
    grid.push_back(1e9);
    grid.push_back(1e12);
    for (double lambda : grid) {
        auto m = fit(da, pen2, lambda);
        auto pred = m.predict_linear(q);
        double worst = 0.0;
        for (std::size_t i = 0; i < q.size(); ++i) {
            const double truth =
                affine(a.basis.x.to_unit(q[i].x), a.basis.y.to_unit(q[i].y), a.basis.t.to_unit(q[i].t));
            worst = std::max(worst, std::abs(pred[i] - truth) / std::abs(truth));
        }
        CHECK_MESSAGE(worst <= 1e-3, "lambda " << lambda);
        CHECK(m.edf >= 8.0 - 1e-6);
    }
}

TEST_CASE("objective optimality and hat trace bounds") {
    auto p = make_problem(150, 5, 5, 6, 6, smooth, 0.2);
    auto d = build_design(p.basis, p.points, p.y);
    auto pen = make_penalty(p.basis, 2);
    Eigen::SparseMatrix<double> Bc = d.B;
    Eigen::VectorXd Bty = Bc.transpose() * d.y;
    double prev_edf = std::numeric_limits<double>::infinity();
    for (double lambda : {1e-3, 0.1, 10.0, 1e3}) {
        auto m = fit(d, pen, lambda);
        Eigen::MatrixXd A = Eigen::MatrixXd(Bc.transpose() * Bc) + lambda * Eigen::MatrixXd(pen.DtD);
        CHECK((A * m.alpha - Bty).norm() <= 1e-8 * Bty.norm());
        const double s0 = objective(d, pen, lambda, m.alpha);
        for (Eigen::Index j = 0; j < m.alpha.size(); ++j)
            for (double delta : {1e-4, -1e-4}) {
                Eigen::VectorXd a = m.alpha;
                a(j) += delta;
                CHECK(objective(d, pen, lambda, a) >= s0);
            }
        CHECK(m.edf >= 8.0 - 1e-9);
        CHECK(m.edf <= 150.0);
        CHECK(m.edf <= prev_edf + 1e-9);
        prev_edf = m.edf;
        auto ref = oracle::gcv(Eigen::MatrixXd(d.B), Eigen::MatrixXd(pen.D), d.y, lambda);
        CHECK(m.edf == doctest::Approx(ref.edf).epsilon(1e-9));
        CHECK(m.rss == doctest::Approx(ref.rss).epsilon(1e-9));
        CHECK(m.gcv == doctest::Approx(ref.gcv).epsilon(1e-9));
    }
}

TEST_CASE("permutation invariance") {
    auto p = make_problem(120, 5, 5, 5, 7, smooth, 0.1);
    auto pen = make_penalty(p.basis, 2);
    auto m = fit(build_design(p.basis, p.points, p.y), pen, 0.5);
    std::vector<std::size_t> order(p.points.size());
    std::iota(order.begin(), order.end(), 0);
    fixtures::Rng rng(8);
    for (std::size_t i = order.size() - 1; i > 0; --i) std::swap(order[i], order[rng.next() % (i + 1)]);
    std::vector<Point3> pts;
    std::vector<double> y;
    for (auto i : order) {
        pts.push_back(p.points[i]);
        y.push_back(p.y[i]);
    }
    auto mp = fit(build_design(p.basis, pts, y), pen, 0.5);
    CHECK((mp.alpha - m.alpha).cwiseAbs().maxCoeff() <= 1e-12 * std::max(1.0, m.alpha.cwiseAbs().maxCoeff()));
}

TEST_CASE("GCV selection agrees with brute force") {
    const auto grid = default_lambda_grid();
    REQUIRE(grid.size() == 30);
    CHECK(grid.front() == doctest::Approx(1e-4));
    CHECK(grid.back() == doctest::Approx(1e6));

    auto check_search = [&](const Problem& p) {
        auto d = build_design(p.basis, p.points, p.y);
        auto pen = make_penalty(p.basis, 2);
        auto s = select_lambda(d, pen, grid);
        Eigen::MatrixXd B(d.B), D(pen.D);
        double best = std::numeric_limits<double>::infinity(), best_lambda = 0.0;
        for (std::size_t i = 0; i < grid.size(); ++i) {
            auto o = oracle::gcv(B, D, d.y, grid[i]);
            CHECK(s.path[i].gcv == doctest::Approx(o.gcv).epsilon(1e-7));
            if (o.gcv <= best * (1.0 + 1e-12)) {
                best = std::min(best, o.gcv);
                best_lambda = grid[i];
            }
        }
        CHECK(s.lambda == best_lambda);
        auto serial = select_lambda(d, pen, grid, false);
        CHECK(serial.lambda == s.lambda);
        for (std::size_t i = 0; i < grid.size(); ++i) CHECK(serial.path[i].gcv == s.path[i].gcv);
        return s.lambda;
    };
    auto noise = make_problem(200, 5, 5, 5, 1, zero, 1.0);
    CHECK(check_search(noise) == grid.back());
    auto clean = make_problem(200, 5, 5, 5, 10, smooth);
    CHECK(check_search(clean) <= grid[grid.size() / 2]);

    auto d = build_design(clean.basis, clean.points, clean.y);
    auto one = select_lambda(d, make_penalty(clean.basis, 2), std::vector<double>{3.0});
    CHECK(one.single_value);
    CHECK(one.lambda == 3.0);
    CHECK_THROWS_AS(select_lambda(d, make_penalty(clean.basis, 2), std::vector<double>{}), ArgumentError);

    // Six points are interpolated by the eight-dimensional penalty null space.
    auto tiny = make_problem(6, 5, 5, 5, 11, smooth);
    CHECK_THROWS_AS(select_lambda(build_design(tiny.basis, tiny.points, tiny.y), make_penalty(tiny.basis, 2),
                                  std::vector<double>{1e-4, 1e-3}),
                    FitError);
}

TEST_CASE("shrinkage is monotone along the grid") {
    auto p = make_problem(250, 6, 6, 6, 12, smooth, 0.3);
    auto d = build_design(p.basis, p.points, p.y);
    auto s = select_lambda(d, make_penalty(p.basis, 2), default_lambda_grid());
    for (std::size_t i = 1; i < s.path.size(); ++i) {
        CHECK(s.path[i].rss >= s.path[i - 1].rss * (1.0 - 1e-10));
        CHECK(s.path[i].penalty_norm <= s.path[i - 1].penalty_norm * (1.0 + 1e-8) + 1e-12);
        CHECK(s.path[i].edf <= s.path[i - 1].edf + 1e-8);
    }
}

TEST_CASE("prediction") {
    auto p = make_problem(150, 5, 5, 5, 13, smooth, 0.05);
    auto m = fit(build_design(p.basis, p.points, p.y), make_penalty(p.basis, 2), 0.1);
    auto lin = m.predict_linear(p.points);
    auto con = m.predict(p.points);
    for (std::size_t i = 0; i < con.size(); ++i) {
        CHECK(con[i] > 0.0);
        CHECK(con[i] == std::exp(lin[i]));
    }
    std::vector<Point3> bad{{600, 0, 15000}, {900, 0, 15000}, {600, 0, 20000}};
    try {
        m.predict(bad);
        FAIL("expected an extrapolation error");
    } catch (const ExtrapolationError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("900") != std::string::npos);
        CHECK(msg.find("20000") != std::string::npos);
    }
}

TEST_CASE("solute models on the fixtures") {
    for (const char* name : {"basic", "comprehensive"}) {
        const auto& a = support::analysis(name);
        for (const auto& s : a.dataset.solutes()) {
            const auto* m = a.model(s);
            REQUIRE(m);
            CHECK(m->alpha.size() == static_cast<Eigen::Index>(m->basis.size()));
            const auto& entry = a.models.at(s);
            CHECK(entry.search.path.size() == 30);
            CHECK(m->lambda == entry.search.lambda);
            for (std::size_t i = 1; i < entry.search.path.size(); ++i) {
                const auto &lo = entry.search.path[i - 1], &hi = entry.search.path[i];
                CHECK(hi.rss >= lo.rss * (1.0 - 1e-10));
                CHECK(hi.penalty_norm <= lo.penalty_norm * (1.0 + 1e-8) + 1e-12);
            }
            // Stored diagnostics are reproducible from the coefficients.
            auto d = build_design(a.dataset, s, m->basis, log_floor(a.dataset, s));
            CHECK((d.y - d.B * m->alpha).squaredNorm() == doctest::Approx(m->rss).epsilon(1e-10));
        }
    }
}
