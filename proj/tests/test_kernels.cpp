#include <doctest.h>

#include <cmath>
#include <cstring>

#include <omp.h>

#include "plume/fixtures.hpp"
#include "plume/kernels.hpp"
#include "plume/stsmoother.hpp"

using namespace plume;
using namespace plume::st;

namespace {

struct Setup {
    TensorBasis basis;
    std::vector<Point3> points;
    std::vector<double> y;
};

Setup setup(int n, std::uint64_t seed) {
    Setup s;
    s.basis = {BSplineBasis::from_range(0, 100, 7, 3), BSplineBasis::from_range(-50, 50, 6, 3),
               BSplineBasis::from_range(1000, 5000, 9, 3)};
    fixtures::Rng rng(seed);
    for (int i = 0; i < n; ++i) {
        s.points.push_back({rng.uniform(0, 100), rng.uniform(-50, 50), rng.uniform(1000, 5000)});
        s.y.push_back(std::sin(s.points.back().x / 20.0) + 0.1 * rng.normal());
    }
    // A few outside the range.
    s.points.push_back({-1, 0, 2000});
    s.points.push_back({50, 0, 6000});
    return s;
}

template <class T>
bool bit_equal(const std::vector<T>& a, const std::vector<T>& b) {
    return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(T)) == 0;
}

struct Threads {
    explicit Threads(int n) : saved(omp_get_max_threads()) { omp_set_num_threads(n); }
    ~Threads() { omp_set_num_threads(saved); }
    int saved;
};

} // namespace

TEST_CASE("parallel kernels match the serial reference bit for bit") {
    auto s = setup(3000, 5);
    const auto k = static_cast<std::size_t>(s.basis.row_nonzeros());
    const auto n = s.points.size();

    std::vector<std::int64_t> c_ser(n * k), c_par(n * k);
    std::vector<double> v_ser(n * k), v_par(n * k);
    kernels::serial::design_rows(s.basis, s.points, c_ser, v_ser);
    for (int threads : {1, 2, 4, 7}) {
        Threads guard(threads);
        kernels::design_rows(s.basis, s.points, c_par, v_par);
        CHECK(bit_equal(c_ser, c_par));
        CHECK(bit_equal(v_ser, v_par));
    }
    CHECK(c_ser[(n - 1) * k] == -1);
    CHECK(c_ser[(n - 2) * k] == -1);

    std::vector<double> alpha(s.basis.size());
    fixtures::Rng rng(6);
    for (auto& a : alpha) a = rng.normal();
    std::vector<double> p_ser(n), p_par(n);
    kernels::serial::predict_linear(s.basis, alpha, s.points, p_ser);
    for (int threads : {1, 3, 4}) {
        Threads guard(threads);
        kernels::predict_linear(s.basis, alpha, s.points, p_par);
        for (std::size_t i = 0; i < n; ++i) {
            if (std::isnan(p_ser[i])) CHECK(std::isnan(p_par[i]));
            else CHECK(p_ser[i] == p_par[i]);
        }
    }
    CHECK(std::isnan(p_ser[n - 1]));

    // Dense check of predict_linear against the design.
    s.points.resize(n - 2);
    s.y.resize(n - 2);
    auto d = build_design(s.basis, s.points, s.y);
    Eigen::VectorXd av = Eigen::Map<Eigen::VectorXd>(alpha.data(), static_cast<Eigen::Index>(alpha.size()));
    Eigen::VectorXd lin = d.B * av;
    for (std::size_t i = 0; i < s.points.size(); ++i)
        CHECK(std::abs(lin(static_cast<Eigen::Index>(i)) - p_ser[i]) <= 1e-12 * (1.0 + std::abs(p_ser[i])));
}

TEST_CASE("leverages match the dense hat-matrix diagonal") {
    auto s = setup(600, 9);
    s.points.resize(600);
    auto d = build_design(s.basis, s.points, s.y);
    auto pen = make_penalty(s.basis, 2);
    Eigen::SparseMatrix<double> A = Eigen::SparseMatrix<double>(d.B.transpose() * d.B) + 0.3 * pen.DtD;
    kernels::RowMatrix B = d.B;

    for (Eigen::Index threshold : {Eigen::Index(0), Eigen::Index(100000)}) {
        SpdFactor f(A, SpdFactor::kMinRcond, threshold);
        CHECK(f.is_dense() == (threshold > 0));
        std::vector<double> ser(600), par(600);
        kernels::serial::leverages(f, B, ser);
        {
            Threads guard(4);
            kernels::leverages(f, B, par);
        }
        CHECK(bit_equal(ser, par));

        Eigen::MatrixXd Bd(d.B);
        Eigen::MatrixXd H = Bd * Eigen::MatrixXd(A).inverse() * Bd.transpose();
        for (Eigen::Index i = 0; i < 600; ++i) {
            CHECK(std::abs(ser[static_cast<std::size_t>(i)] - H(i, i)) <= 1e-10);
            CHECK(ser[static_cast<std::size_t>(i)] >= 0.0);
            CHECK(ser[static_cast<std::size_t>(i)] <= 1.0 + 1e-12);
        }
    }
}

TEST_CASE("factor kinds agree") {
    auto s = setup(500, 12);
    s.points.resize(500);
    auto d = build_design(s.basis, s.points, s.y);
    auto pen = make_penalty(s.basis, 2);
    const double lambda = 2.0;
    Eigen::SparseMatrix<double> A = Eigen::SparseMatrix<double>(d.B.transpose() * d.B) + lambda * pen.DtD;
    Eigen::VectorXd Bty = d.B.transpose() * d.y;
    Eigen::VectorXd ref = Eigen::MatrixXd(A).ldlt().solve(Bty);

    SpdFactor dense(A), sparse(A, SpdFactor::kMinRcond, 0);
    CHECK(dense.is_dense());
    CHECK_FALSE(sparse.is_dense());
    CHECK((dense.solve(Bty) - ref).norm() <= 1e-9 * ref.norm());
    CHECK((sparse.solve(Bty) - ref).norm() <= 1e-9 * ref.norm());

    std::vector<Eigen::SparseMatrix<double>> blocks{Eigen::SparseMatrix<double>(d.B), std::sqrt(lambda) * pen.D};
    Eigen::SparseMatrix<double> M(d.B.rows() + pen.D.rows(), d.B.cols());
    {
        std::vector<Eigen::Triplet<double>> trips;
        Eigen::Index offset = 0;
        for (const auto& blk : blocks) {
            for (int k = 0; k < blk.outerSize(); ++k)
                for (Eigen::SparseMatrix<double>::InnerIterator it(blk, k); it; ++it)
                    trips.emplace_back(it.row() + offset, it.col(), it.value());
            offset += blk.rows();
        }
        M.setFromTriplets(trips.begin(), trips.end());
    }
    Eigen::VectorXd z = Eigen::VectorXd::Zero(M.rows());
    z.head(d.y.size()) = d.y;
    auto dqr = SpdFactor::from_least_squares(M);
    auto sqr = SpdFactor::from_least_squares(M, 0);
    CHECK(dqr.is_least_squares());
    CHECK_FALSE(sqr.is_dense());
    CHECK((dqr.solve_least_squares(z) - ref).norm() <= 1e-9 * ref.norm());
    CHECK((sqr.solve_least_squares(z) - ref).norm() <= 1e-9 * ref.norm());
    CHECK((dqr.solve(Bty) - ref).norm() <= 1e-9 * ref.norm());
    CHECK((sqr.solve(Bty) - ref).norm() <= 1e-9 * ref.norm());
    CHECK_THROWS_AS(dense.solve_least_squares(z), ArgumentError);

    Eigen::VectorXd v = d.B.row(3).transpose();
    const double q = v.dot(Eigen::MatrixXd(A).ldlt().solve(v));
    for (const SpdFactor* f : {&dense, &sparse, &dqr, &sqr}) CHECK(f->inverse_quadratic(v) == doctest::Approx(q).epsilon(1e-9));
}
