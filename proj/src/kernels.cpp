#include "plume/kernels.hpp"

#include <cmath>
#include <limits>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace plume::kernels {

namespace {

constexpr int kMaxLocal = 8;  // degree <= 7

// Returns false when p is outside the basis range.
inline bool row_at(const st::TensorBasis& basis, const st::Point3& p, std::int64_t* cols, double* vals) {
    double bx[kMaxLocal], by[kMaxLocal], bt[kMaxLocal];
    const int fx = basis.x.eval_nonzero(p.x, std::span<double>(bx, kMaxLocal));
    const int fy = basis.y.eval_nonzero(p.y, std::span<double>(by, kMaxLocal));
    const int ft = basis.t.eval_nonzero(p.t, std::span<double>(bt, kMaxLocal));
    const int kx = basis.x.degree() + 1, ky = basis.y.degree() + 1, kt = basis.t.degree() + 1;
    if (fx < 0 || fy < 0 || ft < 0) {
        for (int s = 0; s < kx * ky * kt; ++s) {
            cols[s] = -1;
            vals[s] = 0.0;
        }
        return false;
    }
    int s = 0;
    for (int a = 0; a < kx; ++a)
        for (int b = 0; b < ky; ++b) {
            const double xy = bx[a] * by[b];
            for (int c = 0; c < kt; ++c, ++s) {
                cols[s] = static_cast<std::int64_t>(basis.index(fx + a, fy + b, ft + c));
                vals[s] = xy * bt[c];
            }
        }
    return true;
}

inline double predict_at(const st::TensorBasis& basis, std::span<const double> alpha, const st::Point3& p) {
    std::int64_t cols[kMaxLocal * kMaxLocal * kMaxLocal];
    double vals[kMaxLocal * kMaxLocal * kMaxLocal];
    if (!row_at(basis, p, cols, vals)) return std::numeric_limits<double>::quiet_NaN();
    double acc = 0.0;
    for (int s = 0; s < basis.row_nonzeros(); ++s) acc += vals[s] * alpha[static_cast<std::size_t>(cols[s])];
    return acc;
}

inline double leverage_at(const st::SpdFactor& factor, const RowMatrix& B, Eigen::Index i, Eigen::VectorXd& work) {
    work.setZero();
    for (RowMatrix::InnerIterator it(B, i); it; ++it) work[it.col()] = it.value();
    return factor.inverse_quadratic(work);
}

} // namespace

int max_threads() {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

void design_rows(const st::TensorBasis& basis, std::span<const st::Point3> points, std::span<std::int64_t> cols,
                 std::span<double> vals) {
    const auto k = static_cast<std::size_t>(basis.row_nonzeros());
    const auto n = static_cast<std::int64_t>(points.size());
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < n; ++i) {
        row_at(basis, points[i], cols.data() + i * k, vals.data() + i * k);
    }
}

void predict_linear(const st::TensorBasis& basis, std::span<const double> alpha, std::span<const st::Point3> points,
                    std::span<double> out) {
    const auto n = static_cast<std::int64_t>(points.size());
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < n; ++i) out[i] = predict_at(basis, alpha, points[i]);
}

void leverages(const st::SpdFactor& factor, const RowMatrix& B, std::span<double> out) {
    const auto n = static_cast<std::int64_t>(B.rows());
#pragma omp parallel
    {
        Eigen::VectorXd work(B.cols());
#pragma omp for schedule(dynamic, 16)
        for (std::int64_t i = 0; i < n; ++i) out[i] = leverage_at(factor, B, i, work);
    }
}

namespace serial {

void design_rows(const st::TensorBasis& basis, std::span<const st::Point3> points, std::span<std::int64_t> cols,
                 std::span<double> vals) {
    const auto k = static_cast<std::size_t>(basis.row_nonzeros());
    for (std::size_t i = 0; i < points.size(); ++i) row_at(basis, points[i], cols.data() + i * k, vals.data() + i * k);
}

void predict_linear(const st::TensorBasis& basis, std::span<const double> alpha, std::span<const st::Point3> points,
                    std::span<double> out) {
    for (std::size_t i = 0; i < points.size(); ++i) out[i] = predict_at(basis, alpha, points[i]);
}

void leverages(const st::SpdFactor& factor, const RowMatrix& B, std::span<double> out) {
    Eigen::VectorXd work(B.cols());
    for (Eigen::Index i = 0; i < B.rows(); ++i) out[i] = leverage_at(factor, B, i, work);
}

} // namespace serial

} // namespace plume::kernels
