#include "plume/spd.hpp"

#include <cmath>
#include <cstdio>
#include <string>

#include <Eigen/OrderingMethods>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseQR>

#include "plume/errors.hpp"

namespace plume::st {

namespace {

std::string fmt_rcond(double r) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", r);
    return buf;
}

double diag_rcond(const Eigen::VectorXd& d) {
    const double lo = d.cwiseAbs().minCoeff(), hi = d.cwiseAbs().maxCoeff();
    return hi > 0 ? (lo / hi) * (lo / hi) : 0.0;
}

} // namespace

struct SpdFactor::Impl {
    enum class Kind { DenseLlt, SparseLlt, DenseQr, SparseQr } kind = Kind::DenseLlt;
    Eigen::LLT<Eigen::MatrixXd> llt;
    Eigen::SimplicialLLT<Eigen::SparseMatrix<double>> sllt;
    Eigen::HouseholderQR<Eigen::MatrixXd> qr;
    Eigen::MatrixXd lower;  // R' of the dense QR
    Eigen::SparseQR<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>> sqr;
    Eigen::SparseMatrix<double> slower;  // R' of the sparse QR
};

SpdFactor::SpdFactor() : impl_(std::make_unique<Impl>()) {}

SpdFactor::SpdFactor(const Eigen::SparseMatrix<double>& A, double min_rcond, Eigen::Index dense_threshold)
    : impl_(std::make_unique<Impl>()), n_(A.rows()) {
    if (A.rows() < dense_threshold) {
        impl_->kind = Impl::Kind::DenseLlt;
        impl_->llt.compute(Eigen::MatrixXd(A));
        if (impl_->llt.info() != Eigen::Success) throw RankDeficiencyError("normal equations are not positive definite");
        rcond_ = impl_->llt.rcond();
    } else {
        impl_->kind = Impl::Kind::SparseLlt;
        impl_->sllt.compute(A);
        if (impl_->sllt.info() != Eigen::Success) {
            throw RankDeficiencyError("normal equations are not positive definite");
        }
        // Cheap estimate from the factor diagonal.
        rcond_ = diag_rcond(Eigen::SparseMatrix<double>(impl_->sllt.matrixL()).diagonal());
    }
    if (!(rcond_ >= min_rcond)) {
        throw RankDeficiencyError("normal equations are numerically singular (rcond " + fmt_rcond(rcond_) + ")");
    }
}

SpdFactor SpdFactor::from_least_squares(const Eigen::SparseMatrix<double>& M, Eigen::Index dense_threshold) {
    SpdFactor f;
    const Eigen::Index m = M.cols();
    f.n_ = m;
    if (M.rows() < m) throw RankDeficiencyError("least-squares system has fewer rows than unknowns");
    Eigen::VectorXd diag;
    if (m < dense_threshold) {
        f.impl_->kind = Impl::Kind::DenseQr;
        f.impl_->qr.compute(Eigen::MatrixXd(M));
        f.impl_->lower = f.impl_->qr.matrixQR().topRows(m).triangularView<Eigen::Upper>().transpose();
        diag = f.impl_->lower.diagonal();
    } else {
        f.impl_->kind = Impl::Kind::SparseQr;
        Eigen::SparseMatrix<double> Mc = M;
        Mc.makeCompressed();
        f.impl_->sqr.compute(Mc);
        if (f.impl_->sqr.info() != Eigen::Success || f.impl_->sqr.rank() < m) {
            throw RankDeficiencyError("least-squares system is rank deficient");
        }
        f.impl_->slower = Eigen::SparseMatrix<double>(f.impl_->sqr.matrixR().topLeftCorner(m, m)).transpose();
        diag = f.impl_->slower.diagonal();
    }
    f.rcond_ = diag_rcond(diag);
    if (!(f.rcond_ > 0.0) || !std::isfinite(f.rcond_)) {
        throw RankDeficiencyError("least-squares system is rank deficient (rcond " + fmt_rcond(f.rcond_) + ")");
    }
    return f;
}

SpdFactor::~SpdFactor() = default;
SpdFactor::SpdFactor(SpdFactor&&) noexcept = default;
SpdFactor& SpdFactor::operator=(SpdFactor&&) noexcept = default;

bool SpdFactor::is_dense() const {
    return impl_->kind == Impl::Kind::DenseLlt || impl_->kind == Impl::Kind::DenseQr;
}

bool SpdFactor::is_least_squares() const {
    return impl_->kind == Impl::Kind::DenseQr || impl_->kind == Impl::Kind::SparseQr;
}

Eigen::VectorXd SpdFactor::solve(const Eigen::VectorXd& b) const {
    switch (impl_->kind) {
    case Impl::Kind::DenseLlt: return impl_->llt.solve(b);
    case Impl::Kind::SparseLlt: return impl_->sllt.solve(b);
    case Impl::Kind::DenseQr: {
        Eigen::VectorXd z = impl_->lower.triangularView<Eigen::Lower>().solve(b);
        return impl_->lower.transpose().triangularView<Eigen::Upper>().solve(z);
    }
    case Impl::Kind::SparseQr: {
        const auto& P = impl_->sqr.colsPermutation();
        Eigen::VectorXd z = impl_->slower.triangularView<Eigen::Lower>().solve(Eigen::VectorXd(P.transpose() * b));
        Eigen::VectorXd w = impl_->slower.transpose().triangularView<Eigen::Upper>().solve(z);
        return P * w;
    }
    }
    return {};
}

Eigen::VectorXd SpdFactor::solve_least_squares(const Eigen::VectorXd& z) const {
    if (impl_->kind == Impl::Kind::DenseQr) return impl_->qr.solve(z);
    if (impl_->kind == Impl::Kind::SparseQr) return impl_->sqr.solve(z);
    throw ArgumentError("solve_least_squares needs a QR-based factor");
}

double SpdFactor::inverse_quadratic(const Eigen::VectorXd& v) const {
    if (impl_->kind == Impl::Kind::DenseLlt || impl_->kind == Impl::Kind::DenseQr) {
        // Forward substitution starting at the first nonzero of v.
        const Eigen::MatrixXd& L = impl_->kind == Impl::Kind::DenseLlt ? impl_->llt.matrixLLT() : impl_->lower;
        Eigen::Index first = 0;
        while (first < n_ && v[first] == 0.0) ++first;
        Eigen::VectorXd z = v;
        double acc = 0.0;
        for (Eigen::Index k = first; k < n_; ++k) {
            z[k] /= L(k, k);
            acc += z[k] * z[k];
            if (z[k] != 0.0) z.segment(k + 1, n_ - k - 1).noalias() -= z[k] * L.col(k).segment(k + 1, n_ - k - 1);
        }
        return acc;
    }
    if (impl_->kind == Impl::Kind::SparseLlt) {
        Eigen::VectorXd pv = impl_->sllt.permutationP() * v;
        return impl_->sllt.matrixL().solve(pv).squaredNorm();
    }
    Eigen::VectorXd pv = impl_->sqr.colsPermutation().transpose() * v;
    return impl_->slower.triangularView<Eigen::Lower>().solve(pv).squaredNorm();
}

} // namespace plume::st
