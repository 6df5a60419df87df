#pragma once

#include <memory>

#include <Eigen/Dense>
#include <Eigen/Sparse>

namespace plume::st {

// Factor of a symmetric positive-definite matrix A. Dense below
// `dense_threshold` unknowns, sparse (with fill-reducing ordering) above.
// Never forms an inverse.
//
// Built either as a Cholesky factor of A, or from a QR factorization of a
// tall M with A = M'M. The second form keeps the conditioning of M rather than
// of M'M and is used when the Cholesky factor is too ill-conditioned.
class SpdFactor {
public:
    static constexpr Eigen::Index kDenseThreshold = 500;
    static constexpr double kMinRcond = 1e-13;

    // Throws RankDeficiencyError when A is not numerically positive definite
    // or its reciprocal condition estimate is below `min_rcond`.
    explicit SpdFactor(const Eigen::SparseMatrix<double>& A, double min_rcond = kMinRcond,
                       Eigen::Index dense_threshold = kDenseThreshold);
    // A = M'M via QR of M. Throws RankDeficiencyError when M lacks full column rank.
    static SpdFactor from_least_squares(const Eigen::SparseMatrix<double>& M,
                                        Eigen::Index dense_threshold = kDenseThreshold);
    ~SpdFactor();
    SpdFactor(SpdFactor&&) noexcept;
    SpdFactor& operator=(SpdFactor&&) noexcept;

    // A^{-1} b.
    Eigen::VectorXd solve(const Eigen::VectorXd& b) const;
    // argmin ||M x - z|| for a least-squares factor.
    Eigen::VectorXd solve_least_squares(const Eigen::VectorXd& z) const;
    // ||L^{-1} P v||^2 = v' A^{-1} v.
    double inverse_quadratic(const Eigen::VectorXd& v) const;
    double rcond() const { return rcond_; }
    bool is_dense() const;
    bool is_least_squares() const;
    Eigen::Index size() const { return n_; }

private:
    SpdFactor();
    struct Impl;
    std::unique_ptr<Impl> impl_;
    double rcond_ = 0.0;
    Eigen::Index n_ = 0;
};

} // namespace plume::st
