#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "plume/dataset.hpp"
#include "plume/tensor_basis.hpp"

namespace plume::st {

using RowMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;
using SparseMatrix = Eigen::SparseMatrix<double>;

// Observation sites, model-scale responses and the n x m tensor-product design.
struct Design {
    TensorBasis basis;
    std::vector<Point3> points;
    RowMatrix B;
    Eigen::VectorXd y;
};

// Responses must already be on the model scale.
Design build_design(const TensorBasis& basis, std::span<const Point3> points, std::span<const double> responses);

// Rows for every record of `solute`; responses are ln(working value).
// Non-positive working values are replaced by `floor_value` when it is
// positive, otherwise they raise an error naming the record.
Design build_design(const Dataset& dataset, const std::string& solute, const TensorBasis& basis,
                    double floor_value = 0.0);

// Half the smallest positive working value of the solute; 0 if none. Shared by
// the well trend smoother and the spatiotemporal design.
double log_floor(const Dataset& dataset, std::string_view solute);

// (count - order) x count matrix of order-th differences.
SparseMatrix difference_matrix(int count, int order);

struct Penalty {
    int order = 2;
    SparseMatrix D;    // differences along x, y and t stacked
    SparseMatrix DtD;
};

Penalty make_penalty(const TensorBasis& basis, int order);

struct STModel {
    std::string solute;
    std::string units;
    TensorBasis basis;
    int order = 2;
    double lambda = 0.0;
    Eigen::VectorXd alpha;
    double sigma2 = 0.0;
    double edf = 0.0;
    double rss = 0.0;
    double gcv = 0.0;
    double penalty_norm = 0.0;  // ||D alpha||
    std::size_t n = 0;
    bool log_scale = true;

    // B(p) alpha, without back-transform. Throws ExtrapolationError.
    std::vector<double> predict_linear(std::span<const Point3> points) const;
    // exp(B(p) alpha) on the log scale. Throws ExtrapolationError listing the
    // offending points.
    std::vector<double> predict(std::span<const Point3> points) const;
};

// Solves (B'B + lambda D'D) alpha = B'y by Cholesky, or by QR of [B; sqrt(lambda) D]
// when the Cholesky factor is ill-conditioned. Throws ArgumentError for
// lambda < 0 and RankDeficiencyError when the system is singular.
STModel fit(const Design& design, const Penalty& penalty, double lambda);

struct LambdaPoint {
    double lambda = 0.0;
    double gcv = 0.0;
    double rss = 0.0;
    double edf = 0.0;
    double penalty_norm = 0.0;
    bool admissible = false;
};

struct LambdaSearch {
    double lambda = 0.0;
    std::vector<LambdaPoint> path;
    bool single_value = false;
};

// 30 log-spaced values in [1e-4, 1e6].
std::vector<double> default_lambda_grid();

// Minimises GCV(lambda) = n RSS / (n - tr H)^2 over the grid; ties go to the
// larger lambda. `parallel` runs grid points concurrently.
LambdaSearch select_lambda(const Design& design, const Penalty& penalty, std::span<const double> grid,
                           bool parallel = true);

struct SmootherOptions {
    int mx = 6;
    int my = 6;
    int mt = 0;  // 0: max(6, intervals / 2)
    int degree = 3;
    int order = 2;
    std::optional<double> lambda;     // fixed lambda; otherwise GCV over lambda_grid
    std::vector<double> lambda_grid;  // empty: default_lambda_grid()
};

// x and y span the well bounding box; t spans the interval bins.
TensorBasis default_basis(const Dataset& dataset, const SmootherOptions& options);

struct SoluteModel {
    STModel model;
    LambdaSearch search;
    std::vector<std::string> warnings;
};

SoluteModel fit_solute(const Dataset& dataset, const std::string& solute, const SmootherOptions& options);

} // namespace plume::st
