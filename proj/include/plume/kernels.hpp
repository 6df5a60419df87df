#pragma once

#include <cstdint>
#include <span>

#include <Eigen/Sparse>

#include "plume/spd.hpp"
#include "plume/tensor_basis.hpp"

// Data-parallel inner loops of the spatiotemporal smoother. Each kernel has an
// OpenMP version (plume::kernels) and a serial reference (plume::kernels::serial)
// with identical per-element arithmetic, so results agree bit for bit.
namespace plume::kernels {

using RowMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

// Fills row_nonzeros() slots per point with column indices and tensor-product
// values. Out-of-range points get column -1 in every slot.
void design_rows(const st::TensorBasis& basis, std::span<const st::Point3> points, std::span<std::int64_t> cols,
                 std::span<double> vals);

// Linear predictor B(p) alpha per point; NaN when out of range.
void predict_linear(const st::TensorBasis& basis, std::span<const double> alpha, std::span<const st::Point3> points,
                    std::span<double> out);

// Hat-matrix diagonal h_i = b_i' A^{-1} b_i for the rows of B.
void leverages(const st::SpdFactor& factor, const RowMatrix& B, std::span<double> out);

namespace serial {
void design_rows(const st::TensorBasis& basis, std::span<const st::Point3> points, std::span<std::int64_t> cols,
                 std::span<double> vals);
void predict_linear(const st::TensorBasis& basis, std::span<const double> alpha, std::span<const st::Point3> points,
                    std::span<double> out);
void leverages(const st::SpdFactor& factor, const RowMatrix& B, std::span<double> out);
} // namespace serial

int max_threads();

} // namespace plume::kernels
