#pragma once

#include <span>
#include <vector>

namespace plume::st {

// Uniform B-spline basis on [lo, hi]. Values are mapped affinely onto [0, 1]
// before evaluation; knots are stored in those unit coordinates with `degree`
// padding knots on each side.
class BSplineBasis {
public:
    BSplineBasis() = default;

    // Range taken from min/max of `values`.
    static BSplineBasis build(std::span<const double> values, int count, int degree = 3);
    static BSplineBasis from_range(double lo, double hi, int count, int degree = 3);

    int count() const { return count_; }
    int degree() const { return degree_; }
    double lo() const { return lo_; }
    double hi() const { return hi_; }
    const std::vector<double>& knots() const { return knots_; }

    double to_unit(double x) const { return (x - lo_) / (hi_ - lo_); }
    bool in_range(double x) const;

    // Writes the degree+1 possibly-nonzero values at x into `out` and returns
    // the index of the first; returns -1 (and leaves `out` untouched) when x is
    // outside the range.
    int eval_nonzero(double x, std::span<double> out) const;
    // All `count` values at x; zeros outside the range.
    std::vector<double> eval(double x) const;

private:
    double lo_ = 0.0;
    double hi_ = 1.0;
    int count_ = 0;
    int degree_ = 3;
    std::vector<double> knots_;
};

} // namespace plume::st
