#include "plume/bspline.hpp"

#include <algorithm>
#include <cmath>

#include "plume/errors.hpp"

namespace plume::st {

namespace {
constexpr double kRangeSlack = 1e-10;  // in unit coordinates
}

BSplineBasis BSplineBasis::build(std::span<const double> values, int count, int degree) {
    if (values.empty()) throw ArgumentError("basis needs at least one value");
    auto [lo, hi] = std::minmax_element(values.begin(), values.end());
    return from_range(*lo, *hi, count, degree);
}

BSplineBasis BSplineBasis::from_range(double lo, double hi, int count, int degree) {
    if (degree < 1 || degree > 7) throw ArgumentError("spline degree must be between 1 and 7");
    if (count < degree + 1) {
        throw ArgumentError("basis count " + std::to_string(count) + " too small for degree " + std::to_string(degree));
    }
    if (!std::isfinite(lo) || !std::isfinite(hi) || !(hi > lo)) throw ArgumentError("basis range has zero width");

    BSplineBasis b;
    b.lo_ = lo;
    b.hi_ = hi;
    b.count_ = count;
    b.degree_ = degree;
    const int segments = count - degree;
    b.knots_.resize(count + degree + 1);
    for (int k = 0; k <= count + degree; ++k) b.knots_[k] = static_cast<double>(k - degree) / segments;
    return b;
}

bool BSplineBasis::in_range(double x) const {
    const double u = to_unit(x);
    return u >= -kRangeSlack && u <= 1.0 + kRangeSlack;
}

int BSplineBasis::eval_nonzero(double x, std::span<double> out) const {
    double u = to_unit(x);
    if (!(u >= -kRangeSlack && u <= 1.0 + kRangeSlack)) return -1;
    u = std::clamp(u, 0.0, 1.0);

    const int p = degree_;
    const int segments = count_ - p;
    int s = p + std::min(static_cast<int>(u * segments), segments - 1);
    // Guard against rounding in u * segments.
    while (s > p && u < knots_[s]) --s;
    while (s < count_ - 1 && u >= knots_[s + 1]) ++s;

    double left[8], right[8];
    out[0] = 1.0;
    for (int j = 1; j <= p; ++j) {
        left[j] = u - knots_[s + 1 - j];
        right[j] = knots_[s + j] - u;
        double saved = 0.0;
        for (int r = 0; r < j; ++r) {
            const double tmp = out[r] / (right[r + 1] + left[j - r]);
            out[r] = saved + right[r + 1] * tmp;
            saved = left[j - r] * tmp;
        }
        out[j] = saved;
    }
    return s - p;
}

std::vector<double> BSplineBasis::eval(double x) const {
    std::vector<double> all(count_, 0.0);
    std::vector<double> nz(degree_ + 1);
    int first = eval_nonzero(x, nz);
    if (first >= 0)
        for (int j = 0; j <= degree_; ++j) all[first + j] = nz[j];
    return all;
}

} // namespace plume::st
