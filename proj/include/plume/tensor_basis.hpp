#pragma once

#include <cstddef>

#include "plume/bspline.hpp"

namespace plume::st {

struct Point3 {
    double x = 0.0;
    double y = 0.0;
    double t = 0.0;  // days since epoch
};

// Tensor product of three 1-D bases. Coefficient (ix, iy, it) lives at
// (ix * my + iy) * mt + it, so t varies fastest.
struct TensorBasis {
    BSplineBasis x;
    BSplineBasis y;
    BSplineBasis t;

    std::size_t size() const {
        return static_cast<std::size_t>(x.count()) * static_cast<std::size_t>(y.count()) *
               static_cast<std::size_t>(t.count());
    }
    std::size_t index(int ix, int iy, int it) const {
        return (static_cast<std::size_t>(ix) * y.count() + static_cast<std::size_t>(iy)) * t.count() +
               static_cast<std::size_t>(it);
    }
    int row_nonzeros() const { return (x.degree() + 1) * (y.degree() + 1) * (t.degree() + 1); }
    bool in_range(const Point3& p) const { return x.in_range(p.x) && y.in_range(p.y) && t.in_range(p.t); }
};

} // namespace plume::st
