#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "plume/dataset.hpp"

namespace plume::flow {

// Twice the signed area of (a, b, c); positive when counter-clockwise.
double orient(const Point2& a, const Point2& b, const Point2& c);
// Positive when d lies strictly inside the circumcircle of the CCW triangle (a, b, c).
double incircle(const Point2& a, const Point2& b, const Point2& c, const Point2& d);

using Triangle = std::array<std::size_t, 3>;  // vertex indices, counter-clockwise

struct Triangulation {
    std::vector<Point2> vertices;
    std::vector<Triangle> triangles;
    std::vector<std::vector<std::size_t>> neighbors;  // sorted, symmetric

    // Largest normalised incircle value of any vertex against any triangle;
    // <= 0 up to rounding for a Delaunay triangulation. O(T n).
    double max_circumcircle_violation() const;
};

// Delaunay triangulation of the points. Built by a lexicographic sweep
// followed by Lawson edge flips. Four or more cocircular points resolve to the
// diagonal incident to the lowest vertex index, so output is deterministic.
// Throws TriangulationError for fewer than three points, coincident points or
// an all-collinear set.
Triangulation delaunay(std::span<const Point2> points);

struct Plane {
    double a = 0.0;  // level at the origin
    double b = 0.0;  // d level / dx
    double c = 0.0;  // d level / dy
};

// Least-squares plane level = a + b x + c y through the points.
// Throws InsufficientDataError for fewer than 3 points and FitError when the
// points are collinear.
Plane fit_plane(std::span<const Point2> points, std::span<const double> levels);

struct FlowVector {
    std::string well_id;
    std::size_t interval = 0;
    Plane plane;
    double theta = 0.0;  // degrees in [0, 360), counter-clockwise from +x, down-gradient
    double R = 0.0;      // relative hydraulic gradient sqrt(b^2 + c^2)
    bool flat = false;   // R == 0; theta undefined
};

// Direction of steepest descent of the plane: theta = atan2(-c, -b).
FlowVector flow_vector(const Plane& plane);

struct SuppressedWell {
    std::string well_id;
    std::string reason;  // INSUFFICIENT_NEIGHBORS | COLLINEAR | FLAT | NO_TRIANGULATION
    std::string message;
};

struct FlowField {
    std::size_t interval = 0;
    std::vector<FlowVector> vectors;
    std::vector<SuppressedWell> suppressed;
};

// Triangulation of the dataset wells, in dataset well order.
Triangulation well_triangulation(const Dataset& dataset);

// One attempt per well with a groundwater level in the interval (latest reading
// wins). `tri` may be null when the wells could not be triangulated.
FlowField flow_field(const Dataset& dataset, const Triangulation* tri, std::size_t interval);

} // namespace plume::flow
