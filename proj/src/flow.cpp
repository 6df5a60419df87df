#include "plume/flow.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <unordered_map>

#include "plume/errors.hpp"

namespace plume::flow {

double orient(const Point2& a, const Point2& b, const Point2& c) {
    return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]);
}

double incircle(const Point2& a, const Point2& b, const Point2& c, const Point2& d) {
    const double adx = a[0] - d[0], ady = a[1] - d[1];
    const double bdx = b[0] - d[0], bdy = b[1] - d[1];
    const double cdx = c[0] - d[0], cdy = c[1] - d[1];
    return (adx * adx + ady * ady) * (bdx * cdy - cdx * bdy) + (bdx * bdx + bdy * bdy) * (cdx * ady - adx * cdy) +
           (cdx * cdx + cdy * cdy) * (adx * bdy - bdx * ady);
}

namespace {

struct Frame {
    std::vector<Point2> q;  // translated copy
    double extent = 1.0;
};

Frame translate(std::span<const Point2> pts) {
    Frame f;
    double minx = pts[0][0], miny = pts[0][1], maxx = minx, maxy = miny;
    for (const auto& p : pts) {
        minx = std::min(minx, p[0]);
        maxx = std::max(maxx, p[0]);
        miny = std::min(miny, p[1]);
        maxy = std::max(maxy, p[1]);
    }
    f.extent = std::max(maxx - minx, maxy - miny);
    f.q.reserve(pts.size());
    for (const auto& p : pts) f.q.push_back({p[0] - minx, p[1] - miny});
    return f;
}

using EdgeKey = std::pair<std::size_t, std::size_t>;

EdgeKey key(std::size_t a, std::size_t b) { return a < b ? EdgeKey{a, b} : EdgeKey{b, a}; }

// Rotates t so that it starts at vertex `u`.
Triangle starting_at(const Triangle& t, std::size_t u) {
    if (t[0] == u) return t;
    if (t[1] == u) return {t[1], t[2], t[0]};
    return {t[2], t[0], t[1]};
}

void lawson_flips(const std::vector<Point2>& q, std::vector<Triangle>& tris, double orient_tol, double circle_tol) {
    const std::size_t max_passes = 10 * q.size() + 100;
    for (std::size_t pass = 0; pass < max_passes; ++pass) {
        std::map<EdgeKey, std::vector<std::size_t>> edges;
        for (std::size_t t = 0; t < tris.size(); ++t)
            for (int e = 0; e < 3; ++e) edges[key(tris[t][e], tris[t][(e + 1) % 3])].push_back(t);

        std::vector<char> touched(tris.size(), 0);
        bool flipped = false;
        for (const auto& [k, ts] : edges) {
            if (ts.size() != 2 || touched[ts[0]] || touched[ts[1]]) continue;
            // t1 = (u, v, c) and t2 = (v, u, d), both counter-clockwise.
            Triangle t1 = starting_at(tris[ts[0]], k.first);
            std::size_t u = t1[0], v = t1[1], c = t1[2];
            if (v != k.second) {
                t1 = starting_at(tris[ts[0]], k.second);
                u = t1[0];
                v = t1[1];
                c = t1[2];
            }
            Triangle t2 = starting_at(tris[ts[1]], v);
            const std::size_t d = t2[2];

            const double ic = incircle(q[u], q[v], q[c], q[d]);
            const bool illegal = ic > circle_tol;
            const bool tie = std::abs(ic) <= circle_tol && std::min(c, d) < std::min(u, v);
            if (!illegal && !tie) continue;
            if (orient(q[u], q[d], q[c]) <= orient_tol || orient(q[d], q[v], q[c]) <= orient_tol) continue;

            tris[ts[0]] = {u, d, c};
            tris[ts[1]] = {d, v, c};
            touched[ts[0]] = touched[ts[1]] = 1;
            flipped = true;
        }
        if (!flipped) return;
    }
}

} // namespace

Triangulation delaunay(std::span<const Point2> points) {
    const std::size_t n = points.size();
    if (n < 3) throw TriangulationError("Delaunay triangulation needs at least 3 wells, got " + std::to_string(n));
    for (const auto& p : points) {
        if (!std::isfinite(p[0]) || !std::isfinite(p[1])) throw TriangulationError("non-finite well coordinate");
    }

    Frame f = translate(points);
    const auto& q = f.q;
    if (!(f.extent > 0.0)) throw TriangulationError("all wells share one location");
    const double orient_tol = 1e-12 * f.extent * f.extent;
    const double circle_tol = 1e-12 * std::pow(f.extent, 4);

    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](auto a, auto b) {
        return q[a][0] != q[b][0] ? q[a][0] < q[b][0] : (q[a][1] != q[b][1] ? q[a][1] < q[b][1] : a < b);
    });
    for (std::size_t i = 1; i < n; ++i) {
        if (q[order[i]] == q[order[i - 1]]) {
            throw TriangulationError("wells " + std::to_string(order[i - 1]) + " and " + std::to_string(order[i]) +
                                     " share a location");
        }
    }

    // Leading collinear run.
    std::size_t k = 2;
    while (k < n && std::abs(orient(q[order[0]], q[order[1]], q[order[k]])) <= orient_tol) ++k;
    if (k == n) throw TriangulationError("all wells are collinear");

    std::vector<Triangle> tris;
    std::vector<std::size_t> hull;
    const std::size_t apex = order[k];
    const bool left = orient(q[order[0]], q[order[1]], q[apex]) > 0;
    for (std::size_t i = 0; i + 1 < k; ++i) {
        if (left)
            tris.push_back({order[i], order[i + 1], apex});
        else
            tris.push_back({order[i + 1], order[i], apex});
    }
    if (left) {
        for (std::size_t i = 0; i < k; ++i) hull.push_back(order[i]);
    } else {
        for (std::size_t i = k; i-- > 0;) hull.push_back(order[i]);
    }
    hull.push_back(apex);

    // Each later point is lexicographically beyond the current hull.
    for (std::size_t i = k + 1; i < n; ++i) {
        const std::size_t p = order[i];
        const std::size_t h = hull.size();
        std::vector<char> vis(h);
        for (std::size_t e = 0; e < h; ++e) vis[e] = orient(q[hull[e]], q[hull[(e + 1) % h]], q[p]) < -orient_tol;

        std::size_t start = h;
        for (std::size_t e = 0; e < h; ++e) {
            if (vis[e] && !vis[(e + h - 1) % h]) {
                start = e;
                break;
            }
        }
        if (start == h) throw TriangulationError("sweep failed to find a visible hull edge");
        std::size_t count = 0;
        while (vis[(start + count) % h] && count < h) {
            std::size_t a = hull[(start + count) % h], b = hull[(start + count + 1) % h];
            tris.push_back({b, a, p});
            ++count;
        }
        // Drop the interior vertices of the visible chain and insert p.
        std::vector<std::size_t> next;
        next.reserve(h + 1);
        const std::size_t first = (start) % h;
        const std::size_t last = (start + count) % h;
        for (std::size_t j = last;; j = (j + 1) % h) {
            next.push_back(hull[j]);
            if (j == first) break;
        }
        next.push_back(p);
        hull = std::move(next);
    }

    lawson_flips(q, tris, orient_tol, circle_tol);

    Triangulation out;
    out.vertices.assign(points.begin(), points.end());
    std::sort(tris.begin(), tris.end(), [](const Triangle& a, const Triangle& b) {
        auto ca = a, cb = b;
        std::sort(ca.begin(), ca.end());
        std::sort(cb.begin(), cb.end());
        return ca < cb;
    });
    out.triangles = std::move(tris);
    out.neighbors.assign(n, {});
    for (const auto& t : out.triangles) {
        for (int e = 0; e < 3; ++e) {
            out.neighbors[t[e]].push_back(t[(e + 1) % 3]);
            out.neighbors[t[(e + 1) % 3]].push_back(t[e]);
        }
    }
    for (auto& nb : out.neighbors) {
        std::sort(nb.begin(), nb.end());
        nb.erase(std::unique(nb.begin(), nb.end()), nb.end());
    }
#ifndef NDEBUG
    if (out.max_circumcircle_violation() > 1e-9) throw TriangulationError("empty-circumcircle check failed");
#endif
    return out;
}

double Triangulation::max_circumcircle_violation() const {
    if (vertices.empty()) return 0.0;
    Frame f = translate(vertices);
    const double scale = std::pow(f.extent, 4);
    double worst = -std::numeric_limits<double>::infinity();
    for (const auto& t : triangles) {
        for (std::size_t v = 0; v < f.q.size(); ++v) {
            if (v == t[0] || v == t[1] || v == t[2]) continue;
            worst = std::max(worst, incircle(f.q[t[0]], f.q[t[1]], f.q[t[2]], f.q[v]) / scale);
        }
    }
    return worst;
}

Plane fit_plane(std::span<const Point2> points, std::span<const double> levels) {
    const std::size_t n = points.size();
    if (n != levels.size()) throw ArgumentError("points and levels differ in length");
    if (n < 3) throw InsufficientDataError("plane fit needs at least 3 points");

    double mx = 0, my = 0, ml = 0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += points[i][0];
        my += points[i][1];
        ml += levels[i];
    }
    mx /= n;
    my /= n;
    ml /= n;
    double sxx = 0, sxy = 0, syy = 0, sxl = 0, syl = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double dx = points[i][0] - mx, dy = points[i][1] - my, dl = levels[i] - ml;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
        sxl += dx * dl;
        syl += dy * dl;
    }
    const double det = sxx * syy - sxy * sxy;
    if (!(det > 1e-12 * (sxx + syy) * (sxx + syy))) throw FitError("plane fit points are collinear");

    Plane p;
    p.b = (syy * sxl - sxy * syl) / det;
    p.c = (sxx * syl - sxy * sxl) / det;
    p.a = ml - p.b * mx - p.c * my;
    return p;
}

FlowVector flow_vector(const Plane& plane) {
    FlowVector v;
    v.plane = plane;
    v.R = std::sqrt(plane.b * plane.b + plane.c * plane.c);
    if (v.R == 0.0) {
        v.flat = true;
        return v;
    }
    double deg = std::atan2(-plane.c, -plane.b) * 180.0 / std::numbers::pi;
    if (deg < 0) deg += 360.0;
    if (deg >= 360.0) deg -= 360.0;
    v.theta = deg;
    return v;
}

Triangulation well_triangulation(const Dataset& dataset) {
    std::vector<Point2> pts;
    for (const auto& w : dataset.wells()) pts.push_back({w.x, w.y});
    return delaunay(pts);
}

FlowField flow_field(const Dataset& dataset, const Triangulation* tri, std::size_t interval) {
    FlowField field;
    field.interval = interval;

    const auto& wells = dataset.wells();
    std::vector<std::optional<double>> level(wells.size());
    std::vector<Date> when(wells.size());
    for (const auto* r : dataset.interval_records(interval, kGroundwater)) {
        auto idx = dataset.well_index(r->well_id);
        if (!idx) continue;
        if (!level[*idx] || r->date >= when[*idx]) {
            level[*idx] = r->working;
            when[*idx] = r->date;
        }
    }

    for (std::size_t i = 0; i < wells.size(); ++i) {
        if (!level[i]) continue;
        const auto& id = wells[i].well_id;
        if (!tri) {
            field.suppressed.push_back({id, "NO_TRIANGULATION", "wells could not be triangulated"});
            continue;
        }
        std::vector<Point2> pts{{wells[i].x, wells[i].y}};
        std::vector<double> lv{*level[i]};
        for (auto j : tri->neighbors[i]) {
            if (!level[j]) continue;
            pts.push_back({wells[j].x, wells[j].y});
            lv.push_back(*level[j]);
        }
        if (pts.size() < 3) {
            field.suppressed.push_back({id, "INSUFFICIENT_NEIGHBORS",
                                        std::to_string(pts.size() - 1) + " Delaunay neighbour(s) with groundwater levels"});
            continue;
        }
        Plane plane;
        try {
            plane = fit_plane(pts, lv);
        } catch (const FitError& e) {
            field.suppressed.push_back({id, "COLLINEAR", e.what()});
            continue;
        }
        FlowVector v = flow_vector(plane);
        v.well_id = id;
        v.interval = interval;
        if (v.flat) {
            field.suppressed.push_back({id, "FLAT", "groundwater surface is level"});
            continue;
        }
        field.vectors.push_back(std::move(v));
    }
    return field;
}

} // namespace plume::flow
