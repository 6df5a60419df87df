#include "plume/stsmoother.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "plume/errors.hpp"
#include "plume/kernels.hpp"
#include "plume/spd.hpp"

namespace plume::st {

Design build_design(const TensorBasis& basis, std::span<const Point3> points, std::span<const double> responses) {
    if (points.size() != responses.size()) throw ArgumentError("points and responses differ in length");
    if (points.empty()) throw InsufficientDataError("design needs at least one observation");

    const auto n = points.size();
    const auto k = static_cast<std::size_t>(basis.row_nonzeros());
    std::vector<std::int64_t> cols(n * k);
    std::vector<double> vals(n * k);
    kernels::design_rows(basis, points, cols, vals);

    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(n * k);
    for (std::size_t i = 0; i < n; ++i) {
        if (cols[i * k] < 0) {
            std::ostringstream msg;
            msg << "observation " << i << " at (" << points[i].x << ", " << points[i].y << ", " << points[i].t
                << ") lies outside the basis range";
            throw ExtrapolationError(msg.str());
        }
        for (std::size_t s = 0; s < k; ++s) {
            if (vals[i * k + s] != 0.0) trips.emplace_back(static_cast<int>(i), static_cast<int>(cols[i * k + s]), vals[i * k + s]);
        }
    }

    Design d;
    d.basis = basis;
    d.points.assign(points.begin(), points.end());
    d.B.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(basis.size()));
    d.B.setFromTriplets(trips.begin(), trips.end());
    d.B.makeCompressed();
    d.y = Eigen::Map<const Eigen::VectorXd>(responses.data(), static_cast<Eigen::Index>(n));
    return d;
}

double log_floor(const Dataset& dataset, std::string_view solute) {
    double smallest = std::numeric_limits<double>::infinity();
    for (const auto& r : dataset.records())
        if (r.constituent == solute && r.working > 0.0) smallest = std::min(smallest, r.working);
    return std::isfinite(smallest) ? 0.5 * smallest : 0.0;
}

Design build_design(const Dataset& dataset, const std::string& solute, const TensorBasis& basis, double floor_value) {
    std::vector<Point3> pts;
    std::vector<double> ys;
    for (const auto& r : dataset.records()) {
        if (r.constituent != solute) continue;
        const auto* w = dataset.find_well(r.well_id);
        if (!w) continue;
        double v = r.working;
        if (!(v > 0.0)) {
            if (!(floor_value > 0.0)) {
                throw ArgumentError("non-positive working value " + format_double(v) + " for " + solute + " at " +
                                    r.well_id + " on " + r.date.iso() +
                                    (r.row ? " (row " + std::to_string(r.row) + ")" : std::string{}));
            }
            v = floor_value;
        }
        pts.push_back({w->x, w->y, static_cast<double>(r.date.days())});
        ys.push_back(std::log(v));
    }
    if (pts.empty()) throw InsufficientDataError("no records for solute " + solute);
    return build_design(basis, pts, ys);
}

SparseMatrix difference_matrix(int count, int order) {
    if (order < 1) throw ArgumentError("difference order must be at least 1");
    if (count <= order) throw ArgumentError("difference order must be smaller than the basis count");
    // Binomial coefficients with alternating sign: order 1 -> [-1, 1], order 2 -> [1, -2, 1].
    std::vector<double> coef(order + 1);
    for (int j = 0; j <= order; ++j) {
        double c = 1.0;
        for (int i = 0; i < j; ++i) c = c * (order - i) / (i + 1);
        coef[j] = ((order - j) % 2 == 0 ? 1.0 : -1.0) * c;
    }
    std::vector<Eigen::Triplet<double>> trips;
    for (int r = 0; r < count - order; ++r)
        for (int j = 0; j <= order; ++j) trips.emplace_back(r, r + j, coef[j]);
    SparseMatrix D(count - order, count);
    D.setFromTriplets(trips.begin(), trips.end());
    return D;
}

namespace {

SparseMatrix identity(int n) {
    SparseMatrix I(n, n);
    I.setIdentity();
    return I;
}

SparseMatrix kron(const SparseMatrix& A, const SparseMatrix& B) {
    std::vector<Eigen::Triplet<double>> trips;
    for (int ka = 0; ka < A.outerSize(); ++ka)
        for (SparseMatrix::InnerIterator ia(A, ka); ia; ++ia)
            for (int kb = 0; kb < B.outerSize(); ++kb)
                for (SparseMatrix::InnerIterator ib(B, kb); ib; ++ib)
                    trips.emplace_back(ia.row() * B.rows() + ib.row(), ia.col() * B.cols() + ib.col(),
                                       ia.value() * ib.value());
    SparseMatrix K(A.rows() * B.rows(), A.cols() * B.cols());
    K.setFromTriplets(trips.begin(), trips.end());
    return K;
}

SparseMatrix vstack(const std::vector<SparseMatrix>& blocks) {
    Eigen::Index rows = 0, cols = blocks.front().cols();
    std::vector<Eigen::Triplet<double>> trips;
    for (const auto& b : blocks) {
        for (int k = 0; k < b.outerSize(); ++k)
            for (SparseMatrix::InnerIterator it(b, k); it; ++it) trips.emplace_back(rows + it.row(), it.col(), it.value());
        rows += b.rows();
    }
    SparseMatrix S(rows, cols);
    S.setFromTriplets(trips.begin(), trips.end());
    return S;
}

struct NormalEquations {
    SparseMatrix BtB;
    Eigen::VectorXd Bty;
};

NormalEquations normal_equations(const Design& d) {
    NormalEquations ne;
    SparseMatrix Bc = d.B;  // column-major copy
    ne.BtB = SparseMatrix(Bc.transpose() * Bc);
    ne.Bty = Bc.transpose() * d.y;
    return ne;
}

struct Solved {
    Eigen::VectorXd alpha;
    double rss = 0, edf = 0, penalty_norm = 0;
};

constexpr double kQrRcond = 1e-10;
// Squared R-diagonal ratio below which B itself is treated as singular.
constexpr double kMinLsRcond = 1e-20;

double one_norm(const SparseMatrix& A) {
    double best = 0.0;
    for (Eigen::Index j = 0; j < A.outerSize(); ++j) {
        double sum = 0.0;
        for (SparseMatrix::InnerIterator it(A, j); it; ++it) sum += std::abs(it.value());
        best = std::max(best, sum);
    }
    return best;
}

Solved solve_at(const Design& d, const Penalty& p, const NormalEquations& ne, double lambda, bool parallel_leverage) {
    SparseMatrix A = ne.BtB;
    if (lambda > 0) A += lambda * p.DtD;
    // The penalty raises ||A|| but not the smallest eigenvalue on its null
    // space, so the singularity test is relative to the data term.
    const double inflation = lambda > 0 ? one_norm(A) / std::max(one_norm(ne.BtB), 1e-300) : 1.0;
    std::optional<SpdFactor> factor;
    bool use_qr = false;
    std::string cholesky_error;
    try {
        factor.emplace(A, SpdFactor::kMinRcond / std::max(inflation, 1.0));
        use_qr = factor->rcond() < kQrRcond;
    } catch (const RankDeficiencyError& e) {
        if (lambda > 0) throw RankDeficiencyError(std::string(e.what()) + " at lambda " + format_double(lambda));
        use_qr = true;
        cholesky_error = e.what();
    }
    Solved s;
    if (use_qr) {
        // QR of B (or [B; sqrt(lambda) D]) has the square root of A's condition.
        SparseMatrix M = lambda > 0 ? vstack({SparseMatrix(d.B), std::sqrt(lambda) * p.D}) : SparseMatrix(d.B);
        try {
            factor = SpdFactor::from_least_squares(M);
            if (lambda == 0 && factor->rcond() < kMinLsRcond) {
                throw RankDeficiencyError("design is numerically rank deficient (rcond " +
                                          format_double(factor->rcond()) + ")");
            }
        } catch (const RankDeficiencyError& e) {
            if (lambda == 0) {
                std::string msg = cholesky_error.empty() ? e.what() : cholesky_error;
                throw RankDeficiencyError(msg + "; B'B is rank deficient, use lambda > 0");
            }
            throw RankDeficiencyError(std::string(e.what()) + " at lambda " + format_double(lambda));
        }
        Eigen::VectorXd z = Eigen::VectorXd::Zero(M.rows());
        z.head(d.y.size()) = d.y;
        s.alpha = factor->solve_least_squares(z);
    } else {
        s.alpha = factor->solve(ne.Bty);
    }
    s.rss = (d.y - d.B * s.alpha).squaredNorm();
    s.penalty_norm = (p.D * s.alpha).norm();
    std::vector<double> lev(static_cast<std::size_t>(d.B.rows()));
    if (parallel_leverage)
        kernels::leverages(*factor, d.B, lev);
    else
        kernels::serial::leverages(*factor, d.B, lev);
    for (double h : lev) s.edf += h;
    return s;
}

} // namespace

Penalty make_penalty(const TensorBasis& basis, int order) {
    const int mx = basis.x.count(), my = basis.y.count(), mt = basis.t.count();
    Penalty p;
    p.order = order;
    SparseMatrix Dx = kron(kron(difference_matrix(mx, order), identity(my)), identity(mt));
    SparseMatrix Dy = kron(kron(identity(mx), difference_matrix(my, order)), identity(mt));
    SparseMatrix Dt = kron(kron(identity(mx), identity(my)), difference_matrix(mt, order));
    p.D = vstack({Dx, Dy, Dt});
    p.DtD = SparseMatrix(p.D.transpose() * p.D);
    return p;
}

std::vector<double> STModel::predict_linear(std::span<const Point3> points) const {
    std::vector<double> out(points.size());
    kernels::predict_linear(basis, std::span<const double>(alpha.data(), static_cast<std::size_t>(alpha.size())),
                            points, out);
    std::ostringstream bad;
    std::size_t nbad = 0;
    for (std::size_t i = 0; i < points.size(); ++i) {
        if (!std::isnan(out[i])) continue;
        if (nbad < 10) {
            bad << (nbad ? ", " : "") << "(" << format_double(points[i].x) << ", " << format_double(points[i].y)
                << ", " << format_double(points[i].t) << ")";
        }
        ++nbad;
    }
    if (nbad) {
        throw ExtrapolationError(std::to_string(nbad) + " point(s) outside the model range: " + bad.str() +
                                 (nbad > 10 ? ", ..." : ""));
    }
    return out;
}

std::vector<double> STModel::predict(std::span<const Point3> points) const {
    auto out = predict_linear(points);
    if (log_scale)
        for (double& v : out) v = std::exp(v);
    return out;
}

STModel fit(const Design& design, const Penalty& penalty, double lambda) {
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw ArgumentError("lambda must be a nonnegative finite number");
    const auto ne = normal_equations(design);
    const Solved s = solve_at(design, penalty, ne, lambda, true);

    STModel m;
    m.basis = design.basis;
    m.order = penalty.order;
    m.lambda = lambda;
    m.alpha = s.alpha;
    m.rss = s.rss;
    m.edf = s.edf;
    m.penalty_norm = s.penalty_norm;
    m.n = static_cast<std::size_t>(design.B.rows());
    const double dof = static_cast<double>(m.n) - m.edf;
    m.sigma2 = dof > 0 ? m.rss / dof : 0.0;
    m.gcv = dof > 0 ? static_cast<double>(m.n) * m.rss / (dof * dof) : std::numeric_limits<double>::infinity();
    return m;
}

std::vector<double> default_lambda_grid() {
    constexpr int k = 30;
    std::vector<double> g(k);
    for (int i = 0; i < k; ++i) g[i] = std::pow(10.0, -4.0 + 10.0 * i / (k - 1));
    return g;
}

LambdaSearch select_lambda(const Design& design, const Penalty& penalty, std::span<const double> grid, bool parallel) {
    if (grid.empty()) throw ArgumentError("lambda grid is empty");
    for (double l : grid)
        if (!(l >= 0.0) || !std::isfinite(l)) throw ArgumentError("lambda grid values must be nonnegative");

    LambdaSearch out;
    out.path.resize(grid.size());
    if (grid.size() == 1) {
        out.lambda = grid[0];
        out.single_value = true;
    }

    const auto ne = normal_equations(design);
    const double n = static_cast<double>(design.B.rows());
    const auto count = static_cast<std::int64_t>(grid.size());
    std::vector<std::string> failures(grid.size());

    auto evaluate = [&](std::int64_t i) {
        LambdaPoint& pt = out.path[i];
        pt.lambda = grid[i];
        try {
            // The grid loop owns the threads; leverages run serially inside it.
            Solved s = solve_at(design, penalty, ne, grid[i], false);
            pt.rss = s.rss;
            pt.edf = s.edf;
            pt.penalty_norm = s.penalty_norm;
            const double dof = n - s.edf;
            pt.admissible = dof > 1e-9;
            pt.gcv = pt.admissible ? n * s.rss / (dof * dof) : std::numeric_limits<double>::infinity();
        } catch (const Error& e) {
            failures[i] = e.what();
            pt.gcv = std::numeric_limits<double>::infinity();
        }
    };
    if (parallel) {
#pragma omp parallel for schedule(dynamic, 1)
        for (std::int64_t i = 0; i < count; ++i) evaluate(i);
    } else {
        for (std::int64_t i = 0; i < count; ++i) evaluate(i);
    }
    if (out.single_value) return out;

    double best = std::numeric_limits<double>::infinity();
    bool any = false;
    for (const auto& pt : out.path) {
        if (!pt.admissible) continue;
        const double tol = 1e-12 * std::max(std::abs(best), std::numeric_limits<double>::min());
        if (!any || pt.gcv < best - tol || (std::abs(pt.gcv - best) <= tol && pt.lambda > out.lambda)) {
            best = pt.gcv;
            out.lambda = pt.lambda;
            any = true;
        }
    }
    if (!any) {
        throw FitError("no lambda in the grid leaves residual degrees of freedom (tr H >= n); reduce the basis size");
    }
    return out;
}

TensorBasis default_basis(const Dataset& dataset, const SmootherOptions& options) {
    std::vector<double> xs, ys;
    for (const auto& w : dataset.wells()) {
        xs.push_back(w.x);
        ys.push_back(w.y);
    }
    const auto& iv = dataset.intervals();
    int mt = options.mt > 0 ? options.mt : std::max(6, static_cast<int>(iv.size()) / 2);
    TensorBasis b;
    b.x = BSplineBasis::build(xs, options.mx, options.degree);
    b.y = BSplineBasis::build(ys, options.my, options.degree);
    b.t = BSplineBasis::from_range(iv.front().start.days(), iv.back().end.days(), mt, options.degree);
    return b;
}

SoluteModel fit_solute(const Dataset& dataset, const std::string& solute, const SmootherOptions& options) {
    SoluteModel out;
    const TensorBasis basis = default_basis(dataset, options);
    const double floor_value = log_floor(dataset, solute);
    const Design design = build_design(dataset, solute, basis, floor_value);
    const Penalty penalty = make_penalty(basis, options.order);

    double lambda = 0.0;
    if (options.lambda) {
        lambda = *options.lambda;
    } else {
        auto grid = options.lambda_grid.empty() ? default_lambda_grid() : options.lambda_grid;
        out.search = select_lambda(design, penalty, grid);
        if (out.search.single_value) out.warnings.push_back("lambda grid has a single value; no selection performed");
        lambda = out.search.lambda;
    }
    out.model = fit(design, penalty, lambda);
    out.model.solute = solute;
    out.model.units = dataset.units_of(solute);
    return out;
}

} // namespace plume::st
