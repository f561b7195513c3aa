#include <stratlasso/solver.hpp>
#include <Eigen/QR>
#include <algorithm>
#include <limits>

namespace stratlasso {

namespace {

double logistic(double z)
{
    if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

/// log(1 + e^z) without overflow.
double log1pexp(double z)
{
    if (z > 0) return z + std::log1p(std::exp(-z));
    return std::log1p(std::exp(z));
}

double col_dot(const SparseMatrix& X, Index j, const Vector& v)
{
    double s = 0.0;
    for (SparseMatrix::InnerIterator it(X, j); it; ++it) s += it.value() * v[it.row()];
    return s;
}

double col_weighted_dot(const SparseMatrix& X, Index j, const Vector& w, const Vector& v)
{
    double s = 0.0;
    for (SparseMatrix::InnerIterator it(X, j); it; ++it) s += it.value() * w[it.row()] * v[it.row()];
    return s;
}

void col_axpy(const SparseMatrix& X, Index j, double a, Vector& v)
{
    for (SparseMatrix::InnerIterator it(X, j); it; ++it) v[it.row()] += a * it.value();
}

bool rank_deficient(const AugmentedDesign& d)
{
    if (d.m() > d.n()) return true;
    if (static_cast<double>(d.n()) * static_cast<double>(d.m()) > 4e6) return false;
    Eigen::ColPivHouseholderQR<Matrix> qr{Matrix(d.X)};
    return qr.rank() < d.m();
}

/*
 * Weighted cyclic coordinate descent on
 *     (1/2n) sum_i w_i (z_i - x_i theta)^2 + lambda ||theta||_1
 * where `resid` holds z - X theta and is kept in sync. With w = 1 and z = Y
 * this is the Gaussian lasso. Returns the number of sweeps performed.
 *
 * Active-set strategy: a full sweep, then sweeps over the nonzero set until
 * they stall, then a full sweep to verify; repeat.
 */
struct CoordinateDescent {
    const SparseMatrix& X;
    const Vector* weights;  // nullptr = unit weights
    double lambda;
    double inv_n;
    Vector hess;            // (1/n) sum_i w_i x_ij^2
    Vector scale;           // ||X_j|| / sqrt(n), for the update criterion

    CoordinateDescent(const SparseMatrix& X_, const Vector* w, double lam)
        : X(X_), weights(w), lambda(lam), inv_n(1.0 / static_cast<double>(X_.rows()))
    {
        hess.resize(X.cols());
        scale.resize(X.cols());
        for (Index j = 0; j < X.cols(); ++j) {
            double h = 0.0, s = 0.0;
            for (SparseMatrix::InnerIterator it(X, j); it; ++it) {
                const double x2 = it.value() * it.value();
                s += x2;
                h += (weights ? (*weights)[it.row()] : 1.0) * x2;
            }
            hess[j] = h * inv_n;
            scale[j] = std::sqrt(s * inv_n);
        }
    }

    /// One pass over `coords`; returns max scaled update.
    template <class Coords>
    double sweep(const Coords& coords, Vector& theta, Vector& resid) const
    {
        double max_update = 0.0;
        for (Index j : coords) {
            if (hess[j] <= 0.0) {
                theta[j] = 0.0;
                continue;
            }
            const double g = (weights ? col_weighted_dot(X, j, *weights, resid) : col_dot(X, j, resid)) * inv_n;
            const double old = theta[j];
            const double updated = soft_threshold(hess[j] * old + g, lambda) / hess[j];
            const double delta = updated - old;
            if (delta != 0.0) {
                theta[j] = updated;
                col_axpy(X, j, -delta, resid);
                max_update = std::max(max_update, std::abs(delta) * scale[j]);
            }
        }
        return max_update;
    }

    Index units() const { return X.cols(); }
    std::vector<Index> active(const Vector& theta) const;
    std::vector<Index> columns(const std::vector<Index>& coords) const { return coords; }
};

struct AllCoords {
    Index m;
    struct It {
        Index i;
        Index operator*() const { return i; }
        It& operator++() { ++i; return *this; }
        bool operator!=(const It& o) const { return i != o.i; }
    };
    It begin() const { return {0}; }
    It end() const { return {m}; }
};

std::vector<Index> CoordinateDescent::active(const Vector& theta) const
{
    std::vector<Index> out;
    for (Index j = 0; j < theta.size(); ++j)
        if (theta[j] != 0.0) out.push_back(j);
    return out;
}

/*
 * Anderson extrapolation of coordinate descent iterates on a fixed active
 * set. Every `depth` sweeps the last iterates are combined with weights
 * minimizing the norm of the combined differences; the candidate is kept only
 * when it lowers the Gaussian lasso objective.
 */
struct Anderson {
    const std::vector<Index>& coords;
    Index depth;
    std::vector<Vector> hist;

    Anderson(const std::vector<Index>& c, Index d) : coords(c), depth(d) {}

    bool push(const Vector& theta)
    {
        if (depth <= 0 || coords.empty()) return false;
        Vector v(static_cast<Index>(coords.size()));
        for (std::size_t i = 0; i < coords.size(); ++i) v[static_cast<Index>(i)] = theta[coords[i]];
        hist.push_back(std::move(v));
        return static_cast<Index>(hist.size()) > depth;
    }

    void extrapolate(const AugmentedDesign& design, double lambda, Vector& theta, Vector& resid)
    {
        const Index a = static_cast<Index>(coords.size());
        Matrix U(a, depth);
        for (Index i = 0; i < depth; ++i) U.col(i) = hist[i + 1] - hist[i];
        Matrix gram = U.transpose() * U;
        gram.diagonal().array() += 1e-10 * gram.trace() + 1e-300;
        const Vector z = gram.ldlt().solve(Vector::Ones(depth));
        const double total = z.sum();
        Vector cand = Vector::Zero(a);
        if (std::isfinite(total) && std::abs(total) > 1e-300)
            for (Index i = 0; i < depth; ++i) cand += (z[i] / total) * hist[i + 1];
        hist.clear();
        if (!cand.allFinite() || cand.isZero()) return;

        const double inv_n = 1.0 / static_cast<double>(design.n());
        Vector trial_resid = design.Y;
        for (Index i = 0; i < a; ++i) col_axpy(design.X, coords[i], -cand[i], trial_resid);
        double pen_now = 0.0;
        for (Index j : coords) pen_now += std::abs(theta[j]);
        const double now = 0.5 * inv_n * resid.squaredNorm() + lambda * pen_now;
        const double trial = 0.5 * inv_n * trial_resid.squaredNorm() + lambda * cand.lpNorm<1>();
        if (!(trial < now)) return;
        for (Index i = 0; i < a; ++i) theta[coords[i]] = cand[i];
        resid = std::move(trial_resid);
    }
};

/*
 * Exact minimization over one predictor block (mu_j, gamma_1j .. gamma_Kj) of
 *     (1/2n) sum_i w_i (z_i - x_i theta)^2 + lambda ||theta||_1
 * for the overparameterized and basic layouts. In terms of beta_k = mu + gamma_k
 * the block objective is
 *     lambda |mu| + sum_k [ a_k/2 (beta_k - t_k)^2 + lambda tau_k |beta_k - mu| ],
 * and profiling out beta_k leaves a one dimensional piecewise quadratic in mu.
 * Strata without a gamma column have beta_k = mu.
 */
struct BlockDescent {
    const AugmentedDesign& d;
    const Vector* weights;
    double lambda;
    double inv_n;
    Index K, p;
    std::vector<Index> stratum_of_row;
    Matrix hess;   // K x p, (1/n) sum_{i in k} w_i x_ij^2
    Matrix scale;  // K x p, unweighted root mean square per stratum
    mutable Vector s, t, c, old_beta, new_beta;
    mutable std::vector<double> knots;

    BlockDescent(const AugmentedDesign& design, const Vector* w, double lam)
        : d(design), weights(w), lambda(lam), inv_n(1.0 / static_cast<double>(design.n())),
          K(design.layout.K), p(design.layout.p)
    {
        stratum_of_row.resize(static_cast<std::size_t>(d.n()));
        for (Index k = 0; k < K; ++k)
            for (Index i = d.row_offsets[k]; i < d.row_offsets[k + 1]; ++i) stratum_of_row[i] = k;
        hess = Matrix::Zero(K, p);
        scale = Matrix::Zero(K, p);
        for (Index j = 0; j < p; ++j) {
            for (SparseMatrix::InnerIterator it(d.X, d.layout.mu_col[j]); it; ++it) {
                const Index k = stratum_of_row[it.row()];
                const double x2 = it.value() * it.value();
                hess(k, j) += (weights ? (*weights)[it.row()] : 1.0) * x2;
                scale(k, j) += x2;
            }
        }
        hess *= inv_n;
        scale = (scale * inv_n).cwiseSqrt();
        s.resize(K); t.resize(K); c.resize(K); old_beta.resize(K); new_beta.resize(K);
    }

    static bool applies(const AugmentedDesign& design)
    {
        const auto kind = design.layout.kind;
        return (kind == DesignKind::overparam || kind == DesignKind::basic) &&
               static_cast<Index>(design.row_offsets.size()) == design.layout.K + 1;
    }

    /// sum_k a_k clip(t_k - mu, -c_k, c_k), nonincreasing in mu
    double slope_sum(Index j, double mu) const
    {
        double f = 0.0;
        for (Index k = 0; k < K; ++k) {
            const double a = hess(k, j);
            if (a > 0.0) f += a * std::clamp(t[k] - mu, -c[k], c[k]);
        }
        return f;
    }

    /// smallest mu >= 0 with slope_sum(mu) = v, given slope_sum(0) > v; sign flips t
    double solve_positive(Index j, double v, double sign) const
    {
        auto F = [&](double mu) { return sign * slope_sum(j, sign * mu); };
        knots.clear();
        double unbounded = 0.0;
        for (Index k = 0; k < K; ++k) {
            const double a = hess(k, j);
            if (!(a > 0.0)) continue;
            const double tk = sign * t[k];
            if (std::isinf(c[k])) {
                unbounded += a;
                if (tk > 0.0) knots.push_back(tk);
                continue;
            }
            if (tk - c[k] > 0.0) knots.push_back(tk - c[k]);
            if (tk + c[k] > 0.0) knots.push_back(tk + c[k]);
        }
        std::sort(knots.begin(), knots.end());
        const auto hi = std::partition_point(knots.begin(), knots.end(),
                                             [&](double b) { return F(b) > v; });
        const double lo = hi == knots.begin() ? 0.0 : *(hi - 1);
        const double f_lo = F(lo);
        if (hi == knots.end()) return unbounded > 0.0 ? lo + (f_lo - v) / unbounded : lo;
        const double f_hi = F(*hi);
        return f_lo > f_hi ? lo + (f_lo - v) / (f_lo - f_hi) * (*hi - lo) : lo;
    }

    double update_block(Index j, Vector& theta, Vector& resid) const
    {
        const int mc = d.layout.mu_col[j];
        s.setZero();
        for (SparseMatrix::InnerIterator it(d.X, mc); it; ++it) {
            const double wv = weights ? (*weights)[it.row()] : 1.0;
            s[stratum_of_row[it.row()]] += wv * it.value() * resid[it.row()];
        }
        double total = 0.0;
        for (Index k = 0; k < K; ++k) {
            const int gc = d.layout.gamma_col(k, j);
            const double a = hess(k, j);
            old_beta[k] = theta[mc] + (gc >= 0 ? theta[gc] / d.tau.tau[k] : 0.0);
            c[k] = gc >= 0 ? lambda * d.tau.tau[k] / std::max(a, 1e-300)
                           : std::numeric_limits<double>::infinity();
            t[k] = a > 0.0 ? old_beta[k] + s[k] * inv_n / a : 0.0;
            total += a;
        }

        double mu = 0.0;
        if (total > 0.0) {
            const double f0 = slope_sum(j, 0.0);
            if (f0 > lambda) mu = solve_positive(j, lambda, 1.0);
            else if (f0 < -lambda) mu = -solve_positive(j, lambda, -1.0);
        }

        double max_update = 0.0;
        theta[mc] = mu;
        for (Index k = 0; k < K; ++k) {
            const int gc = d.layout.gamma_col(k, j);
            const double a = hess(k, j);
            new_beta[k] = gc >= 0 && a > 0.0 ? mu + soft_threshold(t[k] - mu, c[k]) : mu;
            if (gc >= 0) theta[gc] = d.tau.tau[k] * (new_beta[k] - mu);
            max_update = std::max(max_update, std::abs(new_beta[k] - old_beta[k]) * scale(k, j));
        }
        if (max_update > 0.0)
            for (SparseMatrix::InnerIterator it(d.X, mc); it; ++it) {
                const Index k = stratum_of_row[it.row()];
                resid[it.row()] -= it.value() * (new_beta[k] - old_beta[k]);
            }
        return max_update;
    }

    template <class Blocks>
    double sweep(const Blocks& blocks, Vector& theta, Vector& resid) const
    {
        double max_update = 0.0;
        for (Index j : blocks) max_update = std::max(max_update, update_block(j, theta, resid));
        return max_update;
    }

    Index units() const { return p; }

    std::vector<Index> active(const Vector& theta) const
    {
        std::vector<Index> out;
        for (Index j = 0; j < p; ++j) {
            bool nz = theta[d.layout.mu_col[j]] != 0.0;
            for (Index k = 0; k < K && !nz; ++k) {
                const int gc = d.layout.gamma_col(k, j);
                nz = gc >= 0 && theta[gc] != 0.0;
            }
            if (nz) out.push_back(j);
        }
        return out;
    }

    std::vector<Index> columns(const std::vector<Index>& blocks) const
    {
        std::vector<Index> out;
        for (Index j : blocks) {
            out.push_back(d.layout.mu_col[j]);
            for (Index k = 0; k < K; ++k)
                if (d.layout.gamma_col(k, j) >= 0) out.push_back(d.layout.gamma_col(k, j));
        }
        std::sort(out.begin(), out.end());
        return out;
    }
};

} // namespace

bool PathResult::all_converged() const
{
    for (const auto& f : fits)
        if (!f.converged) return false;
    return true;
}

double lambda_max(const AugmentedDesign& design, Loss loss)
{
    const double inv_n = 1.0 / static_cast<double>(design.n());
    Vector r = design.Y;
    // without an intercept the null logistic fit has probabilities 1/2
    if (loss == Loss::logistic) r.array() -= 0.5;
    double best = 0.0;
    for (Index j = 0; j < design.m(); ++j)
        best = std::max(best, std::abs(col_dot(design.X, j, r)) * inv_n);
    return best;
}

std::vector<double> default_lambda_grid(double lmax, Index points, double ratio)
{
    if (points < 1) throw ParameterError("lambda grid needs at least one point");
    if (!(lmax > 0.0)) throw ParameterError("lambda_max must be positive to build a grid");
    std::vector<double> grid(static_cast<std::size_t>(points));
    if (points == 1) {
        grid[0] = lmax;
        return grid;
    }
    const double step = std::log(ratio) / static_cast<double>(points - 1);
    for (Index i = 0; i < points; ++i) grid[i] = lmax * std::exp(step * static_cast<double>(i));
    return grid;
}

Vector smooth_gradient(const AugmentedDesign& design, const Vector& theta, Loss loss)
{
    const double inv_n = 1.0 / static_cast<double>(design.n());
    const Vector eta = design.X * theta;
    Vector r;
    if (loss == Loss::gaussian) {
        r = eta - design.Y;
    } else {
        r = eta.unaryExpr([](double z) { return logistic(z); }) - design.Y;
    }
    return (design.X.transpose() * r) * inv_n;
}

double smooth_loss(const AugmentedDesign& design, const Vector& theta, Loss loss)
{
    const double inv_n = 1.0 / static_cast<double>(design.n());
    const Vector eta = design.X * theta;
    if (loss == Loss::gaussian) return 0.5 * inv_n * (design.Y - eta).squaredNorm();
    double s = 0.0;
    for (Index i = 0; i < eta.size(); ++i) s += log1pexp(eta[i]) - design.Y[i] * eta[i];
    return s * inv_n;
}

double objective(const AugmentedDesign& design, const Vector& theta, double lambda1, Loss loss)
{
    return smooth_loss(design, theta, loss) + lambda1 * theta.lpNorm<1>();
}

double kkt_residual(const AugmentedDesign& design, const Vector& theta, double lambda1, Loss loss)
{
    const Vector g = smooth_gradient(design, theta, loss);
    double worst = 0.0;
    for (Index j = 0; j < g.size(); ++j) {
        const double v = theta[j] != 0.0 ? std::abs(g[j] + lambda1 * (theta[j] > 0 ? 1.0 : -1.0))
                                         : std::max(0.0, std::abs(g[j]) - lambda1);
        worst = std::max(worst, v);
    }
    return worst;
}

namespace {

template <class Engine>
void gaussian_descent(const AugmentedDesign& design, const Engine& eng, const PenaltySpec& pen,
                      const SolverOptions& options, FitResult& res)
{
    Vector resid = design.Y - design.X * res.theta;
    const double inv_n = 1.0 / static_cast<double>(design.n());

    double prev_obj = std::numeric_limits<double>::infinity();
    auto track = [&] {
        if (!options.check_monotone) return;
        const double obj = 0.5 * resid.squaredNorm() * inv_n + pen.lambda1 * res.theta.lpNorm<1>();
        if (obj > prev_obj + 1e-12 * (1.0 + std::abs(prev_obj))) ++res.monotone_violations;
        prev_obj = obj;
    };
    track();

    Index sweeps = 0;
    bool done = false;
    while (!done && sweeps < options.max_sweeps) {
        const double full = eng.sweep(AllCoords{eng.units()}, res.theta, resid);
        ++sweeps;
        track();
        if (full <= options.update_tol) {
            // refresh the residual before certifying
            resid = design.Y - design.X * res.theta;
            res.kkt_residual = kkt_residual(design, res.theta, pen.lambda1, Loss::gaussian);
            if (res.kkt_residual <= options.kkt_tol) {
                done = true;
                break;
            }
            continue;
        }
        const auto active = eng.active(res.theta);
        const auto cols = eng.columns(active);
        Anderson accel(cols, options.anderson_depth);
        while (sweeps < options.max_sweeps) {
            const double upd = eng.sweep(active, res.theta, resid);
            ++sweeps;
            track();
            if (upd <= options.update_tol) break;
            if (accel.push(res.theta)) accel.extrapolate(design, pen.lambda1, res.theta, resid);
        }
    }
    res.iterations = sweeps;
    res.converged = done;
}

} // namespace

FitResult lasso_gaussian(const AugmentedDesign& design, const PenaltySpec& pen,
                         const SolverOptions& options, const Vector* warm_start)
{
    if (!(pen.lambda1 >= 0.0)) throw ParameterError("lambda1 must be nonnegative");
    const Index m = design.m();
    FitResult res;
    res.lambda1 = pen.lambda1;
    res.theta = warm_start ? *warm_start : Vector::Zero(m);
    if (res.theta.size() != m) throw ParameterError("warm start has the wrong length");

    if (BlockDescent::applies(design))
        gaussian_descent(design, BlockDescent(design, nullptr, pen.lambda1), pen, options, res);
    else
        gaussian_descent(design, CoordinateDescent(design.X, nullptr, pen.lambda1), pen, options, res);
    res.kkt_residual = kkt_residual(design, res.theta, pen.lambda1, Loss::gaussian);
    res.objective = objective(design, res.theta, pen.lambda1, Loss::gaussian);
    res.non_unique = pen.lambda1 == 0.0 && rank_deficient(design);
    return res;
}

namespace {

/// Inner solve of a weighted least squares lasso; `resid` holds z - X theta.
template <class Engine>
void weighted_descent(const Engine& eng, const SolverOptions& options, Vector& theta, Vector& resid,
                      Index& sweeps)
{
    double upd = std::numeric_limits<double>::infinity();
    for (Index inner = 0; upd > options.update_tol && inner < 10000 && sweeps < options.max_sweeps;
         ++inner) {
        upd = eng.sweep(AllCoords{eng.units()}, theta, resid);
        ++sweeps;
        if (upd <= options.update_tol) break;
        const auto active = eng.active(theta);
        for (Index a = 0; a < 1000 && sweeps < options.max_sweeps; ++a) {
            ++sweeps;
            if (eng.sweep(active, theta, resid) <= options.update_tol) break;
        }
    }
}

} // namespace

FitResult lasso_logistic(const AugmentedDesign& design, const PenaltySpec& pen,
                         const SolverOptions& options, const Vector* warm_start)
{
    if (!(pen.lambda1 >= 0.0)) throw ParameterError("lambda1 must be nonnegative");
    for (Index i = 0; i < design.Y.size(); ++i)
        if (design.Y[i] != 0.0 && design.Y[i] != 1.0)
            throw ParameterError("logistic responses must be 0 or 1");

    const Index m = design.m();
    const Index n = design.n();
    FitResult res;
    res.lambda1 = pen.lambda1;
    res.theta = warm_start ? *warm_start : Vector::Zero(m);
    if (res.theta.size() != m) throw ParameterError("warm start has the wrong length");

    const double lam = pen.lambda1;
    auto composite = [&](const Vector& th) { return objective(design, th, lam, Loss::logistic); };

    Index sweeps = 0;
    double obj = composite(res.theta);
    Vector w(n), resid(n);
    for (Index step = 0; step < options.max_newton; ++step) {
        res.kkt_residual = kkt_residual(design, res.theta, lam, Loss::logistic);
        if (res.kkt_residual <= options.logistic_kkt_tol) {
            res.converged = true;
            break;
        }
        const Vector eta = design.X * res.theta;
        if (eta.cwiseAbs().maxCoeff() > 30.0) {
            res.separation = true;
            break;
        }
        // quadratic model around the current point
        for (Index i = 0; i < n; ++i) {
            const double prob = logistic(eta[i]);
            w[i] = std::max(prob * (1.0 - prob), 1e-5);
            resid[i] = (design.Y[i] - prob) / w[i];  // z - X theta
        }
        Vector trial = res.theta;
        if (BlockDescent::applies(design))
            weighted_descent(BlockDescent(design, &w, lam), options, trial, resid, sweeps);
        else
            weighted_descent(CoordinateDescent(design.X, &w, lam), options, trial, resid, sweeps);
        // backtracking on the composite objective
        const Vector dir = trial - res.theta;
        double t = 1.0;
        bool accepted = false;
        for (int ls = 0; ls < 40; ++ls) {
            const Vector cand = res.theta + t * dir;
            const double cobj = composite(cand);
            if (cobj <= obj + 1e-14 * (1.0 + std::abs(obj))) {
                res.theta = cand;
                obj = cobj;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if (!accepted || sweeps >= options.max_sweeps) {
            res.kkt_residual = kkt_residual(design, res.theta, lam, Loss::logistic);
            res.converged = res.kkt_residual <= options.logistic_kkt_tol;
            break;
        }
    }
    if (!res.converged) {
        res.kkt_residual = kkt_residual(design, res.theta, lam, Loss::logistic);
        res.converged = res.kkt_residual <= options.logistic_kkt_tol && !res.separation;
    }
    res.iterations = sweeps;
    res.objective = obj;
    res.non_unique = lam == 0.0 && rank_deficient(design);
    return res;
}

FitResult fit_lasso(const AugmentedDesign& design, double lambda1, Loss loss,
                    const SolverOptions& options, const Vector* warm_start)
{
    return loss == Loss::gaussian ? lasso_gaussian(design, {lambda1}, options, warm_start)
                                  : lasso_logistic(design, {lambda1}, options, warm_start);
}

PathResult fit_path(const AugmentedDesign& design, const std::vector<double>& grid, Loss loss,
                    const SolverOptions& options)
{
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (!(grid[i] > 0.0)) throw ParameterError("lambda grid values must be positive");
        if (i > 0 && !(grid[i] < grid[i - 1]))
            throw ParameterError("lambda grid must be strictly decreasing");
    }
    PathResult out;
    out.lambda_grid = grid;
    out.fits.reserve(grid.size());
    Vector warm = Vector::Zero(design.m());
    for (double lam : grid) {
        out.fits.push_back(fit_lasso(design, lam, loss, options, &warm));
        warm = out.fits.back().theta;
    }
    return out;
}

} // namespace stratlasso
