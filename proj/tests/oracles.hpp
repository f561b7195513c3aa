#pragma once
// Independent reference computations used to check the library. Nothing here
// calls into the code under test beyond plain data types.
#include <stratlasso/types.hpp>
#include <stratlasso/dataset.hpp>
#include <Eigen/Dense>
#include <functional>
#include <limits>
#include <random>
#include <vector>

namespace oracle {

using stratlasso::Index;
using stratlasso::Matrix;
using stratlasso::Vector;

inline double soft(double z, double t)
{
    if (z > t) return z - t;
    if (z < -t) return z + t;
    return 0.0;
}

inline Matrix gaussian_matrix(Index rows, Index cols, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd;
    Matrix m(rows, cols);
    for (Index j = 0; j < cols; ++j)
        for (Index i = 0; i < rows; ++i) m(i, j) = nd(rng);
    return m;
}

inline Vector gaussian_vector(Index n, std::uint64_t seed)
{
    return gaussian_matrix(n, 1, seed).col(0);
}

/// n x p with X^T X / n = I (n >= p).
inline Matrix orthonormal_design(Index n, Index p, std::uint64_t seed)
{
    const Matrix A = gaussian_matrix(n, p, seed);
    Eigen::HouseholderQR<Matrix> qr(A);
    const Matrix Q = qr.householderQ() * Matrix::Identity(n, p);
    return Q * std::sqrt(static_cast<double>(n));
}

/// Augmented design written out densely from its block definition.
inline Matrix dense_overparam(const stratlasso::StratifiedDataset& ds, const Vector& tau)
{
    const Index K = ds.K(), p = ds.p();
    Matrix X = Matrix::Zero(ds.n(), (K + 1) * p);
    Index row = 0;
    for (Index k = 0; k < K; ++k) {
        const Matrix& Xk = ds.strata[k].X;
        X.block(row, 0, Xk.rows(), p) = Xk;
        X.block(row, p + k * p, Xk.rows(), p) = Xk / tau[k];
        row += Xk.rows();
    }
    return X;
}

inline Vector stacked_response(const stratlasso::StratifiedDataset& ds)
{
    Vector y(ds.n());
    Index row = 0;
    for (const auto& s : ds.strata) {
        y.segment(row, s.y.size()) = s.y;
        row += s.y.size();
    }
    return y;
}

/// FISTA on (1/2n)||y - X b||^2 + lam ||b||_1; slow but independent.
inline Vector fista_lasso(const Matrix& X, const Vector& y, double lam, int iters = 20000)
{
    const double n = static_cast<double>(X.rows());
    const Matrix G = X.transpose() * X / n;
    const Vector c = X.transpose() * y / n;
    const double L = Eigen::SelfAdjointEigenSolver<Matrix>(G).eigenvalues().maxCoeff();
    Vector b = Vector::Zero(X.cols()), z = b, prev = b;
    double t = 1.0;
    for (int it = 0; it < iters; ++it) {
        const Vector g = G * z - c;
        Vector next = z - g / L;
        for (Index j = 0; j < next.size(); ++j) next[j] = soft(next[j], lam / L);
        const double tn = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
        z = next + ((t - 1.0) / tn) * (next - b);
        prev = b;
        b = next;
        t = tn;
    }
    return b;
}

inline double lasso_objective(const Matrix& X, const Vector& y, const Vector& b, double lam)
{
    return (y - X * b).squaredNorm() / (2.0 * static_cast<double>(X.rows())) + lam * b.lpNorm<1>();
}

/// Mean logistic negative log-likelihood.
inline double logistic_loss(const Matrix& X, const Vector& y, const Vector& b)
{
    const Vector eta = X * b;
    double s = 0.0;
    for (Index i = 0; i < eta.size(); ++i) s += std::log(1.0 + std::exp(eta[i])) - y[i] * eta[i];
    return s / static_cast<double>(X.rows());
}

inline Vector central_difference(const std::function<double(const Vector&)>& f, const Vector& x, double h)
{
    Vector g(x.size());
    for (Index i = 0; i < x.size(); ++i) {
        Vector a = x, b = x;
        a[i] += h;
        b[i] -= h;
        g[i] = (f(a) - f(b)) / (2.0 * h);
    }
    return g;
}

inline double wsmedian_f(const Vector& b, const Vector& tau, double x)
{
    double f = std::abs(x);
    for (Index k = 0; k < b.size(); ++k) f += tau[k] * std::abs(b[k] - x);
    return f;
}

/// Minimum of the weighted median objective over {0} and the b_k.
inline double wsmedian_min_breakpoints(const Vector& b, const Vector& tau)
{
    double best = wsmedian_f(b, tau, 0.0);
    for (Index k = 0; k < b.size(); ++k) best = std::min(best, wsmedian_f(b, tau, b[k]));
    return best;
}

/// Generic irrepresentability constant straight from the definition.
inline double ic_constant(const Matrix& X, const std::vector<Index>& J)
{
    if (J.empty()) return 0.0;
    Matrix XJ(X.rows(), static_cast<Index>(J.size()));
    for (std::size_t i = 0; i < J.size(); ++i) XJ.col(static_cast<Index>(i)) = X.col(J[i]);
    const Matrix inv = (XJ.transpose() * XJ).inverse();
    double c = 0.0;
    for (Index j = 0; j < X.cols(); ++j) {
        if (std::find(J.begin(), J.end(), j) != J.end()) continue;
        c = std::max(c, (inv * XJ.transpose() * X.col(j)).lpNorm<1>());
    }
    return c;
}

/// Mode of {0, v_1..v_K} by exhaustive counting with the documented tie rule.
inline double mode_bruteforce(const std::vector<double>& v)
{
    std::vector<double> all{0.0};
    all.insert(all.end(), v.begin(), v.end());
    auto eq = [](double a, double b) {
        return std::abs(a - b) <= 1e-9 * std::max({1.0, std::abs(a), std::abs(b)});
    };
    int best_count = -1;
    double best = 0.0;
    for (double c : all) {
        int cnt = 0;
        for (double d : all) cnt += eq(c, d);
        const bool better = cnt > best_count ||
            (cnt == best_count && !eq(best, 0.0) &&
             (eq(c, 0.0) || std::abs(c) < std::abs(best) ||
              (std::abs(c) == std::abs(best) && c < best)));
        if (better) {
            best_count = cnt;
            best = c;
        }
    }
    return best;
}

/// Coarse-to-fine grid minimization of f over a box in R^3.
inline Vector grid_minimize3(const std::function<double(const Vector&)>& f, Vector center,
                             double half_width, int points = 41, int levels = 12)
{
    Vector best = center;
    double fbest = f(center);
    for (int lev = 0; lev < levels; ++lev) {
        const double step = 2.0 * half_width / (points - 1);
        const Vector c = best;
        for (int a = 0; a < points; ++a)
            for (int b = 0; b < points; ++b)
                for (int d = 0; d < points; ++d) {
                    Vector x(3);
                    x << c[0] - half_width + a * step, c[1] - half_width + b * step,
                        c[2] - half_width + d * step;
                    const double v = f(x);
                    if (v < fbest) {
                        fbest = v;
                        best = x;
                    }
                }
        half_width = 2.0 * step;
    }
    return best;
}

} // namespace oracle
