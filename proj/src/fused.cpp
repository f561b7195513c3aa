#include <stratlasso/fused.hpp>
#include <Eigen/Cholesky>
#include <numeric>

namespace stratlasso {

double fused_objective(const StratifiedDataset& ds, const Matrix& beta, double lambda1,
                       double lambda2)
{
    const double n = static_cast<double>(ds.n());
    double loss = 0.0;
    for (Index k = 0; k < ds.K(); ++k)
        loss += (ds.strata[k].y - ds.strata[k].X * beta.row(k).transpose()).squaredNorm();
    double fuse = 0.0;
    for (Index a = 0; a < beta.rows(); ++a)
        for (Index b = a + 1; b < beta.rows(); ++b) fuse += (beta.row(a) - beta.row(b)).lpNorm<1>();
    return loss / (2.0 * n) + lambda1 * beta.lpNorm<1>() + lambda2 * fuse;
}

namespace {

/*
 * Solves (G + rho (I + L)) x = b, G = blockdiag(X_k^T X_k / n) and
 * L = (K I - 1 1^T) (x) I_p, by Woodbury on the rank-p coupling term:
 *   A = B - rho U U^T,  B = blockdiag(G_k + rho (K+1) I),  U = 1_K (x) I_p.
 */
class CouplingSolver {
public:
    CouplingSolver(const std::vector<Matrix>& grams, double rho) { factor(grams, rho); }

    void factor(const std::vector<Matrix>& grams, double rho)
    {
        const Index K = static_cast<Index>(grams.size());
        const Index p = grams.front().rows();
        blocks_.clear();
        Matrix cap = Matrix::Identity(p, p) / rho;
        for (const auto& G : grams) {
            Matrix B = G;
            B.diagonal().array() += rho * static_cast<double>(K + 1);
            blocks_.emplace_back(B);
            cap -= blocks_.back().solve(Matrix::Identity(p, p));
        }
        capacitance_.compute(cap);
    }

    /// b and the result are K x p (row k = stratum k).
    Matrix solve(const Matrix& b) const
    {
        const Index K = b.rows();
        Matrix x(K, b.cols());
        for (Index k = 0; k < K; ++k) x.row(k) = blocks_[k].solve(b.row(k).transpose()).transpose();
        const Vector t = capacitance_.solve(x.colwise().sum().transpose());
        for (Index k = 0; k < K; ++k) x.row(k) += blocks_[k].solve(t).transpose();
        return x;
    }

private:
    std::vector<Eigen::LLT<Matrix>> blocks_;
    Eigen::LLT<Matrix> capacitance_;
};

struct PairIndex {
    std::vector<std::pair<Index, Index>> pairs;
    explicit PairIndex(Index K)
    {
        for (Index a = 0; a < K; ++a)
            for (Index b = a + 1; b < K; ++b) pairs.emplace_back(a, b);
    }
};

/// Pairwise differences: row q of the result is beta.row(a_q) - beta.row(b_q).
Matrix pair_diff(const Matrix& beta, const PairIndex& pi)
{
    Matrix out(static_cast<Index>(pi.pairs.size()), beta.cols());
    for (std::size_t q = 0; q < pi.pairs.size(); ++q)
        out.row(static_cast<Index>(q)) = beta.row(pi.pairs[q].first) - beta.row(pi.pairs[q].second);
    return out;
}

/// Adjoint of pair_diff.
Matrix pair_diff_adjoint(const Matrix& w, const PairIndex& pi, Index K)
{
    Matrix out = Matrix::Zero(K, w.cols());
    for (std::size_t q = 0; q < pi.pairs.size(); ++q) {
        out.row(pi.pairs[q].first) += w.row(static_cast<Index>(q));
        out.row(pi.pairs[q].second) -= w.row(static_cast<Index>(q));
    }
    return out;
}

Matrix soft(const Matrix& v, double t)
{
    return v.unaryExpr([t](double x) { return soft_threshold(x, t); });
}

int find_root(std::vector<int>& parent, int i)
{
    while (parent[i] != i) {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    return i;
}

} // namespace

FusedResult fused_clique_gaussian(const StratifiedDataset& ds, double lambda1, double lambda2,
                                  const FusedOptions& options, const Matrix* warm_start)
{
    if (ds.response_kind != ResponseKind::gaussian)
        throw ParameterError("fused comparator supports Gaussian responses only");
    if (!(lambda1 >= 0.0) || !(lambda2 >= 0.0))
        throw ParameterError("fused penalties must be nonnegative");
    const Index K = ds.K();
    const Index p = ds.p();
    const double inv_n = 1.0 / static_cast<double>(ds.n());
    const PairIndex pi(K);
    const Index npairs = static_cast<Index>(pi.pairs.size());

    std::vector<Matrix> grams;
    Matrix c(K, p);
    for (Index k = 0; k < K; ++k) {
        const auto& s = ds.strata[k];
        grams.push_back((s.X.transpose() * s.X) * inv_n);
        c.row(k) = (s.X.transpose() * s.y).transpose() * inv_n;
    }

    double rho = options.rho;
    CouplingSolver solver(grams, rho);

    Matrix beta = warm_start ? *warm_start : Matrix::Zero(K, p);
    Matrix z1 = beta, u1 = Matrix::Zero(K, p);
    Matrix z2 = pair_diff(beta, pi), u2 = Matrix::Zero(npairs, p);

    const double rows = static_cast<double>(K * p + npairs * p);
    const double cols = static_cast<double>(K * p);
    FusedResult res;
    Index last_adapt = 0;
    for (Index it = 1; it <= options.max_iters; ++it) {
        const Matrix rhs = c + rho * ((z1 - u1) + pair_diff_adjoint(z2 - u2, pi, K));
        beta = solver.solve(rhs);

        const Matrix d2 = pair_diff(beta, pi);
        const Matrix z1_old = z1, z2_old = z2;
        z1 = soft(beta + u1, lambda1 / rho);
        z2 = soft(d2 + u2, lambda2 / rho);
        u1 += beta - z1;
        u2 += d2 - z2;

        const double r_norm = std::sqrt((beta - z1).squaredNorm() + (d2 - z2).squaredNorm());
        const double s_norm = rho * ((z1 - z1_old) + pair_diff_adjoint(z2 - z2_old, pi, K)).norm();
        res.primal_residual = r_norm / std::sqrt(rows);
        res.dual_residual = s_norm / std::sqrt(cols);
        res.iterations = it;
        if (res.primal_residual <= options.tol && res.dual_residual <= options.tol) {
            res.converged = true;
            break;
        }
        if (it - last_adapt >= 10) {
            double factor = 1.0;
            if (r_norm > options.balance_ratio * s_norm) factor = 2.0;
            else if (s_norm > options.balance_ratio * r_norm) factor = 0.5;
            if (factor != 1.0) {
                rho *= factor;
                u1 /= factor;
                u2 /= factor;
                solver.factor(grams, rho);
                last_adapt = it;
            }
        }
    }

    // fused groups from exact zeros of the difference variables
    res.groups.resize(K, p);
    res.beta.resize(K, p);
    std::vector<int> parent(static_cast<std::size_t>(K));
    for (Index j = 0; j < p; ++j) {
        std::iota(parent.begin(), parent.end(), 0);
        for (Index q = 0; q < npairs; ++q) {
            if (z2(q, j) != 0.0) continue;
            const int a = find_root(parent, static_cast<int>(pi.pairs[q].first));
            const int b = find_root(parent, static_cast<int>(pi.pairs[q].second));
            if (a != b) parent[std::max(a, b)] = std::min(a, b);
        }
        std::vector<double> sum(static_cast<std::size_t>(K), 0.0);
        std::vector<int> count(static_cast<std::size_t>(K), 0);
        for (Index k = 0; k < K; ++k) {
            const int r = find_root(parent, static_cast<int>(k));
            res.groups(k, j) = r;
            sum[r] += z1(k, j);
            ++count[r];
        }
        for (Index k = 0; k < K; ++k) {
            const int r = res.groups(k, j);
            res.beta(k, j) = sum[r] / count[r];
        }
    }
    res.objective = fused_objective(ds, res.beta, lambda1, lambda2);
    return res;
}

} // namespace stratlasso
