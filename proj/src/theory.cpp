#include <stratlasso/theory.hpp>
#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <algorithm>

namespace stratlasso {

double wsmedian_objective(const Vector& b, const Vector& tau, double x)
{
    return std::abs(x) + (tau.array() * (b.array() - x).abs()).sum();
}

WSMedian wsmedian(const Vector& b, const Vector& tau)
{
    if (b.size() != tau.size()) throw ParameterError("wsmedian: b and tau lengths differ");
    for (Index k = 0; k < tau.size(); ++k)
        if (!(tau[k] > 0.0)) throw ParameterError("wsmedian: tau must be positive");

    // f is convex piecewise linear with kinks at {0} u {b_k}: its minimizer
    // set is an interval whose endpoints are kinks.
    std::vector<double> knots(b.data(), b.data() + b.size());
    knots.push_back(0.0);
    std::sort(knots.begin(), knots.end());
    std::vector<double> f(knots.size());
    double fmin = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < knots.size(); ++i) {
        f[i] = wsmedian_objective(b, tau, knots[i]);
        fmin = std::min(fmin, f[i]);
    }
    const double slack = 1e-12 * (1.0 + std::abs(fmin));
    WSMedian out;
    out.lower = std::numeric_limits<double>::infinity();
    out.upper = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < knots.size(); ++i) {
        if (f[i] <= fmin + slack) {
            out.lower = std::min(out.lower, knots[i]);
            out.upper = std::max(out.upper, knots[i]);
        }
    }
    if (out.lower <= 0.0 && 0.0 <= out.upper) out.value = 0.0;
    else if (out.lower > 0.0) out.value = out.lower;
    else out.value = out.upper;
    out.objective = wsmedian_objective(b, tau, out.value);
    return out;
}

Vector reference_values(const Matrix& beta, const IndexVector& refs)
{
    if (refs.size() != beta.cols()) throw ParameterError("reference vector length must equal p");
    Vector out(beta.cols());
    for (Index j = 0; j < beta.cols(); ++j) {
        if (refs[j] == kNoReference) {
            out[j] = 0.0;
        } else {
            if (refs[j] < 0 || refs[j] >= beta.rows()) throw ParameterError("reference stratum out of range");
            out[j] = beta(refs[j], j);
        }
    }
    return out;
}

namespace {

void truth_sets(const Matrix& beta, const IndexVector& refs, BoolVector& S, BoolMatrix& T)
{
    const Vector ref = reference_values(beta, refs);
    S.resize(beta.cols());
    T.resize(beta.rows(), beta.cols());
    for (Index j = 0; j < beta.cols(); ++j) {
        S[j] = !value_equal(ref[j], 0.0);
        for (Index k = 0; k < beta.rows(); ++k) T(k, j) = !value_equal(beta(k, j), ref[j]);
    }
}

bool is_singular(const Matrix& gram, double& lambda_min)
{
    if (gram.rows() == 0) {
        lambda_min = std::numeric_limits<double>::infinity();
        return false;
    }
    Eigen::SelfAdjointEigenSolver<Matrix> es(gram, Eigen::EigenvaluesOnly);
    lambda_min = es.eigenvalues()[0];
    const double lambda_max = es.eigenvalues()[gram.rows() - 1];
    return !(lambda_min > 1e-10 * std::max(1.0, lambda_max));
}

Matrix select_columns(const Matrix& X, const std::vector<Index>& cols)
{
    Matrix out(X.rows(), static_cast<Index>(cols.size()));
    for (std::size_t c = 0; c < cols.size(); ++c) out.col(static_cast<Index>(c)) = X.col(cols[c]);
    return out;
}

} // namespace

std::vector<Index> support_columns(const BoolVector& S, const BoolMatrix& T,
                                   const DesignLayout& layout)
{
    std::vector<Index> J;
    for (Index j = 0; j < layout.p; ++j)
        if (S[j] && layout.mu_col[j] >= 0) J.push_back(layout.mu_col[j]);
    for (Index k = 0; k < layout.K; ++k)
        for (Index j = 0; j < layout.p; ++j)
            if (T(k, j) && layout.gamma_col(k, j) >= 0) J.push_back(layout.gamma_col(k, j));
    std::sort(J.begin(), J.end());
    return J;
}

SupportSets support_sets_from_truth(const Matrix& beta, const IndexVector& refs)
{
    SupportSets out;
    truth_sets(beta, refs, out.S, out.T);
    return out;
}

SupportSets support_sets_from_truth(const Matrix& beta, const IndexVector& refs,
                                    const DesignLayout& layout)
{
    auto out = support_sets_from_truth(beta, refs);
    out.J = support_columns(out.S, out.T, layout);
    return out;
}

HeterogeneityDegrees heterogeneity_degrees(const Matrix& beta, const IndexVector& refs)
{
    BoolVector S;
    BoolMatrix T;
    truth_sets(beta, refs, S, T);
    HeterogeneityDegrees out;
    out.Kstar.resize(static_cast<std::size_t>(beta.cols()));
    for (Index j = 0; j < beta.cols(); ++j) {
        const int deviating = static_cast<int>(T.col(j).count());
        for (Index k = 0; k < beta.rows(); ++k)
            if (!T(k, j)) out.Kstar[j].push_back(k);
        if (S[j]) out.D1 = std::max(out.D1.value_or(0), deviating);
        else out.D0 = std::max(out.D0, deviating);
    }
    return out;
}

ICReport ic_generic(const AugmentedDesign& design, const std::vector<Index>& J)
{
    ICReport rep;
    if (J.empty()) {
        rep.lambda_min = std::numeric_limits<double>::infinity();
        rep.c = 0.0;
        rep.holds = true;
        rep.gamma_slack = 1.0;
        return rep;
    }
    const double inv_n = 1.0 / static_cast<double>(design.n());
    const Matrix XJ = select_columns(Matrix(design.X), J);
    const Matrix gram = (XJ.transpose() * XJ) * inv_n;
    if (is_singular(gram, rep.lambda_min)) {
        rep.lambda_min = std::max(rep.lambda_min, 0.0);
        rep.c_defined = false;
        rep.c = std::numeric_limits<double>::quiet_NaN();
        rep.holds = false;
        rep.gamma_slack = std::numeric_limits<double>::quiet_NaN();
        return rep;
    }
    const Matrix cross = Matrix(design.X.transpose() * XJ).transpose() * inv_n;  // |J| x m
    const Matrix coef = gram.llt().solve(cross);
    std::vector<bool> in_J(static_cast<std::size_t>(design.m()), false);
    for (Index c : J) in_J[c] = true;
    double c = 0.0;
    for (Index col = 0; col < design.m(); ++col)
        if (!in_J[col]) c = std::max(c, coef.col(col).lpNorm<1>());
    rep.c = c;
    rep.gamma_slack = 1.0 - c;
    rep.holds = rep.lambda_min > 0.0 && c < 1.0;
    return rep;
}

Interval tau0_feasible_interval(Index K, int D0, std::optional<int> D1)
{
    if (K < 1) throw ParameterError("K must be >= 1");
    const double rootK = std::sqrt(static_cast<double>(K));
    Interval iv;
    if (!D1) {
        // no nonnull predictors: only the upper constraint remains
        iv.lower = 0.0;
    } else if (static_cast<double>(K) - 2.0 * *D1 > 0.0) {
        iv.lower = rootK / (static_cast<double>(K) - 2.0 * *D1);
    } else {
        iv.lower = std::numeric_limits<double>::infinity();
    }
    iv.upper = D0 > 0 ? rootK / static_cast<double>(D0) : std::numeric_limits<double>::infinity();
    return iv;
}

bool ic_orthogonal_balanced(Index K, const HeterogeneityDegrees& degrees, double tau0)
{
    return tau0_feasible_interval(K, degrees.D0, degrees.D1).contains(tau0);
}

OrthogonalConstants orthogonal_constants(Index K, int D0, std::optional<int> D1, double tau0)
{
    if (!(tau0 > 0.0)) throw ParameterError("tau0 must be positive");
    const double Kd = static_cast<double>(K);
    const double rootK = std::sqrt(Kd);
    if (D1 && *D1 >= K) throw ParameterError("D1 must be smaller than K");
    OrthogonalConstants out;
    out.gamma = 1.0 - static_cast<double>(D0) * tau0 / rootK;
    const double d1 = D1 ? static_cast<double>(*D1) : 0.0;
    if (D1) out.gamma = std::min(out.gamma, 1.0 - (rootK + d1 * tau0) / ((Kd - d1) * tau0));
    const double a = 1.0 / (tau0 * tau0);
    const double root = 0.5 * ((a + 1.0) - std::sqrt((a - 1.0) * (a - 1.0) + 4.0 * d1 * a / Kd));
    out.C_min = std::min({1.0, a, root});
    out.valid = out.gamma > 0.0 && out.C_min > 0.0;
    return out;
}

RecoveryThresholds recovery_thresholds(int eta, double sigma, const std::vector<Index>& sizes,
                                       Index p, double tau0, double gamma, double C_min,
                                       Index support_size)
{
    if (eta != 0 && eta != 1) throw ParameterError("eta must be 0 or 1");
    if (!(gamma > 0.0)) throw ConditionError("irrepresentability slack gamma must be positive");
    if (!(C_min > 0.0)) throw ConditionError("C_min must be positive");
    if (!(tau0 > 0.0) || !(sigma >= 0.0)) throw ParameterError("tau0 > 0 and sigma >= 0 required");
    const Index K = static_cast<Index>(sizes.size());
    double n = 0.0;
    for (Index s : sizes) n += static_cast<double>(s);

    RecoveryThresholds out;
    out.eta = eta;
    out.gamma = gamma;
    out.C_min = C_min;
    const double logterm = std::log(static_cast<double>((K + eta) * p));
    out.lambda1_bound = 2.0 / (gamma * std::min(1.0, tau0)) * std::sqrt(2.0 * sigma * sigma * logterm / n);
    out.lambda1 = 1.01 * out.lambda1_bound;
    out.beta_min = out.lambda1 * (std::sqrt(static_cast<double>(support_size)) / C_min +
                                  4.0 * sigma / std::sqrt(C_min));
    out.heterogeneity_threshold.resize(K);
    for (Index k = 0; k < K; ++k)
        out.heterogeneity_threshold[k] =
            out.beta_min * std::sqrt(n / static_cast<double>(sizes[k])) / tau0;
    return out;
}

GeneralICConstants ic_general(const StratifiedDataset& ds, const IndexVector& refs,
                              const TauWeights& tau, const Matrix& beta_true)
{
    const Index K = ds.K();
    const Index p = ds.p();
    if (beta_true.rows() != K || beta_true.cols() != p)
        throw ParameterError("ground truth dimensions do not match the dataset");
    tau.validate(K);

    BoolVector S;
    BoolMatrix T;
    truth_sets(beta_true, refs, S, T);
    std::vector<Index> s_idx;
    for (Index j = 0; j < p; ++j)
        if (S[j]) s_idx.push_back(j);
    const Index ns = static_cast<Index>(s_idx.size());

    // per stratum: A_k = Sigma_k^{-1} X_T^T X (|T_k| x p), R_k = (I - Pi_k) X
    std::vector<Matrix> A(K), R(K), XS(K);
    for (Index k = 0; k < K; ++k) {
        const Matrix& X = ds.strata[k].X;
        std::vector<Index> t_idx;
        for (Index j = 0; j < p; ++j)
            if (T(k, j)) t_idx.push_back(j);
        const Matrix XT = select_columns(X, t_idx);
        XS[k] = select_columns(X, s_idx);
        if (t_idx.empty()) {
            A[k].resize(0, p);
            R[k] = X;
            continue;
        }
        const Matrix sigma = XT.transpose() * XT;
        double lmin = 0.0;
        if (is_singular(sigma, lmin))
            throw RankError("singular Gram of the heterogeneous columns in stratum " + std::to_string(k + 1), static_cast<int>(k));
        A[k] = sigma.llt().solve(XT.transpose() * X);
        R[k] = X - XT * A[k];
    }

    // Sigma~ = sum_k X_S^T (I - Pi_k) X_S ; M_k = Sigma~^{-1} X_S^(k)^T R_k  (|S| x p)
    std::vector<Matrix> M(K);
    if (ns > 0) {
        Matrix sigma_t = Matrix::Zero(ns, ns);
        for (Index k = 0; k < K; ++k) sigma_t += XS[k].transpose() * select_columns(R[k], s_idx);
        sigma_t = 0.5 * (sigma_t + sigma_t.transpose());
        double lmin = 0.0;
        if (is_singular(sigma_t, lmin)) throw RankError("singular residualized Gram of the nonnull columns");
        const auto llt = sigma_t.llt();
        for (Index k = 0; k < K; ++k) M[k] = llt.solve(XS[k].transpose() * R[k]);
    } else {
        for (Index k = 0; k < K; ++k) M[k].resize(0, p);
    }
    // Omega^(k) = A_k restricted to S columns
    std::vector<Matrix> Omega(K);
    for (Index k = 0; k < K; ++k) Omega[k] = select_columns(A[k], s_idx);

    GeneralICConstants out;
    for (Index j = 0; j < p; ++j) {
        if (!S[j]) {
            Vector a = Vector::Zero(ns);
            for (Index k = 0; k < K; ++k) a += M[k].col(j);
            double v = a.lpNorm<1>();
            for (Index k = 0; k < K; ++k) v += tau.tau[k] * (A[k].col(j) - Omega[k] * a).lpNorm<1>();
            out.c1 = std::max(out.c1, v);
        }
        for (Index k0 = 0; k0 < K; ++k0) {
            if (T(k0, j)) continue;  // k0 in Kbar_j
            const Vector om = M[k0].col(j);
            double v = om.lpNorm<1>() / tau.tau[k0];
            for (Index l = 0; l < K; ++l)
                if (l != k0) v += tau.tau[l] / tau.tau[k0] * (Omega[l] * om).lpNorm<1>();
            v += (A[k0].col(j) - Omega[k0] * om).lpNorm<1>();
            out.c2bar = std::max(out.c2bar, v);
            if (refs[j] != k0) out.c2 = std::max(out.c2, v);
        }
    }
    out.holds_basic = out.c1 < 1.0 && out.c2 < 1.0;
    out.holds_overparam = out.c1 < 1.0 && out.c2bar < 1.0;
    return out;
}

CorollaryReport corollary_checks(const StratifiedDataset& ds, const TauWeights& tau,
                                 CorollaryCase which, const Matrix& beta_true,
                                 std::optional<double> sigma)
{
    const Index K = ds.K();
    const Index p = ds.p();
    const double n = static_cast<double>(ds.n());
    tau.validate(K);
    if (beta_true.rows() != K || beta_true.cols() != p)
        throw ParameterError("ground truth dimensions do not match the dataset");

    CorollaryReport rep;
    rep.which = which;
    const double log_term = std::log(static_cast<double>((K + 1) * p));
    Index support_count = 0;

    if (which == CorollaryCase::homogeneous) {
        std::vector<Index> s_idx;
        for (Index j = 0; j < p; ++j) {
            for (Index k = 1; k < K; ++k)
                if (!value_equal(beta_true(k, j), beta_true(0, j)))
                    throw ParameterError("homogeneous case requires identical coefficients across strata");
            if (!value_equal(beta_true(0, j), 0.0)) s_idx.push_back(j);
        }
        support_count = static_cast<Index>(s_idx.size());
        rep.condition_A = tau.tau.sum() > 1.0;
        if (s_idx.empty()) {
            rep.C_min = std::numeric_limits<double>::infinity();
        } else {
            Matrix pooled(ds.n(), p);
            for (Index k = 0; k < K; ++k) pooled.middleRows(ds.offset(k), ds.n_k(k)) = ds.strata[k].X;
            const Matrix XS = select_columns(pooled, s_idx);
            const Matrix gram = XS.transpose() * XS;
            double lmin = 0.0;
            if (is_singular(gram, lmin)) throw RankError("singular pooled Gram of the support columns");
            rep.C_min = lmin / n;
            const auto llt = gram.llt();
            const Matrix coef = llt.solve(XS.transpose() * pooled);
            for (Index j = 0; j < p; ++j)
                if (!std::binary_search(s_idx.begin(), s_idx.end(), j))
                    rep.c1 = std::max(rep.c1, coef.col(j).lpNorm<1>());
            for (Index k = 0; k < K; ++k) {
                const Matrix& X = ds.strata[k].X;
                const Matrix ck = llt.solve(select_columns(X, s_idx).transpose() * X);
                for (Index j = 0; j < p; ++j)
                    rep.c2 = std::max(rep.c2, ck.col(j).lpNorm<1>() / tau.tau[k]);
            }
        }
    } else {
        const auto mr = mode_reference(beta_true);
        for (Index j = 0; j < p; ++j)
            if (!value_equal(mr.mode_vector[j], 0.0))
                throw ParameterError("independent case requires a zero overall effect for every predictor");
        rep.condition_A = true;
        for (Index j = 0; j < p; ++j) {
            double in_null = 0.0, out_null = 0.0;
            for (Index k = 0; k < K; ++k)
                (value_equal(beta_true(k, j), 0.0) ? in_null : out_null) += tau.tau[k];
            if (!(out_null < 1.0 + in_null)) rep.condition_A = false;
        }
        rep.C_min = std::numeric_limits<double>::infinity();
        Vector c1_per_j = Vector::Zero(p);
        for (Index k = 0; k < K; ++k) {
            const Matrix& X = ds.strata[k].X;
            std::vector<Index> t_idx;
            for (Index j = 0; j < p; ++j)
                if (!value_equal(beta_true(k, j), 0.0)) t_idx.push_back(j);
            support_count += static_cast<Index>(t_idx.size());
            if (t_idx.empty()) continue;
            const Matrix XT = select_columns(X, t_idx);
            const Matrix gram = XT.transpose() * XT;
            double lmin = 0.0;
            if (is_singular(gram, lmin))
                throw RankError("singular Gram of the nonzero columns in stratum " + std::to_string(k + 1), static_cast<int>(k));
            rep.C_min = std::min(rep.C_min, lmin / static_cast<double>(X.rows()));
            const Matrix coef = gram.llt().solve(XT.transpose() * X);
            for (Index j = 0; j < p; ++j) {
                const double norm = coef.col(j).lpNorm<1>();
                c1_per_j[j] += tau.tau[k] * norm;
                if (!std::binary_search(t_idx.begin(), t_idx.end(), j)) rep.c2 = std::max(rep.c2, norm);
            }
        }
        rep.c1 = p > 0 ? c1_per_j.maxCoeff() : 0.0;
    }
    rep.condition_C_i = rep.c1 < 1.0;
    rep.condition_C_ii = rep.c2 < 1.0;
    rep.gamma = std::min(1.0 - rep.c1, 1.0 - rep.c2);
    if (sigma && rep.gamma > 0.0) {
        const double tau0 = tau.tau0;
        const double lam = 2.0 / (std::min(1.0, tau0) * rep.gamma) *
                           std::sqrt(2.0 * *sigma * *sigma * log_term / n);
        rep.lambda1 = lam;
        const double lead = which == CorollaryCase::homogeneous
                                ? std::sqrt(static_cast<double>(support_count))
                                : tau0 * std::sqrt(static_cast<double>(support_count));
        const double cmin = rep.C_min;
        rep.beta_min = std::isinf(cmin) ? 0.0 : lam * (lead / cmin + 4.0 * *sigma / std::sqrt(cmin));
    }
    return rep;
}

} // namespace stratlasso
