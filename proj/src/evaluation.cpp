#include <stratlasso/evaluation.hpp>
#include <stratlasso/parallel.hpp>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace stratlasso {

Method Method::proposal() { return Method{}; }

Method Method::pooled()
{
    Method m;
    m.kind = MethodKind::pooled;
    m.tag = "pooled";
    return m;
}

Method Method::independent()
{
    Method m;
    m.kind = MethodKind::independent;
    m.tag = "independent";
    return m;
}

Method Method::fused()
{
    Method m;
    m.kind = MethodKind::fused;
    m.tag = "fused";
    return m;
}

Method Method::basic(ReferenceVector refs, std::string tag)
{
    Method m;
    m.kind = MethodKind::basic;
    m.refs = std::move(refs);
    m.tag = std::move(tag);
    return m;
}

Method Method::parse(const std::string& spec, Index K, Index p, const IndexVector* oracle_refs)
{
    if (spec == "proposal") return proposal();
    if (spec == "pooled") return pooled();
    if (spec == "independent") return independent();
    if (spec == "fused") return fused();
    const std::string prefix = "basic:";
    if (spec.rfind(prefix, 0) != 0) throw SchemaError("unknown method '" + spec + "'");
    const std::string arg = spec.substr(prefix.size());
    if (arg == "first") return basic(ReferenceVector::uniform(p, 0), spec);
    if (arg == "last") return basic(ReferenceVector::uniform(p, static_cast<int>(K - 1)), spec);
    if (arg == "oracle") {
        if (!oracle_refs)
            throw SchemaError("basic:oracle needs a ground truth supplying the optimal references");
        if (oracle_refs->size() != p) throw SchemaError("oracle references have wrong length");
        return basic(oracle_references(*oracle_refs), spec);
    }
    int k = 0;
    try {
        std::size_t used = 0;
        k = std::stoi(arg, &used);
        if (used != arg.size()) throw std::invalid_argument(arg);
    } catch (const std::exception&) {
        throw SchemaError("bad reference spec '" + arg + "'");
    }
    if (k < 1 || k > K) throw SchemaError("reference stratum out of range in '" + spec + "'");
    return basic(ReferenceVector::uniform(p, k - 1), spec);
}

ReferenceVector oracle_references(const IndexVector& optimal_reference)
{
    ReferenceVector r;
    r.refs = optimal_reference.unaryExpr([](int v) { return v == kNoReference ? 0 : v; });
    return r;
}

double fused_lambda2(double lambda1, double tau0, Index K)
{
    if (K < 2) return 0.0;
    return tau0 * lambda1 / (std::sqrt(static_cast<double>(K)) * static_cast<double>(K - 1));
}

bool method_uses_tau0(const Method& m)
{
    return m.kind == MethodKind::proposal || m.kind == MethodKind::basic ||
           m.kind == MethodKind::fused;
}

namespace {

AugmentedDesign method_design(const StratifiedDataset& ds, const Method& method, double tau0)
{
    switch (method.kind) {
    case MethodKind::proposal:
        return build_design_overparam(ds, TauWeights::default_rule(tau0, ds.sizes()));
    case MethodKind::basic:
        return build_design_basic(ds, method.refs, TauWeights::default_rule(tau0, ds.sizes()));
    case MethodKind::pooled:
        return build_design(ds, DesignLayout::make(DesignKind::pooled, ds.K(), ds.p()),
                            TauWeights::constant(1.0, ds.K()));
    case MethodKind::independent:
        return build_design(ds, DesignLayout::make(DesignKind::independent, ds.K(), ds.p()),
                            TauWeights::constant(1.0, ds.K()));
    case MethodKind::fused: break;
    }
    throw ParameterError("fused comparator has no augmented design");
}

Index method_columns(const StratifiedDataset& ds, const Method& method)
{
    switch (method.kind) {
    case MethodKind::proposal: return ds.p() * (ds.K() + 1);
    case MethodKind::basic: return ds.p() * ds.K();
    case MethodKind::pooled: return ds.p();
    case MethodKind::independent:
    case MethodKind::fused: return ds.p() * ds.K();
    }
    return 0;
}

CoefficientDecomposition decompose_fused(const Matrix& beta, double tau0, const std::vector<Index>& sizes)
{
    CoefficientDecomposition dec;
    const auto mode = mode_reference(beta);
    dec.mu = mode.mode_vector;
    dec.beta = beta;
    dec.gamma = beta.rowwise() - dec.mu.transpose();
    dec.tau = TauWeights::default_rule(tau0, sizes);
    return dec;
}

double sample_se(const std::vector<double>& v)
{
    const double n = static_cast<double>(v.size());
    if (v.size() < 2) return 0.0;
    const double mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    return std::sqrt(ss / (n - 1.0)) / std::sqrt(n);
}

} // namespace

MethodFit fit_method(const StratifiedDataset& ds, const Method& method, double lambda1,
                     double tau0, Loss loss, const SolverOptions& solver, const FusedOptions& fused)
{
    MethodFit out;
    out.lambda1 = lambda1;
    out.tau0 = tau0;
    if (method.kind == MethodKind::fused) {
        if (loss != Loss::gaussian) throw ParameterError("fused comparator supports Gaussian loss only");
        out.lambda2 = fused_lambda2(lambda1, tau0, ds.K());
        const auto r = fused_clique_gaussian(ds, lambda1, out.lambda2, fused);
        out.dec = decompose_fused(r.beta, tau0, ds.sizes());
        out.objective = r.objective;
        out.iterations = r.iterations;
        out.converged = r.converged;
        return out;
    }
    const auto design = method_design(ds, method, tau0);
    const auto r = fit_lasso(design, lambda1, loss, solver);
    out.dec = theta_to_decomposition(r.theta, design.layout, design.tau);
    out.objective = r.objective;
    out.kkt_residual = r.kkt_residual;
    out.iterations = r.iterations;
    out.converged = r.converged;
    return out;
}

double method_lambda_max(const StratifiedDataset& ds, const Method& method, double tau0, Loss loss)
{
    if (method.kind != MethodKind::fused) return lambda_max(method_design(ds, method, tau0), loss);
    // each stratum at zero is optimal regardless of the fusion term
    const double inv_n = 1.0 / static_cast<double>(ds.n());
    double lmax = 0.0;
    for (const auto& s : ds.strata)
        lmax = std::max(lmax, (s.X.transpose() * s.y).cwiseAbs().maxCoeff() * inv_n);
    return lmax;
}

SupportSets support_estimate(const CoefficientDecomposition& dec, double tol)
{
    SupportSets s;
    s.S = dec.mu.array().abs() > tol;
    s.T = dec.gamma.array().abs() > tol;
    return s;
}

SupportAccuracy support_accuracy(const SupportSets& est, const SupportSets& truth,
                                 const std::vector<Index>& universe)
{
    SupportAccuracy a;
    if (universe.empty()) {
        a.accuracy_T = a.accuracy_S = 1.0;
        return a;
    }
    const Index K = truth.T.rows();
    Index match_T = 0, match_S = 0;
    for (Index j : universe) {
        if (est.S[j] == truth.S[j]) ++match_S;
        for (Index k = 0; k < K; ++k)
            if (est.T(k, j) == truth.T(k, j)) ++match_T;
    }
    const double u = static_cast<double>(universe.size());
    a.accuracy_S = static_cast<double>(match_S) / u;
    a.accuracy_T = static_cast<double>(match_T) / (u * static_cast<double>(K));
    return a;
}

double prediction_error(const StratifiedDataset& ds, const Matrix& beta_true, const Matrix& beta_hat)
{
    if (beta_true.rows() != ds.K() || beta_true.cols() != ds.p() ||
        beta_hat.rows() != ds.K() || beta_hat.cols() != ds.p())
        throw ParameterError("coefficient matrices must be K x p");
    double err = 0.0;
    for (Index k = 0; k < ds.K(); ++k)
        err += (ds.strata[k].X * (beta_true.row(k) - beta_hat.row(k)).transpose()).squaredNorm();
    return err / static_cast<double>(ds.n());
}

double heldout_loss(const StratifiedDataset& test, const Matrix& beta, Loss loss)
{
    double total = 0.0;
    for (Index k = 0; k < test.K(); ++k) {
        const auto& s = test.strata[k];
        const Vector eta = s.X * beta.row(k).transpose();
        if (loss == Loss::gaussian) {
            total += (s.y - eta).squaredNorm();
        } else {
            for (Index i = 0; i < eta.size(); ++i) {
                const double e = eta[i];
                const double log1pexp = e > 0 ? e + std::log1p(std::exp(-e)) : std::log1p(std::exp(e));
                total += log1pexp - s.y[i] * e;
            }
        }
    }
    return total / static_cast<double>(test.n());
}

std::vector<std::vector<int>> make_folds(const StratifiedDataset& ds, Index folds, std::uint64_t seed)
{
    if (folds < 2) throw ParameterError("cross-validation needs at least 2 folds");
    std::vector<std::vector<int>> out(static_cast<std::size_t>(ds.K()));
    for (Index k = 0; k < ds.K(); ++k) {
        const Index nk = ds.n_k(k);
        if (nk < folds)
            throw ParameterError("stratum " + ds.stratum_labels[k] + " has fewer observations than folds");
        std::vector<int> perm(static_cast<std::size_t>(nk));
        std::iota(perm.begin(), perm.end(), 0);
        std::mt19937_64 rng(derive_seed(seed, 5, static_cast<std::uint64_t>(k)));
        std::shuffle(perm.begin(), perm.end(), rng);
        auto& f = out[static_cast<std::size_t>(k)];
        f.assign(static_cast<std::size_t>(nk), 0);
        for (Index i = 0; i < nk; ++i) f[static_cast<std::size_t>(perm[i])] = static_cast<int>(i % folds);
    }
    return out;
}

StratifiedDataset subset_by_fold(const StratifiedDataset& ds, const std::vector<std::vector<int>>& folds,
                                 int fold, bool in_fold)
{
    StratifiedDataset out;
    out.stratum_labels = ds.stratum_labels;
    out.predictor_names = ds.predictor_names;
    out.response_kind = ds.response_kind;
    for (Index k = 0; k < ds.K(); ++k) {
        const auto& f = folds[static_cast<std::size_t>(k)];
        std::vector<Index> rows;
        for (std::size_t i = 0; i < f.size(); ++i)
            if ((f[i] == fold) == in_fold) rows.push_back(static_cast<Index>(i));
        Stratum s;
        s.X.resize(static_cast<Index>(rows.size()), ds.p());
        s.y.resize(static_cast<Index>(rows.size()));
        for (std::size_t r = 0; r < rows.size(); ++r) {
            s.X.row(static_cast<Index>(r)) = ds.strata[k].X.row(rows[r]);
            s.y[static_cast<Index>(r)] = ds.strata[k].y[rows[r]];
        }
        out.strata.push_back(std::move(s));
    }
    return out;
}

CVResult cross_validate(const StratifiedDataset& ds, const Method& method, const CVOptions& options,
                        Loss loss)
{
    if (method.kind == MethodKind::fused && loss != Loss::gaussian)
        throw ParameterError("fused comparator supports Gaussian loss only");
    CVResult res;
    res.seed = options.seed;
    res.folds = make_folds(ds, options.folds, options.seed);

    std::vector<double> taus = method_uses_tau0(method) ? options.tau0_grid : std::vector<double>{1.0};
    if (taus.empty()) throw ParameterError("tau0 grid is empty");
    for (double t : taus)
        if (!(t > 0.0) || !std::isfinite(t)) throw ParameterError("tau0 values must be positive");

    std::vector<std::vector<double>> grids;
    for (double t : taus) {
        std::vector<double> g = options.lambda_grid;
        if (g.empty()) {
            double lmax = method_lambda_max(ds, method, t, loss);
            if (!(lmax > 0.0)) lmax = 1.0;
            const double ratio = options.lambda_ratio.value_or(
                ds.n() < method_columns(ds, method) ? 1e-2 : 1e-3);
            const Index points = method.kind == MethodKind::fused ? options.fused_lambda_points
                                                                  : options.lambda_points;
            g = default_lambda_grid(lmax, points, ratio);
        } else {
            std::sort(g.begin(), g.end(), std::greater<>());
            g.erase(std::unique(g.begin(), g.end()), g.end());
        }
        grids.push_back(std::move(g));
    }

    const Index F = options.folds;
    const long units = static_cast<long>(taus.size()) * F;
    std::vector<std::vector<double>> losses(static_cast<std::size_t>(units));
    parallel_for(units, options.threads, [&](long u) {
        const std::size_t ti = static_cast<std::size_t>(u / F);
        const int fold = static_cast<int>(u % F);
        const double tau0 = taus[ti];
        const auto& grid = grids[ti];
        const auto train = subset_by_fold(ds, res.folds, fold, false);
        const auto test = subset_by_fold(ds, res.folds, fold, true);
        auto& out = losses[static_cast<std::size_t>(u)];
        out.reserve(grid.size());
        if (method.kind == MethodKind::fused) {
            Matrix warm = Matrix::Zero(ds.K(), ds.p());
            for (double lam : grid) {
                const auto r = fused_clique_gaussian(train, lam, fused_lambda2(lam, tau0, ds.K()),
                                                     options.fused, &warm);
                warm = r.beta;
                out.push_back(heldout_loss(test, r.beta, loss));
            }
            return;
        }
        const auto design = method_design(train, method, tau0);
        const auto path = fit_path(design, grid, loss, options.solver);
        for (const auto& fit : path.fits) {
            const auto dec = theta_to_decomposition(fit.theta, design.layout, design.tau);
            out.push_back(heldout_loss(test, dec.beta, loss));
        }
    });

    for (std::size_t ti = 0; ti < taus.size(); ++ti) {
        for (std::size_t li = 0; li < grids[ti].size(); ++li) {
            std::vector<double> v;
            for (Index f = 0; f < F; ++f) v.push_back(losses[ti * static_cast<std::size_t>(F) + static_cast<std::size_t>(f)][li]);
            CVPoint pt;
            pt.lambda1 = grids[ti][li];
            pt.tau0 = taus[ti];
            pt.mean_loss = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(F);
            pt.se = sample_se(v);
            res.points.push_back(pt);
        }
    }

    Index imin = 0;
    for (Index i = 1; i < static_cast<Index>(res.points.size()); ++i)
        if (res.points[i].mean_loss < res.points[imin].mean_loss) imin = i;
    res.min_index = imin;
    const double threshold = res.points[imin].mean_loss + res.points[imin].se;
    Index best = imin;
    for (Index i = 0; i < static_cast<Index>(res.points.size()); ++i) {
        const auto& c = res.points[i];
        if (!(c.mean_loss <= threshold)) continue;
        const auto& b = res.points[best];
        if (c.lambda1 > b.lambda1 ||
            (c.lambda1 == b.lambda1 && std::abs(c.tau0 - 1.0) < std::abs(b.tau0 - 1.0)))
            best = i;
    }
    res.best = best;
    return res;
}

} // namespace stratlasso
