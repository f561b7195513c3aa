#pragma once
#include <stratlasso/fused.hpp>
#include <stratlasso/solver.hpp>
#include <stratlasso/theory.hpp>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace stratlasso {

enum class MethodKind { proposal, basic, pooled, independent, fused };

/// An estimation strategy: the overparametrized proposal, the reference-stratum
/// basic approach, the two degenerate lassos, or the clique-fused comparator.
struct Method {
    MethodKind kind = MethodKind::proposal;
    ReferenceVector refs;    // basic only
    std::string tag = "proposal";

    static Method proposal();
    static Method pooled();
    static Method independent();
    static Method fused();
    static Method basic(ReferenceVector refs, std::string tag);

    /**
     * Parses "proposal", "pooled", "independent", "fused", "basic:first",
     * "basic:last", "basic:<k>" (1-based stratum) or "basic:oracle". The oracle
     * form needs the optimal references from a ground truth.
     */
    static Method parse(const std::string& spec, Index K, Index p,
                        const IndexVector* oracle_refs = nullptr);
};

/// Optimal references with "no reference" entries replaced by stratum 0.
ReferenceVector oracle_references(const IndexVector& optimal_reference);

struct MethodFit {
    CoefficientDecomposition dec;
    double lambda1 = 0.0;
    double tau0 = 1.0;
    double lambda2 = 0.0;      // fused only
    double objective = 0.0;
    double kkt_residual = 0.0; // lasso methods only
    Index iterations = 0;
    bool converged = false;
};

/// lambda2 paired with lambda1 for the fused comparator.
double fused_lambda2(double lambda1, double tau0, Index K);

/// Only tau0 influences proposal, basic and fused fits.
bool method_uses_tau0(const Method& m);

MethodFit fit_method(const StratifiedDataset& ds, const Method& method, double lambda1,
                     double tau0, Loss loss = Loss::gaussian, const SolverOptions& solver = {},
                     const FusedOptions& fused = {});

/// Smallest lambda1 giving an all-zero fit for the method.
double method_lambda_max(const StratifiedDataset& ds, const Method& method, double tau0,
                         Loss loss = Loss::gaussian);

SupportSets support_estimate(const CoefficientDecomposition& dec, double tol = 1e-8);

struct SupportAccuracy {
    double accuracy_T = 0.0;
    double accuracy_S = 0.0;
};

/// Fraction of matching memberships over [K] x universe (T) and universe (S).
SupportAccuracy support_accuracy(const SupportSets& est, const SupportSets& truth,
                                 const std::vector<Index>& universe);

/// sum_k ||X^(k) (beta*_k - betahat_k)||^2 / n.
double prediction_error(const StratifiedDataset& ds, const Matrix& beta_true, const Matrix& beta_hat);

struct CVOptions {
    Index folds = 5;
    std::uint64_t seed = 1;
    std::vector<double> tau0_grid = {0.25, 0.5, 1.0, 2.0, 4.0};
    /// Explicit lambda1 grid; empty means a per-tau0 default path.
    std::vector<double> lambda_grid;
    Index lambda_points = 100;
    /// Path ratio; empty means 1e-3, or 1e-2 when n < number of columns.
    std::optional<double> lambda_ratio;
    /// Path length used for the fused comparator (ADMM fits are costly).
    Index fused_lambda_points = 20;
    int threads = 1;
    SolverOptions solver;
    FusedOptions fused;
};

struct CVPoint {
    double lambda1 = 0.0;
    double tau0 = 1.0;
    double mean_loss = 0.0;
    double se = 0.0;
};

struct CVResult {
    std::vector<CVPoint> points;
    Index best = 0;         // one-standard-error choice
    Index min_index = 0;    // raw minimum of the mean loss
    std::uint64_t seed = 0;
    /// fold id of every observation, per stratum
    std::vector<std::vector<int>> folds;

    const CVPoint& best_point() const { return points[static_cast<std::size_t>(best)]; }
};

/// Stratified fold ids: each fold holds data from every stratum.
std::vector<std::vector<int>> make_folds(const StratifiedDataset& ds, Index folds,
                                         std::uint64_t seed);

/// Rows of `ds` whose fold id equals (`in_fold`) or differs from `fold`.
StratifiedDataset subset_by_fold(const StratifiedDataset& ds,
                                 const std::vector<std::vector<int>>& folds, int fold,
                                 bool in_fold);

CVResult cross_validate(const StratifiedDataset& ds, const Method& method,
                        const CVOptions& options = {}, Loss loss = Loss::gaussian);

/// Mean held-out loss of coefficients `beta` on `test`.
double heldout_loss(const StratifiedDataset& test, const Matrix& beta, Loss loss);

} // namespace stratlasso
