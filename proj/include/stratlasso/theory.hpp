#pragma once
#include <stratlasso/design.hpp>
#include <limits>
#include <optional>
#include <vector>

namespace stratlasso {

/// Minimizer of f(x) = |x| + sum_k tau_k |b_k - x|.
struct WSMedian {
    double value = 0.0;   // canonical minimizer: smallest |x|, ties -> nonnegative
    double lower = 0.0;   // minimizer interval
    double upper = 0.0;
    double objective = 0.0;
};

double wsmedian_objective(const Vector& b, const Vector& tau, double x);
WSMedian wsmedian(const Vector& b, const Vector& tau);

struct SupportSets {
    BoolVector S;   // p
    BoolMatrix T;   // K x p
    std::vector<Index> J;  // augmented column indices, sorted

    Index size() const { return S.count() + T.count(); }
};

/**
 * Reference value for predictor j: beta(refs_j, j), or 0 when refs_j is
 * kNoReference (the mode is the prepended zero).
 */
Vector reference_values(const Matrix& beta, const IndexVector& refs);

/// S = {j : ref_j != 0}, T = {(k, j) : beta_kj != ref_j}, J from the layout.
SupportSets support_sets_from_truth(const Matrix& beta, const IndexVector& refs,
                                    const DesignLayout& layout);
SupportSets support_sets_from_truth(const Matrix& beta, const IndexVector& refs);

/// Fills J from S and T under a layout.
std::vector<Index> support_columns(const BoolVector& S, const BoolMatrix& T,
                                   const DesignLayout& layout);

struct HeterogeneityDegrees {
    int D0 = 0;
    /// Empty when S is empty (the "-infinity" convention).
    std::optional<int> D1;
    /// K*_j = {k : beta_kj = ref_j} per predictor.
    std::vector<std::vector<Index>> Kstar;
};

HeterogeneityDegrees heterogeneity_degrees(const Matrix& beta, const IndexVector& refs);

struct ICReport {
    double lambda_min = 0.0;   // smallest eigenvalue of X_J^T X_J / n
    double c = 0.0;            // max_{j not in J} ||(X_J^T X_J)^{-1} X_J^T X_j||_1
    bool c_defined = true;     // false when the Gram is singular
    bool holds = false;
    double gamma_slack = 1.0;  // 1 - c
};

ICReport ic_generic(const AugmentedDesign& design, const std::vector<Index>& J);

struct Interval {
    double lower = 0.0;
    double upper = std::numeric_limits<double>::infinity();

    bool empty() const { return !(lower < upper); }
    bool contains(double x) const { return lower < x && x < upper; }
};

/// Open interval of tau0 values for which the orthogonal balanced condition holds.
Interval tau0_feasible_interval(Index K, int D0, std::optional<int> D1);
bool ic_orthogonal_balanced(Index K, const HeterogeneityDegrees& degrees, double tau0);

struct OrthogonalConstants {
    double gamma = 0.0;
    double C_min = 0.0;
    bool valid = false;   // gamma > 0 and C_min > 0
};

OrthogonalConstants orthogonal_constants(Index K, int D0, std::optional<int> D1, double tau0);

struct RecoveryThresholds {
    int eta = 1;
    double lambda1_bound = 0.0;   // strict lower bound
    double lambda1 = 0.0;         // 1.01 x bound
    double beta_min = 0.0;
    double gamma = 0.0;
    double C_min = 0.0;
    /// Per-stratum heterogeneity threshold beta_min * sqrt(n / n_k) / tau0.
    Vector heterogeneity_threshold;
};

/// `sizes` are the stratum sizes n_k (their sum is n).
RecoveryThresholds recovery_thresholds(int eta, double sigma, const std::vector<Index>& sizes,
                                       Index p, double tau0, double gamma, double C_min,
                                       Index support_size);

struct GeneralICConstants {
    double c1 = 0.0;
    double c2 = 0.0;      // gamma columns k in K_{l,j} (reference excluded)
    double c2bar = 0.0;   // gamma columns k in Kbar_{l,j}
    bool holds_basic = false;
    bool holds_overparam = false;
};

/**
 * Irrepresentability constants from the per-stratum decomposition of the
 * augmented Gram (projections onto X_T^(k), then onto the residualized
 * pooled S-block). `refs` may carry kNoReference for predictors whose
 * reference value is the prepended zero.
 */
GeneralICConstants ic_general(const StratifiedDataset& ds, const IndexVector& refs,
                              const TauWeights& tau, const Matrix& beta_true);

enum class CorollaryCase { homogeneous, independent };

struct CorollaryReport {
    CorollaryCase which = CorollaryCase::homogeneous;
    bool condition_A = false;
    double c1 = 0.0;
    double c2 = 0.0;
    bool condition_C_i = false;
    bool condition_C_ii = false;
    double C_min = 0.0;
    double gamma = 0.0;
    /// Only filled when sigma is supplied and gamma > 0.
    std::optional<double> lambda1;
    std::optional<double> beta_min;

    bool holds() const { return condition_A && condition_C_i && condition_C_ii; }
};

CorollaryReport corollary_checks(const StratifiedDataset& ds, const TauWeights& tau,
                                 CorollaryCase which, const Matrix& beta_true,
                                 std::optional<double> sigma = std::nullopt);

} // namespace stratlasso
