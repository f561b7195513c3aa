#pragma once
#include <stratlasso/dataset.hpp>
#include <Eigen/SparseCore>
#include <string>
#include <vector>

namespace stratlasso {

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::ColMajor>;

/// Per-predictor reference strata, 0-based.
struct ReferenceVector {
    IndexVector refs;

    static ReferenceVector uniform(Index p, int stratum);
    void validate(Index K) const;
};

/// Penalty ratios tau_k = lambda_{2,k} / lambda_1.
struct TauWeights {
    double tau0 = 1.0;
    Vector tau;

    /// tau_k = tau0 * sqrt(n_k / n).
    static TauWeights default_rule(double tau0, const std::vector<Index>& sizes);
    static TauWeights constant(double value, Index K);
    void validate(Index K) const;
};

enum class BlockKind { mu, gamma };

struct ColumnTag {
    BlockKind block;
    int stratum;    // -1 for mu columns
    int predictor;

    bool operator==(const ColumnTag&) const = default;
};

/*
 * Which columns are present.
 *  overparam:   mu(1..p), gamma(k, j) for every k, j
 *  basic:       mu(1..p), gamma(k, j) for k != ref_j
 *  pooled:      mu(1..p) only (single lasso on pooled data)
 *  independent: gamma(k, j) only (K separate lassos)
 */
enum class DesignKind { overparam, basic, pooled, independent };

/**
 * Column layout of an augmented design. Column order is mu(1..p) followed by
 * gamma(1, .) ... gamma(K, .), each in predictor order, skipping absent
 * columns. This order is part of the on-disk contract.
 */
struct DesignLayout {
    DesignKind kind = DesignKind::overparam;
    Index K = 0;
    Index p = 0;
    std::vector<ColumnTag> columns;
    IndexVector refs;          // basic only
    Eigen::VectorXi mu_col;    // p, -1 if absent
    Eigen::MatrixXi gamma_col; // K x p, -1 if absent

    Index m() const { return static_cast<Index>(columns.size()); }

    static DesignLayout make(DesignKind kind, Index K, Index p,
                             const ReferenceVector* refs = nullptr);
};

struct AugmentedDesign {
    Vector Y;
    SparseMatrix X;          // n x m
    DesignLayout layout;
    TauWeights tau;
    std::vector<Index> row_offsets;  // K + 1 entries

    Index n() const { return X.rows(); }
    Index m() const { return X.cols(); }
};

struct CoefficientDecomposition {
    Vector mu;       // p
    Matrix gamma;    // K x p
    Matrix beta;     // K x p, beta.row(k) = mu + gamma.row(k)
    TauWeights tau;
};

Vector build_pooled_response(const StratifiedDataset& ds);

AugmentedDesign build_design(const StratifiedDataset& ds, const DesignLayout& layout,
                             const TauWeights& tau);
AugmentedDesign build_design_overparam(const StratifiedDataset& ds, const TauWeights& tau);
AugmentedDesign build_design_basic(const StratifiedDataset& ds, const ReferenceVector& refs,
                                   const TauWeights& tau);

/// Matrix-free X * theta computed from the stratum blocks.
Vector design_multiply(const StratifiedDataset& ds, const DesignLayout& layout,
                       const TauWeights& tau, const Vector& theta);
/// Matrix-free X^T r computed from the stratum blocks.
Vector design_transpose_multiply(const StratifiedDataset& ds, const DesignLayout& layout,
                                 const TauWeights& tau, const Vector& r);

CoefficientDecomposition theta_to_decomposition(const Vector& theta, const DesignLayout& layout,
                                                const TauWeights& tau);
Vector decomposition_to_theta(const CoefficientDecomposition& dec, const DesignLayout& layout);

std::string to_string(DesignKind kind);

} // namespace stratlasso
