#pragma once
#include <stratlasso/dataset.hpp>

namespace stratlasso {

struct FusedOptions {
    /// Primal and dual residual tolerance (RMS over constraint rows).
    double tol = 1e-6;
    Index max_iters = 5000;
    double rho = 1.0;
    /// Residual-balancing trigger: adapt rho when one residual exceeds the other by this factor.
    double balance_ratio = 10.0;
};

struct FusedResult {
    /// K x p; equal within fused groups, exact zeros where soft-thresholded.
    Matrix beta;
    /// Per predictor, a group id for each stratum (strata fused together share an id).
    Eigen::MatrixXi groups;
    double objective = 0.0;
    double primal_residual = 0.0;
    double dual_residual = 0.0;
    Index iterations = 0;
    bool converged = false;
};

/**
 * Clique-based generalized fused lasso:
 *
 *   sum_k ||y^(k) - X^(k) beta_k||^2 / (2n) + lambda1 sum_k ||beta_k||_1
 *     + lambda2 sum_{k1<k2} ||beta_k1 - beta_k2||_1
 *
 * solved by ADMM on the splitting z = D beta, where D stacks the identity and
 * all K(K-1)/2 pairwise differences per predictor.
 */
FusedResult fused_clique_gaussian(const StratifiedDataset& ds, double lambda1, double lambda2,
                                  const FusedOptions& options = {},
                                  const Matrix* warm_start = nullptr);

double fused_objective(const StratifiedDataset& ds, const Matrix& beta, double lambda1,
                       double lambda2);

} // namespace stratlasso
