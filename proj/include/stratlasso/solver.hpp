#pragma once
#include <stratlasso/design.hpp>
#include <vector>

namespace stratlasso {

enum class Loss { gaussian, logistic };

struct SolverOptions {
    /// Max-norm KKT tolerance for Gaussian fits.
    double kkt_tol = 1e-6;
    /// Max-norm KKT tolerance for logistic fits.
    double logistic_kkt_tol = 1e-5;
    /// Coordinate sweep budget (full and active-set sweeps both count).
    Index max_sweeps = 100000;
    /// Stop when max_j |delta theta_j| * ||X_j||/sqrt(n) falls below this.
    double update_tol = 1e-9;
    /// Active-set sweeps between Anderson extrapolation attempts; 0 disables them.
    Index anderson_depth = 5;
    /// Newton steps for the logistic loss.
    Index max_newton = 100;
    /// Record objective after every sweep and count increases.
    bool check_monotone = false;
};

/// lambda_{2,k} = tau_k * lambda1; the tau ratios live in the design columns.
struct PenaltySpec {
    double lambda1 = 0.0;

    Vector lambda2(const AugmentedDesign& d) const { return lambda1 * d.tau.tau; }
};

struct FitResult {
    Vector theta;
    double lambda1 = 0.0;
    double objective = 0.0;
    Index iterations = 0;
    double kkt_residual = 0.0;
    bool converged = false;
    /// lambda1 = 0 on a rank-deficient design.
    bool non_unique = false;
    /// |linear predictor| exceeded 30 (logistic only).
    bool separation = false;
    /// Number of sweeps whose objective increased (only with check_monotone).
    Index monotone_violations = 0;
};

struct PathResult {
    std::vector<double> lambda_grid;
    std::vector<FitResult> fits;

    bool all_converged() const;
};

/// Smallest lambda1 for which theta = 0 is optimal.
double lambda_max(const AugmentedDesign& design, Loss loss = Loss::gaussian);

/// `points` log-spaced values from lmax down to lmax * ratio.
std::vector<double> default_lambda_grid(double lmax, Index points = 100, double ratio = 1e-3);

/// Gradient of the smooth part of the objective at theta.
Vector smooth_gradient(const AugmentedDesign& design, const Vector& theta, Loss loss);
double smooth_loss(const AugmentedDesign& design, const Vector& theta, Loss loss);
double objective(const AugmentedDesign& design, const Vector& theta, double lambda1, Loss loss);

double kkt_residual(const AugmentedDesign& design, const Vector& theta, double lambda1,
                    Loss loss = Loss::gaussian);

FitResult lasso_gaussian(const AugmentedDesign& design, const PenaltySpec& pen,
                         const SolverOptions& options = {}, const Vector* warm_start = nullptr);
FitResult lasso_logistic(const AugmentedDesign& design, const PenaltySpec& pen,
                         const SolverOptions& options = {}, const Vector* warm_start = nullptr);
FitResult fit_lasso(const AugmentedDesign& design, double lambda1, Loss loss,
                    const SolverOptions& options = {}, const Vector* warm_start = nullptr);

/// Warm-started path over a strictly decreasing grid.
PathResult fit_path(const AugmentedDesign& design, const std::vector<double>& grid, Loss loss,
                    const SolverOptions& options = {});

} // namespace stratlasso
