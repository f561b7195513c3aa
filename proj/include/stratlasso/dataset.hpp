#pragma once
#include <stratlasso/types.hpp>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace stratlasso {

enum class ResponseKind { gaussian, binary };

struct Stratum {
    Matrix X;
    Vector y;
};

/**
 * K per-stratum design blocks X^(k) (n_k x p) and responses y^(k).
 * Strata are stored in order of first appearance; labels and predictor
 * names are carried along for output.
 */
struct StratifiedDataset {
    std::vector<Stratum> strata;
    std::vector<std::string> stratum_labels;
    std::vector<std::string> predictor_names;
    ResponseKind response_kind = ResponseKind::gaussian;

    Index K() const { return static_cast<Index>(strata.size()); }
    Index p() const { return strata.empty() ? 0 : strata.front().X.cols(); }
    Index n_k(Index k) const { return strata[k].X.rows(); }
    Index n() const;
    /// Row offset of stratum k in the pooled ordering.
    Index offset(Index k) const;
    std::vector<Index> sizes() const;

    /// Throws ParameterError if any invariant is broken.
    void validate() const;
};

/// Build a dataset from raw blocks, filling default labels/names.
StratifiedDataset make_dataset(std::vector<Stratum> strata,
                               ResponseKind kind = ResponseKind::gaussian);

StratifiedDataset load_csv(const std::string& path,
                           const std::string& stratum_column,
                           const std::string& response_column,
                           ResponseKind kind = ResponseKind::gaussian);
StratifiedDataset read_csv(std::istream& in,
                           const std::string& stratum_column,
                           const std::string& response_column,
                           ResponseKind kind = ResponseKind::gaussian);
/// Writes the same schema load_csv reads: stratum, response, predictors.
void write_csv(std::ostream& out, const StratifiedDataset& ds,
               const std::string& stratum_column = "stratum",
               const std::string& response_column = "y");

struct ScalingRecord {
    /// scale(k, j) multiplies column j of stratum k; 1 means untouched.
    Matrix scale;
    /// (k, j) pairs whose column is identically zero and left unscaled.
    std::vector<std::pair<Index, Index>> zero_columns;

    /// Coefficients on the standardized scale -> original scale (K x p).
    Matrix to_original(const Matrix& beta_std) const;
};

/// Scales each column so that n_k^{-1/2} ||X_j^(k)||_2 = 1.
std::pair<StratifiedDataset, ScalingRecord> standardize(const StratifiedDataset& ds);

enum class DeltaMode { constant, random };

struct SimulationScenario {
    Index K = 20;
    Index p = 100;
    Index n_k = 50;
    Index support_size = 20;
    Index d_H = 3;
    DeltaMode delta_mode = DeltaMode::constant;
    double correlation_base = 0.5;
    double snr = 1.0;
    std::uint64_t seed = 1;

    void validate() const;
};

struct GroundTruth {
    Matrix beta;               // K x p
    Vector mode_vector;        // p
    IndexVector optimal_reference;  // p, kNoReference when absent
    double noise_sd = 0.0;
    std::vector<Index> support; // P0, sorted
    /// First branch of P0: heterogeneity sits in strata k <= d_H.
    std::vector<Index> first_half;
};

struct ModeReference {
    Vector mode_vector;
    IndexVector optimal_reference;
};

/// Per column, the most frequent value of {0, beta_1j, ..., beta_Kj} and the
/// first stratum attaining it.
ModeReference mode_reference(const Matrix& beta);

std::pair<StratifiedDataset, GroundTruth> generate_scenario(const SimulationScenario& s);

/// Toeplitz covariance rho^|i-j|.
Matrix toeplitz_covariance(Index p, double rho);

/// Deterministic sub-seed derivation (splitmix64 finalizer over the inputs).
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t purpose,
                          std::uint64_t index = 0);

} // namespace stratlasso
