#pragma once
#include <stratlasso/evaluation.hpp>
#include <cstdint>
#include <string>
#include <vector>

namespace stratlasso {

/// Grid of simulation cells (n_k, p, d_H, delta mode) with replicates per cell.
struct SimulationConfig {
    Index K = 20;
    std::vector<Index> n_k = {10, 50, 100};
    std::vector<Index> p = {20, 100, 500};
    std::vector<Index> d_H = {1, 3, 6, 9};
    std::vector<DeltaMode> delta_modes = {DeltaMode::constant, DeltaMode::random};
    Index replicates = 50;
    Index support_size = 20;
    double correlation_base = 0.5;
    double snr = 1.0;
    std::uint64_t master_seed = 1;
    std::vector<std::string> methods = {"proposal", "basic:first", "basic:oracle", "fused"};
    CVOptions cv;

    void validate() const;
    /// Cells in output order.
    std::vector<SimulationScenario> cells() const;
};

struct MetricsRecord {
    Index K = 0;
    Index n_k = 0;
    Index p = 0;
    Index d_H = 0;
    DeltaMode delta_mode = DeltaMode::constant;
    Index replicate = 0;
    std::uint64_t seed = 0;
    std::string method;
    double accuracy_T = 0.0;
    double accuracy_S = 0.0;
    double accuracy_T_full = 0.0;
    double accuracy_S_full = 0.0;
    double prediction_error = 0.0;
    double lambda1 = 0.0;
    double tau0 = 0.0;
    bool converged = false;
    std::string error;

    /// Natural log of the prediction error, -inf when it is zero.
    double log_prediction_error() const;
};

/// Seed of replicate r in a cell.
std::uint64_t replicate_seed(std::uint64_t master, Index cell, Index replicate);

/// Fits every configured method on one generated replicate with CV-selected tuning.
std::vector<MetricsRecord> run_replicate(const SimulationConfig& config,
                                         const SimulationScenario& scenario, Index replicate);

/// Rows sorted by (cell, replicate, method order) whatever the thread count.
std::vector<MetricsRecord> run_simulation(const SimulationConfig& config, int threads = 1);

std::string to_string(DeltaMode mode);
DeltaMode delta_mode_from_string(const std::string& s);

/// Long-format table, one row per record.
std::string metrics_csv(const std::vector<MetricsRecord>& records);
/// Means per (cell, method) over replicates without errors.
std::string summary_csv(const std::vector<MetricsRecord>& records);

/// printf-style "%.12g" with "inf", "-inf" and "nan" spelled out.
std::string format_number(double v);

} // namespace stratlasso
