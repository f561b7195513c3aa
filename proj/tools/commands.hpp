#pragma once
#include <stratlasso/io.hpp>
#include <optional>
#include <string>
#include <vector>

namespace stratlasso::cli {

enum ExitCode { kOk = 0, kConfigError = 2, kNonConvergence = 3, kConditionFailed = 4 };

struct RunConfig {
    std::string command;
    std::string input;
    std::string out_dir;
    std::string scenario;
    std::string truth;
    std::string stratum_column = "stratum";
    std::string response_column = "y";
    std::string response_kind = "gaussian";
    std::string method = "proposal";
    std::optional<double> lambda1;
    double tau0 = 1.0;
    std::optional<std::uint64_t> seed;
    int threads = 1;
    Index folds = 5;
    std::vector<double> tau0_grid;
    Index outer_folds = 0;
    Index replicates = 0;
    std::optional<double> sigma;
    bool export_data = false;
    bool standardize = false;
};

/// Fills fields present in a JSON config document (keys mirror the long flag names).
void apply_json_config(RunConfig& cfg, const json& j);

int run_fit(const RunConfig& cfg);
int run_cv(const RunConfig& cfg);
int run_simulate(const RunConfig& cfg);
int run_ic_check(const RunConfig& cfg);
int run_transform(const RunConfig& cfg);

/// Full command-line entry point; returns the process exit code.
int run_cli(int argc, const char* const* argv);

} // namespace stratlasso::cli
