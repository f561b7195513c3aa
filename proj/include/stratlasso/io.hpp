#pragma once
#include <stratlasso/evaluation.hpp>
#include <stratlasso/simulation.hpp>
#include <json.hpp>
#include <string>

namespace stratlasso {

using json = nlohmann::ordered_json;

/// Rounds to 12 significant digits; non-finite values become null.
json number12(double v);

json to_json(const SimulationScenario& s);
SimulationScenario scenario_from_json(const json& j);

json to_json(const SimulationConfig& c);
/// Missing keys keep their defaults.
SimulationConfig simulation_config_from_json(const json& j);

json to_json(const CVOptions& o);
void update_from_json(CVOptions& o, const json& j);

json to_json(const MethodFit& f, const std::string& method);
json to_json(const CVResult& r);
json to_json(const ICReport& r);
json to_json(const GeneralICConstants& c);
json to_json(const RecoveryThresholds& t);
json to_json(const Interval& i);
json to_json(const DesignLayout& layout);

Matrix matrix_from_json(const json& j);
json to_json(const Matrix& m);

/// Ground truth file: beta (K x p rows) and optional noise_sd.
json truth_to_json(const GroundTruth& g);
GroundTruth truth_from_json(const json& j);

json read_json_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);

} // namespace stratlasso
