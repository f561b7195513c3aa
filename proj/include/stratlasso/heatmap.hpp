#pragma once
#include <stratlasso/types.hpp>
#include <string>
#include <vector>

namespace stratlasso {

struct HeatmapPanel {
    std::string title;
    Matrix beta;   // K x p; drawn transposed (rows = predictors, columns = strata)
};

/// "#rrggbb" on a blue-white-red scale; 0 maps to white, +-v to mirrored hues.
std::string diverging_color(double value, double vmax);

/**
 * One panel per matrix, side by side, sharing a color scale anchored at the
 * largest absolute entry over all panels. Output is a deterministic function
 * of the inputs.
 */
std::string heatmap_svg(const std::vector<HeatmapPanel>& panels,
                        const std::vector<std::string>& predictor_names,
                        const std::vector<std::string>& stratum_labels, int cell = 14);

} // namespace stratlasso
