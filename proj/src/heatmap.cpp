#include <stratlasso/heatmap.hpp>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace stratlasso {

namespace {

struct Rgb {
    double r, g, b;
};

constexpr Rgb kWhite{255, 255, 255};
constexpr Rgb kRed{178, 24, 43};
constexpr Rgb kBlue{33, 102, 172};

std::string hex(const Rgb& c)
{
    char buf[8];
    std::snprintf(buf, sizeof buf, "#%02x%02x%02x", static_cast<int>(std::lround(c.r)),
                  static_cast<int>(std::lround(c.g)), static_cast<int>(std::lround(c.b)));
    return buf;
}

std::string escape(const std::string& s)
{
    std::string out;
    for (char ch : s) {
        switch (ch) {
        case '&': out += "&amp;"; break;
        case '<': out += "&lt;"; break;
        case '>': out += "&gt;"; break;
        case '"': out += "&quot;"; break;
        default: out += ch;
        }
    }
    return out;
}

std::string num(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4g", v);
    return buf;
}

} // namespace

std::string diverging_color(double value, double vmax)
{
    if (value == 0.0 || !(vmax > 0.0)) return hex(kWhite);
    const double t = std::min(1.0, std::abs(value) / vmax);
    const Rgb& end = value > 0 ? kRed : kBlue;
    return hex({kWhite.r + t * (end.r - kWhite.r), kWhite.g + t * (end.g - kWhite.g),
                kWhite.b + t * (end.b - kWhite.b)});
}

std::string heatmap_svg(const std::vector<HeatmapPanel>& panels,
                        const std::vector<std::string>& predictor_names,
                        const std::vector<std::string>& stratum_labels, int cell)
{
    if (panels.empty()) throw ParameterError("heatmap needs at least one panel");
    const Index K = panels.front().beta.rows();
    const Index p = panels.front().beta.cols();
    if (static_cast<Index>(predictor_names.size()) != p || static_cast<Index>(stratum_labels.size()) != K)
        throw ParameterError("heatmap labels do not match the coefficient dimensions");
    double vmax = 0.0;
    for (const auto& panel : panels) {
        if (panel.beta.rows() != K || panel.beta.cols() != p)
            throw ParameterError("heatmap panels must share dimensions");
        if (panel.beta.size() > 0) vmax = std::max(vmax, panel.beta.cwiseAbs().maxCoeff());
    }

    const int label_w = 90, top = 48, gap = 24, legend_h = 40;
    const int panel_w = static_cast<int>(K) * cell;
    const int width = static_cast<int>(panels.size()) * (label_w + panel_w + gap);
    const int height = top + static_cast<int>(p) * cell + legend_h;

    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
       << "\" font-family=\"sans-serif\" font-size=\"10\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"#ffffff\"/>\n";
    for (std::size_t q = 0; q < panels.size(); ++q) {
        const int x0 = static_cast<int>(q) * (label_w + panel_w + gap) + label_w;
        os << "<g class=\"panel\">\n";
        os << "<text x=\"" << x0 << "\" y=\"14\" font-size=\"12\">" << escape(panels[q].title)
           << "</text>\n";
        for (Index k = 0; k < K; ++k) {
            const std::string lab = k < static_cast<Index>(stratum_labels.size())
                                        ? stratum_labels[k] : std::to_string(k + 1);
            os << "<text x=\"" << x0 + static_cast<int>(k) * cell + cell / 2 << "\" y=\"" << top - 6
               << "\" text-anchor=\"middle\">" << escape(lab) << "</text>\n";
        }
        for (Index j = 0; j < p; ++j) {
            const int y = top + static_cast<int>(j) * cell;
            const std::string lab = j < static_cast<Index>(predictor_names.size())
                                        ? predictor_names[j] : "x" + std::to_string(j + 1);
            os << "<text x=\"" << x0 - 4 << "\" y=\"" << y + cell - 3 << "\" text-anchor=\"end\">"
               << escape(lab) << "</text>\n";
            for (Index k = 0; k < K; ++k) {
                os << "<rect x=\"" << x0 + static_cast<int>(k) * cell << "\" y=\"" << y
                   << "\" width=\"" << cell << "\" height=\"" << cell << "\" fill=\""
                   << diverging_color(panels[q].beta(k, j), vmax) << "\"/>\n";
            }
        }
        os << "<rect x=\"" << x0 << "\" y=\"" << top << "\" width=\"" << panel_w << "\" height=\""
           << static_cast<int>(p) * cell << "\" fill=\"none\" stroke=\"#808080\"/>\n";
        os << "</g>\n";
    }
    const int ly = top + static_cast<int>(p) * cell + 14;
    os << "<g class=\"legend\">\n";
    const int steps = 11;
    for (int s = 0; s < steps; ++s) {
        const double v = vmax * (2.0 * s / (steps - 1) - 1.0);
        os << "<rect x=\"" << label_w + s * 12 << "\" y=\"" << ly << "\" width=\"12\" height=\"10\" fill=\""
           << diverging_color(v, vmax) << "\"/>\n";
    }
    os << "<text x=\"" << label_w - 4 << "\" y=\"" << ly + 9 << "\" text-anchor=\"end\">"
       << num(-vmax) << "</text>\n";
    os << "<text x=\"" << label_w + steps * 12 + 4 << "\" y=\"" << ly + 9 << "\">" << num(vmax)
       << "</text>\n";
    os << "</g>\n</svg>\n";
    return os.str();
}

} // namespace stratlasso
