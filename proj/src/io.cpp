#include <stratlasso/io.hpp>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace stratlasso {

json number12(double v)
{
    if (!std::isfinite(v)) return nullptr;
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return std::strtod(buf, nullptr);
}

namespace {

template <class T>
void get_if(const json& j, const char* key, T& out)
{
    if (j.contains(key)) out = j.at(key).get<T>();
}

json index_list(const std::vector<Index>& v)
{
    json a = json::array();
    for (Index x : v) a.push_back(x);
    return a;
}

json numbers(const std::vector<double>& v)
{
    json a = json::array();
    for (double x : v) a.push_back(number12(x));
    return a;
}

} // namespace

json to_json(const SimulationScenario& s)
{
    return json{{"K", s.K},
                {"p", s.p},
                {"n_k", s.n_k},
                {"support_size", s.support_size},
                {"d_H", s.d_H},
                {"delta_mode", to_string(s.delta_mode)},
                {"correlation_base", number12(s.correlation_base)},
                {"snr", number12(s.snr)},
                {"seed", s.seed}};
}

SimulationScenario scenario_from_json(const json& j)
{
    SimulationScenario s;
    try {
        get_if(j, "K", s.K);
        get_if(j, "p", s.p);
        get_if(j, "n_k", s.n_k);
        get_if(j, "support_size", s.support_size);
        get_if(j, "d_H", s.d_H);
        if (j.contains("delta_mode")) s.delta_mode = delta_mode_from_string(j.at("delta_mode").get<std::string>());
        get_if(j, "correlation_base", s.correlation_base);
        get_if(j, "snr", s.snr);
        get_if(j, "seed", s.seed);
    } catch (const json::exception& e) {
        throw SchemaError(std::string("scenario: ") + e.what());
    }
    return s;
}

json to_json(const CVOptions& o)
{
    json j{{"folds", o.folds},
           {"seed", o.seed},
           {"tau0_grid", numbers(o.tau0_grid)},
           {"lambda_points", o.lambda_points},
           {"fused_lambda_points", o.fused_lambda_points}};
    if (!o.lambda_grid.empty()) j["lambda_grid"] = numbers(o.lambda_grid);
    if (o.lambda_ratio) j["lambda_ratio"] = number12(*o.lambda_ratio);
    return j;
}

void update_from_json(CVOptions& o, const json& j)
{
    try {
        get_if(j, "folds", o.folds);
        get_if(j, "seed", o.seed);
        get_if(j, "tau0_grid", o.tau0_grid);
        get_if(j, "lambda_grid", o.lambda_grid);
        get_if(j, "lambda_points", o.lambda_points);
        get_if(j, "fused_lambda_points", o.fused_lambda_points);
        if (j.contains("lambda_ratio")) o.lambda_ratio = j.at("lambda_ratio").get<double>();
    } catch (const json::exception& e) {
        throw SchemaError(std::string("cv options: ") + e.what());
    }
}

json to_json(const SimulationConfig& c)
{
    json modes = json::array();
    for (auto m : c.delta_modes) modes.push_back(to_string(m));
    return json{{"K", c.K},
                {"n_k", index_list(c.n_k)},
                {"p", index_list(c.p)},
                {"d_H", index_list(c.d_H)},
                {"delta_modes", modes},
                {"replicates", c.replicates},
                {"support_size", c.support_size},
                {"correlation_base", number12(c.correlation_base)},
                {"snr", number12(c.snr)},
                {"seed", c.master_seed},
                {"methods", c.methods},
                {"cv", to_json(c.cv)}};
}

SimulationConfig simulation_config_from_json(const json& j)
{
    SimulationConfig c;
    try {
        get_if(j, "K", c.K);
        get_if(j, "n_k", c.n_k);
        get_if(j, "p", c.p);
        get_if(j, "d_H", c.d_H);
        if (j.contains("delta_modes")) {
            c.delta_modes.clear();
            for (const auto& m : j.at("delta_modes")) c.delta_modes.push_back(delta_mode_from_string(m.get<std::string>()));
        }
        get_if(j, "replicates", c.replicates);
        get_if(j, "support_size", c.support_size);
        get_if(j, "correlation_base", c.correlation_base);
        get_if(j, "snr", c.snr);
        get_if(j, "seed", c.master_seed);
        get_if(j, "methods", c.methods);
        if (j.contains("cv")) update_from_json(c.cv, j.at("cv"));
    } catch (const json::exception& e) {
        throw SchemaError(std::string("simulation config: ") + e.what());
    }
    return c;
}

json to_json(const Matrix& m)
{
    json rows = json::array();
    for (Index i = 0; i < m.rows(); ++i) {
        json r = json::array();
        for (Index j = 0; j < m.cols(); ++j) r.push_back(number12(m(i, j)));
        rows.push_back(std::move(r));
    }
    return rows;
}

Matrix matrix_from_json(const json& j)
{
    if (!j.is_array() || j.empty()) throw SchemaError("matrix must be a nonempty array of rows");
    const Index rows = static_cast<Index>(j.size());
    const Index cols = static_cast<Index>(j.at(0).size());
    Matrix m(rows, cols);
    for (Index i = 0; i < rows; ++i) {
        const auto& r = j.at(static_cast<std::size_t>(i));
        if (!r.is_array() || static_cast<Index>(r.size()) != cols) throw SchemaError("ragged matrix rows");
        for (Index c = 0; c < cols; ++c) {
            const auto& v = r.at(static_cast<std::size_t>(c));
            if (!v.is_number()) throw SchemaError("matrix entries must be numbers");
            m(i, c) = v.get<double>();
        }
    }
    return m;
}

json to_json(const MethodFit& f, const std::string& method)
{
    json j{{"method", method},
           {"lambda1", number12(f.lambda1)},
           {"tau0", number12(f.tau0)},
           {"objective", number12(f.objective)},
           {"kkt_residual", number12(f.kkt_residual)},
           {"iterations", f.iterations},
           {"converged", f.converged}};
    if (method == "fused") j["lambda2"] = number12(f.lambda2);
    return j;
}

json to_json(const CVResult& r)
{
    json grid = json::array();
    for (const auto& p : r.points)
        grid.push_back({{"lambda1", number12(p.lambda1)},
                        {"tau0", number12(p.tau0)},
                        {"mean_loss", number12(p.mean_loss)},
                        {"se", number12(p.se)}});
    const auto& b = r.best_point();
    const auto& m = r.points[static_cast<std::size_t>(r.min_index)];
    return json{{"seed", r.seed},
                {"folds", r.folds.empty() ? 0 : *std::max_element(r.folds[0].begin(), r.folds[0].end()) + 1},
                {"best", {{"lambda1", number12(b.lambda1)}, {"tau0", number12(b.tau0)},
                          {"mean_loss", number12(b.mean_loss)}, {"se", number12(b.se)}}},
                {"minimum", {{"lambda1", number12(m.lambda1)}, {"tau0", number12(m.tau0)},
                             {"mean_loss", number12(m.mean_loss)}, {"se", number12(m.se)}}},
                {"fold_assignment", r.folds},
                {"grid", grid}};
}

json to_json(const ICReport& r)
{
    return json{{"lambda_min", number12(r.lambda_min)},
                {"c", r.c_defined ? number12(r.c) : json(nullptr)},
                {"holds", r.holds},
                {"gamma", r.c_defined ? number12(r.gamma_slack) : json(nullptr)}};
}

json to_json(const GeneralICConstants& c)
{
    return json{{"c1", number12(c.c1)},
                {"c2", number12(c.c2)},
                {"c2bar", number12(c.c2bar)},
                {"holds_basic", c.holds_basic},
                {"holds_overparam", c.holds_overparam}};
}

json to_json(const RecoveryThresholds& t)
{
    json het = json::array();
    for (Index k = 0; k < t.heterogeneity_threshold.size(); ++k) het.push_back(number12(t.heterogeneity_threshold[k]));
    return json{{"eta", t.eta},
                {"gamma", number12(t.gamma)},
                {"C_min", number12(t.C_min)},
                {"lambda1_bound", number12(t.lambda1_bound)},
                {"lambda1", number12(t.lambda1)},
                {"beta_min", number12(t.beta_min)},
                {"heterogeneity_threshold", het}};
}

json to_json(const Interval& i)
{
    return json{{"lower", number12(i.lower)},
                {"upper", std::isinf(i.upper) ? json("inf") : number12(i.upper)},
                {"empty", i.empty()}};
}

json to_json(const DesignLayout& layout)
{
    json cols = json::array();
    for (Index c = 0; c < layout.m(); ++c) {
        const auto& t = layout.columns[static_cast<std::size_t>(c)];
        cols.push_back({{"index", c},
                        {"block", t.block == BlockKind::mu ? "mu" : "gamma"},
                        {"stratum", t.stratum},
                        {"predictor", t.predictor}});
    }
    json j{{"kind", to_string(layout.kind)}, {"K", layout.K}, {"p", layout.p}, {"m", layout.m()}};
    if (layout.kind == DesignKind::basic) {
        json refs = json::array();
        for (Index i = 0; i < layout.refs.size(); ++i) refs.push_back(layout.refs[i]);
        j["refs"] = refs;
    }
    j["columns"] = cols;
    return j;
}

json truth_to_json(const GroundTruth& g)
{
    json refs = json::array();
    for (Index i = 0; i < g.optimal_reference.size(); ++i) refs.push_back(g.optimal_reference[i]);
    return json{{"beta", to_json(g.beta)},
                {"noise_sd", number12(g.noise_sd)},
                {"support", index_list(g.support)},
                {"optimal_reference", refs}};
}

GroundTruth truth_from_json(const json& j)
{
    GroundTruth g;
    try {
        if (!j.contains("beta")) throw SchemaError("truth file needs a 'beta' matrix");
        g.beta = matrix_from_json(j.at("beta"));
        get_if(j, "noise_sd", g.noise_sd);
        const auto mr = mode_reference(g.beta);
        g.mode_vector = mr.mode_vector;
        g.optimal_reference = mr.optimal_reference;
        if (j.contains("support")) {
            g.support = j.at("support").get<std::vector<Index>>();
        } else {
            for (Index c = 0; c < g.beta.cols(); ++c)
                if (g.beta.col(c).cwiseAbs().maxCoeff() > 0.0) g.support.push_back(c);
        }
    } catch (const json::exception& e) {
        throw SchemaError(std::string("truth file: ") + e.what());
    }
    return g;
}

json read_json_file(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw SchemaError("cannot open " + path);
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw SchemaError(path + ": " + e.what());
    }
}

void write_text_file(const std::string& path, const std::string& text)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) throw SchemaError("cannot write " + path);
    out << text;
    if (!out) throw SchemaError("write failed for " + path);
}

} // namespace stratlasso
