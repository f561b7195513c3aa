#include "commands.hpp"
#include <stratlasso/heatmap.hpp>
#include <stratlasso/parallel.hpp>
#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace stratlasso::cli {

namespace fs = std::filesystem;

void apply_json_config(RunConfig& cfg, const json& j)
{
    if (!j.is_object()) throw SchemaError("config must be a JSON object");
    try {
        auto str = [&](const char* key, std::string& out) {
            if (j.contains(key)) out = j.at(key).get<std::string>();
        };
        str("input", cfg.input);
        str("out-dir", cfg.out_dir);
        str("scenario", cfg.scenario);
        str("truth", cfg.truth);
        str("stratum-column", cfg.stratum_column);
        str("response-column", cfg.response_column);
        str("response-kind", cfg.response_kind);
        str("method", cfg.method);
        if (j.contains("lambda1")) cfg.lambda1 = j.at("lambda1").get<double>();
        if (j.contains("tau0")) cfg.tau0 = j.at("tau0").get<double>();
        if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();
        if (j.contains("threads")) cfg.threads = j.at("threads").get<int>();
        if (j.contains("folds")) cfg.folds = j.at("folds").get<Index>();
        if (j.contains("tau0-grid")) cfg.tau0_grid = j.at("tau0-grid").get<std::vector<double>>();
        if (j.contains("outer-folds")) cfg.outer_folds = j.at("outer-folds").get<Index>();
        if (j.contains("replicates")) cfg.replicates = j.at("replicates").get<Index>();
        if (j.contains("sigma")) cfg.sigma = j.at("sigma").get<double>();
        if (j.contains("export")) cfg.export_data = j.at("export").get<bool>();
        if (j.contains("standardize")) cfg.standardize = j.at("standardize").get<bool>();
    } catch (const json::exception& e) {
        throw SchemaError(std::string("config: ") + e.what());
    }
}

namespace {

struct Loaded {
    StratifiedDataset ds;
    std::optional<GroundTruth> truth;
};

void ensure_out_dir(const RunConfig& cfg)
{
    if (cfg.out_dir.empty()) throw SchemaError("--out-dir is required");
    std::error_code ec;
    fs::create_directories(cfg.out_dir, ec);
    if (ec || !fs::is_directory(cfg.out_dir)) throw SchemaError("cannot create output directory " + cfg.out_dir);
}

std::string out_path(const RunConfig& cfg, const std::string& name)
{
    return (fs::path(cfg.out_dir) / name).string();
}

Loss loss_of(const StratifiedDataset& ds)
{
    return ds.response_kind == ResponseKind::binary ? Loss::logistic : Loss::gaussian;
}

ResponseKind response_kind_of(const RunConfig& cfg)
{
    if (cfg.response_kind == "gaussian") return ResponseKind::gaussian;
    if (cfg.response_kind == "binary") return ResponseKind::binary;
    throw SchemaError("--response-kind must be gaussian or binary");
}

Loaded load_data(const RunConfig& cfg)
{
    Loaded out;
    if (!cfg.scenario.empty() && !cfg.input.empty())
        throw SchemaError("give either --input or --scenario, not both");
    if (!cfg.scenario.empty()) {
        auto s = scenario_from_json(read_json_file(cfg.scenario));
        if (cfg.seed) s.seed = *cfg.seed;
        auto [ds, truth] = generate_scenario(s);
        out.ds = std::move(ds);
        out.truth = std::move(truth);
    } else if (!cfg.input.empty()) {
        out.ds = load_csv(cfg.input, cfg.stratum_column, cfg.response_column, response_kind_of(cfg));
    } else {
        throw SchemaError("an --input CSV or a --scenario JSON is required");
    }
    if (!cfg.truth.empty()) {
        out.truth = truth_from_json(read_json_file(cfg.truth));
        if (out.truth->beta.rows() != out.ds.K() || out.truth->beta.cols() != out.ds.p())
            throw SchemaError("truth beta must be K x p for the loaded data");
    }
    if (cfg.export_data) {
        ensure_out_dir(cfg);
        std::ofstream data(out_path(cfg, "data.csv"), std::ios::binary);
        write_csv(data, out.ds, cfg.stratum_column, cfg.response_column);
        if (out.truth) write_text_file(out_path(cfg, "truth.json"), truth_to_json(*out.truth).dump(2) + "\n");
    }
    return out;
}

Method parse_method(const RunConfig& cfg, const Loaded& data)
{
    return Method::parse(cfg.method, data.ds.K(), data.ds.p(),
                         data.truth ? &data.truth->optimal_reference : nullptr);
}

std::string coefficients_csv(const StratifiedDataset& ds, const CoefficientDecomposition& dec)
{
    std::ostringstream os;
    os << "predictor,stratum,beta,mu,gamma\n";
    for (Index j = 0; j < ds.p(); ++j)
        for (Index k = 0; k < ds.K(); ++k)
            os << ds.predictor_names[j] << ',' << ds.stratum_labels[k] << ','
               << format_number(dec.beta(k, j)) << ',' << format_number(dec.mu[j]) << ','
               << format_number(dec.gamma(k, j)) << '\n';
    return os.str();
}

json fit_json(const StratifiedDataset& ds, const MethodFit& fit, const std::string& tag, Loss loss)
{
    json j = to_json(fit, tag);
    j["loss"] = loss == Loss::gaussian ? "gaussian" : "logistic";
    j["K"] = ds.K();
    j["p"] = ds.p();
    j["n"] = ds.n();
    json tau = json::array();
    for (Index k = 0; k < fit.dec.tau.tau.size(); ++k) tau.push_back(number12(fit.dec.tau.tau[k]));
    j["tau"] = tau;
    return j;
}

void write_fit_outputs(const RunConfig& cfg, const Loaded& data, const MethodFit& fit,
                       const std::string& tag)
{
    write_text_file(out_path(cfg, "coefficients.csv"), coefficients_csv(data.ds, fit.dec));
    write_text_file(out_path(cfg, "fit.json"), fit_json(data.ds, fit, tag, loss_of(data.ds)).dump(2) + "\n");
    std::vector<HeatmapPanel> panels{{tag, fit.dec.beta}};
    if (data.truth) panels.push_back({"truth", data.truth->beta});
    write_text_file(out_path(cfg, "heatmap.svg"),
                    heatmap_svg(panels, data.ds.predictor_names, data.ds.stratum_labels));
}

CVOptions cv_options(const RunConfig& cfg)
{
    CVOptions o;
    o.folds = cfg.folds;
    o.seed = cfg.seed.value_or(1);
    if (!cfg.tau0_grid.empty()) o.tau0_grid = cfg.tau0_grid;
    o.threads = cfg.threads;
    return o;
}

} // namespace

int run_fit(const RunConfig& cfg)
{
    ensure_out_dir(cfg);
    const auto data = load_data(cfg);
    const Method m = parse_method(cfg, data);
    if (!cfg.lambda1) throw SchemaError("fit needs --lambda1 (use the cv command to select it)");
    const auto fit = fit_method(data.ds, m, *cfg.lambda1, cfg.tau0, loss_of(data.ds));
    write_fit_outputs(cfg, data, fit, m.tag);
    return fit.converged ? kOk : kNonConvergence;
}

int run_cv(const RunConfig& cfg)
{
    ensure_out_dir(cfg);
    const auto data = load_data(cfg);
    const Method m = parse_method(cfg, data);
    const Loss loss = loss_of(data.ds);
    const CVOptions opts = cv_options(cfg);
    const auto cv = cross_validate(data.ds, m, opts, loss);
    json out = to_json(cv);
    out["method"] = m.tag;

    if (cfg.outer_folds > 0) {
        // outer folds estimate prediction loss, inner folds select (lambda1, tau0)
        const auto outer = make_folds(data.ds, cfg.outer_folds, derive_seed(opts.seed, 9));
        json folds = json::array();
        double total = 0.0;
        for (Index f = 0; f < cfg.outer_folds; ++f) {
            const auto train = subset_by_fold(data.ds, outer, static_cast<int>(f), false);
            const auto test = subset_by_fold(data.ds, outer, static_cast<int>(f), true);
            CVOptions inner = opts;
            inner.seed = derive_seed(opts.seed, 10, static_cast<std::uint64_t>(f));
            const auto icv = cross_validate(train, m, inner, loss);
            const auto& b = icv.best_point();
            const auto fit = fit_method(train, m, b.lambda1, b.tau0, loss);
            const double l = heldout_loss(test, fit.dec.beta, loss);
            total += l;
            folds.push_back({{"fold", f}, {"lambda1", number12(b.lambda1)}, {"tau0", number12(b.tau0)},
                             {"heldout_loss", number12(l)}});
        }
        out["double_cv"] = {{"outer_folds", cfg.outer_folds},
                            {"mean_heldout_loss", number12(total / static_cast<double>(cfg.outer_folds))},
                            {"folds", folds}};
    }
    write_text_file(out_path(cfg, "cv.json"), out.dump(2) + "\n");

    const auto& best = cv.best_point();
    const auto fit = fit_method(data.ds, m, best.lambda1, best.tau0, loss);
    write_fit_outputs(cfg, data, fit, m.tag);
    return fit.converged ? kOk : kNonConvergence;
}

int run_simulate(const RunConfig& cfg)
{
    ensure_out_dir(cfg);
    SimulationConfig sim;
    if (!cfg.scenario.empty()) sim = simulation_config_from_json(read_json_file(cfg.scenario));
    if (cfg.seed) sim.master_seed = *cfg.seed;
    if (cfg.replicates > 0) sim.replicates = cfg.replicates;
    sim.cv.folds = cfg.folds;
    if (!cfg.tau0_grid.empty()) sim.cv.tau0_grid = cfg.tau0_grid;
    const auto rows = run_simulation(sim, cfg.threads);
    write_text_file(out_path(cfg, "metrics.csv"), metrics_csv(rows));
    write_text_file(out_path(cfg, "summary.csv"), summary_csv(rows));
    write_text_file(out_path(cfg, "simulation.json"), to_json(sim).dump(2) + "\n");
    return kOk;
}

namespace {

bool orthogonal_balanced(const StratifiedDataset& ds, double tol)
{
    for (Index k = 0; k < ds.K(); ++k) {
        if (ds.n_k(k) != ds.n_k(0)) return false;
        const auto& X = ds.strata[k].X;
        const Matrix G = X.transpose() * X / static_cast<double>(ds.n_k(k));
        if ((G - Matrix::Identity(ds.p(), ds.p())).cwiseAbs().maxCoeff() > tol) return false;
    }
    return true;
}

json degrees_json(const HeterogeneityDegrees& d)
{
    return json{{"D0", d.D0}, {"D1", d.D1 ? json(*d.D1) : json("-inf")}};
}

} // namespace

int run_ic_check(const RunConfig& cfg)
{
    ensure_out_dir(cfg);
    const auto data = load_data(cfg);
    if (!data.truth) throw SchemaError("ic-check needs a ground truth (--truth or --scenario)");
    const auto& ds = data.ds;
    const auto& beta = data.truth->beta;
    const IndexVector& lstar = data.truth->optimal_reference;
    const TauWeights tau = TauWeights::default_rule(cfg.tau0, ds.sizes());

    ReferenceVector refs = oracle_references(lstar);
    if (cfg.method != "proposal") {
        const Method m = parse_method(cfg, data);
        if (m.kind != MethodKind::basic) throw SchemaError("ic-check takes proposal or a basic:<ref> method");
        refs = m.refs;
    }
    bool precondition_failed = false;
    json out;
    out["tau0"] = number12(cfg.tau0);

    const auto basic = build_design_basic(ds, refs, tau);
    const auto sets_l = support_sets_from_truth(beta, refs.refs, basic.layout);
    const auto ic_l = ic_generic(basic, sets_l.J);
    const auto over = build_design_overparam(ds, tau);
    const auto sets_0 = support_sets_from_truth(beta, lstar, over.layout);
    const auto ic_0 = ic_generic(over, sets_0.J);
    precondition_failed |= !ic_l.c_defined || !ic_0.c_defined;
    out["supports"] = {{"basic", {{"S", sets_l.S.count()}, {"T", sets_l.T.count()}}},
                       {"overparam", {{"S", sets_0.S.count()}, {"T", sets_0.T.count()}}}};
    out["generic"] = {{"basic", to_json(ic_l)}, {"overparam", to_json(ic_0)}};

    const auto deg = heterogeneity_degrees(beta, lstar);
    out["degrees"] = degrees_json(deg);

    try {
        out["general"] = to_json(ic_general(ds, refs.refs, tau, beta));
    } catch (const RankError& e) {
        precondition_failed = true;
        out["general"] = {{"error", e.what()}, {"stratum", e.stratum()}};
    }

    const bool ortho = orthogonal_balanced(ds, 1e-6);
    out["orthogonal_balanced"] = ortho;
    if (ortho) {
        const auto iv = tau0_feasible_interval(ds.K(), deg.D0, deg.D1);
        const auto s1 = orthogonal_constants(ds.K(), deg.D0, deg.D1, cfg.tau0);
        out["interval"] = to_json(iv);
        out["interval_holds"] = ic_orthogonal_balanced(ds.K(), deg, cfg.tau0);
        out["orthogonal_constants"] = {{"gamma", number12(s1.gamma)}, {"C_min", number12(s1.C_min)}, {"valid", s1.valid}};
    }

    const double sigma = cfg.sigma.value_or(data.truth->noise_sd);
    json thr = json::object();
    auto add_thresholds = [&](const char* name, int eta, const ICReport& ic, const SupportSets& sets) {
        if (!(sigma > 0.0) || !ic.c_defined || !(ic.gamma_slack > 0.0) || !(ic.lambda_min > 0.0)) return;
        if (!std::isfinite(ic.lambda_min)) return;
        thr[name] = to_json(recovery_thresholds(eta, sigma, ds.sizes(), ds.p(), cfg.tau0, ic.gamma_slack,
                                                ic.lambda_min, sets.size()));
    };
    add_thresholds("basic", 0, ic_l, sets_l);
    add_thresholds("overparam", 1, ic_0, sets_0);
    out["thresholds"] = thr;
    out["sigma"] = number12(sigma);

    write_text_file(out_path(cfg, "ic.json"), out.dump(2) + "\n");
    return precondition_failed ? kConditionFailed : kOk;
}

int run_transform(const RunConfig& cfg)
{
    ensure_out_dir(cfg);
    auto data = load_data(cfg);
    if (cfg.standardize) {
        auto [std_ds, rec] = standardize(data.ds);
        std::ofstream s(out_path(cfg, "standardized.csv"), std::ios::binary);
        write_csv(s, std_ds, cfg.stratum_column, cfg.response_column);
        std::ostringstream os;
        os << "stratum,predictor,scale\n";
        for (Index k = 0; k < data.ds.K(); ++k)
            for (Index j = 0; j < data.ds.p(); ++j)
                os << data.ds.stratum_labels[k] << ',' << data.ds.predictor_names[j] << ','
                   << format_number(rec.scale(k, j)) << '\n';
        write_text_file(out_path(cfg, "scaling.csv"), os.str());
        data.ds = std::move(std_ds);
    }
    const Method m = parse_method(cfg, data);
    DesignLayout layout;
    switch (m.kind) {
    case MethodKind::proposal: layout = DesignLayout::make(DesignKind::overparam, data.ds.K(), data.ds.p()); break;
    case MethodKind::basic: layout = DesignLayout::make(DesignKind::basic, data.ds.K(), data.ds.p(), &m.refs); break;
    case MethodKind::pooled: layout = DesignLayout::make(DesignKind::pooled, data.ds.K(), data.ds.p()); break;
    case MethodKind::independent: layout = DesignLayout::make(DesignKind::independent, data.ds.K(), data.ds.p()); break;
    case MethodKind::fused: throw SchemaError("the fused comparator has no augmented design");
    }
    const auto design = build_design(data.ds, layout, TauWeights::default_rule(cfg.tau0, data.ds.sizes()));
    write_text_file(out_path(cfg, "layout.json"), to_json(design.layout).dump(2) + "\n");
    std::ostringstream X;
    X << "row,col,value\n";
    for (Index c = 0; c < design.X.outerSize(); ++c)
        for (SparseMatrix::InnerIterator it(design.X, c); it; ++it)
            X << it.row() << ',' << it.col() << ',' << format_number(it.value()) << '\n';
    write_text_file(out_path(cfg, "design.csv"), X.str());
    std::ostringstream Y;
    Y << "row,stratum,y\n";
    for (Index k = 0; k < data.ds.K(); ++k)
        for (Index i = 0; i < data.ds.n_k(k); ++i)
            Y << data.ds.offset(k) + i << ',' << data.ds.stratum_labels[k] << ','
              << format_number(design.Y[data.ds.offset(k) + i]) << '\n';
    write_text_file(out_path(cfg, "response.csv"), Y.str());
    return kOk;
}

int run_cli(int argc, const char* const* argv)
{
    RunConfig cfg;
    cfg.threads = default_thread_count();
    try {
        for (int i = 1; i + 1 < argc; ++i)
            if (std::string(argv[i]) == "--config") apply_json_config(cfg, read_json_file(argv[i + 1]));
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kConfigError;
    }

    CLI::App app{"Stratified lasso estimation, diagnostics and simulation"};
    app.require_subcommand(1);
    app.fallthrough();
    std::string config_path;
    app.add_option("--config", config_path, "JSON config file; flags override its entries");
    std::optional<double> lambda1;
    std::optional<std::uint64_t> seed;
    std::optional<double> sigma;

    auto common = [&](CLI::App* sub) {
        sub->add_option("--input", cfg.input, "input CSV");
        sub->add_option("--out-dir", cfg.out_dir, "output directory");
        sub->add_option("--scenario", cfg.scenario, "scenario JSON (generates data instead of --input)");
        sub->add_option("--truth", cfg.truth, "ground-truth JSON with a K x p beta matrix");
        sub->add_option("--stratum-column", cfg.stratum_column);
        sub->add_option("--response-column", cfg.response_column);
        sub->add_option("--response-kind", cfg.response_kind, "gaussian or binary");
        sub->add_option("--method", cfg.method,
                        "proposal | basic:first|last|<k>|oracle | pooled | independent | fused");
        sub->add_option("--tau0", cfg.tau0);
        sub->add_option("--seed", seed);
        sub->add_option("--threads", cfg.threads)->check(CLI::PositiveNumber);
        sub->add_flag("--export", cfg.export_data, "write generated data.csv and truth.json");
    };
    auto* fit = app.add_subcommand("fit", "fit one method at a fixed penalty");
    common(fit);
    fit->add_option("--lambda1", lambda1);
    auto* cv = app.add_subcommand("cv", "select (lambda1, tau0) by stratified cross-validation");
    common(cv);
    cv->add_option("--folds", cfg.folds);
    cv->add_option("--tau0-grid", cfg.tau0_grid);
    cv->add_option("--outer-folds", cfg.outer_folds, "outer folds for double cross-validation");
    auto* sim = app.add_subcommand("simulate", "run the simulation grid");
    common(sim);
    sim->add_option("--replicates", cfg.replicates);
    sim->add_option("--folds", cfg.folds);
    sim->add_option("--tau0-grid", cfg.tau0_grid);
    auto* ic = app.add_subcommand("ic-check", "irrepresentability diagnostics against a ground truth");
    common(ic);
    ic->add_option("--sigma", sigma, "noise level for the recovery thresholds");
    auto* tr = app.add_subcommand("transform", "dump the augmented response and design");
    common(tr);
    tr->add_flag("--standardize", cfg.standardize, "also write standardized data and scale factors");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kConfigError;
    }
    if (lambda1) cfg.lambda1 = lambda1;
    if (seed) cfg.seed = seed;
    if (sigma) cfg.sigma = sigma;

    try {
        if (fit->parsed()) return run_fit(cfg);
        if (cv->parsed()) return run_cv(cfg);
        if (sim->parsed()) return run_simulate(cfg);
        if (ic->parsed()) return run_ic_check(cfg);
        return run_transform(cfg);
    } catch (const RankError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kConditionFailed;
    } catch (const ConditionError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kConditionFailed;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kConfigError;
    }
}

} // namespace stratlasso::cli
