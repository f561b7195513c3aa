#include <stratlasso/simulation.hpp>
#include <stratlasso/parallel.hpp>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <sstream>
#include <tuple>

namespace stratlasso {

void SimulationConfig::validate() const
{
    if (K < 1) throw ParameterError("K must be positive");
    if (n_k.empty() || p.empty() || d_H.empty() || delta_modes.empty())
        throw ParameterError("simulation grid axes must be nonempty");
    if (replicates < 1) throw ParameterError("replicates must be positive");
    if (methods.empty()) throw ParameterError("at least one method is required");
    for (const auto& c : cells()) c.validate();
}

std::vector<SimulationScenario> SimulationConfig::cells() const
{
    std::vector<SimulationScenario> out;
    for (Index nk : n_k)
        for (Index pp : p)
            for (Index dh : d_H)
                for (DeltaMode mode : delta_modes) {
                    SimulationScenario s;
                    s.K = K;
                    s.p = pp;
                    s.n_k = nk;
                    s.support_size = std::min(support_size, pp);
                    s.d_H = dh;
                    s.delta_mode = mode;
                    s.correlation_base = correlation_base;
                    s.snr = snr;
                    out.push_back(s);
                }
    return out;
}

double MetricsRecord::log_prediction_error() const
{
    if (prediction_error > 0.0) return std::log(prediction_error);
    if (prediction_error == 0.0) return -std::numeric_limits<double>::infinity();
    return std::numeric_limits<double>::quiet_NaN();
}

std::uint64_t replicate_seed(std::uint64_t master, Index cell, Index replicate)
{
    return derive_seed(derive_seed(master, 6, static_cast<std::uint64_t>(cell)), 7,
                       static_cast<std::uint64_t>(replicate));
}

std::vector<MetricsRecord> run_replicate(const SimulationConfig& config,
                                         const SimulationScenario& scenario, Index replicate)
{
    const auto [ds, truth] = generate_scenario(scenario);
    const Index K = ds.K(), p = ds.p();
    std::vector<Index> full(static_cast<std::size_t>(p));
    for (Index j = 0; j < p; ++j) full[static_cast<std::size_t>(j)] = j;

    CVOptions cv = config.cv;
    cv.seed = derive_seed(scenario.seed, 8);
    cv.threads = 1;

    std::vector<MetricsRecord> rows;
    for (const auto& spec : config.methods) {
        MetricsRecord r;
        r.K = K;
        r.n_k = scenario.n_k;
        r.p = p;
        r.d_H = scenario.d_H;
        r.delta_mode = scenario.delta_mode;
        r.replicate = replicate;
        r.seed = scenario.seed;
        r.method = spec;
        try {
            const Method m = Method::parse(spec, K, p, &truth.optimal_reference);
            const IndexVector refs = m.kind == MethodKind::basic && spec != "basic:oracle"
                                         ? m.refs.refs : truth.optimal_reference;
            const auto truth_sets = support_sets_from_truth(truth.beta, refs);
            const auto cvres = cross_validate(ds, m, cv);
            const auto& best = cvres.best_point();
            const auto fit = fit_method(ds, m, best.lambda1, best.tau0, Loss::gaussian, cv.solver, cv.fused);
            const auto est = support_estimate(fit.dec);
            const auto acc = support_accuracy(est, truth_sets, truth.support);
            const auto acc_full = support_accuracy(est, truth_sets, full);
            r.accuracy_T = acc.accuracy_T;
            r.accuracy_S = acc.accuracy_S;
            r.accuracy_T_full = acc_full.accuracy_T;
            r.accuracy_S_full = acc_full.accuracy_S;
            r.prediction_error = prediction_error(ds, truth.beta, fit.dec.beta);
            r.lambda1 = best.lambda1;
            r.tau0 = best.tau0;
            r.converged = fit.converged;
        } catch (const std::exception& e) {
            const double nan = std::numeric_limits<double>::quiet_NaN();
            r.accuracy_T = r.accuracy_S = r.accuracy_T_full = r.accuracy_S_full = nan;
            r.prediction_error = r.lambda1 = r.tau0 = nan;
            r.error = e.what();
        }
        rows.push_back(std::move(r));
    }
    return rows;
}

std::vector<MetricsRecord> run_simulation(const SimulationConfig& config, int threads)
{
    config.validate();
    const auto cells = config.cells();
    const Index R = config.replicates;
    const long units = static_cast<long>(cells.size()) * R;
    std::vector<std::vector<MetricsRecord>> slots(static_cast<std::size_t>(units));
    parallel_for(units, threads, [&](long u) {
        const Index c = u / R, r = u % R;
        SimulationScenario s = cells[static_cast<std::size_t>(c)];
        s.seed = replicate_seed(config.master_seed, c, r);
        slots[static_cast<std::size_t>(u)] = run_replicate(config, s, r);
    });
    std::vector<MetricsRecord> out;
    for (auto& s : slots)
        for (auto& r : s) out.push_back(std::move(r));
    return out;
}

std::string to_string(DeltaMode mode)
{
    return mode == DeltaMode::constant ? "constant" : "random";
}

DeltaMode delta_mode_from_string(const std::string& s)
{
    if (s == "constant") return DeltaMode::constant;
    if (s == "random") return DeltaMode::random;
    throw SchemaError("delta mode must be 'constant' or 'random', got '" + s + "'");
}

std::string format_number(double v)
{
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

namespace {

std::string csv_field(const std::string& s)
{
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c == '\n' ? ' ' : c;
    }
    return out + "\"";
}

} // namespace

std::string metrics_csv(const std::vector<MetricsRecord>& records)
{
    std::ostringstream os;
    os << "K,n_k,p,d_H,delta_mode,replicate,seed,method,accuracy_T,accuracy_S,accuracy_T_full,"
          "accuracy_S_full,prediction_error,log_prediction_error,lambda1,tau0,converged,error\n";
    for (const auto& r : records) {
        os << r.K << ',' << r.n_k << ',' << r.p << ',' << r.d_H << ',' << to_string(r.delta_mode) << ','
           << r.replicate << ',' << r.seed << ',' << csv_field(r.method) << ','
           << format_number(r.accuracy_T) << ',' << format_number(r.accuracy_S) << ','
           << format_number(r.accuracy_T_full) << ',' << format_number(r.accuracy_S_full) << ','
           << format_number(r.prediction_error) << ',' << format_number(r.log_prediction_error()) << ','
           << format_number(r.lambda1) << ',' << format_number(r.tau0) << ','
           << (r.converged ? 1 : 0) << ',' << csv_field(r.error) << '\n';
    }
    return os.str();
}

std::string summary_csv(const std::vector<MetricsRecord>& records)
{
    using Key = std::tuple<Index, Index, Index, Index, int, std::string>;
    struct Acc {
        Index count = 0, errors = 0;
        double aT = 0, aS = 0, aTf = 0, aSf = 0, pe = 0, lpe = 0;
    };
    std::vector<Key> order;
    std::map<Key, Acc> acc;
    for (const auto& r : records) {
        const Key key{r.K, r.n_k, r.p, r.d_H, static_cast<int>(r.delta_mode), r.method};
        auto [it, inserted] = acc.try_emplace(key);
        if (inserted) order.push_back(key);
        auto& a = it->second;
        if (!r.error.empty()) {
            ++a.errors;
            continue;
        }
        ++a.count;
        a.aT += r.accuracy_T;
        a.aS += r.accuracy_S;
        a.aTf += r.accuracy_T_full;
        a.aSf += r.accuracy_S_full;
        a.pe += r.prediction_error;
        a.lpe += r.log_prediction_error();
    }
    std::ostringstream os;
    os << "K,n_k,p,d_H,delta_mode,method,replicates,errors,mean_accuracy_T,mean_accuracy_S,"
          "mean_accuracy_T_full,mean_accuracy_S_full,mean_prediction_error,mean_log_prediction_error\n";
    for (const auto& key : order) {
        const auto& a = acc.at(key);
        const double c = a.count > 0 ? static_cast<double>(a.count)
                                     : std::numeric_limits<double>::quiet_NaN();
        os << std::get<0>(key) << ',' << std::get<1>(key) << ',' << std::get<2>(key) << ','
           << std::get<3>(key) << ',' << to_string(static_cast<DeltaMode>(std::get<4>(key))) << ','
           << csv_field(std::get<5>(key)) << ',' << a.count << ',' << a.errors << ','
           << format_number(a.aT / c) << ',' << format_number(a.aS / c) << ','
           << format_number(a.aTf / c) << ',' << format_number(a.aSf / c) << ','
           << format_number(a.pe / c) << ',' << format_number(a.lpe / c) << '\n';
    }
    return os.str();
}

} // namespace stratlasso
