#include <stratlasso/dataset.hpp>
#include <Eigen/Cholesky>
#include <algorithm>
#include <charconv>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <unordered_map>

namespace stratlasso {

Index StratifiedDataset::n() const
{
    Index total = 0;
    for (const auto& s : strata) total += s.X.rows();
    return total;
}

Index StratifiedDataset::offset(Index k) const
{
    Index off = 0;
    for (Index i = 0; i < k; ++i) off += strata[i].X.rows();
    return off;
}

std::vector<Index> StratifiedDataset::sizes() const
{
    std::vector<Index> out;
    out.reserve(strata.size());
    for (const auto& s : strata) out.push_back(s.X.rows());
    return out;
}

void StratifiedDataset::validate() const
{
    if (strata.empty()) throw ParameterError("dataset has no strata");
    const Index p0 = strata.front().X.cols();
    for (std::size_t k = 0; k < strata.size(); ++k) {
        const auto& s = strata[k];
        if (s.X.cols() != p0)
            throw ParameterError("stratum " + std::to_string(k) + " has a different predictor count");
        if (s.X.rows() < 1)
            throw ParameterError("stratum " + std::to_string(k) + " is empty");
        if (s.y.size() != s.X.rows())
            throw ParameterError("stratum " + std::to_string(k) + " response length mismatch");
        if (response_kind == ResponseKind::binary) {
            for (Index i = 0; i < s.y.size(); ++i) {
                if (s.y[i] != 0.0 && s.y[i] != 1.0)
                    throw ParameterError("binary response must be 0 or 1");
            }
        }
    }
    if (stratum_labels.size() != strata.size())
        throw ParameterError("stratum label count mismatch");
    if (static_cast<Index>(predictor_names.size()) != p0)
        throw ParameterError("predictor name count mismatch");
}

StratifiedDataset make_dataset(std::vector<Stratum> strata, ResponseKind kind)
{
    StratifiedDataset ds;
    ds.strata = std::move(strata);
    ds.response_kind = kind;
    for (std::size_t k = 0; k < ds.strata.size(); ++k)
        ds.stratum_labels.push_back(std::to_string(k + 1));
    for (Index j = 0; j < ds.p(); ++j)
        ds.predictor_names.push_back("x" + std::to_string(j + 1));
    ds.validate();
    return ds;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line)
{
    std::vector<std::string> out;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cur += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            out.push_back(std::move(cur));
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    out.push_back(std::move(cur));
    return out;
}

std::optional<double> parse_number(const std::string& field)
{
    auto first = field.find_first_not_of(" \t");
    auto last = field.find_last_not_of(" \t");
    if (first == std::string::npos) return std::nullopt;
    const char* b = field.data() + first;
    const char* e = field.data() + last + 1;
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(b, e, value);
    if (ec != std::errc() || ptr != e) return std::nullopt;
    return value;
}

std::string csv_escape(const std::string& s)
{
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

} // namespace

StratifiedDataset read_csv(std::istream& in,
                           const std::string& stratum_column,
                           const std::string& response_column,
                           ResponseKind kind)
{
    std::string line;
    if (!std::getline(in, line)) throw SchemaError("missing header row");
    auto header = split_csv_line(line);
    auto find_col = [&](const std::string& name) -> std::size_t {
        auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end()) throw SchemaError("missing column '" + name + "'");
        return static_cast<std::size_t>(it - header.begin());
    };
    const auto s_col = find_col(stratum_column);
    const auto y_col = find_col(response_column);
    if (s_col == y_col) throw SchemaError("stratum and response columns coincide");

    std::vector<std::size_t> pred_cols;
    StratifiedDataset ds;
    ds.response_kind = kind;
    for (std::size_t c = 0; c < header.size(); ++c) {
        if (c == s_col || c == y_col) continue;
        pred_cols.push_back(c);
        ds.predictor_names.push_back(header[c]);
    }
    const Index p = static_cast<Index>(pred_cols.size());

    std::unordered_map<std::string, std::size_t> label_index;
    std::vector<std::vector<std::vector<double>>> rows;  // stratum -> row -> values
    std::vector<std::vector<double>> responses;

    long row = 0;
    while (std::getline(in, line)) {
        if (line.empty() || line == "\r") continue;
        ++row;
        auto fields = split_csv_line(line);
        if (fields.size() != header.size())
            throw ParseError("expected " + std::to_string(header.size()) + " fields, got " +
                                 std::to_string(fields.size()), row);
        const auto& label = fields[s_col];
        auto [it, inserted] = label_index.try_emplace(label, rows.size());
        if (inserted) {
            rows.emplace_back();
            responses.emplace_back();
            ds.stratum_labels.push_back(label);
        }
        std::vector<double> values(p);
        for (Index j = 0; j < p; ++j) {
            auto v = parse_number(fields[pred_cols[j]]);
            if (!v) throw ParseError("non-numeric value in column '" + ds.predictor_names[j] + "'", row);
            values[j] = *v;
        }
        auto y = parse_number(fields[y_col]);
        if (!y) throw ParseError("non-numeric response", row);
        if (kind == ResponseKind::binary && *y != 0.0 && *y != 1.0)
            throw ParseError("binary response must be 0 or 1", row);
        rows[it->second].push_back(std::move(values));
        responses[it->second].push_back(*y);
    }
    if (rows.empty()) throw SchemaError("no data rows");

    for (std::size_t k = 0; k < rows.size(); ++k) {
        Stratum s;
        const Index nk = static_cast<Index>(rows[k].size());
        s.X.resize(nk, p);
        s.y.resize(nk);
        for (Index i = 0; i < nk; ++i) {
            for (Index j = 0; j < p; ++j) s.X(i, j) = rows[k][i][j];
            s.y[i] = responses[k][i];
        }
        ds.strata.push_back(std::move(s));
    }
    ds.validate();
    return ds;
}

StratifiedDataset load_csv(const std::string& path,
                           const std::string& stratum_column,
                           const std::string& response_column,
                           ResponseKind kind)
{
    std::ifstream in(path);
    if (!in) throw SchemaError("cannot open '" + path + "'");
    return read_csv(in, stratum_column, response_column, kind);
}

void write_csv(std::ostream& out, const StratifiedDataset& ds,
               const std::string& stratum_column,
               const std::string& response_column)
{
    out << csv_escape(stratum_column) << ',' << csv_escape(response_column);
    for (const auto& name : ds.predictor_names) out << ',' << csv_escape(name);
    out << '\n';
    char buf[64];
    auto put = [&](double v) {
        std::snprintf(buf, sizeof(buf), "%.17g", v);
        out << buf;
    };
    for (Index k = 0; k < ds.K(); ++k) {
        const auto& s = ds.strata[k];
        for (Index i = 0; i < s.X.rows(); ++i) {
            out << csv_escape(ds.stratum_labels[k]) << ',';
            put(s.y[i]);
            for (Index j = 0; j < s.X.cols(); ++j) {
                out << ',';
                put(s.X(i, j));
            }
            out << '\n';
        }
    }
}

Matrix ScalingRecord::to_original(const Matrix& beta_std) const
{
    return beta_std.cwiseProduct(scale);
}

std::pair<StratifiedDataset, ScalingRecord> standardize(const StratifiedDataset& ds)
{
    StratifiedDataset out = ds;
    ScalingRecord rec;
    rec.scale = Matrix::Ones(ds.K(), ds.p());
    for (Index k = 0; k < ds.K(); ++k) {
        auto& X = out.strata[k].X;
        const double root_nk = std::sqrt(static_cast<double>(X.rows()));
        for (Index j = 0; j < X.cols(); ++j) {
            const double norm = X.col(j).norm();
            if (norm == 0.0) {
                rec.zero_columns.emplace_back(k, j);
                continue;
            }
            const double factor = root_nk / norm;
            // already standardized columns keep bit-identical values
            if (std::abs(factor - 1.0) <= 1e-12) continue;
            X.col(j) *= factor;
            rec.scale(k, j) = factor;
        }
    }
    return {std::move(out), std::move(rec)};
}

void SimulationScenario::validate() const
{
    if (K < 1) throw ParameterError("K must be >= 1");
    if (p < 1) throw ParameterError("p must be >= 1");
    if (n_k < 1) throw ParameterError("n_k must be >= 1");
    if (support_size < 0 || support_size > p) throw ParameterError("support_size must lie in [0, p]");
    if (d_H < 0 || d_H > K) throw ParameterError("d_H must lie in [0, K]");
    if (!(correlation_base >= 0.0 && correlation_base < 1.0))
        throw ParameterError("correlation_base must lie in [0, 1)");
    if (!(snr > 0.0)) throw ParameterError("snr must be positive");
}

ModeReference mode_reference(const Matrix& beta)
{
    const Index K = beta.rows();
    const Index p = beta.cols();
    ModeReference out;
    out.mode_vector = Vector::Zero(p);
    out.optimal_reference = IndexVector::Constant(p, kNoReference);

    std::vector<double> values(K + 1);
    for (Index j = 0; j < p; ++j) {
        values[0] = 0.0;
        for (Index k = 0; k < K; ++k) values[k + 1] = beta(k, j);

        int best_count = -1;
        double best = 0.0;
        auto preferred = [](double cand, double cur) {
            // tie rule: zero first, then smallest magnitude, then smallest value
            if (value_equal(cand, 0.0) != value_equal(cur, 0.0)) return value_equal(cand, 0.0);
            if (std::abs(cand) != std::abs(cur)) return std::abs(cand) < std::abs(cur);
            return cand < cur;
        };
        for (Index a = 0; a <= K; ++a) {
            int count = 0;
            for (Index b = 0; b <= K; ++b) count += value_equal(values[a], values[b]) ? 1 : 0;
            if (count > best_count || (count == best_count && preferred(values[a], best))) {
                best_count = count;
                best = values[a];
            }
        }
        if (value_equal(best, 0.0)) best = 0.0;
        out.mode_vector[j] = best;
        for (Index k = 0; k < K; ++k) {
            if (value_equal(beta(k, j), best)) {
                out.optimal_reference[j] = static_cast<int>(k);
                break;
            }
        }
    }
    return out;
}

Matrix toeplitz_covariance(Index p, double rho)
{
    Matrix sigma(p, p);
    for (Index i = 0; i < p; ++i)
        for (Index j = 0; j < p; ++j)
            sigma(i, j) = std::pow(rho, static_cast<double>(std::abs(i - j)));
    return sigma;
}

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t purpose, std::uint64_t index)
{
    auto mix = [](std::uint64_t z) {
        z += 0x9e3779b97f4a7c15ULL;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    };
    return mix(mix(mix(master) ^ purpose) ^ index);
}

namespace {

enum Purpose : std::uint64_t {
    kDesign = 1,
    kSupport = 2,
    kDelta = 3,
    kNoise = 4,
};

} // namespace

std::pair<StratifiedDataset, GroundTruth> generate_scenario(const SimulationScenario& s)
{
    s.validate();
    const Index K = s.K, p = s.p, nk = s.n_k;

    // P0 and its split
    std::mt19937_64 support_rng(derive_seed(s.seed, kSupport));
    std::vector<Index> perm(p);
    std::iota(perm.begin(), perm.end(), Index(0));
    std::shuffle(perm.begin(), perm.end(), support_rng);
    const Index first_count = (s.support_size + 1) / 2;
    std::vector<Index> first(perm.begin(), perm.begin() + first_count);
    std::vector<Index> support(perm.begin(), perm.begin() + s.support_size);
    std::sort(first.begin(), first.end());
    std::sort(support.begin(), support.end());

    const double rootK = std::sqrt(static_cast<double>(K));
    Matrix beta = Matrix::Zero(K, p);
    std::mt19937_64 delta_rng(derive_seed(s.seed, kDelta));
    std::uniform_real_distribution<double> delta_mag(rootK / 2.0, 2.0 * rootK);
    std::bernoulli_distribution delta_sign(0.5);
    for (Index j : support) {
        const bool in_first = std::binary_search(first.begin(), first.end(), j);
        for (Index k = 0; k < K; ++k) {
            // delta is always drawn so the stream does not depend on d_H
            double delta = rootK;
            if (s.delta_mode == DeltaMode::random) {
                const double mag = delta_mag(delta_rng);
                delta = delta_sign(delta_rng) ? mag : -mag;
            }
            const bool low = k < s.d_H;  // strata 1..d_H
            // d_H = 0 disables the heterogeneity branch in both halves
            const bool heterogeneous = s.d_H > 0 && (in_first ? low : !low);
            beta(k, j) = heterogeneous ? 1.0 + delta : 1.0;
        }
    }

    // designs
    const Matrix sigma = toeplitz_covariance(p, s.correlation_base);
    const Matrix L = Eigen::LLT<Matrix>(sigma).matrixL();
    StratifiedDataset ds;
    ds.response_kind = ResponseKind::gaussian;
    double signal = 0.0;
    for (Index k = 0; k < K; ++k) {
        std::mt19937_64 rng(derive_seed(s.seed, kDesign, static_cast<std::uint64_t>(k)));
        std::normal_distribution<double> normal(0.0, 1.0);
        Matrix Z(nk, p);
        for (Index i = 0; i < nk; ++i)
            for (Index j = 0; j < p; ++j) Z(i, j) = normal(rng);
        Stratum st;
        st.X = Z * L.transpose();
        st.y = st.X * beta.row(k).transpose();
        signal += st.y.squaredNorm();
        ds.strata.push_back(std::move(st));
        ds.stratum_labels.push_back(std::to_string(k + 1));
    }
    for (Index j = 0; j < p; ++j) ds.predictor_names.push_back("x" + std::to_string(j + 1));

    const double n = static_cast<double>(K * nk);
    const double sigma2 = signal / n / s.snr;
    const double sd = std::sqrt(sigma2);
    for (Index k = 0; k < K; ++k) {
        std::mt19937_64 rng(derive_seed(s.seed, kNoise, static_cast<std::uint64_t>(k)));
        std::normal_distribution<double> normal(0.0, 1.0);
        auto& y = ds.strata[k].y;
        for (Index i = 0; i < y.size(); ++i) y[i] += sd * normal(rng);
    }

    GroundTruth gt;
    gt.beta = std::move(beta);
    auto mr = mode_reference(gt.beta);
    gt.mode_vector = std::move(mr.mode_vector);
    gt.optimal_reference = std::move(mr.optimal_reference);
    gt.noise_sd = sd;
    gt.support = std::move(support);
    gt.first_half = std::move(first);
    ds.validate();
    return {std::move(ds), std::move(gt)};
}

} // namespace stratlasso
