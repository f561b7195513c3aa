#include <gtest/gtest.h>
#include <stratlasso/dataset.hpp>
#include "oracles.hpp"
#include <map>
#include <set>
#include <sstream>

using namespace stratlasso;

namespace {

const char* kTwoStrata =
    "g,y,a,b,c\n"
    "s1,1.0,1,2,3\n"
    "s1,2.0,4,5,6\n"
    "s2,3.0,7,8,9\n"
    "s1,4.0,1,1,1\n"
    "s2,5.0,2,2,2\n"
    "s1,6.0,3,3,3\n"
    "s2,7.0,4,4,4\n"
    "s1,8.0,5,5,5\n"
    "s2,9.0,6,6,6\n"
    "s1,10.0,7,7,7\n";

StratifiedDataset parse(const std::string& text, ResponseKind kind = ResponseKind::gaussian)
{
    std::istringstream in(text);
    return read_csv(in, "g", "y", kind);
}

} // namespace

TEST(LoadCsv, TwoStrataStructure)
{
    const auto ds = parse(kTwoStrata);
    EXPECT_EQ(ds.K(), 2);
    EXPECT_EQ(ds.p(), 3);
    EXPECT_EQ(ds.n_k(0), 6);
    EXPECT_EQ(ds.n_k(1), 4);
    EXPECT_EQ(ds.n(), 10);
    EXPECT_EQ(ds.stratum_labels, (std::vector<std::string>{"s1", "s2"}));
    EXPECT_EQ(ds.predictor_names, (std::vector<std::string>{"a", "b", "c"}));
    EXPECT_DOUBLE_EQ(ds.strata[1].X(0, 2), 9.0);
    EXPECT_DOUBLE_EQ(ds.strata[1].y(3), 9.0);
}

TEST(LoadCsv, StrataOrderedByFirstAppearance)
{
    const auto ds = parse("g,y,a\nzeta,1,1\nalpha,2,2\nzeta,3,3\n");
    EXPECT_EQ(ds.stratum_labels, (std::vector<std::string>{"zeta", "alpha"}));
}

TEST(LoadCsv, MissingStratumColumnIsSchemaError)
{
    std::istringstream in("grp,y,a\n1,1,1\n");
    EXPECT_THROW(read_csv(in, "g", "y"), SchemaError);
}

TEST(LoadCsv, MissingResponseColumnIsSchemaError)
{
    std::istringstream in("g,resp,a\n1,1,1\n");
    EXPECT_THROW(read_csv(in, "g", "y"), SchemaError);
}

TEST(LoadCsv, SingleStratumIsValid)
{
    const auto ds = parse("g,y,a,b\nonly,1,1,2\nonly,2,3,4\n");
    EXPECT_EQ(ds.K(), 1);
    EXPECT_EQ(ds.n(), 2);
}

TEST(LoadCsv, NonNumericCellReportsRow)
{
    try {
        parse("g,y,a\n1,1,1\n1,2,oops\n");
        FAIL() << "expected ParseError";
    } catch (const ParseError& e) {
        EXPECT_EQ(e.row(), 2);
    }
}

TEST(LoadCsv, BinaryResponseValidated)
{
    EXPECT_NO_THROW(parse("g,y,a\n1,0,1\n1,1,2\n", ResponseKind::binary));
    EXPECT_THROW(parse("g,y,a\n1,0.5,1\n", ResponseKind::binary), ParseError);
}

TEST(LoadCsv, QuotedFields)
{
    const auto ds = parse("g,y,a\n\"s,1\",1,2\n\"s,1\",3,4\n");
    EXPECT_EQ(ds.stratum_labels.front(), "s,1");
    EXPECT_EQ(ds.n(), 2);
}

TEST(LoadCsv, WriteReadRoundTrip)
{
    const auto ds = parse(kTwoStrata);
    std::ostringstream out;
    write_csv(out, ds, "g", "y");
    const auto back = parse(out.str());
    ASSERT_EQ(back.K(), ds.K());
    for (Index k = 0; k < ds.K(); ++k) {
        EXPECT_EQ(back.strata[k].X, ds.strata[k].X);
        EXPECT_EQ(back.strata[k].y, ds.strata[k].y);
    }
}

TEST(LoadCsv, MissingFileIsSchemaError)
{
    EXPECT_THROW(load_csv("/nonexistent/file.csv", "g", "y"), SchemaError);
}

TEST(Standardize, ScalesColumnByHalf)
{
    Stratum s;
    s.X = Matrix(4, 1);
    s.X << 2, -2, 2, -2;   // ||x|| = 4 = 2 sqrt(4)
    s.y = Vector::Zero(4);
    const auto ds = make_dataset({s});
    const auto [out, rec] = standardize(ds);
    EXPECT_DOUBLE_EQ(rec.scale(0, 0), 0.5);
    EXPECT_NEAR(out.strata[0].X.col(0).norm() / 2.0, 1.0, 1e-15);
}

TEST(Standardize, Idempotent)
{
    auto [ds, truth] = generate_scenario({.K = 3, .p = 5, .n_k = 20, .support_size = 2, .d_H = 1});
    const auto [once, r1] = standardize(ds);
    const auto [twice, r2] = standardize(once);
    EXPECT_TRUE((r2.scale.array() == 1.0).all());
    for (Index k = 0; k < 3; ++k) EXPECT_EQ(twice.strata[k].X, once.strata[k].X);
}

TEST(Standardize, ZeroColumnRecorded)
{
    std::vector<Stratum> strata(3);
    for (int k = 0; k < 3; ++k) {
        strata[k].X = oracle::gaussian_matrix(5, 2, 10 + k);
        strata[k].y = Vector::Zero(5);
    }
    strata[1].X.col(1).setZero();
    const auto [out, rec] = standardize(make_dataset(strata));
    ASSERT_EQ(rec.zero_columns.size(), 1u);
    EXPECT_EQ(rec.zero_columns[0], (std::pair<Index, Index>{1, 1}));
    EXPECT_DOUBLE_EQ(rec.scale(1, 1), 1.0);
}

TEST(Standardize, BackTransform)
{
    auto [ds, truth] = generate_scenario({.K = 2, .p = 3, .n_k = 10, .support_size = 2, .d_H = 1});
    const auto [sd, rec] = standardize(ds);
    const Matrix b_std = oracle::gaussian_matrix(2, 3, 5);
    const Matrix b = rec.to_original(b_std);
    for (Index k = 0; k < 2; ++k)
        EXPECT_LT((ds.strata[k].X * b.row(k).transpose() - sd.strata[k].X * b_std.row(k).transpose())
                      .cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Scenario, PaperSupportStructure)
{
    SimulationScenario s;  // K=20, p=100, n_k=50, |P0|=20, d_H=3, constant
    auto [ds, gt] = generate_scenario(s);
    Index nonzero_cols = 0;
    for (Index j = 0; j < s.p; ++j) nonzero_cols += gt.beta.col(j).cwiseAbs().maxCoeff() > 0;
    EXPECT_EQ(nonzero_cols, 20);
    for (Index j : gt.support) {
        std::map<double, int> counts;
        for (Index k = 0; k < s.K; ++k) ++counts[gt.beta(k, j)];
        ASSERT_EQ(counts.size(), 2u);
        std::multiset<int> sizes;
        for (auto& [v, c] : counts) sizes.insert(c);
        EXPECT_EQ(sizes, (std::multiset<int>{3, 17}));
    }
    EXPECT_EQ(gt.first_half.size(), 10u);
}

TEST(Scenario, OddSupportSplitsCeiling)
{
    auto [ds, gt] = generate_scenario({.K = 4, .p = 10, .n_k = 5, .support_size = 5, .d_H = 1});
    EXPECT_EQ(gt.first_half.size(), 3u);
}

TEST(Scenario, HomogeneousWhenNoHeterogeneity)
{
    auto [ds, gt] = generate_scenario({.K = 6, .p = 10, .n_k = 5, .support_size = 4, .d_H = 0});
    for (Index j : gt.support)
        for (Index k = 0; k < 6; ++k) EXPECT_EQ(gt.beta(k, j), 1.0);
}

TEST(Scenario, Deterministic)
{
    SimulationScenario s{.K = 4, .p = 8, .n_k = 7, .support_size = 3, .d_H = 1,
                         .delta_mode = DeltaMode::random, .seed = 99};
    auto [a, ga] = generate_scenario(s);
    auto [b, gb] = generate_scenario(s);
    for (Index k = 0; k < 4; ++k) {
        EXPECT_EQ(a.strata[k].X, b.strata[k].X);
        EXPECT_EQ(a.strata[k].y, b.strata[k].y);
    }
    EXPECT_EQ(ga.beta, gb.beta);
}

TEST(Scenario, SupportIndependentOfSampleSize)
{
    SimulationScenario s{.K = 4, .p = 30, .n_k = 7, .support_size = 6, .d_H = 1, .seed = 5};
    auto [a, ga] = generate_scenario(s);
    s.n_k = 40;
    auto [b, gb] = generate_scenario(s);
    EXPECT_EQ(ga.support, gb.support);
    EXPECT_EQ(ga.beta, gb.beta);
}

TEST(Scenario, RandomDeltaRange)
{
    SimulationScenario s{.K = 9, .p = 12, .n_k = 3, .support_size = 12, .d_H = 2,
                         .delta_mode = DeltaMode::random, .seed = 3};
    auto [ds, gt] = generate_scenario(s);
    bool saw_neg = false, saw_pos = false;
    for (Index j = 0; j < s.p; ++j)
        for (Index k = 0; k < s.K; ++k) {
            const double d = gt.beta(k, j) - 1.0;
            if (d == 0.0) continue;
            EXPECT_GE(std::abs(d), 1.5 - 1e-12);
            EXPECT_LE(std::abs(d), 6.0 + 1e-12);
            (d < 0 ? saw_neg : saw_pos) = true;
        }
    EXPECT_TRUE(saw_neg && saw_pos);
}

TEST(Scenario, ToeplitzCovarianceRecovered)
{
    SimulationScenario s{.K = 10, .p = 6, .n_k = 1000, .support_size = 2, .d_H = 1, .seed = 11};
    auto [ds, gt] = generate_scenario(s);
    Matrix cov = Matrix::Zero(6, 6);
    for (const auto& st : ds.strata) cov += st.X.transpose() * st.X;
    cov /= static_cast<double>(ds.n());
    EXPECT_LT((cov - toeplitz_covariance(6, 0.5)).norm(), 0.1);
}

TEST(Scenario, SignalToNoiseExact)
{
    SimulationScenario s{.K = 5, .p = 10, .n_k = 20, .support_size = 4, .d_H = 2, .snr = 2.5, .seed = 4};
    auto [ds, gt] = generate_scenario(s);
    double signal = 0.0;
    for (Index k = 0; k < 5; ++k) signal += (ds.strata[k].X * gt.beta.row(k).transpose()).squaredNorm();
    EXPECT_NEAR(signal / (ds.n() * gt.noise_sd * gt.noise_sd), 2.5, 1e-12);
}

TEST(Scenario, InvalidParameters)
{
    EXPECT_THROW(generate_scenario({.K = 2, .p = 3, .n_k = 5, .support_size = 4, .d_H = 1}), ParameterError);
    EXPECT_THROW(generate_scenario({.K = 2, .p = 3, .n_k = 5, .support_size = 1, .d_H = 3}), ParameterError);
    EXPECT_THROW(generate_scenario({.K = 2, .p = 3, .n_k = 0, .support_size = 1, .d_H = 1}), ParameterError);
}

TEST(Scenario, ModeDeviationCount)
{
    for (Index dH : {1, 3, 6}) {
        SimulationScenario s{.K = 20, .p = 40, .n_k = 2, .support_size = 10, .d_H = dH, .seed = 8};
        auto [ds, gt] = generate_scenario(s);
        for (Index j : gt.support) {
            EXPECT_EQ(gt.beta(gt.optimal_reference[j], j), gt.mode_vector[j]);
            Index dev = 0;
            for (Index k = 0; k < s.K; ++k) dev += !value_equal(gt.beta(k, j), gt.mode_vector[j]);
            EXPECT_EQ(dev, std::min(dH, s.K - dH));
        }
    }
}

TEST(ModeReference, ClearMajority)
{
    Matrix b(3, 1);
    b << 1, 1, 3;
    const auto m = mode_reference(b);
    EXPECT_EQ(m.mode_vector[0], 1.0);
    EXPECT_TRUE(m.optimal_reference[0] == 0 || m.optimal_reference[0] == 1);
}

TEST(ModeReference, ThreeWayTieGoesToZero)
{
    Matrix b(2, 1);
    b << 2, 3;
    const auto m = mode_reference(b);
    EXPECT_EQ(m.mode_vector[0], 0.0);
    EXPECT_EQ(m.optimal_reference[0], kNoReference);
}

TEST(ModeReference, ZeroAttained)
{
    Matrix b(3, 1);
    b << 0, 0, 5;
    const auto m = mode_reference(b);
    EXPECT_EQ(m.mode_vector[0], 0.0);
    EXPECT_TRUE(m.optimal_reference[0] == 0 || m.optimal_reference[0] == 1);
}

TEST(ModeReference, ToleranceEquality)
{
    Matrix b(3, 1);
    b << 2.0, 2.0 + 1e-12, 7.0;
    EXPECT_NEAR(mode_reference(b).mode_vector[0], 2.0, 1e-11);
}

TEST(ModeReference, MatchesBruteForce)
{
    std::mt19937_64 rng(17);
    std::uniform_int_distribution<int> pick(-2, 2);
    for (int trial = 0; trial < 300; ++trial) {
        const Index K = 1 + trial % 6;
        Matrix b(K, 1);
        std::vector<double> v;
        for (Index k = 0; k < K; ++k) {
            b(k, 0) = pick(rng);
            v.push_back(b(k, 0));
        }
        const auto m = mode_reference(b);
        EXPECT_EQ(m.mode_vector[0], oracle::mode_bruteforce(v));
        if (m.optimal_reference[0] != kNoReference)
            EXPECT_EQ(b(m.optimal_reference[0], 0), m.mode_vector[0]);
        else
            EXPECT_EQ(m.mode_vector[0], 0.0);
    }
}

TEST(Seeds, DerivedSeedsDiffer)
{
    std::set<std::uint64_t> seen;
    for (std::uint64_t purpose = 1; purpose <= 4; ++purpose)
        for (std::uint64_t i = 0; i < 50; ++i) seen.insert(derive_seed(7, purpose, i));
    EXPECT_EQ(seen.size(), 200u);
    EXPECT_EQ(derive_seed(7, 1, 3), derive_seed(7, 1, 3));
}
