#include <gtest/gtest.h>
#include <stratlasso/evaluation.hpp>
#include "oracles.hpp"

using namespace stratlasso;

namespace {

StratifiedDataset noise_ds(Index K, Index p, Index nk, std::uint64_t seed)
{
    std::vector<Stratum> strata;
    for (Index k = 0; k < K; ++k) {
        Stratum s;
        s.X = oracle::gaussian_matrix(nk, p, seed + 2 * k);
        s.y = oracle::gaussian_vector(nk, seed + 2 * k + 1);
        strata.push_back(std::move(s));
    }
    return make_dataset(std::move(strata));
}

SupportSets empty_sets(Index K, Index p)
{
    SupportSets s;
    s.S = BoolVector::Constant(p, false);
    s.T = BoolMatrix::Constant(K, p, false);
    return s;
}

std::vector<Index> all_predictors(Index p)
{
    std::vector<Index> u(static_cast<std::size_t>(p));
    std::iota(u.begin(), u.end(), Index{0});
    return u;
}

} // namespace

TEST(SupportEstimate, ThresholdsMagnitudes)
{
    CoefficientDecomposition dec;
    dec.mu = (Vector(3) << 0.0, 1e-9, -0.5).finished();
    dec.gamma = (Matrix(2, 3) << 0, 2, 0, 1e-7, 0, -1e-10).finished();
    const auto s = support_estimate(dec);
    EXPECT_TRUE((s.S == (BoolVector(3) << false, false, true).finished()).all());
    EXPECT_EQ(s.T.count(), 2);
    EXPECT_TRUE(s.T(0, 1));
    EXPECT_TRUE(s.T(1, 0));
    EXPECT_EQ(support_estimate(dec, 1e-6).T.count(), 1);
}

TEST(Accuracy, SingleMiss)
{
    const Index K = 20, p = 20;
    auto truth = empty_sets(K, p);
    auto est = empty_sets(K, p);
    est.T(3, 4) = true;
    const auto a = support_accuracy(est, truth, all_predictors(p));
    EXPECT_DOUBLE_EQ(a.accuracy_T, 399.0 / 400.0);
    EXPECT_DOUBLE_EQ(a.accuracy_S, 1.0);
}

TEST(Accuracy, SymmetricAndRestrictedToUniverse)
{
    const Index K = 3, p = 6;
    auto a = empty_sets(K, p), b = empty_sets(K, p);
    a.S[0] = true;
    a.T(1, 2) = true;
    b.T(2, 5) = true;
    const auto ab = support_accuracy(a, b, all_predictors(p));
    const auto ba = support_accuracy(b, a, all_predictors(p));
    EXPECT_DOUBLE_EQ(ab.accuracy_T, ba.accuracy_T);
    EXPECT_DOUBLE_EQ(ab.accuracy_S, ba.accuracy_S);
    EXPECT_DOUBLE_EQ(ab.accuracy_S, 5.0 / 6.0);
    EXPECT_DOUBLE_EQ(ab.accuracy_T, 16.0 / 18.0);
    const auto sub = support_accuracy(a, b, {1, 3});
    EXPECT_DOUBLE_EQ(sub.accuracy_T, 1.0);
    EXPECT_DOUBLE_EQ(sub.accuracy_S, 1.0);
    const auto none = support_accuracy(a, b, {});
    EXPECT_DOUBLE_EQ(none.accuracy_T, 1.0);
    EXPECT_DOUBLE_EQ(none.accuracy_S, 1.0);
}

TEST(PredictionError, Basics)
{
    const auto ds = noise_ds(3, 4, 10, 5);
    Matrix b = oracle::gaussian_matrix(3, 4, 9);
    EXPECT_DOUBLE_EQ(prediction_error(ds, b, b), 0.0);
    Matrix d = Matrix::Zero(3, 4);
    d(1, 2) = 1.0;
    const double e1 = prediction_error(ds, b, b + d);
    EXPECT_NEAR(e1, ds.strata[1].X.col(2).squaredNorm() / 30.0, 1e-12);
    EXPECT_NEAR(prediction_error(ds, b, b + 2.0 * d), 4.0 * e1, 1e-12);
    EXPECT_THROW(prediction_error(ds, b, Matrix::Zero(2, 4)), ParameterError);
}

TEST(PredictionError, OrthonormalStratumShare)
{
    std::vector<Stratum> strata;
    for (Index nk : {8, 24}) {
        Stratum s;
        s.X = oracle::orthonormal_design(nk, 3, static_cast<std::uint64_t>(nk));
        s.y = Vector::Zero(nk);
        strata.push_back(std::move(s));
    }
    const auto ds = make_dataset(std::move(strata));
    Matrix d = Matrix::Zero(2, 3);
    d(0, 1) = 1.0;
    EXPECT_NEAR(prediction_error(ds, Matrix::Zero(2, 3), d), 8.0 / 32.0, 1e-12);
}

TEST(PredictionError, InvariantToRepresentation)
{
    const auto ds = noise_ds(3, 4, 10, 7);
    const Matrix beta = oracle::gaussian_matrix(3, 4, 3);
    const auto tau = TauWeights::default_rule(1.0, ds.sizes());
    const auto over = DesignLayout::make(DesignKind::overparam, 3, 4);
    const Vector theta = oracle::gaussian_vector(over.m(), 4);
    const auto dec = theta_to_decomposition(theta, over, tau);
    CoefficientDecomposition shifted = dec;
    shifted.mu.array() += 0.7;
    shifted.gamma.array() -= 0.7;
    shifted.beta = shifted.gamma.rowwise() + shifted.mu.transpose();
    EXPECT_NEAR(prediction_error(ds, beta, dec.beta), prediction_error(ds, beta, shifted.beta), 1e-12);
}

TEST(MethodParse, Forms)
{
    EXPECT_EQ(Method::parse("proposal", 3, 2).kind, MethodKind::proposal);
    EXPECT_EQ(Method::parse("pooled", 3, 2).kind, MethodKind::pooled);
    EXPECT_EQ(Method::parse("independent", 3, 2).kind, MethodKind::independent);
    EXPECT_EQ(Method::parse("fused", 3, 2).kind, MethodKind::fused);
    const auto first = Method::parse("basic:first", 3, 2);
    EXPECT_EQ(first.kind, MethodKind::basic);
    EXPECT_EQ(first.refs.refs, IndexVector::Zero(2));
    EXPECT_EQ(Method::parse("basic:last", 3, 2).refs.refs, IndexVector::Constant(2, 2));
    EXPECT_EQ(Method::parse("basic:2", 3, 2).refs.refs, IndexVector::Constant(2, 1));
    IndexVector opt(2);
    opt << 2, kNoReference;
    EXPECT_EQ(Method::parse("basic:oracle", 3, 2, &opt).refs.refs, (IndexVector(2) << 2, 0).finished());
}

TEST(MethodParse, Errors)
{
    EXPECT_THROW(Method::parse("lasso", 3, 2), SchemaError);
    EXPECT_THROW(Method::parse("basic:oracle", 3, 2), SchemaError);
    EXPECT_THROW(Method::parse("basic:0", 3, 2), SchemaError);
    EXPECT_THROW(Method::parse("basic:4", 3, 2), SchemaError);
    EXPECT_THROW(Method::parse("basic:x", 3, 2), SchemaError);
}

TEST(MethodFit, LambdaMaxGivesZero)
{
    const auto ds = noise_ds(3, 5, 12, 21);
    for (const auto& m : {Method::proposal(), Method::pooled(), Method::independent(), Method::fused(),
                          Method::parse("basic:first", 3, 5)}) {
        const double lmax = method_lambda_max(ds, m, 1.5);
        const auto at = fit_method(ds, m, lmax * (1 + 1e-9), 1.5);
        EXPECT_TRUE(at.dec.beta.isZero()) << m.tag;
        if (m.kind == MethodKind::fused) continue;  // fusion can zero the fit earlier
        const auto below = fit_method(ds, m, 0.9 * lmax, 1.5);
        EXPECT_FALSE(below.dec.beta.isZero()) << m.tag;
    }
}

TEST(Folds, StratifiedAndBalanced)
{
    const auto ds = noise_ds(3, 2, 17, 1);
    const auto f = make_folds(ds, 5, 42);
    ASSERT_EQ(f.size(), 3u);
    for (const auto& fk : f) {
        std::vector<int> count(5, 0);
        for (int id : fk) ++count[static_cast<std::size_t>(id)];
        for (int c : count) {
            EXPECT_GE(c, 3);
            EXPECT_LE(c, 4);
        }
    }
    EXPECT_EQ(make_folds(ds, 5, 42), f);
    EXPECT_NE(make_folds(ds, 5, 43), f);
    const auto test = subset_by_fold(ds, f, 2, true);
    const auto train = subset_by_fold(ds, f, 2, false);
    for (Index k = 0; k < 3; ++k) {
        EXPECT_GT(test.n_k(k), 0);
        EXPECT_EQ(test.n_k(k) + train.n_k(k), ds.n_k(k));
    }
}

TEST(Folds, TooSmallStratum)
{
    auto ds = noise_ds(2, 2, 10, 1);
    ds.strata[1].X.conservativeResize(3, 2);
    ds.strata[1].y.conservativeResize(3);
    EXPECT_THROW(make_folds(ds, 5, 1), ParameterError);
    EXPECT_THROW(make_folds(ds, 1, 1), ParameterError);
}

TEST(CrossValidate, DeterministicAndShaped)
{
    const auto ds = noise_ds(3, 4, 15, 31);
    CVOptions opt;
    opt.lambda_points = 10;
    opt.tau0_grid = {0.5, 1.0, 2.0};
    const auto a = cross_validate(ds, Method::proposal(), opt);
    const auto b = cross_validate(ds, Method::proposal(), opt);
    ASSERT_EQ(a.points.size(), 30u);
    for (std::size_t i = 0; i < a.points.size(); ++i) {
        EXPECT_EQ(a.points[i].mean_loss, b.points[i].mean_loss);
        EXPECT_EQ(a.points[i].se, b.points[i].se);
    }
    EXPECT_EQ(a.best, b.best);
    opt.threads = 3;
    const auto c = cross_validate(ds, Method::proposal(), opt);
    for (std::size_t i = 0; i < a.points.size(); ++i) EXPECT_EQ(a.points[i].mean_loss, c.points[i].mean_loss);
    const auto pooled = cross_validate(ds, Method::pooled(), opt);
    EXPECT_EQ(pooled.points.size(), 10u);
    EXPECT_EQ(pooled.best_point().tau0, 1.0);
}

TEST(CrossValidate, SingleGridPoint)
{
    const auto ds = noise_ds(2, 3, 10, 41);
    CVOptions opt;
    opt.lambda_grid = {0.1};
    opt.tau0_grid = {1.0};
    const auto r = cross_validate(ds, Method::proposal(), opt);
    ASSERT_EQ(r.points.size(), 1u);
    EXPECT_EQ(r.best, 0);
    EXPECT_EQ(r.min_index, 0);
}

TEST(CrossValidate, OneStandardErrorRule)
{
    const auto ds = noise_ds(3, 6, 20, 51);
    CVOptions opt;
    opt.lambda_points = 15;
    const auto r = cross_validate(ds, Method::proposal(), opt);
    const auto& mn = r.points[static_cast<std::size_t>(r.min_index)];
    const auto& best = r.best_point();
    EXPECT_LE(best.mean_loss, mn.mean_loss + mn.se);
    for (const auto& pt : r.points)
        if (pt.mean_loss <= mn.mean_loss + mn.se) EXPECT_LE(pt.lambda1, best.lambda1);
}

TEST(CrossValidate, LargeLambdaMatchesNullLoss)
{
    const auto ds = noise_ds(3, 4, 20, 61);
    CVOptions opt;
    opt.lambda_grid = {1e3, 1e-2};
    opt.tau0_grid = {1.0};
    const auto r = cross_validate(ds, Method::proposal(), opt);
    double null_loss = 0.0;
    for (int f = 0; f < 5; ++f) {
        const auto test = subset_by_fold(ds, r.folds, f, true);
        double ss = 0.0;
        for (const auto& s : test.strata) ss += s.y.squaredNorm();
        null_loss += ss / static_cast<double>(test.n()) / 5.0;
    }
    EXPECT_NEAR(r.points.front().mean_loss, null_loss, 1e-12);
}

TEST(CrossValidate, PureNoiseSelectsSparseMean)
{
    const Index K = 4, p = 10, nk = 50;
    int sparse = 0;
    CVOptions opt;
    opt.lambda_points = 30;
    for (std::uint64_t rep = 0; rep < 20; ++rep) {
        const auto ds = noise_ds(K, p, nk, 1000 + 50 * rep);
        opt.seed = rep + 1;
        const auto cv = cross_validate(ds, Method::proposal(), opt);
        const auto& best = cv.best_point();
        const auto fit = fit_method(ds, Method::proposal(), best.lambda1, best.tau0);
        if ((fit.dec.mu.array().abs() > 1e-8).count() <= 2) ++sparse;
    }
    EXPECT_GE(sparse, 18);
}

TEST(CrossValidate, RejectsBadTauGrid)
{
    const auto ds = noise_ds(2, 2, 10, 1);
    CVOptions opt;
    opt.tau0_grid = {};
    EXPECT_THROW(cross_validate(ds, Method::proposal(), opt), ParameterError);
    opt.tau0_grid = {1.0, -1.0};
    EXPECT_THROW(cross_validate(ds, Method::proposal(), opt), ParameterError);
}

TEST(HeldoutLoss, LogisticAtZero)
{
    auto ds = noise_ds(2, 2, 6, 3);
    for (auto& s : ds.strata) s.y = (s.y.array() > 0).cast<double>();
    ds.response_kind = ResponseKind::binary;
    EXPECT_NEAR(heldout_loss(ds, Matrix::Zero(2, 2), Loss::logistic), std::log(2.0), 1e-15);
}
