#include <gtest/gtest.h>
#include <stratlasso/design.hpp>
#include <stratlasso/theory.hpp>
#include "oracles.hpp"

using namespace stratlasso;

namespace {

StratifiedDataset tiny(double x1, double x2)
{
    Stratum a, b;
    a.X = Matrix::Constant(1, 1, x1);
    a.y = Vector::Constant(1, 1.0);
    b.X = Matrix::Constant(1, 1, x2);
    b.y = Vector::Constant(1, 2.0);
    return make_dataset({a, b});
}

StratifiedDataset random_ds(Index K, Index p, Index nk, std::uint64_t seed)
{
    std::vector<Stratum> strata;
    for (Index k = 0; k < K; ++k) {
        Stratum s;
        s.X = oracle::gaussian_matrix(nk + k, p, seed + 2 * k);
        s.y = oracle::gaussian_vector(nk + k, seed + 2 * k + 1);
        strata.push_back(std::move(s));
    }
    return make_dataset(std::move(strata));
}

} // namespace

TEST(PooledResponse, Concatenates)
{
    Stratum a, b;
    a.X = Matrix::Zero(2, 1);
    a.y = Vector(2);
    a.y << 1, 2;
    b.X = Matrix::Zero(1, 1);
    b.y = Vector::Constant(1, 3.0);
    const Vector Y = build_pooled_response(make_dataset({a, b}));
    EXPECT_EQ(Y, (Vector(3) << 1, 2, 3).finished());
}

TEST(PooledResponse, SingleStratumIdentity)
{
    const auto ds = random_ds(1, 2, 5, 3);
    EXPECT_EQ(build_pooled_response(ds), ds.strata[0].y);
}

TEST(Overparam, BlockLayout)
{
    const auto d = build_design_overparam(tiny(2, 3), TauWeights::constant(1.0, 2));
    const Matrix expected = (Matrix(2, 3) << 2, 2, 0, 3, 0, 3).finished();
    EXPECT_EQ(Matrix(d.X), expected);
}

TEST(Overparam, TauScalesGammaColumns)
{
    TauWeights tau;
    tau.tau0 = 1.0;
    tau.tau = (Vector(2) << 2, 1).finished();
    const auto d = build_design_overparam(tiny(2, 3), tau);
    const Matrix expected = (Matrix(2, 3) << 2, 1, 0, 3, 0, 3).finished();
    EXPECT_EQ(Matrix(d.X), expected);
}

TEST(Overparam, NonzeroCount)
{
    for (Index K : {1, 3, 5}) {
        const auto ds = random_ds(K, 4, 6, 10 + K);
        const auto d = build_design_overparam(ds, TauWeights::default_rule(1.0, ds.sizes()));
        EXPECT_EQ(d.X.nonZeros(), 2 * ds.n() * ds.p());
        EXPECT_EQ(d.m(), (K + 1) * 4);
    }
}

TEST(Overparam, MatchesDenseDefinition)
{
    const auto ds = random_ds(3, 4, 5, 21);
    const auto tau = TauWeights::default_rule(0.7, ds.sizes());
    const auto d = build_design_overparam(ds, tau);
    EXPECT_LT((Matrix(d.X) - oracle::dense_overparam(ds, tau.tau)).cwiseAbs().maxCoeff(), 1e-14);
    EXPECT_EQ(d.Y, oracle::stacked_response(ds));
}

TEST(Overparam, RejectsNonpositiveTau)
{
    const auto ds = tiny(1, 1);
    EXPECT_THROW(build_design_overparam(ds, TauWeights::constant(0.0, 2)), ParameterError);
    EXPECT_THROW(build_design_overparam(ds, TauWeights::constant(-1.0, 2)), ParameterError);
}

TEST(Basic, TwoStrataOneRef)
{
    const auto d = build_design_basic(tiny(2, 3), ReferenceVector::uniform(1, 0), TauWeights::constant(1.0, 2));
    ASSERT_EQ(d.m(), 2);
    EXPECT_EQ(d.layout.columns[0], (ColumnTag{BlockKind::mu, -1, 0}));
    EXPECT_EQ(d.layout.columns[1], (ColumnTag{BlockKind::gamma, 1, 0}));
}

TEST(Basic, UniformReferenceDropsBlock)
{
    const auto ds = random_ds(3, 4, 5, 7);
    const auto d = build_design_basic(ds, ReferenceVector::uniform(4, 1), TauWeights::constant(1.0, 3));
    for (const auto& t : d.layout.columns) EXPECT_FALSE(t.block == BlockKind::gamma && t.stratum == 1);
    for (Index j = 0; j < 4; ++j) EXPECT_EQ(d.layout.gamma_col(1, j), -1);
}

TEST(Basic, ColumnCountIsKp)
{
    const auto ds = random_ds(3, 2, 4, 9);
    ReferenceVector refs;
    refs.refs = (IndexVector(2) << 2, 0).finished();
    EXPECT_EQ(build_design_basic(ds, refs, TauWeights::constant(1.0, 3)).m(), 6);
}

TEST(Basic, RejectsBadReferences)
{
    const auto ds = random_ds(2, 2, 4, 9);
    ReferenceVector refs;
    refs.refs = (IndexVector(2) << 0, 2).finished();
    EXPECT_THROW(build_design_basic(ds, refs, TauWeights::constant(1.0, 2)), ParameterError);
}

TEST(Theta, ZeroGivesZero)
{
    const auto layout = DesignLayout::make(DesignKind::overparam, 3, 2);
    const auto dec = theta_to_decomposition(Vector::Zero(8), layout, TauWeights::constant(1.0, 3));
    EXPECT_TRUE(dec.mu.isZero());
    EXPECT_TRUE(dec.gamma.isZero());
    EXPECT_TRUE(dec.beta.isZero());
}

TEST(Theta, GammaScaledByTau)
{
    const auto layout = DesignLayout::make(DesignKind::overparam, 2, 1);
    Vector theta = Vector::Zero(3);
    theta[1] = 1.0;
    const auto dec = theta_to_decomposition(theta, layout, TauWeights::constant(2.0, 2));
    EXPECT_DOUBLE_EQ(dec.gamma(0, 0), 0.5);
    EXPECT_DOUBLE_EQ(dec.beta(0, 0), 0.5);
}

TEST(Theta, LengthMismatch)
{
    const auto layout = DesignLayout::make(DesignKind::overparam, 2, 2);
    EXPECT_THROW(theta_to_decomposition(Vector::Zero(5), layout, TauWeights::constant(1.0, 2)), ParameterError);
}

TEST(Theta, RoundTrip)
{
    ReferenceVector refs;
    refs.refs = (IndexVector(3) << 0, 2, 1).finished();
    TauWeights tau;
    tau.tau0 = 1.0;
    tau.tau = (Vector(3) << 0.5, 1.5, 2.0).finished();
    for (const auto& layout : {DesignLayout::make(DesignKind::overparam, 3, 3),
                               DesignLayout::make(DesignKind::basic, 3, 3, &refs),
                               DesignLayout::make(DesignKind::pooled, 3, 3),
                               DesignLayout::make(DesignKind::independent, 3, 3)}) {
        const Vector theta = oracle::gaussian_vector(layout.m(), 4);
        const auto dec = theta_to_decomposition(theta, layout, tau);
        EXPECT_LT((decomposition_to_theta(dec, layout) - theta).cwiseAbs().maxCoeff(), 1e-15);
        for (Index k = 0; k < 3; ++k)
            EXPECT_LT((dec.beta.row(k) - dec.mu.transpose() - dec.gamma.row(k)).cwiseAbs().maxCoeff(), 1e-12);
    }
}

TEST(Theta, AbsentColumnIsRepresentationError)
{
    const auto refs = ReferenceVector::uniform(2, 0);
    const auto layout = DesignLayout::make(DesignKind::basic, 2, 2, &refs);
    CoefficientDecomposition dec;
    dec.mu = Vector::Zero(2);
    dec.gamma = Matrix::Zero(2, 2);
    dec.gamma(0, 1) = 1.0;
    dec.beta = dec.gamma;
    dec.tau = TauWeights::constant(1.0, 2);
    EXPECT_THROW(decomposition_to_theta(dec, layout), RepresentationError);
}

TEST(Products, AugmentedProductReproducesStratumPredictors)
{
    const auto ds = random_ds(4, 3, 5, 31);
    const auto tau = TauWeights::default_rule(1.3, ds.sizes());
    const auto d = build_design_overparam(ds, tau);
    const Vector theta = oracle::gaussian_vector(d.m(), 2);
    const auto dec = theta_to_decomposition(theta, d.layout, tau);
    const Vector eta = d.X * theta;
    for (Index k = 0; k < ds.K(); ++k) {
        const Vector direct = ds.strata[k].X * (dec.mu + dec.gamma.row(k).transpose());
        EXPECT_LT((eta.segment(ds.offset(k), ds.n_k(k)) - direct).cwiseAbs().maxCoeff(), 1e-12);
    }
}

TEST(Products, MatrixFreeAgreesWithSparse)
{
    const auto ds = random_ds(3, 4, 6, 41);
    const auto tau = TauWeights::default_rule(0.8, ds.sizes());
    ReferenceVector refs;
    refs.refs = (IndexVector(4) << 0, 1, 2, 1).finished();
    for (const auto& layout : {DesignLayout::make(DesignKind::overparam, 3, 4),
                               DesignLayout::make(DesignKind::basic, 3, 4, &refs)}) {
        const auto d = build_design(ds, layout, tau);
        const Vector theta = oracle::gaussian_vector(d.m(), 5);
        const Vector r = oracle::gaussian_vector(d.n(), 6);
        EXPECT_LT((design_multiply(ds, layout, tau, theta) - d.X * theta).cwiseAbs().maxCoeff(), 1e-12);
        EXPECT_LT((design_transpose_multiply(ds, layout, tau, r) - d.X.transpose() * r).cwiseAbs().maxCoeff(), 1e-12);
    }
}

TEST(Products, OptimalBasicMatchesOverparamOnSupport)
{
    auto [ds, gt] = generate_scenario({.K = 6, .p = 8, .n_k = 5, .support_size = 4, .d_H = 2, .seed = 3});
    const auto tau = TauWeights::default_rule(1.0, ds.sizes());
    const ReferenceVector refs{gt.optimal_reference};
    const auto basic = build_design_basic(ds, refs, tau);
    const auto over = build_design_overparam(ds, tau);
    const auto sl = support_sets_from_truth(gt.beta, refs.refs, basic.layout);
    const auto s0 = support_sets_from_truth(gt.beta, refs.refs, over.layout);
    ASSERT_EQ(sl.J.size(), s0.J.size());
    ASSERT_FALSE(sl.J.empty());
    for (std::size_t i = 0; i < sl.J.size(); ++i) {
        EXPECT_EQ(basic.layout.columns[sl.J[i]], over.layout.columns[s0.J[i]]);
        EXPECT_EQ(Matrix(basic.X.col(sl.J[i])), Matrix(over.X.col(s0.J[i])));
    }
}

TEST(Layout, ColumnOrderContract)
{
    const auto layout = DesignLayout::make(DesignKind::overparam, 2, 3);
    ASSERT_EQ(layout.m(), 9);
    for (Index j = 0; j < 3; ++j) EXPECT_EQ(layout.columns[j], (ColumnTag{BlockKind::mu, -1, static_cast<int>(j)}));
    for (Index k = 0; k < 2; ++k)
        for (Index j = 0; j < 3; ++j) {
            EXPECT_EQ(layout.columns[3 + 3 * k + j],
                      (ColumnTag{BlockKind::gamma, static_cast<int>(k), static_cast<int>(j)}));
            EXPECT_EQ(layout.gamma_col(k, j), 3 + 3 * k + j);
        }
}

TEST(Tau, DefaultRule)
{
    const auto tau = TauWeights::default_rule(2.0, {10, 30});
    EXPECT_DOUBLE_EQ(tau.tau[0], 2.0 * std::sqrt(0.25));
    EXPECT_DOUBLE_EQ(tau.tau[1], 2.0 * std::sqrt(0.75));
}
