#include <stratlasso/design.hpp>
#include <numeric>

namespace stratlasso {

ReferenceVector ReferenceVector::uniform(Index p, int stratum)
{
    return {IndexVector::Constant(p, stratum)};
}

void ReferenceVector::validate(Index K) const
{
    for (Index j = 0; j < refs.size(); ++j) {
        if (refs[j] < 0 || refs[j] >= K)
            throw ParameterError("reference stratum out of range for predictor " + std::to_string(j));
    }
}

TauWeights TauWeights::default_rule(double tau0, const std::vector<Index>& sizes)
{
    TauWeights w;
    w.tau0 = tau0;
    w.tau.resize(static_cast<Index>(sizes.size()));
    const double n = static_cast<double>(std::accumulate(sizes.begin(), sizes.end(), Index(0)));
    for (std::size_t k = 0; k < sizes.size(); ++k)
        w.tau[static_cast<Index>(k)] = tau0 * std::sqrt(static_cast<double>(sizes[k]) / n);
    return w;
}

TauWeights TauWeights::constant(double value, Index K)
{
    TauWeights w;
    w.tau0 = value;
    w.tau = Vector::Constant(K, value);
    return w;
}

void TauWeights::validate(Index K) const
{
    if (tau.size() != K) throw ParameterError("tau length must equal K");
    for (Index k = 0; k < K; ++k)
        if (!(tau[k] > 0.0) || !std::isfinite(tau[k]))
            throw ParameterError("tau_k must be positive and finite");
}

DesignLayout DesignLayout::make(DesignKind kind, Index K, Index p, const ReferenceVector* refs)
{
    DesignLayout lay;
    lay.kind = kind;
    lay.K = K;
    lay.p = p;
    lay.mu_col = Eigen::VectorXi::Constant(p, -1);
    lay.gamma_col = Eigen::MatrixXi::Constant(K, p, -1);
    if (kind == DesignKind::basic) {
        if (!refs) throw ParameterError("basic design requires a reference vector");
        if (refs->refs.size() != p) throw ParameterError("reference vector length must equal p");
        refs->validate(K);
        lay.refs = refs->refs;
    }
    if (kind != DesignKind::independent) {
        for (Index j = 0; j < p; ++j) {
            lay.mu_col[j] = static_cast<int>(lay.columns.size());
            lay.columns.push_back({BlockKind::mu, -1, static_cast<int>(j)});
        }
    }
    if (kind != DesignKind::pooled) {
        for (Index k = 0; k < K; ++k) {
            for (Index j = 0; j < p; ++j) {
                if (kind == DesignKind::basic && lay.refs[j] == k) continue;
                lay.gamma_col(k, j) = static_cast<int>(lay.columns.size());
                lay.columns.push_back({BlockKind::gamma, static_cast<int>(k), static_cast<int>(j)});
            }
        }
    }
    return lay;
}

Vector build_pooled_response(const StratifiedDataset& ds)
{
    Vector Y(ds.n());
    Index off = 0;
    for (const auto& s : ds.strata) {
        Y.segment(off, s.y.size()) = s.y;
        off += s.y.size();
    }
    return Y;
}

AugmentedDesign build_design(const StratifiedDataset& ds, const DesignLayout& layout,
                             const TauWeights& tau)
{
    if (layout.K != ds.K() || layout.p != ds.p())
        throw ParameterError("layout does not match dataset dimensions");
    tau.validate(ds.K());

    AugmentedDesign d;
    d.Y = build_pooled_response(ds);
    d.layout = layout;
    d.tau = tau;
    d.row_offsets.resize(ds.K() + 1);
    d.row_offsets[0] = 0;
    for (Index k = 0; k < ds.K(); ++k) d.row_offsets[k + 1] = d.row_offsets[k] + ds.n_k(k);

    const Index n = ds.n();
    const Index m = layout.m();
    Eigen::VectorXi nnz(m);
    for (Index c = 0; c < m; ++c) {
        const auto& tag = layout.columns[c];
        nnz[c] = static_cast<int>(tag.block == BlockKind::mu ? n : ds.n_k(tag.stratum));
    }
    d.X.resize(n, m);
    d.X.reserve(nnz);
    for (Index c = 0; c < m; ++c) {
        const auto& tag = layout.columns[c];
        if (tag.block == BlockKind::mu) {
            for (Index k = 0; k < ds.K(); ++k) {
                const auto& X = ds.strata[k].X;
                for (Index i = 0; i < X.rows(); ++i)
                    d.X.insert(d.row_offsets[k] + i, c) = X(i, tag.predictor);
            }
        } else {
            const auto& X = ds.strata[tag.stratum].X;
            const double inv = 1.0 / tau.tau[tag.stratum];
            for (Index i = 0; i < X.rows(); ++i)
                d.X.insert(d.row_offsets[tag.stratum] + i, c) = X(i, tag.predictor) * inv;
        }
    }
    d.X.makeCompressed();
    return d;
}

AugmentedDesign build_design_overparam(const StratifiedDataset& ds, const TauWeights& tau)
{
    return build_design(ds, DesignLayout::make(DesignKind::overparam, ds.K(), ds.p()), tau);
}

AugmentedDesign build_design_basic(const StratifiedDataset& ds, const ReferenceVector& refs,
                                   const TauWeights& tau)
{
    return build_design(ds, DesignLayout::make(DesignKind::basic, ds.K(), ds.p(), &refs), tau);
}

Vector design_multiply(const StratifiedDataset& ds, const DesignLayout& layout,
                       const TauWeights& tau, const Vector& theta)
{
    if (theta.size() != layout.m()) throw ParameterError("theta length does not match layout");
    const auto dec = theta_to_decomposition(theta, layout, tau);
    Vector out(ds.n());
    Index off = 0;
    for (Index k = 0; k < ds.K(); ++k) {
        const auto& X = ds.strata[k].X;
        out.segment(off, X.rows()) = X * dec.beta.row(k).transpose();
        off += X.rows();
    }
    return out;
}

Vector design_transpose_multiply(const StratifiedDataset& ds, const DesignLayout& layout,
                                 const TauWeights& tau, const Vector& r)
{
    if (r.size() != ds.n()) throw ParameterError("residual length does not match dataset");
    // per-stratum correlations X^(k)^T r^(k), then assembled by tag
    Matrix corr(ds.K(), ds.p());
    Index off = 0;
    for (Index k = 0; k < ds.K(); ++k) {
        const auto& X = ds.strata[k].X;
        corr.row(k) = (X.transpose() * r.segment(off, X.rows())).transpose();
        off += X.rows();
    }
    Vector out(layout.m());
    for (Index c = 0; c < layout.m(); ++c) {
        const auto& tag = layout.columns[c];
        out[c] = tag.block == BlockKind::mu ? corr.col(tag.predictor).sum()
                                            : corr(tag.stratum, tag.predictor) / tau.tau[tag.stratum];
    }
    return out;
}

CoefficientDecomposition theta_to_decomposition(const Vector& theta, const DesignLayout& layout,
                                                const TauWeights& tau)
{
    if (theta.size() != layout.m())
        throw ParameterError("theta length " + std::to_string(theta.size()) +
                             " does not match layout size " + std::to_string(layout.m()));
    CoefficientDecomposition dec;
    dec.tau = tau;
    dec.mu = Vector::Zero(layout.p);
    dec.gamma = Matrix::Zero(layout.K, layout.p);
    for (Index c = 0; c < layout.m(); ++c) {
        const auto& tag = layout.columns[c];
        if (tag.block == BlockKind::mu)
            dec.mu[tag.predictor] = theta[c];
        else
            dec.gamma(tag.stratum, tag.predictor) = theta[c] / tau.tau[tag.stratum];
    }
    dec.beta = dec.gamma.rowwise() + dec.mu.transpose();
    return dec;
}

Vector decomposition_to_theta(const CoefficientDecomposition& dec, const DesignLayout& layout)
{
    if (dec.mu.size() != layout.p || dec.gamma.rows() != layout.K || dec.gamma.cols() != layout.p)
        throw ParameterError("decomposition dimensions do not match layout");
    Vector theta(layout.m());
    for (Index j = 0; j < layout.p; ++j) {
        if (layout.mu_col[j] < 0 && dec.mu[j] != 0.0)
            throw RepresentationError("layout has no mu column for predictor " + std::to_string(j));
        if (layout.mu_col[j] >= 0) theta[layout.mu_col[j]] = dec.mu[j];
        for (Index k = 0; k < layout.K; ++k) {
            const int c = layout.gamma_col(k, j);
            if (c < 0) {
                if (dec.gamma(k, j) != 0.0)
                    throw RepresentationError("nonzero gamma(" + std::to_string(k) + ", " +
                                              std::to_string(j) + ") has no column in the layout");
                continue;
            }
            theta[c] = dec.gamma(k, j) * dec.tau.tau[k];
        }
    }
    return theta;
}

std::string to_string(DesignKind kind)
{
    switch (kind) {
    case DesignKind::overparam: return "overparam";
    case DesignKind::basic: return "basic";
    case DesignKind::pooled: return "pooled";
    case DesignKind::independent: return "independent";
    }
    return "unknown";
}

} // namespace stratlasso
