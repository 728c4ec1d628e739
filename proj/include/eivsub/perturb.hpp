#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "eivsub/eiv_core.hpp"
#include "eivsub/errors.hpp"
#include "eivsub/linalg.hpp"
#include "eivsub/rng.hpp"
#include "eivsub/types.hpp"

// Perturbation subsampling: random-weight corrected estimation with a
// Bernoulli(q) gate, m-fold replication, and the between-replicate
// conditional variance estimate.

namespace eivsub {

// Distribution of the positive weight nu (mean 1/q in every scheme; only the
// moments enter the theory, so the generator is pluggable):
//   exponential: Exp(mean 1/q),  b2 = 1/q^2, a = 2 - q
//   bootstrap:   Gamma(1/q, 1),  b2 = 1/q,   a = 1 exactly
//   degenerate:  nu = 1/q,       b2 = 0,     a = 1 - q
enum class WeightScheme { exponential, bootstrap, degenerate };

inline const char* weight_scheme_name(WeightScheme s) {
    switch (s) {
        case WeightScheme::exponential: return "exponential";
        case WeightScheme::bootstrap: return "bootstrap";
        case WeightScheme::degenerate: return "degenerate";
    }
    return "?";
}

inline WeightScheme weight_scheme_from(const std::string& s) {
    if (s == "exponential") return WeightScheme::exponential;
    if (s == "bootstrap") return WeightScheme::bootstrap;
    if (s == "degenerate") return WeightScheme::degenerate;
    throw parameter_error("unknown weight scheme: " + s);
}

inline PerturbationWeights generate_weights(Index n, double q, rng::Stream& stream,
                                            WeightScheme scheme = WeightScheme::exponential) {
    if (!(q > 0.0) || q > 1.0)
        throw parameter_error("generate_weights: q must lie in (0, 1]");
    if (n < 1) throw empty_dataset_error("generate_weights: n must be >= 1");
    PerturbationWeights w;
    w.q = q;
    switch (scheme) {
        case WeightScheme::exponential: w.b2 = 1.0 / (q * q); break;
        case WeightScheme::bootstrap: w.b2 = 1.0 / q; break;
        case WeightScheme::degenerate: w.b2 = 0.0; break;
    }
    w.a = 1.0 - q + w.b2 * q * q;
    w.psi = Vector::Zero(n);
    const double inv_q = 1.0 / q;
    for (Index i = 0; i < n; ++i) {
        if (!stream.bernoulli(q)) continue;  // nu drawn lazily: psi_i = 0 here
        switch (scheme) {
            case WeightScheme::exponential: w.psi[i] = stream.exponential(inv_q); break;
            case WeightScheme::bootstrap: w.psi[i] = stream.gamma(inv_q, 1.0); break;
            case WeightScheme::degenerate: w.psi[i] = inv_q; break;
        }
    }
    return w;
}

inline PerturbationWeights generate_weights(Index n, double q, std::uint64_t seed,
                                            WeightScheme scheme = WeightScheme::exponential) {
    auto s = rng::stream(seed, 0, rng::stage::weights(0, 0));
    return generate_weights(n, q, s, scheme);
}

// beta-check = [(1/n) sum psi_i W_i W_i' - Sigma_uu]^{-1} (1/n) sum psi_i W_i y_i.
// Only the ~qn rows with psi_i > 0 are touched.
inline CoefficientEstimate perturbed_estimate(const Dataset& data,
                                              const ErrorCovariance& sigma,
                                              const PerturbationWeights& weights,
                                              const SolveOptions& opts = {}) {
    data.validate();
    if (sigma.p() != data.p())
        throw dimension_error("perturbed_estimate: sigma dimension != p");
    if (weights.psi.size() != data.n())
        throw dimension_error("perturbed_estimate: psi length != n");

    std::vector<Index> nz;
    nz.reserve(static_cast<size_t>(weights.q * static_cast<double>(data.n()) * 1.3) + 16);
    for (Index i = 0; i < data.n(); ++i)
        if (weights.psi[i] > 0) nz.push_back(i);
    if (nz.empty())
        throw parameter_error("perturbed_estimate: all perturbation weights are zero");

    const Index k = static_cast<Index>(nz.size());
    Matrix ws(k, data.p());
    Vector psis(k), ys(k);
    for (Index t = 0; t < k; ++t) {
        ws.row(t) = data.w.row(nz[t]);
        psis[t] = weights.psi[nz[t]];
        ys[t] = data.y[nz[t]];
    }
    const double n = static_cast<double>(data.n());
    const Matrix gram = linalg::gram_weighted(ws, psis) / n - sigma.sigma_uu;
    const Vector rhs = linalg::tv(ws, psis.cwiseProduct(ys)) / n;
    auto sol =
        linalg::solve_checked(gram, rhs, "perturbed corrected Gram", opts.ridge_fallback);
    return {sol.x.col(0), "perturbed-corrected", sol.rcond};
}

struct ClepsOptions {
    WeightScheme scheme = WeightScheme::exponential;
    bool ridge_fallback = false;
};

// Full perturbation estimator: q = r/n, m independent weight replicates,
// average, and (for m >= 2) the between-replicate variance
// (1/(m(m-1))) sum_k (beta_k - mean)(beta_k - mean)'.
// A replicate whose perturbed Gram is singular is redrawn under the next
// sub-seed, at most 3 retries.
inline ClepsResult cleps_estimate(const Dataset& data, const ErrorCovariance& sigma,
                                  Index r, int m, std::uint64_t seed,
                                  const ClepsOptions& opts = {}) {
    data.validate();
    if (m < 1) throw parameter_error("cleps_estimate: m must be >= 1");
    if (r < 1 || r > data.n())
        throw parameter_error("cleps_estimate: r must lie in [1, n]");
    const double q = static_cast<double>(r) / static_cast<double>(data.n());

    ClepsResult res;
    res.m = m;
    res.r = r;
    res.q = q;
    res.m_guidance_warning = static_cast<double>(m) >= static_cast<double>(r) / 10.0;
    res.per_rep.resize(data.p(), m);

    for (int k = 0; k < m; ++k) {
        bool done = false;
        for (std::uint64_t attempt = 0; attempt <= 3 && !done; ++attempt) {
            auto s = rng::stream(seed, static_cast<std::uint64_t>(k),
                                 rng::stage::weights(static_cast<std::uint64_t>(k), attempt));
            const auto w = generate_weights(data.n(), q, s, opts.scheme);
            try {
                auto est = perturbed_estimate(data, sigma, w, {opts.ridge_fallback});
                res.per_rep.col(k) = est.beta;
                done = true;
            } catch (const singular_system_error&) {
                if (attempt == 3) throw;
            }
        }
    }

    res.beta_mean = res.per_rep.rowwise().mean();
    if (m >= 2) {
        Matrix c = Matrix::Zero(data.p(), data.p());
        for (int k = 0; k < m; ++k) {
            const Vector d = res.per_rep.col(k) - res.beta_mean;
            c.noalias() += d * d.transpose();
        }
        c /= static_cast<double>(m) * static_cast<double>(m - 1);
        res.cov = 0.5 * (c + c.transpose()).eval();
    }
    return res;
}

}  // namespace eivsub
