#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "eivsub/eiv_core.hpp"
#include "eivsub/errors.hpp"
#include "eivsub/linalg.hpp"
#include "eivsub/rng.hpp"
#include "eivsub/sampling.hpp"
#include "eivsub/types.hpp"

// With-replacement subsampling, the inverse-probability-weighted corrected
// estimator, the two-step (pilot + optimal draw) driver, and the plug-in
// covariance of the pooled estimate.

namespace eivsub {

inline WeightedSubsample draw_with_replacement(const SamplingPlan& plan, Index r,
                                               rng::Stream& stream) {
    if (plan.kind != PlanKind::probabilistic)
        throw parameter_error("draw_with_replacement: plan must be probabilistic");
    plan.validate();
    if (r < 1) throw parameter_error("draw_with_replacement: r must be >= 1");
    rng::CategoricalSampler sampler(plan.probs);
    WeightedSubsample sub;
    sub.indices.resize(r);
    sub.probs_at_draw.resize(r);
    for (Index t = 0; t < r; ++t) {
        const Index i = sampler.draw(stream);
        sub.indices[t] = i;
        sub.probs_at_draw[t] = plan.probs[i];
    }
    sub.r = r;
    return sub;
}

inline WeightedSubsample draw_with_replacement(const SamplingPlan& plan, Index r,
                                               std::uint64_t seed) {
    auto s = rng::stream(seed, 0, rng::stage::draw);
    return draw_with_replacement(plan, r, s);
}

namespace detail {

// Gather drawn rows/responses once so the weighted Gram is a single product.
struct GatheredSubsample {
    Matrix w;        // r x p
    Vector y;        // r
    Vector inv_rpi;  // 1 / (r * pi*)
};

inline GatheredSubsample gather(const WeightedSubsample& sub, const Dataset& data) {
    const Index r = static_cast<Index>(sub.indices.size());
    if (r == 0) throw parameter_error("subsample is empty");
    GatheredSubsample g;
    g.w.resize(r, data.p());
    g.y.resize(r);
    g.inv_rpi.resize(r);
    for (Index t = 0; t < r; ++t) {
        const Index i = sub.indices[t];
        if (i < 0 || i >= data.n())
            throw dimension_error("subsample index out of range");
        const double pi = sub.probs_at_draw[t];
        if (!(pi > 0))
            throw parameter_error("subsample has a non-positive draw probability");
        g.w.row(t) = data.w.row(i);
        g.y[t] = data.y[i];
        g.inv_rpi[t] = 1.0 / (static_cast<double>(r) * pi);
    }
    return g;
}

}  // namespace detail

// beta-tilde = [(1/n) sum (r pi*)^{-1} W* W*' - Sigma_uu]^{-1}
//              (1/n) sum (r pi*)^{-1} W* y*  -- direct solve, no iteration.
inline CoefficientEstimate weighted_corrected_estimate(const WeightedSubsample& sub,
                                                       const Dataset& data,
                                                       const ErrorCovariance& sigma,
                                                       const SolveOptions& opts = {}) {
    if (sigma.p() != data.p())
        throw dimension_error("weighted_corrected_estimate: sigma dimension != p");
    const auto g = detail::gather(sub, data);
    const double n = static_cast<double>(data.n());
    const Matrix gram = linalg::gram_weighted(g.w, g.inv_rpi) / n - sigma.sigma_uu;
    const Vector rhs = linalg::tv(g.w, g.inv_rpi.cwiseProduct(g.y)) / n;
    auto sol = linalg::solve_checked(gram, rhs, "weighted corrected Gram",
                                     opts.ridge_fallback);
    return {sol.x.col(0), "subsample-weighted", sol.rcond};
}

// (1/(nR)) sum W* W*' / pi*  (the H_W moment of a pooled subsample).
inline Matrix h_w_moment(const WeightedSubsample& sub, const Dataset& data) {
    const auto g = detail::gather(sub, data);
    return linalg::gram_weighted(g.w, g.inv_rpi) / static_cast<double>(data.n());
}

// (1/(R^2 n^2)) sum e*^2 W* W*' / pi*^2 with e* = y* - W*'beta (the first,
// pi-dependent term of V-breve_c).
inline Matrix vc_moment(const WeightedSubsample& sub, const Vector& beta,
                        const Dataset& data) {
    const auto g = detail::gather(sub, data);
    const double n = static_cast<double>(data.n());
    const Index r = static_cast<Index>(sub.indices.size());
    const Vector resid = g.y - g.w * beta;
    const Vector wts = (g.inv_rpi.array() * resid.array()).square().matrix() *
                       (static_cast<double>(r) * static_cast<double>(r));
    // (1/(r pi))^2 e^2, then scale by 1/(R^2 n^2) with R = r.
    return linalg::gram_weighted(g.w, wts) /
           (static_cast<double>(r) * static_cast<double>(r) * n * n);
}

// V-breve = H-breve^{-1} V-breve_c H-breve^{-1}, eigenvalue-clipped to the
// PSD cone when the subtracted rank-one term overshoots.
inline PluginCovariance plugin_covariance(const WeightedSubsample& pooled,
                                          const Vector& beta, const Dataset& data,
                                          const ErrorCovariance& sigma) {
    if (beta.size() != data.p() || sigma.p() != data.p())
        throw dimension_error("plugin_covariance: beta/sigma dimension != p");
    const double big_r = static_cast<double>(pooled.indices.size());
    const Matrix hb = h_w_moment(pooled, data) - sigma.sigma_uu;
    const Vector sb = sigma.sigma_uu * beta;
    const Matrix vc = vc_moment(pooled, beta, data) - (sb * sb.transpose()) / big_r;
    linalg::SymSolver f(hb, "H_W plug-in moment");
    Matrix hi = f.solve(Matrix::Identity(data.p(), data.p()));
    Matrix v = hi * vc * hi;
    v = 0.5 * (v + v.transpose()).eval();
    auto clip = linalg::psd_clip(v);
    return {std::move(clip.m), clip.clipped};
}

struct TwoStepOptions {
    double pi_floor = 0.0;  // mixing weight with the uniform plan, in [0, 1]
    bool ridge_fallback = false;
};

// Two-step driver: r0 uniform pilot draws -> pilot estimate -> optimal plan
// at the pilot -> r optimal draws -> pooled estimate over all r0 + r draws,
// each weighted by its draw-time probability (1/n for pilot draws).
inline TwoStepResult two_step_estimate(const Dataset& data, const ErrorCovariance& sigma,
                                       Index r0, Index r, Design criterion,
                                       std::uint64_t seed,
                                       const TwoStepOptions& opts = {}) {
    data.validate();
    if (criterion != Design::mV && criterion != Design::mVc)
        throw parameter_error("two_step_estimate: criterion must be mV or mVc");
    if (r0 < data.p() + 1)
        throw parameter_error("two_step_estimate: r0 must be >= p + 1");
    if (r < 0) throw parameter_error("two_step_estimate: r must be >= 0");
    if (opts.pi_floor < 0 || opts.pi_floor > 1)
        throw parameter_error("two_step_estimate: pi_floor must lie in [0, 1]");

    const SamplingPlan unif = uniform_probs(data.n());
    auto pilot_stream = rng::stream(seed, 0, rng::stage::pilot_draw);
    const WeightedSubsample pilot_draws =
        draw_with_replacement(unif, r0, pilot_stream);
    CoefficientEstimate pilot;
    try {
        pilot = weighted_corrected_estimate(pilot_draws, data, sigma,
                                            {opts.ridge_fallback});
    } catch (const singular_system_error& e) {
        throw pilot_failure_error(std::string("pilot estimate failed (") + e.what() +
                                  "); consider raising r0");
    }

    SamplingPlan plan;
    try {
        plan = (criterion == Design::mV)
                   ? optimal_probs_mv(data, pilot.beta, sigma)
                   : optimal_probs_mvc(data, pilot.beta);
    } catch (const degenerate_plan_error&) {
        plan = unif;  // perfect pilot fit: fall back to uniform
    }
    if (opts.pi_floor > 0) {
        plan.probs = (1.0 - opts.pi_floor) * plan.probs +
                     opts.pi_floor * unif.probs;
    }

    WeightedSubsample pooled = pilot_draws;
    pooled.probs_at_draw.conservativeResize(r0 + r);
    for (Index t = 0; t < r0; ++t) pooled.probs_at_draw[t] = unif.probs[0];
    if (r > 0) {
        auto main_stream = rng::stream(seed, 0, rng::stage::main_draw);
        const WeightedSubsample main = draw_with_replacement(plan, r, main_stream);
        pooled.indices.insert(pooled.indices.end(), main.indices.begin(),
                              main.indices.end());
        pooled.probs_at_draw.segment(r0, r) = main.probs_at_draw;
    }
    pooled.r = r0 + r;

    auto combined = weighted_corrected_estimate(pooled, data, sigma,
                                                {opts.ridge_fallback});
    auto plug = plugin_covariance(pooled, combined.beta, data, sigma);

    TwoStepResult out;
    out.beta = std::move(combined.beta);
    out.pilot_beta = std::move(pilot.beta);
    out.plan = std::move(plan);
    out.cov = std::move(plug.cov);
    out.cov_clipped = plug.psd_clipped;
    out.r0 = r0;
    out.r = r;
    out.solve_condition = combined.solve_condition;
    return out;
}

}  // namespace eivsub
