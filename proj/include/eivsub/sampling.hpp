#pragma once

#include <algorithm>
#include <numeric>
#include <vector>

#include "eivsub/errors.hpp"
#include "eivsub/linalg.hpp"
#include "eivsub/types.hpp"

// Construction of all sampling designs: uniform, leverage (BLEV), the
// A-optimal (mV) and L-optimal (mVc) residual-based probabilities, their
// uncorrected variants, and deterministic IBOSS selection.

namespace eivsub {

inline SamplingPlan uniform_probs(Index n) {
    if (n < 1) throw empty_dataset_error("uniform_probs: n must be >= 1");
    SamplingPlan plan;
    plan.kind = PlanKind::probabilistic;
    plan.design = Design::UNIF;
    plan.probs = Vector::Constant(n, 1.0 / static_cast<double>(n));
    return plan;
}

namespace detail {

// Normalize nonnegative scores to a probability vector (Kahan total).
inline SamplingPlan normalize_scores(Vector scores, Design design) {
    linalg::KahanAccumulator acc;
    for (Index i = 0; i < scores.size(); ++i) acc.add(scores[i]);
    const double total = acc.value();
    if (!(total > 0))
        throw degenerate_plan_error(
            std::string(design_name(design)) +
            " plan degenerate: all scores are zero (perfect fit?)");
    SamplingPlan plan;
    plan.kind = PlanKind::probabilistic;
    plan.design = design;
    plan.probs = scores / total;
    return plan;
}

}  // namespace detail

// A-optimal scores |y_i - W_i'beta| * ||H_W^{-1} W_i|| with
// H_W = W'W/n - Sigma_uu.  One factorization + blocked solves: O(n p^2).
inline SamplingPlan optimal_probs_mv(const Dataset& data, const Vector& beta_pilot,
                                     const ErrorCovariance& sigma,
                                     Design tag = Design::mV) {
    data.validate();
    if (beta_pilot.size() != data.p() || sigma.p() != data.p())
        throw dimension_error("optimal_probs_mv: beta/sigma dimension != p");
    const double n = static_cast<double>(data.n());
    const Matrix hw = linalg::gram(data.w) / n - sigma.sigma_uu;
    linalg::SymSolver f(hw, "H_W (W'W/n - Sigma_uu)");
    const Vector resid = data.y - data.w * beta_pilot;
    Vector scores(data.n());
    for (Index lo = 0; lo < data.n(); lo += linalg::kBlockRows) {
        const Index len = std::min(linalg::kBlockRows, data.n() - lo);
        Matrix solved = f.solve(data.w.middleRows(lo, len).transpose());
        scores.segment(lo, len) =
            solved.colwise().norm().transpose().cwiseProduct(
                resid.segment(lo, len).cwiseAbs());
    }
    return detail::normalize_scores(std::move(scores), tag);
}

// L-optimal scores |y_i - W_i'beta| * ||W_i||: O(np), no factorization.
inline SamplingPlan optimal_probs_mvc(const Dataset& data, const Vector& beta_pilot,
                                      Design tag = Design::mVc) {
    data.validate();
    if (beta_pilot.size() != data.p())
        throw dimension_error("optimal_probs_mvc: beta dimension != p");
    const Vector resid = data.y - data.w * beta_pilot;
    const Vector scores = data.w.rowwise().norm().cwiseProduct(resid.cwiseAbs());
    return detail::normalize_scores(scores, tag);
}

// Leverage sampling: pi_i = h_ii / sum h_jj with h_ii = W_i'(W'W)^{-1}W_i.
inline SamplingPlan leverage_probs(const Dataset& data) {
    data.validate();
    const Matrix g = linalg::gram(data.w);
    linalg::SymSolver f(g, "W'W");
    Vector scores(data.n());
    for (Index lo = 0; lo < data.n(); lo += linalg::kBlockRows) {
        const Index len = std::min(linalg::kBlockRows, data.n() - lo);
        const auto block = data.w.middleRows(lo, len);
        Matrix solved = f.solve(block.transpose());
        scores.segment(lo, len) =
            (block.array() * solved.transpose().array()).rowwise().sum();
    }
    return detail::normalize_scores(scores, Design::BLEV);
}

// Deterministic extreme-value subdata selection.  Cycling through columns,
// take floor(k/2p) smallest and largest not-yet-selected records per column
// (ties to the lower index); any shortfall is filled with the records of
// largest max-absolute column value.
inline SamplingPlan iboss_select(const Dataset& data, Index k) {
    data.validate();
    if (k > data.n()) throw size_error("iboss_select: k > n");
    if (k < 1) throw size_error("iboss_select: k must be >= 1");
    const Index n = data.n(), p = data.p();
    const Index half = k / (2 * p);
    std::vector<bool> taken(n, false);
    std::vector<Index> chosen;
    chosen.reserve(k);

    std::vector<Index> order(n);
    for (Index j = 0; j < p; ++j) {
        const auto col = data.w.col(j);
        std::iota(order.begin(), order.end(), Index{0});
        std::sort(order.begin(), order.end(), [&](Index a, Index b) {
            if (col[a] != col[b]) return col[a] < col[b];
            return a < b;  // ties -> lower index first
        });
        Index got = 0;
        for (Index t = 0; t < n && got < half; ++t) {  // smallest
            const Index i = order[t];
            if (!taken[i]) { taken[i] = true; chosen.push_back(i); ++got; }
        }
        std::sort(order.begin(), order.end(), [&](Index a, Index b) {
            if (col[a] != col[b]) return col[a] > col[b];
            return a < b;
        });
        got = 0;
        for (Index t = 0; t < n && got < half; ++t) {  // largest
            const Index i = order[t];
            if (!taken[i]) { taken[i] = true; chosen.push_back(i); ++got; }
        }
    }
    if (static_cast<Index>(chosen.size()) < k) {
        const Vector rowmax = data.w.cwiseAbs().rowwise().maxCoeff();
        std::iota(order.begin(), order.end(), Index{0});
        std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) {
            return rowmax[a] > rowmax[b];
        });
        for (Index i : order) {
            if (static_cast<Index>(chosen.size()) >= k) break;
            if (!taken[i]) { taken[i] = true; chosen.push_back(i); }
        }
    }
    std::sort(chosen.begin(), chosen.end());
    SamplingPlan plan;
    plan.kind = PlanKind::deterministic;
    plan.design = Design::IBOSS;
    plan.indices = std::move(chosen);
    return plan;
}

// Same formulas with Sigma_uu forced to zero and a naive (OLS) pilot.
inline SamplingPlan uncorrected_variant(Design plan_kind, const Dataset& data,
                                        const Vector& beta_pilot_naive) {
    if (plan_kind == Design::mV)
        return optimal_probs_mv(data, beta_pilot_naive,
                                ErrorCovariance::zero(data.p()), Design::UmV);
    if (plan_kind == Design::mVc)
        return optimal_probs_mvc(data, beta_pilot_naive, Design::UmVc);
    throw parameter_error("uncorrected_variant: plan_kind must be mV or mVc");
}

}  // namespace eivsub
