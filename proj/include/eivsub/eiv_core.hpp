#pragma once

#include <algorithm>
#include <cmath>
#include <string>

#include "eivsub/errors.hpp"
#include "eivsub/linalg.hpp"
#include "eivsub/types.hpp"

// Corrected-likelihood estimation for the additive measurement-error model
// y = X'beta + eps observed through W = X + U, U ~ (0, Sigma_uu).

namespace eivsub {

// l(beta) = (1/2n) sum (y_i - W_i'beta)^2 - (1/2) beta' Sigma_uu beta.
// The correction removes the attenuation bias; the value may be negative.
inline double corrected_loss(const Vector& beta, const Dataset& data,
                             const ErrorCovariance& sigma) {
    if (beta.size() != data.p() || sigma.p() != data.p())
        throw dimension_error("corrected_loss: beta/sigma dimension != p");
    const Vector resid = data.y - data.w * beta;
    const double quad = beta.dot(sigma.sigma_uu * beta);
    return resid.squaredNorm() / (2.0 * static_cast<double>(data.n())) - 0.5 * quad;
}

inline Vector corrected_loss_gradient(const Vector& beta, const Dataset& data,
                                      const ErrorCovariance& sigma) {
    if (beta.size() != data.p() || sigma.p() != data.p())
        throw dimension_error("corrected_loss_gradient: beta/sigma dimension != p");
    const Vector resid = data.y - data.w * beta;
    return -linalg::tv(data.w, resid) / static_cast<double>(data.n()) -
           sigma.sigma_uu * beta;
}

struct SolveOptions {
    bool ridge_fallback = false;
};

// beta-hat = (sum W_i W_i' - n Sigma_uu)^{-1} sum W_i y_i, computed as a
// linear solve on the corrected Gram (1/n scale for conditioning).
inline CoefficientEstimate full_corrected_estimate(const Dataset& data,
                                                   const ErrorCovariance& sigma,
                                                   const SolveOptions& opts = {}) {
    data.validate();
    if (sigma.p() != data.p())
        throw dimension_error("full_corrected_estimate: sigma dimension != p");
    const double n = static_cast<double>(data.n());
    const Matrix g = linalg::gram(data.w) / n - sigma.sigma_uu;
    const Vector b = linalg::tv(data.w, data.y) / n;
    auto sol = linalg::solve_checked(g, b, "corrected Gram W'W/n - Sigma_uu",
                                     opts.ridge_fallback);
    return {sol.x.col(0), "full-corrected", sol.rcond};
}

// Pooled within-record covariance of the replicates:
// Sigma-hat = sum_i sum_j (W_ij - Wbar_i)(W_ij - Wbar_i)' / sum_i (J_i - 1).
inline ErrorCovariance estimate_sigma_uu(const ReplicatedDataset& rep) {
    rep.validate();
    const Index excess = rep.total_excess();
    if (excess < 1)
        throw insufficient_replication_error(
            "estimate_sigma_uu: every record has J_i = 1; need sum (J_i - 1) >= 1");
    const Index p = rep.p();
    Matrix s = Matrix::Zero(p, p);
    for (const auto& rec : rep.replicates) {
        Vector mean = Vector::Zero(p);
        for (const auto& v : rec) mean += v;
        mean /= static_cast<double>(rec.size());
        for (const auto& v : rec) {
            const Vector d = v - mean;
            s.noalias() += d * d.transpose();
        }
    }
    s /= static_cast<double>(excess);
    s = 0.5 * (s + s.transpose()).eval();
    return {s, SigmaSource::estimated_from_replicates};
}

// Record-mean estimator with per-record attenuation correction:
// { sum_i (Wbar_i Wbar_i' - J_i^{-1} Sigma) }^{-1} sum_i Wbar_i y_i.
inline CoefficientEstimate replicate_averaged_estimate(const ReplicatedDataset& rep,
                                                       const ErrorCovariance& sigma,
                                                       const SolveOptions& opts = {}) {
    rep.validate();
    if (sigma.p() != rep.p())
        throw dimension_error("replicate_averaged_estimate: sigma dimension != p");
    const Matrix wbar = rep.means();
    Matrix g = linalg::gram(wbar);
    double inv_j_sum = 0.0;
    for (const auto& rec : rep.replicates)
        inv_j_sum += 1.0 / static_cast<double>(rec.size());
    g -= inv_j_sum * sigma.sigma_uu;
    const Vector b = linalg::tv(wbar, rep.y);
    auto sol = linalg::solve_checked(
        g, b, "replicate-averaged corrected Gram", opts.ridge_fallback);
    return {sol.x.col(0), "replicate-averaged", sol.rcond};
}

// Residual variance net of the measurement-error inflation beta'Sigma beta,
// floored away from zero.
inline double estimate_noise_variance(const Dataset& data, const Vector& beta,
                                      const ErrorCovariance& sigma) {
    const Vector resid = data.y - data.w * beta;
    const double mse = resid.squaredNorm() / static_cast<double>(data.n());
    return std::max(mse - beta.dot(sigma.sigma_uu * beta), 1e-12);
}

// Plug-in sandwich (1/n) H^{-1} Gamma H^{-1} with H = W'W/n - Sigma_uu and
// Gamma = s2 H + H (b'Sb) + (Sb)(Sb)' + Sigma (b'Sb) + s2 Sigma.
// The fourth-moment term uses the Gaussian-U (Isserlis) closed form.
inline Matrix full_asymptotic_covariance(const Dataset& data, const Vector& beta,
                                         const ErrorCovariance& sigma,
                                         double noise_var) {
    data.validate();
    if (beta.size() != data.p() || sigma.p() != data.p())
        throw dimension_error("full_asymptotic_covariance: beta/sigma dimension != p");
    if (!(noise_var > 0)) throw parameter_error("noise_var must be > 0");
    const double n = static_cast<double>(data.n());
    const Matrix h = linalg::gram(data.w) / n - sigma.sigma_uu;
    const Vector sb = sigma.sigma_uu * beta;
    const double quad = beta.dot(sb);
    Matrix gamma = noise_var * h + quad * h + sb * sb.transpose() +
                   quad * sigma.sigma_uu + noise_var * sigma.sigma_uu;
    linalg::SymSolver f(h, "corrected Gram W'W/n - Sigma_uu");
    Matrix hi = f.solve(Matrix::Identity(data.p(), data.p()));
    Matrix v = hi * gamma * hi / n;
    return 0.5 * (v + v.transpose()).eval();
}

}  // namespace eivsub
