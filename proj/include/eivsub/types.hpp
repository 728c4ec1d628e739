#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "eivsub/errors.hpp"

namespace eivsub {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

template <typename Derived>
inline void require_finite(const Eigen::MatrixBase<Derived>& m, const std::string& name) {
    if (!m.allFinite()) throw parameter_error(name + " contains NaN or Inf");
}

// Observed design W (n x p) and response y (n).
struct Dataset {
    Matrix w;
    Vector y;

    Index n() const { return w.rows(); }
    Index p() const { return w.cols(); }

    void validate() const {
        if (w.rows() != y.size())
            throw dimension_error("Dataset: w has " + std::to_string(w.rows()) +
                                  " rows but y has " + std::to_string(y.size()));
        if (w.rows() < 1 || w.cols() < 1)
            throw empty_dataset_error("Dataset: need n >= 1 and p >= 1");
        if (w.rows() < w.cols())
            throw dimension_error("Dataset: n < p");
        require_finite(w, "Dataset.w");
        require_finite(y, "Dataset.y");
    }
};

enum class SigmaSource { known, estimated_from_replicates, zero };

// Measurement-error covariance Sigma_uu.
struct ErrorCovariance {
    Matrix sigma_uu;
    SigmaSource source = SigmaSource::known;

    Index p() const { return sigma_uu.rows(); }

    static ErrorCovariance zero(Index p) {
        return {Matrix::Zero(p, p), SigmaSource::zero};
    }
    static ErrorCovariance isotropic(double sigma_u2, Index p) {
        if (sigma_u2 < 0) throw parameter_error("sigma_u2 must be >= 0");
        return {sigma_u2 * Matrix::Identity(p, p), SigmaSource::known};
    }

    void validate() const {
        if (sigma_uu.rows() != sigma_uu.cols())
            throw dimension_error("ErrorCovariance: matrix not square");
        require_finite(sigma_uu, "ErrorCovariance.sigma_uu");
        const double scale = std::max(1.0, sigma_uu.cwiseAbs().maxCoeff());
        if ((sigma_uu - sigma_uu.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
            throw parameter_error("ErrorCovariance: matrix not symmetric");
        Eigen::SelfAdjointEigenSolver<Matrix> es(sigma_uu, Eigen::EigenvaluesOnly);
        const double tr = sigma_uu.trace();
        if (es.eigenvalues().minCoeff() < -1e-10 * std::max(1.0, tr))
            throw parameter_error("ErrorCovariance: matrix not positive semidefinite");
    }
};

// Per-record replicate measurements W_{i,j}, j = 1..J_i, plus the response.
struct ReplicatedDataset {
    std::vector<std::vector<Vector>> replicates;
    Vector y;

    Index n() const { return static_cast<Index>(replicates.size()); }
    Index p() const {
        return replicates.empty() || replicates.front().empty()
                   ? 0
                   : replicates.front().front().size();
    }
    Index total_excess() const {  // sum of (J_i - 1)
        Index s = 0;
        for (const auto& r : replicates) s += static_cast<Index>(r.size()) - 1;
        return s;
    }

    // Record means W-bar as an n x p matrix.
    Matrix means() const {
        Matrix m(n(), p());
        for (Index i = 0; i < n(); ++i) {
            Vector acc = Vector::Zero(p());
            for (const auto& v : replicates[i]) acc += v;
            m.row(i) = acc.transpose() / static_cast<double>(replicates[i].size());
        }
        return m;
    }

    void validate() const {
        if (replicates.empty()) throw empty_dataset_error("ReplicatedDataset: no records");
        if (static_cast<Index>(replicates.size()) != y.size())
            throw dimension_error("ReplicatedDataset: record count != length of y");
        const Index pp = p();
        if (pp < 1) throw empty_dataset_error("ReplicatedDataset: p < 1");
        for (const auto& rec : replicates) {
            if (rec.empty())
                throw dimension_error("ReplicatedDataset: record with no replicates");
            for (const auto& v : rec) {
                if (v.size() != pp)
                    throw dimension_error("ReplicatedDataset: replicate length != p");
                require_finite(v, "ReplicatedDataset replicate");
            }
        }
        require_finite(y, "ReplicatedDataset.y");
    }
};

struct CoefficientEstimate {
    Vector beta;
    std::string method;
    double solve_condition = 0.0;  // reciprocal condition estimate of the solved matrix
};

enum class PlanKind { probabilistic, deterministic };
enum class Design { UNIF, BLEV, mV, mVc, UmV, UmVc, IBOSS };

inline const char* design_name(Design d) {
    switch (d) {
        case Design::UNIF: return "UNIF";
        case Design::BLEV: return "BLEV";
        case Design::mV: return "mV";
        case Design::mVc: return "mVc";
        case Design::UmV: return "UmV";
        case Design::UmVc: return "UmVc";
        case Design::IBOSS: return "IBOSS";
    }
    return "?";
}

// Either a probability vector over records or a deterministic index set.
struct SamplingPlan {
    PlanKind kind = PlanKind::probabilistic;
    Vector probs;                 // probabilistic only
    std::vector<Index> indices;   // deterministic only
    Design design = Design::UNIF;

    void validate() const {
        if (kind == PlanKind::probabilistic) {
            if (probs.size() < 1) throw empty_dataset_error("SamplingPlan: empty probs");
            if (probs.minCoeff() < 0)
                throw parameter_error("SamplingPlan: negative probability");
            if (std::abs(probs.sum() - 1.0) > 1e-12)
                throw parameter_error("SamplingPlan: probabilities do not sum to 1");
            if (probs.maxCoeff() <= 0)
                throw degenerate_plan_error("SamplingPlan: no strictly positive probability");
        } else {
            std::vector<bool> seen;
            for (Index i : indices) {
                if (i < 0) throw parameter_error("SamplingPlan: negative index");
                if (static_cast<size_t>(i) >= seen.size()) seen.resize(i + 1, false);
                if (seen[i]) throw parameter_error("SamplingPlan: duplicate index");
                seen[i] = true;
            }
        }
    }
};

// With-replacement draws plus the probability each draw was made under.
struct WeightedSubsample {
    std::vector<Index> indices;
    Vector probs_at_draw;
    Index r = 0;  // draw count; equals indices.size()
};

struct PluginCovariance {
    Matrix cov;
    bool psd_clipped = false;  // eigenvalue clipping was applied
};

struct TwoStepResult {
    Vector beta;        // combined estimate
    Vector pilot_beta;
    SamplingPlan plan;  // step-2 plan actually used
    Matrix cov;         // plug-in covariance of beta
    bool cov_clipped = false;
    Index r0 = 0;
    Index r = 0;
    double solve_condition = 0.0;
};

// psi_i = mu_i * nu_i with mu ~ Bernoulli(q) and E(nu) = 1/q, Var(nu) = b2.
struct PerturbationWeights {
    Vector psi;
    double q = 0.0;
    double b2 = 0.0;
    double a = 0.0;  // 1 - q + b2 q^2
};

struct ClepsResult {
    Vector beta_mean;
    Matrix per_rep;  // p x m, column k = replicate estimate k
    std::optional<Matrix> cov;  // between-replicate estimate; absent when m == 1
    int m = 0;
    Index r = 0;
    double q = 0.0;
    bool m_guidance_warning = false;  // set when m >= r/10

    const Matrix& covariance() const {
        if (!cov)
            throw variance_unavailable_error(
                "between-replicate variance needs m >= 2 replicates");
        return *cov;
    }
};

}  // namespace eivsub
