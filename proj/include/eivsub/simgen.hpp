#pragma once

#include <cmath>
#include <cstdint>
#include <cstdlib>

#include "eivsub/errors.hpp"
#include "eivsub/rng.hpp"
#include "eivsub/types.hpp"

// Synthetic scenarios: AR(1)-correlated covariates observed with additive
// Gaussian error, normal or heavy-tailed (t3) latent design, and the
// univariate attenuation illustration.

namespace eivsub {

enum class SimCase { normal, student_t3 };
// t3(0, Sigma): is Sigma the scale matrix (variance 3*Sigma) or the target
// covariance?  Default: scale matrix.
enum class TConvention { scale_matrix, covariance_matrix };

struct SimScenario {
    SimCase sim_case = SimCase::normal;
    Index n = 0;
    Index p = 0;
    Vector beta_true;
    double sigma_u2 = 0.0;
    double noise_var = 1.0;
    std::uint64_t seed = 0;
    TConvention t_convention = TConvention::scale_matrix;

    void validate() const {
        if (n < 1 || p < 1 || n < p) throw parameter_error("SimScenario: need n >= p >= 1");
        if (beta_true.size() != p)
            throw dimension_error("SimScenario: beta_true length != p");
        if (sigma_u2 < 0) throw parameter_error("SimScenario: sigma_u2 must be >= 0");
        if (!(noise_var > 0)) throw parameter_error("SimScenario: noise_var must be > 0");
    }

    ErrorCovariance error_covariance() const {
        return ErrorCovariance::isotropic(sigma_u2, p);
    }
};

struct GeneratedData {
    Matrix x_true;
    Dataset dataset;  // w = x_true + u
    Matrix u;
};

// AR(1) correlation: Sigma_jk = rho^|j-k|.
inline Matrix ar1_correlation(Index p, double rho = 0.5) {
    Matrix s(p, p);
    for (Index j = 0; j < p; ++j)
        for (Index k = 0; k < p; ++k) s(j, k) = std::pow(rho, std::abs(j - k));
    return s;
}

namespace detail {

// One row-interleaved pass (x row, u row, eps) so that generate() and
// generate_dataset() see identical draws from the same scenario.
template <typename RowSink>
void generate_rows(const SimScenario& sc, RowSink&& sink) {
    sc.validate();
    Matrix chol = ar1_correlation(sc.p).llt().matrixL();
    if (sc.sim_case == SimCase::student_t3 &&
        sc.t_convention == TConvention::covariance_matrix)
        chol /= std::sqrt(3.0);  // t3 covariance = 3 * scale
    const double su = std::sqrt(sc.sigma_u2);
    const double se = std::sqrt(sc.noise_var);
    auto s = rng::stream(sc.seed, 0, rng::stage::data);
    Vector z(sc.p), x(sc.p), u(sc.p);
    for (Index i = 0; i < sc.n; ++i) {
        for (Index j = 0; j < sc.p; ++j) z[j] = s.normal();
        x.noalias() = chol * z;
        if (sc.sim_case == SimCase::student_t3)
            x /= std::sqrt(s.chi_squared(3.0) / 3.0);  // Gaussian scale mixture
        for (Index j = 0; j < sc.p; ++j) u[j] = su * s.normal();
        const double y = x.dot(sc.beta_true) + se * s.normal();
        sink(i, x, u, y);
    }
}

}  // namespace detail

inline GeneratedData generate(const SimScenario& sc) {
    GeneratedData g;
    g.x_true.resize(sc.n, sc.p);
    g.u.resize(sc.n, sc.p);
    g.dataset.w.resize(sc.n, sc.p);
    g.dataset.y.resize(sc.n);
    detail::generate_rows(sc, [&](Index i, const Vector& x, const Vector& u, double y) {
        g.x_true.row(i) = x.transpose();
        g.u.row(i) = u.transpose();
        g.dataset.w.row(i) = (x + u).transpose();
        g.dataset.y[i] = y;
    });
    return g;
}

// Memory-lean variant: same draws, keeps only the observables.
inline Dataset generate_dataset(const SimScenario& sc) {
    Dataset d;
    d.w.resize(sc.n, sc.p);
    d.y.resize(sc.n);
    detail::generate_rows(sc, [&](Index i, const Vector& x, const Vector& u, double y) {
        d.w.row(i) = (x + u).transpose();
        d.y[i] = y;
    });
    return d;
}

// Univariate attenuation illustration: y = 0.5 + 0.5 x + eps with x ~ N(0,1),
// observed through w = x + u, u ~ N(0, 0.25).  Intercept column appended and
// error-free (zero row/col in Sigma_uu); naive OLS slope attenuates to
// 0.5/(1 + 0.25) = 0.4.
struct Example1Data {
    GeneratedData data;
    ErrorCovariance sigma;  // diag(0, 0.25)
    Vector beta_true;       // (0.5, 0.5)
};

inline Example1Data example1_scenario(std::uint64_t seed = 20260815ULL,
                                      Index n = 1000, double sigma_u2 = 0.25) {
    Example1Data e;
    e.beta_true = Vector(2);
    e.beta_true << 0.5, 0.5;
    Matrix suu = Matrix::Zero(2, 2);
    suu(1, 1) = sigma_u2;
    e.sigma = {suu, SigmaSource::known};

    e.data.x_true.resize(n, 2);
    e.data.u.resize(n, 2);
    e.data.dataset.w.resize(n, 2);
    e.data.dataset.y.resize(n);
    const double su = std::sqrt(sigma_u2);
    auto s = rng::stream(seed, 0, rng::stage::data);
    for (Index i = 0; i < n; ++i) {
        const double x = s.normal();
        const double u = su * s.normal();
        const double y = 0.5 + 0.5 * x + s.normal();
        e.data.x_true(i, 0) = 1.0;
        e.data.x_true(i, 1) = x;
        e.data.u(i, 0) = 0.0;
        e.data.u(i, 1) = u;
        e.data.dataset.w(i, 0) = 1.0;
        e.data.dataset.w(i, 1) = x + u;
        e.data.dataset.y[i] = y;
    }
    return e;
}

}  // namespace eivsub
