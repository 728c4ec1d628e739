#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <vector>

#include "eivsub/eiv_core.hpp"
#include "eivsub/simgen.hpp"

using namespace eivsub;

namespace {
Dataset make(const std::vector<std::vector<double>>& rows, const std::vector<double>& ys) {
    Dataset d;
    d.w.resize((Index)rows.size(), (Index)rows[0].size());
    d.y.resize((Index)ys.size());
    for (Index i = 0; i < d.w.rows(); ++i) {
        for (Index j = 0; j < d.w.cols(); ++j) d.w(i, j) = rows[i][j];
        d.y[i] = ys[i];
    }
    return d;
}
}  // namespace

TEST_CASE("corrected loss hand values", "[eiv_core]") {
    // n=1, W=[2], y=[4], beta=[1], Sigma=[0.5]: (4-2)^2/2 - 0.5*0.5 = 1.75
    const Dataset d = make({{2}}, {4});
    Vector beta(1);
    beta << 1;
    Matrix s(1, 1);
    s << 0.5;
    REQUIRE(corrected_loss(beta, d, {s, SigmaSource::known}) ==
            Catch::Approx(1.75).margin(1e-14));

    // beta = 0: correction vanishes -> (1/2n) sum y^2
    const Dataset d2 = make({{1}, {3}, {-2}}, {1.0, -2.0, 0.5});
    Vector zero = Vector::Zero(1);
    REQUIRE(corrected_loss(zero, d2, {s, SigmaSource::known}) ==
            Catch::Approx((1.0 + 4.0 + 0.25) / 6.0).margin(1e-14));

    // Sigma = 0: ordinary least-squares loss
    Vector b2(1);
    b2 << 0.7;
    const double ols = (d2.y - d2.w * b2).squaredNorm() / (2.0 * 3.0);
    REQUIRE(corrected_loss(b2, d2, ErrorCovariance::zero(1)) ==
            Catch::Approx(ols).margin(1e-14));
}

TEST_CASE("corrected gradient matches finite differences and vanishes at the estimate",
          "[eiv_core]") {
    SimScenario sc;
    sc.n = 60;
    sc.p = 3;
    sc.beta_true = Vector::Ones(3);
    sc.sigma_u2 = 0.3;
    sc.seed = 17;
    const auto d = generate_dataset(sc);
    const auto sigma = sc.error_covariance();

    Vector beta(3);
    beta << 0.4, -0.2, 1.3;
    const Vector g = corrected_loss_gradient(beta, d, sigma);
    const double h = 1e-6;
    for (Index j = 0; j < 3; ++j) {
        Vector bp = beta, bm = beta;
        bp[j] += h;
        bm[j] -= h;
        const double fd =
            (corrected_loss(bp, d, sigma) - corrected_loss(bm, d, sigma)) / (2 * h);
        REQUIRE(g[j] == Catch::Approx(fd).margin(1e-6));
    }

    const auto est = full_corrected_estimate(d, sigma);
    REQUIRE(corrected_loss_gradient(est.beta, d, sigma).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("full corrected estimate hand values and OLS reduction", "[eiv_core]") {
    // W = (1,2,3)', y = (1,2,3), Sigma=[0.5]: beta = 14/(14-1.5) = 1.12
    const Dataset d = make({{1}, {2}, {3}}, {1, 2, 3});
    Matrix s(1, 1);
    s << 0.5;
    const auto est = full_corrected_estimate(d, {s, SigmaSource::known});
    REQUIRE(est.beta[0] == Catch::Approx(14.0 / 12.5).margin(1e-12));
    REQUIRE(est.method == std::string("full-corrected"));

    // Sigma = 0 reduces to OLS exactly: W=[[1],[2]], y=(2,4) -> 2
    const Dataset d2 = make({{1}, {2}}, {2, 4});
    const auto ols = full_corrected_estimate(d2, ErrorCovariance::zero(1));
    REQUIRE(std::abs(ols.beta[0] - 2.0) < 1e-10);

    // Multivariate Sigma=0 vs normal-equation oracle
    SimScenario sc;
    sc.n = 40;
    sc.p = 3;
    sc.beta_true = Vector::Ones(3);
    sc.sigma_u2 = 0.0;
    sc.seed = 23;
    const auto d3 = generate_dataset(sc);
    const Vector direct =
        (d3.w.transpose() * d3.w).ldlt().solve(d3.w.transpose() * d3.y);
    const auto est3 = full_corrected_estimate(d3, ErrorCovariance::zero(3));
    REQUIRE((est3.beta - direct).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("full corrected estimate recovers the truth at simulation scale",
          "[eiv_core][stat]") {
    // Median over 11 seeds of ||beta-hat - 1|| at n=10^4, sigma_u2=0.4.
    std::vector<double> errs;
    for (std::uint64_t seed = 1; seed <= 11; ++seed) {
        SimScenario sc;
        sc.n = 10000;
        sc.p = 5;
        sc.beta_true = Vector::Ones(5);
        sc.sigma_u2 = 0.4;
        sc.seed = seed;
        const auto d = generate_dataset(sc);
        const auto est = full_corrected_estimate(d, sc.error_covariance());
        errs.push_back((est.beta - sc.beta_true).norm());
    }
    std::nth_element(errs.begin(), errs.begin() + 5, errs.end());
    REQUIRE(errs[5] < 0.1);
}

TEST_CASE("sigma_uu replicate estimator hand values", "[eiv_core]") {
    // n=1, J=2, p=1, values {0, 2}: ((0-1)^2 + (2-1)^2)/1 = 2
    ReplicatedDataset rep;
    Vector a(1), b(1);
    a << 0;
    b << 2;
    rep.replicates = {{a, b}};
    rep.y.resize(1);
    rep.y << 1.0;
    const auto s = estimate_sigma_uu(rep);
    REQUIRE(s.sigma_uu(0, 0) == Catch::Approx(2.0).margin(1e-14));
    REQUIRE(s.source == SigmaSource::estimated_from_replicates);

    // identical replicates -> exactly zero
    rep.replicates = {{a, a, a}};
    REQUIRE(estimate_sigma_uu(rep).sigma_uu(0, 0) == 0.0);

    // no replication -> insufficient_replication_error
    rep.replicates = {{a}};
    REQUIRE_THROWS_AS(estimate_sigma_uu(rep), insufficient_replication_error);
}

TEST_CASE("sigma_uu estimator matches a brute-force oracle on random data",
          "[eiv_core]") {
    auto st = rng::stream(31, 0, 1);
    ReplicatedDataset rep;
    const Index n = 12, p = 3;
    rep.y.resize(n);
    double denom = 0.0;
    for (Index i = 0; i < n; ++i) {
        const int j = 1 + (int)st.uniform_int(4);
        std::vector<Vector> rec;
        for (int k = 0; k < j; ++k) {
            Vector v(p);
            for (Index c = 0; c < p; ++c) v[c] = st.normal();
            rec.push_back(v);
        }
        rep.replicates.push_back(rec);
        rep.y[i] = st.normal();
        denom += j - 1;
    }
    // independent double-loop recomputation
    Matrix oracle = Matrix::Zero(p, p);
    for (const auto& rec : rep.replicates) {
        Vector mean = Vector::Zero(p);
        for (const auto& v : rec) mean += v;
        mean /= (double)rec.size();
        for (const auto& v : rec)
            for (Index r = 0; r < p; ++r)
                for (Index c = 0; c < p; ++c)
                    oracle(r, c) += (v[r] - mean[r]) * (v[c] - mean[c]);
    }
    oracle /= denom;
    const auto s = estimate_sigma_uu(rep);
    REQUIRE((s.sigma_uu - oracle).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("replicate-averaged estimator: J=1 with known sigma reduces to a corrected fit",
          "[eiv_core]") {
    SimScenario sc;
    sc.n = 200;
    sc.p = 2;
    sc.beta_true = Vector::Ones(2);
    sc.sigma_u2 = 0.25;
    sc.seed = 5;
    const auto d = generate_dataset(sc);
    ReplicatedDataset rep;
    rep.y = d.y;
    for (Index i = 0; i < d.n(); ++i)
        rep.replicates.push_back({Vector(d.w.row(i).transpose())});
    // With J_i = 1 the correction subtracts n^{-1}-scaled... the unscaled Gram
    // identity: sum Wbar Wbar' - (sum 1/J_i) Sigma = n (W'W/n - Sigma).
    const auto sigma = sc.error_covariance();
    const auto ra = replicate_averaged_estimate(rep, sigma);
    const auto full = full_corrected_estimate(d, sigma);
    REQUIRE((ra.beta - full.beta).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("replicate-averaged estimator recovers truth with J=2 replicates",
          "[eiv_core][stat]") {
    // x ~ N(0,1), two noisy looks per record, beta = (1, -0.5)
    auto st = rng::stream(77, 0, 2);
    const Index n = 8000, p = 2;
    const double su2 = 0.5;
    ReplicatedDataset rep;
    rep.y.resize(n);
    Vector beta(2);
    beta << 1.0, -0.5;
    for (Index i = 0; i < n; ++i) {
        Vector x(p);
        x << st.normal(), st.normal();
        std::vector<Vector> rec;
        for (int j = 0; j < 2; ++j) {
            Vector w(p);
            for (Index c = 0; c < p; ++c) w[c] = x[c] + std::sqrt(su2) * st.normal();
            rec.push_back(w);
        }
        rep.replicates.push_back(rec);
        rep.y[i] = x.dot(beta) + st.normal();
    }
    const auto sig = estimate_sigma_uu(rep);
    REQUIRE(sig.sigma_uu(0, 0) == Catch::Approx(su2).margin(0.05));
    const auto est = replicate_averaged_estimate(rep, sig);
    REQUIRE((est.beta - beta).cwiseAbs().maxCoeff() < 0.06);
}

TEST_CASE("noise variance estimate is floored and consistent", "[eiv_core]") {
    const Dataset d = make({{1}, {2}}, {1, 2});  // perfect fit at beta=1
    Vector beta(1);
    beta << 1.0;
    Matrix s(1, 1);
    s << 0.3;
    // residuals zero, correction 0.3 -> floored
    REQUIRE(estimate_noise_variance(d, beta, {s, SigmaSource::known}) == 1e-12);

    SimScenario sc;
    sc.n = 20000;
    sc.p = 3;
    sc.beta_true = Vector::Ones(3);
    sc.sigma_u2 = 0.4;
    sc.noise_var = 1.7;
    sc.seed = 3;
    const auto big = generate_dataset(sc);
    const auto sigma = sc.error_covariance();
    const auto est = full_corrected_estimate(big, sigma);
    REQUIRE(estimate_noise_variance(big, est.beta, sigma) ==
            Catch::Approx(1.7).margin(0.15));
}

TEST_CASE("asymptotic covariance: zero-error case collapses to the OLS sandwich",
          "[eiv_core]") {
    SimScenario sc;
    sc.n = 300;
    sc.p = 2;
    sc.beta_true = Vector::Ones(2);
    sc.sigma_u2 = 0.0;
    sc.seed = 9;
    const auto d = generate_dataset(sc);
    Vector beta(2);
    beta << 1.0, 1.0;
    const double s2 = 1.3;
    const Matrix v = full_asymptotic_covariance(d, beta, ErrorCovariance::zero(2), s2);
    const Matrix h = d.w.transpose() * d.w / (double)d.n();
    const Matrix oracle = s2 * h.inverse() / (double)d.n();
    REQUIRE((v - oracle).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("asymptotic covariance matches Monte Carlo dispersion", "[eiv_core][stat]") {
    // Empirical covariance of beta-hat over N reps vs the analytic plug-in
    // (evaluated at the truth) within 20% trace error.
    const Index n = 4000, p = 2;
    const int reps = 1500;
    Vector beta(2);
    beta << 1.0, -0.7;
    Matrix sum = Matrix::Zero(p, p);
    Vector mean = Vector::Zero(p);
    std::vector<Vector> estimates;
    estimates.reserve(reps);
    Matrix v_at_truth;
    for (int k = 0; k < reps; ++k) {
        SimScenario sc;
        sc.n = n;
        sc.p = p;
        sc.beta_true = beta;
        sc.sigma_u2 = 0.3;
        sc.seed = rng::derive_key(555, (std::uint64_t)k, 1);
        const auto d = generate_dataset(sc);
        const auto sigma = sc.error_covariance();
        const auto est = full_corrected_estimate(d, sigma);
        estimates.push_back(est.beta);
        mean += est.beta;
        if (k == 0) v_at_truth = full_asymptotic_covariance(d, beta, sigma, 1.0);
    }
    mean /= (double)reps;
    for (const auto& b : estimates) {
        const Vector c = b - mean;
        sum.noalias() += c * c.transpose();
    }
    const Matrix emp = sum / (double)(reps - 1);
    REQUIRE(emp.trace() == Catch::Approx(v_at_truth.trace()).epsilon(0.20));
}
