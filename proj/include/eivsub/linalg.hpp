#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <string>

#include "eivsub/errors.hpp"
#include "eivsub/types.hpp"

namespace eivsub::linalg {

class KahanAccumulator {
public:
    void add(double x) {
        const double t = x - comp_;
        const double next = sum_ + t;
        comp_ = (next - sum_) - t;
        sum_ = next;
    }
    double value() const { return sum_; }

private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

inline constexpr Index kBlockRows = 4096;

namespace detail {

// Fixed pairwise combination tree over row blocks: the reduction order never
// depends on thread count, and error growth stays logarithmic in n.
template <typename Leaf>
auto pairwise(Index lo, Index count, const Leaf& leaf) -> decltype(leaf(lo, count)) {
    if (count <= kBlockRows) return leaf(lo, count);
    Index half = ((count / 2 + kBlockRows - 1) / kBlockRows) * kBlockRows;
    if (half >= count) half = count - kBlockRows;
    return pairwise(lo, half, leaf) + pairwise(lo + half, count - half, leaf);
}

}  // namespace detail

// W^T W accumulated block-pairwise.
inline Matrix gram(const Eigen::Ref<const Matrix>& w) {
    return detail::pairwise(0, w.rows(), [&](Index lo, Index len) -> Matrix {
        const auto block = w.middleRows(lo, len);
        return block.transpose() * block;
    });
}

// W^T diag(wts) W.
inline Matrix gram_weighted(const Eigen::Ref<const Matrix>& w,
                            const Eigen::Ref<const Vector>& wts) {
    return detail::pairwise(0, w.rows(), [&](Index lo, Index len) -> Matrix {
        const auto block = w.middleRows(lo, len);
        return block.transpose() * wts.segment(lo, len).asDiagonal() * block;
    });
}

// W^T v.
inline Vector tv(const Eigen::Ref<const Matrix>& w, const Eigen::Ref<const Vector>& v) {
    return detail::pairwise(0, w.rows(), [&](Index lo, Index len) -> Vector {
        return w.middleRows(lo, len).transpose() * v.segment(lo, len);
    });
}

// LU factorization of a symmetric matrix with a Hager/Higham 1-norm
// reciprocal-condition estimate.  Throws when the estimate falls below 1e-12.
class SymSolver {
public:
    SymSolver(const Matrix& a, const std::string& name)
        : lu_(checked_square(a, name)), name_(name) {
        const Index p = a.rows();
        anorm_ = 0.0;
        for (Index j = 0; j < p; ++j) anorm_ = std::max(anorm_, a.col(j).cwiseAbs().sum());
        rcond_ = (anorm_ > 0) ? 1.0 / (anorm_ * inv_norm1_estimate(p)) : 0.0;
        if (!std::isfinite(rcond_) || rcond_ < 1e-12)
            throw singular_system_error(name, std::isfinite(rcond_) ? rcond_ : 0.0);
    }

    template <typename Rhs>
    auto solve(const Rhs& b) const {
        return lu_.solve(b);
    }

    double rcond() const { return rcond_; }
    const std::string& name() const { return name_; }

private:
    static const Matrix& checked_square(const Matrix& a, const std::string& name) {
        if (a.rows() != a.cols()) throw dimension_error(name + ": not square");
        if (!a.allFinite()) throw singular_system_error(name, 0.0);
        return a;
    }

    // Estimates ||A^{-1}||_1; relies on A = A^T so no transpose solve is needed.
    double inv_norm1_estimate(Index p) const {
        Vector x = Vector::Constant(p, 1.0 / static_cast<double>(p));
        Vector y = lu_.solve(x);
        if (!y.allFinite()) return std::numeric_limits<double>::infinity();
        double est = y.lpNorm<1>();
        for (int iter = 0; iter < 5; ++iter) {
            Vector xi(p);
            for (Index i = 0; i < p; ++i) xi[i] = (y[i] >= 0) ? 1.0 : -1.0;
            Vector z = lu_.solve(xi);
            if (!z.allFinite()) return std::numeric_limits<double>::infinity();
            Index jmax = 0;
            z.cwiseAbs().maxCoeff(&jmax);
            if (z.cwiseAbs().maxCoeff() <= z.dot(x)) break;
            x = Vector::Zero(p);
            x[jmax] = 1.0;
            y = lu_.solve(x);
            if (!y.allFinite()) return std::numeric_limits<double>::infinity();
            est = std::max(est, y.lpNorm<1>());
        }
        if (p >= 2) {  // LAPACK-style safeguard vector
            Vector v(p);
            for (Index i = 0; i < p; ++i)
                v[i] = ((i % 2 == 0) ? 1.0 : -1.0) *
                       (1.0 + static_cast<double>(i) / static_cast<double>(p - 1));
            Vector y2 = lu_.solve(v);
            if (!y2.allFinite()) return std::numeric_limits<double>::infinity();
            est = std::max(est, 2.0 * y2.lpNorm<1>() / (3.0 * static_cast<double>(p)));
        }
        return est;
    }

    Eigen::PartialPivLU<Matrix> lu_;
    std::string name_;
    double anorm_ = 0.0;
    double rcond_ = 0.0;
};

struct SolveResult {
    Matrix x;
    double rcond = 0.0;
    bool ridged = false;
};

// Solve A x = b for symmetric A; optional one-shot ridge fallback
// (A + eps I with eps = 1e-8 * max(trace/p, 1)) for exploratory runs.
inline SolveResult solve_checked(const Matrix& a, const Matrix& b,
                                 const std::string& name, bool ridge_fallback = false) {
    try {
        SymSolver f(a, name);
        return {f.solve(b), f.rcond(), false};
    } catch (const singular_system_error&) {
        if (!ridge_fallback) throw;
        const double eps =
            1e-8 * std::max(a.trace() / static_cast<double>(a.rows()), 1.0);
        Matrix ar = a + eps * Matrix::Identity(a.rows(), a.cols());
        SymSolver f(ar, name + " (ridged)");
        return {f.solve(b), f.rcond(), true};
    }
}

struct ClipResult {
    Matrix m;
    bool clipped = false;
};

// Project a symmetric matrix onto the PSD cone by zeroing negative
// eigenvalues; the flag reports a materially negative spectrum.
inline ClipResult psd_clip(const Matrix& s) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(s);
    Vector lam = es.eigenvalues();
    const double lmax = lam.cwiseAbs().maxCoeff();
    const bool material = lam.minCoeff() < -1e-12 * std::max(1.0, lmax);
    if (lam.minCoeff() >= 0.0) return {s, false};
    for (Index i = 0; i < lam.size(); ++i) lam[i] = std::max(lam[i], 0.0);
    Matrix out = es.eigenvectors() * lam.asDiagonal() * es.eigenvectors().transpose();
    out = 0.5 * (out + out.transpose()).eval();
    return {out, material};
}

}  // namespace eivsub::linalg
