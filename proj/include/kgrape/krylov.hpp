#pragma once

#include <cmath>
#include <concepts>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "kgrape/linalg.hpp"

namespace kgrape::krylov {

using linalg::Complex;
using linalg::SparseHermitianOperator;
using linalg::StateVector;

/// Anything that can act as a Hermitian operator on state vectors.
template <typename Op>
concept HermitianApply = requires(const Op& op, Eigen::Ref<const StateVector> x,
                                  Eigen::Ref<StateVector> y) {
    { op.dim() } -> std::convertible_to<int>;
    op.apply(x, y);
};

enum class Reorthogonalize { none, full };

struct KrylovStepConfig {
    int N = 10;
    Reorthogonalize reorth = Reorthogonalize::none;
    double breakdown_tol = 1e-12;  // relative to the start vector norm

    void validate() const {
        if (N < 1) throw std::invalid_argument("Krylov truncation N must be >= 1");
        if (breakdown_tol <= 0.0) throw std::invalid_argument("breakdown_tol must be positive");
    }
};

/// Orthonormal Krylov basis plus the tridiagonal projection of H onto it.
/// m < requested only on happy breakdown (invariant subspace reached).
struct KrylovFactorization {
    int full_dim = 0;
    int requested = 0;
    int m = 0;
    std::vector<StateVector> basis;  // m orthonormal vectors, basis[0] = psi/|psi|
    std::vector<double> alpha;       // diagonal of T, length m
    std::vector<double> beta;        // off-diagonal, length m-1, all > 0

    Eigen::MatrixXd tridiagonal() const {
        Eigen::MatrixXd T = Eigen::MatrixXd::Zero(m, m);
        for (int j = 0; j < m; ++j) T(j, j) = alpha[j];
        for (int j = 0; j + 1 < m; ++j) T(j, j + 1) = T(j + 1, j) = beta[j];
        return T;
    }
};

/// Workspace-reusing Lanczos propagator; the allocation-free path for
/// repeated steps on a fixed dimension.
class KrylovPropagator {
public:
    explicit KrylovPropagator(KrylovStepConfig cfg) : cfg_(cfg) { cfg_.validate(); }

    const KrylovStepConfig& config() const { return cfg_; }

    /// Runs the three-term Lanczos recurrence from psi. Returns the effective
    /// subspace dimension m; the basis sits in the first m columns of V().
    template <HermitianApply Op>
    int factorize(const Op& op, Eigen::Ref<const StateVector> psi) {
        const int D = op.dim();
        if (psi.size() != D) throw std::invalid_argument("lanczos dimension mismatch");
        start_norm_ = psi.norm();
        if (start_norm_ <= 0.0) throw std::invalid_argument("lanczos start vector is zero");

        const int N = std::min(cfg_.N, D);
        if (V_.rows() != D || V_.cols() < N) V_.resize(D, std::max(N, cfg_.N));
        w_.resize(D);
        alpha_.resize(N);
        beta_.resize(std::max(N - 1, 0));

        const double btol = cfg_.breakdown_tol * start_norm_;
        V_.col(0) = psi / start_norm_;
        int m = 1;
        if (cfg_.reorth == Reorthogonalize::full) {
            for (int j = 0; j < N; ++j) {
                op.apply(V_.col(j), w_);
                if (j > 0) w_ -= beta_[j - 1] * V_.col(j - 1);
                const double a = V_.col(j).dot(w_).real();
                w_ -= a * V_.col(j);
                w_ -= V_.leftCols(j + 1) * (V_.leftCols(j + 1).adjoint() * w_).eval();
                alpha_[j] = a;
                if (j + 1 == N) break;
                const double b = w_.norm();
                if (b <= btol) break;  // happy breakdown: invariant subspace
                beta_[j] = b;
                V_.col(j + 1) = w_ / b;
                m = j + 2;
            }
            m_ = m;
            return m;
        }
        // Plain recurrence: the coefficients are real, so the vector updates
        // run in real arithmetic over the interleaved (re, im) doubles, with
        // the axpy and reduction of each stage fused into a single pass.
        const int n2 = 2 * D;
        for (int j = 0; j < N; ++j) {
            op.apply(V_.col(j), w_);
            double* __restrict w = reinterpret_cast<double*>(w_.data());
            const double* __restrict vj = reinterpret_cast<const double*>(V_.col(j).data());
            double a = 0.0;
            if (j > 0) {
                const double* __restrict vp =
                    reinterpret_cast<const double*>(V_.col(j - 1).data());
                const double bp = beta_[j - 1];
#pragma omp simd reduction(+ : a)
                for (int i = 0; i < n2; ++i) {
                    w[i] -= bp * vp[i];
                    a += vj[i] * w[i];
                }
            } else {
#pragma omp simd reduction(+ : a)
                for (int i = 0; i < n2; ++i) a += vj[i] * w[i];
            }
            alpha_[j] = a;
            if (j + 1 == N) break;
            double b2 = 0.0;
#pragma omp simd reduction(+ : b2)
            for (int i = 0; i < n2; ++i) {
                w[i] -= a * vj[i];
                b2 += w[i] * w[i];
            }
            const double b = std::sqrt(b2);
            if (b <= btol) break;  // happy breakdown: invariant subspace
            beta_[j] = b;
            double* __restrict vn = reinterpret_cast<double*>(V_.col(j + 1).data());
            const double inv_b = 1.0 / b;
            for (int i = 0; i < n2; ++i) vn[i] = w[i] * inv_b;
            m = j + 2;
        }
        m_ = m;
        return m;
    }

    /// psi(t + dt) ~= V exp(-i T dt) V^dag psi, rescaled to |psi|.
    template <HermitianApply Op>
    void step(const Op& op, Eigen::Ref<const StateVector> psi, double dt,
              Eigen::Ref<StateVector> out) {
        const int m = factorize(op, psi);
        Eigen::MatrixXd T = Eigen::MatrixXd::Zero(m, m);
        for (int j = 0; j < m; ++j) T(j, j) = alpha_[j];
        for (int j = 0; j + 1 < m; ++j) T(j, j + 1) = T(j + 1, j) = beta_[j];
        tiny_solver_.compute(T);
        if (tiny_solver_.info() != Eigen::Success)
            throw std::runtime_error("tridiagonal eigendecomposition failed");

        // c = Q diag(exp(-i lambda dt)) Q^T e_1 |psi|
        Eigen::VectorXcd c(m);
        const auto& Q = tiny_solver_.eigenvectors();
        const auto& lam = tiny_solver_.eigenvalues();
        for (int k = 0; k < m; ++k)
            c[k] = std::exp(Complex(0.0, -lam[k] * dt)) * Q(0, k) * start_norm_;
        out = V_.leftCols(m) * (Q * c).eval();
        const double n = out.norm();
        if (n > 0.0) out *= start_norm_ / n;
    }

    int effective_dim() const { return m_; }
    double start_norm() const { return start_norm_; }
    const Eigen::MatrixXcd& V() const { return V_; }
    const std::vector<double>& alpha() const { return alpha_; }
    const std::vector<double>& beta() const { return beta_; }

private:
    KrylovStepConfig cfg_;
    Eigen::MatrixXcd V_;
    Eigen::VectorXcd w_;
    std::vector<double> alpha_, beta_;
    int m_ = 0;
    double start_norm_ = 0.0;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> tiny_solver_;
};

template <HermitianApply Op>
KrylovFactorization lanczos(const Op& op, const StateVector& psi, const KrylovStepConfig& cfg) {
    KrylovPropagator prop(cfg);
    const int m = prop.factorize(op, psi);
    KrylovFactorization fac;
    fac.full_dim = op.dim();
    fac.requested = cfg.N;
    fac.m = m;
    fac.basis.reserve(m);
    for (int j = 0; j < m; ++j) fac.basis.push_back(prop.V().col(j));
    fac.alpha.assign(prop.alpha().begin(), prop.alpha().begin() + m);
    fac.beta.assign(prop.beta().begin(), prop.beta().begin() + std::max(m - 1, 0));
    return fac;
}

template <HermitianApply Op>
StateVector krylov_step(const Op& op, const StateVector& psi, double dt,
                        const KrylovStepConfig& cfg) {
    KrylovPropagator prop(cfg);
    StateVector out(op.dim());
    prop.step(op, psi, dt, out);
    return out;
}

/// Spectral width W = lambda_max - lambda_min: exact for dim <= 64, extremal
/// Ritz values of a depth-min(50, D) Lanczos run from a seeded random start
/// otherwise.
double spectral_width(const SparseHermitianOperator& H);

}  // namespace kgrape::krylov
