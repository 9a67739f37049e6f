#include "kgrape/grape.hpp"

#include <cmath>
#include <stdexcept>

namespace kgrape::grape {

namespace {

using linalg::DenseHermitianEig;
using linalg::DenseMatrix;

/// H_d + eps H_c on the union sparsity pattern: one CSR pass per matvec,
/// with a cheaper real-arithmetic kernel when both operators are real.
class SlotHamiltonian {
public:
    SlotHamiltonian(const SparseHermitianOperator& Hd, const SparseHermitianOperator& Hc)
        : dim_(Hd.dim()) {
        row_ptr_.assign(dim_ + 1, 0);
        // Merge the sorted column lists of both operators row by row.
        for (int r = 0; r < dim_; ++r) {
            int kd = Hd.row_begin(r), kc = Hc.row_begin(r);
            const int ed = Hd.row_end(r), ec = Hc.row_end(r);
            while (kd < ed || kc < ec) {
                const int cd = kd < ed ? Hd.col_at(kd) : dim_;
                const int cc = kc < ec ? Hc.col_at(kc) : dim_;
                const int c = std::min(cd, cc);
                Complex vd(0, 0), vc(0, 0);
                if (cd == c) vd = Hd.value_at(kd++);
                if (cc == c) vc = Hc.value_at(kc++);
                cols_.push_back(c);
                vd_.push_back(vd);
                vc_.push_back(vc);
            }
            row_ptr_[r + 1] = static_cast<int>(cols_.size());
        }
        real_ = true;
        for (std::size_t k = 0; k < vd_.size() && real_; ++k)
            real_ = std::abs(vd_[k].imag()) <= 1e-300 && std::abs(vc_[k].imag()) <= 1e-300;
        if (real_) {
            rvals_.resize(vd_.size());
        } else {
            cvals_.resize(vd_.size());
        }
        set_amplitude(0.0);
    }

    void set_amplitude(double eps) {
        if (real_) {
            for (std::size_t k = 0; k < rvals_.size(); ++k)
                rvals_[k] = vd_[k].real() + eps * vc_[k].real();
        } else {
            for (std::size_t k = 0; k < cvals_.size(); ++k)
                cvals_[k] = vd_[k] + eps * vc_[k];
        }
    }

    int dim() const { return dim_; }

    void apply(Eigen::Ref<const StateVector> x, Eigen::Ref<StateVector> y) const {
        if (real_) {
            // Two-entry unroll: the rows are short (~5 entries), so breaking
            // the accumulator dependency chain is worth ~30%.
            const double* xd = reinterpret_cast<const double*>(x.data());
            for (int r = 0; r < dim_; ++r) {
                int k = row_ptr_[r];
                const int e = row_ptr_[r + 1];
                double re0 = 0.0, im0 = 0.0, re1 = 0.0, im1 = 0.0;
                for (; k + 1 < e; k += 2) {
                    const int c0 = 2 * cols_[k], c1 = 2 * cols_[k + 1];
                    re0 += rvals_[k] * xd[c0];
                    im0 += rvals_[k] * xd[c0 + 1];
                    re1 += rvals_[k + 1] * xd[c1];
                    im1 += rvals_[k + 1] * xd[c1 + 1];
                }
                if (k < e) {
                    const int c = 2 * cols_[k];
                    re0 += rvals_[k] * xd[c];
                    im0 += rvals_[k] * xd[c + 1];
                }
                y[r] = Complex(re0 + re1, im0 + im1);
            }
        } else {
            for (int r = 0; r < dim_; ++r) {
                Complex acc(0.0, 0.0);
                for (int k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k)
                    acc += cvals_[k] * x[cols_[k]];
                y[r] = acc;
            }
        }
    }

private:
    int dim_;
    bool real_ = false;
    std::vector<int> row_ptr_, cols_;
    std::vector<Complex> vd_, vc_;   // per-entry drift and control values
    std::vector<double> rvals_;      // merged values, real fast path
    std::vector<Complex> cvals_;     // merged values, general path
};

Eigen::VectorXd zeroth_from_cache(const ControlProblem& problem, const PWCProtocol& protocol,
                                  const TrajectoryCache& cache) {
    const int M = protocol.slots();
    const int D = problem.dim();
    Eigen::VectorXd g(M);

    // Real diagonal control: Im<chi|H_c|psi> = sum_i h_i (chi_r psi_i - chi_i psi_r)
    // in one fused pass per slot.
    bool diag_real = problem.H_c.nonzeros() <= static_cast<std::size_t>(D);
    if (diag_real) {
        problem.H_c.for_each([&](int r, int c, const Complex& v) {
            if (r != c || v.imag() != 0.0) diag_real = false;
        });
    }
    if (diag_real) {
        Eigen::VectorXd h = Eigen::VectorXd::Zero(D);
        problem.H_c.for_each([&](int r, int, const Complex& v) { h[r] = v.real(); });
        for (int j = 1; j <= M; ++j) {
            const StateVector& psi = cache.forward[j];
            const StateVector& chi = cache.backward[j - 1];
            double s = 0.0;
            for (int i = 0; i < D; ++i)
                s += h[i] * (chi[i].real() * psi[i].imag() - chi[i].imag() * psi[i].real());
            g[j - 1] = -2.0 * protocol.dt * s;
        }
        return g;
    }

    StateVector hc_psi(D);
    for (int j = 1; j <= M; ++j) {
        problem.H_c.apply(cache.forward[j], hc_psi);
        g[j - 1] = -2.0 * protocol.dt * linalg::inner(cache.backward[j - 1], hc_psi).imag();
    }
    return g;
}

// Boundary value b_k = -2 dt Im<chi_k|H_c|psi_k> exists for k = 1..M in the
// cache; centering slot j on its own midpoint needs b_{j-1} too, so b_0 is
// produced by one extra reverse step chi_0 = U_1^dag chi_1.
Eigen::VectorXd centered_from_cache(const ControlProblem& problem,
                                    const PWCProtocol& protocol,
                                    const TrajectoryCache& cache,
                                    const PropagatorBackend& backend) {
    const Eigen::VectorXd b = zeroth_from_cache(problem, protocol, cache);
    const int M = protocol.slots();
    double b0 = 0.0;
    if (std::abs(cache.overlap) != 0.0) {
        StateVector chi0;
        if (backend.kind == PropagatorBackend::Kind::dense_eig) {
            chi0 = linalg::expm_apply_dense(
                problem.H_d.to_dense() + protocol.amplitudes[0] * problem.H_c.to_dense(),
                -protocol.dt, cache.backward[0]);
        } else {
            SlotHamiltonian H(problem.H_d, problem.H_c);
            H.set_amplitude(protocol.amplitudes[0]);
            krylov::KrylovPropagator prop(backend.krylov_cfg);
            chi0.resize(problem.dim());
            prop.step(H, cache.backward[0], -protocol.dt, chi0);
        }
        StateVector hc_psi(problem.dim());
        problem.H_c.apply(cache.forward[0], hc_psi);
        b0 = -2.0 * protocol.dt * linalg::inner(chi0, hc_psi).imag();
    }
    Eigen::VectorXd g(M);
    g[0] = 0.5 * (b0 + b[0]);
    for (int j = 1; j < M; ++j) g[j] = 0.5 * (b[j - 1] + b[j]);
    return g;
}

Eigen::VectorXd taylor_from_cache(const ControlProblem& problem, const PWCProtocol& protocol,
                                  const TrajectoryCache& cache, int order) {
    if (order < 0) throw std::invalid_argument("Taylor order must be >= 0");
    const int M = protocol.slots();
    const int D = problem.dim();
    const double dt = protocol.dt;
    SlotHamiltonian H(problem.H_d, problem.H_c);

    // c_p = (-i dt)^p / (p+1)!
    std::vector<Complex> coeff(order + 1);
    Complex pw(1.0, 0.0);
    double fact = 1.0;
    for (int p = 0; p <= order; ++p) {
        fact *= p + 1;
        coeff[p] = pw / fact;
        pw *= Complex(0.0, -dt);
    }
    std::vector<std::vector<double>> binom(order + 1);
    for (int p = 0; p <= order; ++p) {
        binom[p].assign(p + 1, 1.0);
        for (int k = 1; k < p; ++k) binom[p][k] = binom[p - 1][k - 1] + binom[p - 1][k];
    }

    Eigen::VectorXd g(M);
    std::vector<StateVector> hpow(order + 1, StateVector(D));
    StateVector hc_h(D), term(D), tmp(D), acc(D);
    for (int j = 1; j <= M; ++j) {
        H.set_amplitude(protocol.amplitudes[j - 1]);
        hpow[0] = cache.forward[j];
        for (int k = 1; k <= order; ++k) H.apply(hpow[k - 1], hpow[k]);

        // L^p H_c |psi> = sum_k (-1)^k C(p,k) H^(p-k) H_c H^k |psi>
        acc.setZero();
        for (int p = 0; p <= order; ++p) {
            for (int k = 0; k <= p; ++k) {
                problem.H_c.apply(hpow[k], hc_h);
                term = hc_h;
                for (int q = 0; q < p - k; ++q) {
                    H.apply(term, tmp);
                    term.swap(tmp);
                }
                const double sign = (k % 2 == 0) ? 1.0 : -1.0;
                acc += coeff[p] * sign * binom[p][k] * term;
            }
        }
        g[j - 1] = -2.0 * dt * linalg::inner(cache.backward[j - 1], acc).imag();
    }
    return g;
}

}  // namespace

void ControlProblem::validate() const {
    const int D = H_d.dim();
    if (H_c.dim() != D || initial.size() != D || target.size() != D)
        throw std::invalid_argument("control problem dimensions are inconsistent");
    if (std::abs(initial.norm() - 1.0) > 1e-10 || std::abs(target.norm() - 1.0) > 1e-10)
        throw std::invalid_argument("initial and target states must be normalized");
}

void PWCProtocol::validate() const {
    if (slots() < 1) throw std::invalid_argument("protocol needs at least one slot");
    if (!(dt > 0.0)) throw std::invalid_argument("slot width dt must be positive");
}

PropagatorBackend PropagatorBackend::dense(bool cache) {
    PropagatorBackend b;
    b.kind = Kind::dense_eig;
    b.cache_propagators = cache;
    return b;
}

PropagatorBackend PropagatorBackend::with_krylov(const KrylovStepConfig& cfg) {
    PropagatorBackend b;
    b.kind = Kind::krylov;
    b.krylov_cfg = cfg;
    return b;
}

void PropagatorBackend::validate() const {
    if (kind == Kind::krylov) krylov_cfg.validate();
}

void propagate_into(const ControlProblem& problem, const PWCProtocol& protocol,
                    const PropagatorBackend& backend, TrajectoryCache& cache) {
    problem.validate();
    protocol.validate();
    backend.validate();

    const int M = protocol.slots();
    const int D = problem.dim();
    cache.forward.resize(M + 1);
    cache.backward.resize(M);
    for (auto& v : cache.forward)
        if (v.size() != D) v.resize(D);
    for (auto& v : cache.backward)
        if (v.size() != D) v.resize(D);
    cache.forward[0] = problem.initial;

    if (backend.kind == PropagatorBackend::Kind::dense_eig) {
        const DenseMatrix Hd = problem.H_d.to_dense();
        const DenseMatrix Hc = problem.H_c.to_dense();
        std::vector<DenseHermitianEig> eigs;
        if (backend.cache_propagators) eigs.reserve(M);
        for (int j = 1; j <= M; ++j) {
            auto eig = linalg::eigh(Hd + protocol.amplitudes[j - 1] * Hc);
            cache.forward[j] = linalg::expm_apply(eig, protocol.dt, cache.forward[j - 1]);
            if (backend.cache_propagators) eigs.push_back(std::move(eig));
        }
        cache.overlap = linalg::inner(problem.target, cache.forward[M]);
        cache.backward[M - 1] = cache.overlap * problem.target;
        for (int j = M - 1; j >= 1; --j) {
            // chi_j = U_{j+1}^dag chi_{j+1}
            if (backend.cache_propagators) {
                cache.backward[j - 1] =
                    linalg::expm_apply(eigs[j], -protocol.dt, cache.backward[j]);
            } else {
                cache.backward[j - 1] = linalg::expm_apply_dense(
                    Hd + protocol.amplitudes[j] * Hc, -protocol.dt, cache.backward[j]);
            }
        }
        return;
    }

    SlotHamiltonian H(problem.H_d, problem.H_c);
    krylov::KrylovPropagator prop(backend.krylov_cfg);
    for (int j = 1; j <= M; ++j) {
        H.set_amplitude(protocol.amplitudes[j - 1]);
        prop.step(H, cache.forward[j - 1], protocol.dt, cache.forward[j]);
    }
    cache.overlap = linalg::inner(problem.target, cache.forward[M]);
    cache.backward[M - 1] = cache.overlap * problem.target;
    if (std::abs(cache.overlap) == 0.0) {
        for (int j = M - 1; j >= 1; --j) cache.backward[j - 1].setZero();
        return;
    }
    // Fresh Lanczos bases from each chi; forward bases are never reused.
    for (int j = M - 1; j >= 1; --j) {
        H.set_amplitude(protocol.amplitudes[j]);
        prop.step(H, cache.backward[j], -protocol.dt, cache.backward[j - 1]);
    }
}

TrajectoryCache propagate(const ControlProblem& problem, const PWCProtocol& protocol,
                          const PropagatorBackend& backend) {
    TrajectoryCache cache;
    propagate_into(problem, protocol, backend, cache);
    return cache;
}

double infidelity(const TrajectoryCache& cache) {
    const double b2 = std::norm(cache.overlap);
    if (b2 > 1.0 + 2e-10)
        throw std::invalid_argument("overlap magnitude exceeds 1 beyond roundoff");
    return std::min(1.0, std::max(0.0, 1.0 - b2));
}

std::string to_string(GradientKind kind) {
    switch (kind) {
        case GradientKind::zeroth: return "zeroth";
        case GradientKind::centered: return "centered";
        case GradientKind::taylor: return "taylor";
        case GradientKind::exact_dense: return "exact_dense";
    }
    return "unknown";
}

GradientKind gradient_from_string(const std::string& s) {
    if (s == "zeroth") return GradientKind::zeroth;
    if (s == "centered") return GradientKind::centered;
    if (s == "taylor") return GradientKind::taylor;
    if (s == "exact_dense") return GradientKind::exact_dense;
    throw std::invalid_argument("unknown gradient kind '" + s + "'");
}

Eigen::VectorXd gradient_zeroth(const ControlProblem& problem, const PWCProtocol& protocol,
                                const PropagatorBackend& backend) {
    const auto cache = propagate(problem, protocol, backend);
    return zeroth_from_cache(problem, protocol, cache);
}

Eigen::VectorXd gradient_centered(const ControlProblem& problem, const PWCProtocol& protocol,
                                  const PropagatorBackend& backend) {
    const auto cache = propagate(problem, protocol, backend);
    return centered_from_cache(problem, protocol, cache, backend);
}

Eigen::VectorXd gradient_taylor(const ControlProblem& problem, const PWCProtocol& protocol,
                                const PropagatorBackend& backend, int order) {
    const auto cache = propagate(problem, protocol, backend);
    return taylor_from_cache(problem, protocol, cache, order);
}

namespace {

/// Forward/backward dense sweep computing both beta and the exact gradient.
std::pair<Complex, Eigen::VectorXd> exact_dense_sweep(const ControlProblem& problem,
                                                      const PWCProtocol& protocol) {
    const int M = protocol.slots();
    const int D = problem.dim();
    const DenseMatrix Hd = problem.H_d.to_dense();
    const DenseMatrix Hc = problem.H_c.to_dense();

    std::vector<StateVector> psi(M + 1);
    psi[0] = problem.initial;
    for (int j = 1; j <= M; ++j)
        psi[j] = linalg::expm_apply_dense(Hd + protocol.amplitudes[j - 1] * Hc, protocol.dt,
                                          psi[j - 1]);
    const Complex beta = linalg::inner(problem.target, psi[M]);

    Eigen::VectorXd grad(M);
    StateVector phi = problem.target;  // phi_j = U_{j+1}^dag ... U_M^dag |f>
    for (int j = M; j >= 1; --j) {
        const auto eig = linalg::eigh(Hd + protocol.amplitudes[j - 1] * Hc);
        const double width = eig.eigenvalues[D - 1] - eig.eigenvalues[0];
        const double degen_tol = 1e-9 * std::max(width, 1e-300);

        // dU/deps in the eigenbasis: divided differences of exp(-i lambda dt).
        const DenseMatrix Hc_eig = eig.eigenvectors.adjoint() * Hc * eig.eigenvectors;
        Eigen::VectorXcd phases(D);
        for (int a = 0; a < D; ++a)
            phases[a] = std::exp(Complex(0.0, -eig.eigenvalues[a] * protocol.dt));
        DenseMatrix G(D, D);
        for (int a = 0; a < D; ++a) {
            for (int b = 0; b < D; ++b) {
                const double gap = eig.eigenvalues[a] - eig.eigenvalues[b];
                const Complex f = std::abs(gap) <= degen_tol
                                      ? Complex(0.0, -protocol.dt) * phases[a]
                                      : (phases[a] - phases[b]) / gap;
                G(a, b) = Hc_eig(a, b) * f;
            }
        }

        const Eigen::VectorXcd phi_e = eig.eigenvectors.adjoint() * phi;
        const Eigen::VectorXcd psi_e = eig.eigenvectors.adjoint() * psi[j - 1];
        const Complex dbeta = phi_e.dot(G * psi_e);
        grad[j - 1] = -2.0 * (std::conj(beta) * dbeta).real();

        // phi_{j-1} = U_j^dag phi_j using the same eigendecomposition
        phi = linalg::expm_apply(eig, -protocol.dt, phi);
    }
    return {beta, grad};
}

}  // namespace

Eigen::VectorXd gradient_exact_dense(const ControlProblem& problem,
                                     const PWCProtocol& protocol, int dim_cap) {
    problem.validate();
    protocol.validate();
    if (problem.dim() > dim_cap)
        throw std::invalid_argument("gradient_exact_dense: dimension exceeds cap");
    return exact_dense_sweep(problem, protocol).second;
}

Evaluation evaluate(const ControlProblem& problem, const PWCProtocol& protocol,
                    const PropagatorBackend& backend, GradientKind kind, int taylor_order,
                    TrajectoryCache* workspace) {
    Evaluation out;
    if (kind == GradientKind::exact_dense) {
        problem.validate();
        protocol.validate();
        const auto [beta, grad] = exact_dense_sweep(problem, protocol);
        out.infidelity = std::min(1.0, std::max(0.0, 1.0 - std::norm(beta)));
        out.gradient = grad;
        return out;
    }
    TrajectoryCache local;
    TrajectoryCache& cache = workspace ? *workspace : local;
    propagate_into(problem, protocol, backend, cache);
    out.infidelity = infidelity(cache);
    switch (kind) {
        case GradientKind::zeroth:
            out.gradient = zeroth_from_cache(problem, protocol, cache);
            break;
        case GradientKind::centered:
            out.gradient = centered_from_cache(problem, protocol, cache, backend);
            break;
        case GradientKind::taylor:
            out.gradient = taylor_from_cache(problem, protocol, cache, taylor_order);
            break;
        default:
            throw std::logic_error("unreachable gradient kind");
    }
    return out;
}

}  // namespace kgrape::grape
