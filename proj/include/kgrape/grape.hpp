#pragma once

#include <string>
#include <vector>

#include "kgrape/krylov.hpp"
#include "kgrape/linalg.hpp"

namespace kgrape::grape {

using linalg::Complex;
using linalg::SparseHermitianOperator;
using linalg::StateVector;
using krylov::KrylovStepConfig;

/// State-transfer task: drive |initial> to |target> under H_d + eps(t) H_c.
struct ControlProblem {
    SparseHermitianOperator H_d;
    SparseHermitianOperator H_c;
    StateVector initial;
    StateVector target;

    int dim() const { return H_d.dim(); }
    void validate() const;
};

/// Piecewise-constant protocol: M slots of width dt.
struct PWCProtocol {
    Eigen::VectorXd amplitudes;
    double dt = 0.5;

    int slots() const { return static_cast<int>(amplitudes.size()); }
    double horizon() const { return slots() * dt; }
    void validate() const;
};

struct PropagatorBackend {
    enum class Kind { dense_eig, krylov };
    Kind kind = Kind::krylov;
    KrylovStepConfig krylov_cfg;
    // Reuse per-slot eigendecompositions from the forward sweep in the
    // backward one (dense backend only; memory-heavy at large D x M).
    bool cache_propagators = false;

    static PropagatorBackend dense(bool cache = false);
    static PropagatorBackend with_krylov(const KrylovStepConfig& cfg);
    void validate() const;
    std::string name() const { return kind == Kind::dense_eig ? "dense" : "krylov"; }
};

/// Forward states psi_0..psi_M, backward states chi_1..chi_M and the final
/// overlap beta = <f|psi_M>. chi_M = beta |f>.
struct TrajectoryCache {
    std::vector<StateVector> forward;   // size M+1
    std::vector<StateVector> backward;  // backward[j-1] = chi_j, size M
    Complex overlap{0.0, 0.0};
};

TrajectoryCache propagate(const ControlProblem& problem, const PWCProtocol& protocol,
                          const PropagatorBackend& backend);

/// Same sweep, reusing the cache's existing state storage; the allocation-free
/// path for repeated evaluations of one problem.
void propagate_into(const ControlProblem& problem, const PWCProtocol& protocol,
                    const PropagatorBackend& backend, TrajectoryCache& cache);

/// I = 1 - |beta|^2, clamped to [0, 1]; throws if |beta| > 1 + 1e-10.
double infidelity(const TrajectoryCache& cache);

enum class GradientKind { zeroth, centered, taylor, exact_dense };

std::string to_string(GradientKind kind);
GradientKind gradient_from_string(const std::string& s);

/// g_j = -2 dt Im <chi_j| H_c |psi_j>
Eigen::VectorXd gradient_zeroth(const ControlProblem& problem, const PWCProtocol& protocol,
                                const PropagatorBackend& backend);

/// Averages the zeroth-order boundary values of each slot's two edges,
/// centering the approximation on the slot midpoint (one extra reverse step
/// supplies the left edge of the first slot).
Eigen::VectorXd gradient_centered(const ControlProblem& problem, const PWCProtocol& protocol,
                                  const PropagatorBackend& backend);

/// Taylor hierarchy of the averaged control Hamiltonian, applied as nested
/// commutator matvecs; order = 0 reproduces gradient_zeroth exactly.
Eigen::VectorXd gradient_taylor(const ControlProblem& problem, const PWCProtocol& protocol,
                                const PropagatorBackend& backend, int order);

/// Exact dI/deps_j via per-slot eigendecompositions and divided differences.
Eigen::VectorXd gradient_exact_dense(const ControlProblem& problem,
                                     const PWCProtocol& protocol, int dim_cap = 512);

/// One propagation, value and gradient together; what the optimizer calls.
struct Evaluation {
    double infidelity = 0.0;
    Eigen::VectorXd gradient;
};

/// A non-null workspace keeps the trajectory storage alive across calls.
Evaluation evaluate(const ControlProblem& problem, const PWCProtocol& protocol,
                    const PropagatorBackend& backend, GradientKind kind, int taylor_order = 2,
                    TrajectoryCache* workspace = nullptr);

}  // namespace kgrape::grape
