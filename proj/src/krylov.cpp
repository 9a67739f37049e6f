#include "kgrape/krylov.hpp"

#include <random>

namespace kgrape::krylov {

double spectral_width(const SparseHermitianOperator& H) {
    const int D = H.dim();
    if (D <= 64) {
        const auto eig = linalg::eigh(H.to_dense());
        return eig.eigenvalues[D - 1] - eig.eigenvalues[0];
    }

    std::mt19937 rng(0x5ca1ab1e);
    std::normal_distribution<double> gauss(0.0, 1.0);
    StateVector psi(D);
    for (int i = 0; i < D; ++i) psi[i] = Complex(gauss(rng), gauss(rng));

    KrylovStepConfig cfg;
    cfg.N = std::min(50, D);
    cfg.reorth = Reorthogonalize::full;
    const auto fac = lanczos(H, psi, cfg);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(fac.tridiagonal(),
                                                          Eigen::EigenvaluesOnly);
    const auto& ritz = solver.eigenvalues();
    return ritz[fac.m - 1] - ritz[0];
}

}  // namespace kgrape::krylov
