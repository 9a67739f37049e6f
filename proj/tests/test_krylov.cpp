#include <doctest.h>

#include "kgrape/krylov.hpp"
#include "kgrape/spinchain.hpp"
#include "test_helpers.hpp"

using namespace kgrape;
using krylov::KrylovStepConfig;
using krylov::Reorthogonalize;
using linalg::Complex;
using linalg::DenseMatrix;
using linalg::StateVector;

TEST_CASE("lanczos: N=1 yields the Rayleigh quotient") {
    const auto op = testing::random_hermitian(12, 3);
    StateVector psi = 2.5 * testing::random_state(12, 4);  // unnormalized on purpose
    KrylovStepConfig cfg;
    cfg.N = 1;
    const auto fac = krylov::lanczos(op, psi, cfg);
    CHECK(fac.m == 1);
    CHECK(fac.beta.empty());
    const double rayleigh =
        linalg::inner(psi, linalg::matvec(op, psi)).real() / psi.squaredNorm();
    CHECK(fac.alpha[0] == doctest::Approx(rayleigh).epsilon(1e-12));
    CHECK((fac.basis[0] - psi / psi.norm()).norm() < 1e-14);
}

TEST_CASE("lanczos: eigenvector start hits happy breakdown") {
    const auto H = testing::random_hermitian_dense(10, 5);
    const auto eig = linalg::eigh(H);
    StateVector psi = eig.eigenvectors.col(3);
    KrylovStepConfig cfg;
    cfg.N = 6;
    const auto fac = krylov::lanczos(testing::to_operator(H), psi, cfg);
    CHECK(fac.m == 1);
    CHECK(fac.alpha[0] == doctest::Approx(eig.eigenvalues[3]).epsilon(1e-12));
}

TEST_CASE("lanczos: rejects zero start vector and dimension mismatch") {
    const auto op = testing::random_hermitian(6, 8);
    KrylovStepConfig cfg;
    CHECK_THROWS_AS(krylov::lanczos(op, StateVector::Zero(6).eval(), cfg),
                    std::invalid_argument);
    CHECK_THROWS_AS(krylov::lanczos(op, testing::random_state(5, 1), cfg),
                    std::invalid_argument);
}

TEST_CASE("lanczos: dense projection oracle on a 40-dim operator") {
    const auto H = testing::random_hermitian_dense(40, 21);
    const auto op = testing::to_operator(H);
    const auto psi = testing::random_state(40, 22);
    KrylovStepConfig cfg;
    cfg.N = 10;
    cfg.reorth = Reorthogonalize::full;
    const auto fac = krylov::lanczos(op, psi, cfg);
    REQUIRE(fac.m == 10);

    DenseMatrix V(fac.m, 40);
    for (int j = 0; j < fac.m; ++j) V.row(j) = fac.basis[j].adjoint();
    const DenseMatrix projected = V * H * V.adjoint();
    const DenseMatrix T = fac.tridiagonal().cast<Complex>();
    CHECK((projected - T).cwiseAbs().maxCoeff() <= 1e-10 * H.cwiseAbs().maxCoeff());

    // Three-term recurrence: H v_j = b_j v_{j-1} + a_j v_j + b_{j+1} v_{j+1}
    for (int j = 0; j + 1 < fac.m; ++j) {
        StateVector lhs = linalg::matvec(op, fac.basis[j]);
        StateVector rhs = fac.alpha[j] * fac.basis[j] + fac.beta[j] * fac.basis[j + 1];
        if (j > 0) rhs += fac.beta[j - 1] * fac.basis[j - 1];
        CHECK((lhs - rhs).norm() <= 1e-9);
    }
    for (double b : fac.beta) CHECK(b > 0.0);
}

TEST_CASE("lanczos: real symmetric operator with real start stays real") {
    const DenseMatrix H = testing::random_hermitian_dense(20, 33).real().cast<Complex>();
    StateVector psi = StateVector::Zero(20);
    psi.real().setLinSpaced(20, 0.3, 1.0);
    KrylovStepConfig cfg;
    cfg.N = 8;
    const auto fac = krylov::lanczos(testing::to_operator(H), psi, cfg);
    for (const auto& v : fac.basis) CHECK(v.imag().cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("krylov_step: dt = 0 returns the input state") {
    const auto op = testing::random_hermitian(15, 40);
    const auto psi = testing::random_state(15, 41);
    KrylovStepConfig cfg;
    cfg.N = 5;
    CHECK((krylov::krylov_step(op, psi, 0.0, cfg) - psi).norm() < 1e-13);
}

TEST_CASE("krylov_step: N = D matches dense propagation") {
    const auto H = testing::random_hermitian_dense(10, 50);
    const auto op = testing::to_operator(H);
    const auto psi = testing::random_state(10, 51);
    KrylovStepConfig cfg;
    cfg.N = 10;
    cfg.reorth = Reorthogonalize::full;
    for (double dt : {0.1, 0.7, 2.0}) {
        const auto approx = krylov::krylov_step(op, psi, dt, cfg);
        const auto exact = linalg::expm_apply_dense(H, dt, psi);
        CHECK((approx - exact).norm() <= 1e-10);
    }
}

TEST_CASE("krylov_step: norm preserving for arbitrary (H, psi, dt, N)") {
    for (unsigned seed = 0; seed < 6; ++seed) {
        const auto op = testing::random_hermitian(30, 700 + seed);
        const auto psi = testing::random_state(30, 800 + seed);
        for (int N : {2, 5, 12})
            for (double dt : {1e-3, 0.3, 5.0}) {
                KrylovStepConfig cfg;
                cfg.N = N;
                CHECK(std::abs(krylov::krylov_step(op, psi, dt, cfg).norm() - 1.0) <= 1e-12);
            }
    }
}

TEST_CASE("krylov_step: error decreases with N inside the validity regime") {
    const auto H = testing::random_hermitian_dense(24, 60);
    const auto op = testing::to_operator(H);
    const auto psi = testing::random_state(24, 61);
    const double W = krylov::spectral_width(op);
    const double dt = 0.5 * 4.0 / W;  // dt < N^2/W for every N >= 2

    const auto exact = linalg::expm_apply_dense(H, dt, psi);
    double prev = std::numeric_limits<double>::infinity();
    for (int N : {2, 4, 6, 8}) {
        KrylovStepConfig cfg;
        cfg.N = N;
        const double err = (krylov::krylov_step(op, psi, dt, cfg) - exact).norm();
        CHECK(err <= prev + 1e-13);
        prev = err;
    }
}

TEST_CASE("krylov_step: O(dt^N) error law on the XXZ D=44 sector") {
    const auto model =
        spinchain::build_reduced_model({9, 1.0, 0.5, 3, spinchain::Parity::even});
    REQUIRE(model.dim == 44);
    const auto psi = testing::random_state(model.dim, 70);
    const DenseMatrix Hd = model.H_d.to_dense();

    KrylovStepConfig cfg;
    cfg.N = 4;
    std::vector<double> logdt, logerr;
    for (double dt = 1e-3; dt < 1.3e-1; dt *= std::sqrt(10.0)) {
        const auto approx = krylov::krylov_step(model.H_d, psi, dt, cfg);
        const auto exact = linalg::expm_apply_dense(Hd, dt, psi);
        logdt.push_back(std::log(dt));
        logerr.push_back(std::log((approx - exact).norm()));
    }
    const double slope = testing::fit_slope(logdt, logerr);
    CHECK(slope == doctest::Approx(4.0).epsilon(0.12));
}

TEST_CASE("lanczos: full reorthogonalization keeps a deep basis orthonormal") {
    const auto op = testing::random_hermitian(200, 90);
    const auto psi = testing::random_state(200, 91);
    KrylovStepConfig cfg;
    cfg.N = 30;
    cfg.reorth = Reorthogonalize::full;
    const auto fac = krylov::lanczos(op, psi, cfg);
    REQUIRE(fac.m == 30);
    double worst = 0.0;
    for (int i = 0; i < fac.m; ++i)
        for (int j = i + 1; j < fac.m; ++j)
            worst = std::max(worst, std::abs(linalg::inner(fac.basis[i], fac.basis[j])));
    CHECK(worst <= 1e-10);
}

TEST_CASE("spectral_width: trivial and oracle cases") {
    std::vector<linalg::SparseHermitianOperator::Triplet> none;
    CHECK(krylov::spectral_width(linalg::SparseHermitianOperator::from_triplets(3, none)) ==
          doctest::Approx(0.0));
    CHECK(krylov::spectral_width(testing::to_operator(testing::pauli('z'))) ==
          doctest::Approx(2.0));

    // Exact path (D <= 64).
    const auto small =
        spinchain::build_reduced_model({8, 1.0, 0.5, 3, spinchain::Parity::even});
    const auto eig_s = linalg::eigh(small.H_d.to_dense());
    const double oracle_s = eig_s.eigenvalues[small.dim - 1] - eig_s.eigenvalues[0];
    CHECK(krylov::spectral_width(small.H_d) == doctest::Approx(oracle_s).epsilon(1e-10));

    // Lanczos-estimated path (D > 64), within 1%.
    const auto big =
        spinchain::build_reduced_model({11, 1.0, 0.5, 3, spinchain::Parity::even});
    REQUIRE(big.dim > 64);
    const auto eig_b = linalg::eigh(big.H_d.to_dense());
    const double oracle_b = eig_b.eigenvalues[big.dim - 1] - eig_b.eigenvalues[0];
    CHECK(krylov::spectral_width(big.H_d) == doctest::Approx(oracle_b).epsilon(0.01));
}
