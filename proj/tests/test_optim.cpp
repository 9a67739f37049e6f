#include <doctest.h>

#include <random>

#include "kgrape/optim.hpp"
#include "kgrape/spinchain.hpp"
#include "test_helpers.hpp"

using namespace kgrape;
using linalg::Complex;
using optim::OptimizerConfig;
using optim::StopStatus;

namespace {

optim::ObjectiveWithGradient quadratic(const Eigen::MatrixXd& A, const Eigen::VectorXd& b) {
    return [A, b](const Eigen::VectorXd& x, Eigen::VectorXd& g) {
        g = A * x - b;
        return 0.5 * x.dot(A * x) - b.dot(x);
    };
}

Eigen::MatrixXd spd_matrix(int n, unsigned seed) {
    std::mt19937 rng(seed);
    std::normal_distribution<double> gauss;
    Eigen::MatrixXd B(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) B(i, j) = gauss(rng);
    return B.transpose() * B / n + Eigen::MatrixXd::Identity(n, n);
}

double rosenbrock(const Eigen::VectorXd& x, Eigen::VectorXd& g) {
    const double a = 1.0 - x[0];
    const double b = x[1] - x[0] * x[0];
    g.resize(2);
    g[0] = -2.0 * a - 400.0 * x[0] * b;
    g[1] = 200.0 * b;
    return a * a + 100.0 * b * b;
}

}  // namespace

TEST_CASE("OptimizerConfig validation") {
    OptimizerConfig cfg;
    CHECK_NOTHROW(cfg.validate());
    cfg.wolfe_c2 = cfg.wolfe_c1;  // violates 0 < c1 < c2 < 1
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}

TEST_CASE("lbfgs_minimize: convex quadratic to tight gradient norm") {
    const int n = 20;
    const Eigen::MatrixXd A = spd_matrix(n, 3);
    const Eigen::VectorXd b = Eigen::VectorXd::LinSpaced(n, -1.0, 2.0);
    OptimizerConfig cfg;
    cfg.target_infidelity = -std::numeric_limits<double>::infinity();
    cfg.min_objective_change = 0.0;
    cfg.max_iterations = 50;
    const auto rec = optim::lbfgs_minimize(quadratic(A, b), Eigen::VectorXd::Zero(n), cfg);
    Eigen::VectorXd g(n);
    quadratic(A, b)(rec.solution, g);
    CHECK(g.norm() <= 1e-8);
    // minimum is x* = A^{-1} b
    CHECK((rec.solution - A.ldlt().solve(b)).norm() <= 1e-7);
    // the accepted-iterate trace decreases (ties only at the roundoff floor)
    for (std::size_t i = 1; i < rec.trace.size(); ++i) {
        CHECK(rec.trace[i] <= rec.trace[i - 1]);
        if (rec.trace[i] == rec.trace[i - 1])
            CHECK(std::abs(rec.trace[i] - rec.trace.back()) <=
                  1e-12 * std::abs(rec.trace.back()));
    }
    CHECK(rec.trace.back() < rec.trace.front());
}

TEST_CASE("lbfgs_minimize: Rosenbrock from the classic start") {
    Eigen::VectorXd x0(2);
    x0 << -1.2, 1.0;
    OptimizerConfig cfg;
    cfg.target_infidelity = 1e-12;
    cfg.max_iterations = 500;
    const auto rec = optim::lbfgs_minimize(rosenbrock, x0, cfg);
    CHECK(rec.final_value <= 1e-10);
    CHECK((rec.solution - Eigen::Vector2d::Ones()).norm() <= 1e-4);
}

TEST_CASE("lbfgs_minimize: already at target -> zero iterations") {
    OptimizerConfig cfg;
    cfg.target_infidelity = 1.0;
    const auto objective = [](const Eigen::VectorXd& x, Eigen::VectorXd& g) {
        g = 2.0 * x;
        return x.squaredNorm();
    };
    const auto rec = optim::lbfgs_minimize(objective, Eigen::VectorXd::Zero(4), cfg);
    CHECK(rec.iterations == 0);
    CHECK(rec.status == StopStatus::target_reached);
    CHECK(rec.field_evaluations == 1);
}

TEST_CASE("lbfgs_minimize: stops on max_iterations") {
    OptimizerConfig cfg;
    cfg.max_iterations = 3;
    cfg.target_infidelity = -1.0;
    cfg.min_objective_change = 0.0;
    Eigen::VectorXd x0 = Eigen::VectorXd::Constant(5, 10.0);
    const auto rec = optim::lbfgs_minimize(quadratic(spd_matrix(5, 9),
                                                     Eigen::VectorXd::Zero(5)),
                                           x0, cfg);
    CHECK(rec.iterations == 3);
    CHECK(rec.status == StopStatus::max_iter);
}

TEST_CASE("two_loop_direction: matches a dense inverse-BFGS oracle") {
    // With unlimited memory and no initial-Hessian scaling the two-loop
    // recursion equals H_k * g where H_k is the dense BFGS inverse update.
    const int n = 6;
    std::mt19937 rng(17);
    std::normal_distribution<double> gauss;
    optim::LbfgsHistory hist;
    hist.memory = n + 4;
    Eigen::MatrixXd H = Eigen::MatrixXd::Identity(n, n);
    for (int k = 0; k < 5; ++k) {
        Eigen::VectorXd s(n), y(n);
        for (int i = 0; i < n; ++i) {
            s[i] = gauss(rng);
            y[i] = gauss(rng);
        }
        if (y.dot(s) <= 0) y = s + 0.1 * y;  // keep curvature positive
        REQUIRE(hist.push(s, y));
        const double rho = 1.0 / y.dot(s);
        const Eigen::MatrixXd V = Eigen::MatrixXd::Identity(n, n) - rho * s * y.transpose();
        H = V * H * V.transpose() + rho * s * s.transpose();
    }
    Eigen::VectorXd g(n);
    for (int i = 0; i < n; ++i) g[i] = gauss(rng);
    const Eigen::VectorXd d = optim::two_loop_direction(hist, g, false);
    CHECK((d - H * g).norm() <= 1e-10 * (H * g).norm());
}

TEST_CASE("LbfgsHistory: curvature guard skips bad pairs, memory bounded") {
    optim::LbfgsHistory hist;
    hist.memory = 2;
    Eigen::VectorXd s = Eigen::VectorXd::Ones(3);
    CHECK_FALSE(hist.push(s, -s));  // y.s < 0
    CHECK(hist.pairs.empty());
    CHECK(hist.push(s, s));
    CHECK(hist.push(2 * s, s));
    CHECK(hist.push(3 * s, s));
    CHECK(hist.pairs.size() == 2);  // oldest evicted
    CHECK(hist.pairs.front().s[0] == 2.0);
}

TEST_CASE("solve_control: single-qubit flip") {
    grape::ControlProblem p{testing::to_operator(0.5 * testing::pauli('z')),
                            testing::to_operator(0.5 * testing::pauli('x')),
                            linalg::StateVector::Unit(2, 0), linalg::StateVector::Unit(2, 1)};
    optim::SolveSettings settings;
    settings.M_override = 8;
    settings.dt = 0.5;
    settings.backend = grape::PropagatorBackend::dense();
    settings.gradient = grape::GradientKind::exact_dense;
    settings.rng_seed = 5;
    const auto rec = optim::solve_control(p, settings, OptimizerConfig{});
    CHECK(rec.final_value <= 1e-2);
    CHECK(rec.status == StopStatus::target_reached);
    CHECK(rec.solution.size() == 8);
    CHECK(rec.dt == 0.5);
}

TEST_CASE("solve_control: small spin-sector transfer with both backends") {
    const auto model = spinchain::build_reduced_model({5, 1.0, 0.5, 2, spinchain::Parity::even});
    const auto [e1, eD] = spinchain::task_states(model.dim);
    grape::ControlProblem p{model.H_d, model.H_c, e1, eD};

    optim::SolveSettings settings;
    settings.M_override = 20;
    settings.dt = 0.5;
    settings.rng_seed = 1;

    settings.backend = grape::PropagatorBackend::dense();
    const auto dense_rec = optim::solve_control(p, settings, OptimizerConfig{});
    CHECK(dense_rec.final_value <= 1e-2);
    CHECK(dense_rec.status == StopStatus::target_reached);

    settings.backend = grape::PropagatorBackend::with_krylov({10});
    const auto kry_rec = optim::solve_control(p, settings, OptimizerConfig{});
    CHECK(kry_rec.final_value <= 1e-2);
}

TEST_CASE("solve_control: deterministic for a fixed seed") {
    const auto model = spinchain::build_reduced_model({4, 1.0, 0.5, 2, spinchain::Parity::even});
    const auto [e1, eD] = spinchain::task_states(model.dim);
    grape::ControlProblem p{model.H_d, model.H_c, e1, eD};
    optim::SolveSettings settings;
    settings.M_override = 12;
    settings.rng_seed = 42;
    settings.backend = grape::PropagatorBackend::with_krylov({4});
    OptimizerConfig cfg;
    cfg.max_iterations = 30;
    const auto r1 = optim::solve_control(p, settings, cfg);
    const auto r2 = optim::solve_control(p, settings, cfg);
    CHECK(r1.final_value == r2.final_value);
    CHECK(r1.iterations == r2.iterations);
    CHECK(r1.field_evaluations == r2.field_evaluations);
    CHECK((r1.solution - r2.solution).cwiseAbs().maxCoeff() == 0.0);
    CHECK(r1.trace == r2.trace);
}

TEST_CASE("SolveSettings: slot count") {
    optim::SolveSettings s;
    CHECK(s.slots_for(60) == 240);  // round(4 * D)
    s.M_factor = 1.3;
    CHECK(s.slots_for(10) == 13);
    s.M_override = 7;
    CHECK(s.slots_for(10) == 7);
}

TEST_CASE("elementary_runtime arithmetic") {
    optim::OptimizationRecord rec;
    rec.wall_time_seconds = 10.0;
    rec.field_evaluations = 100;
    CHECK(optim::elementary_runtime(rec, 50) == doctest::Approx(2e-3));
    CHECK(optim::elementary_runtime(rec, 100) == doctest::Approx(1e-3));
    rec.field_evaluations = 0;
    CHECK_THROWS_AS(optim::elementary_runtime(rec, 50), std::invalid_argument);
}

TEST_CASE("status string round-trip") {
    for (auto s : {StopStatus::target_reached, StopStatus::stalled, StopStatus::max_iter})
        CHECK(optim::status_from_string(optim::to_string(s)) == s);
    CHECK_THROWS_AS(optim::status_from_string("nope"), std::invalid_argument);
}
