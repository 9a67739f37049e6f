#pragma once

#include <deque>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "kgrape/grape.hpp"

namespace kgrape::optim {

struct OptimizerConfig {
    int memory = 10;
    double wolfe_c1 = 1e-4;
    double wolfe_c2 = 0.9;
    int max_iterations = 5000;
    double target_infidelity = 1e-2;  // objective value that counts as solved
    double min_objective_change = 10.0 * std::numeric_limits<double>::epsilon();
    int max_linesearch_steps = 40;
    bool scale_init_hessian = true;  // gamma_k scaling of the two-loop seed

    void validate() const;
};

enum class StopStatus { target_reached, stalled, max_iter };

std::string to_string(StopStatus s);
StopStatus status_from_string(const std::string& s);

struct OptimizationRecord {
    double final_value = 0.0;
    int iterations = 0;         // accepted L-BFGS iterations
    int field_evaluations = 0;  // objective+gradient calls, line search included
    double wall_time_seconds = 0.0;
    std::vector<double> trace;  // objective at accepted iterates (x0 first)
    StopStatus status = StopStatus::max_iter;
    Eigen::VectorXd solution;
    double dt = 0.0;  // slot width when the record came from solve_control
};

/// value = f(x), gradient written into the second argument.
using ObjectiveWithGradient =
    std::function<double(const Eigen::VectorXd&, Eigen::VectorXd&)>;

OptimizationRecord lbfgs_minimize(const ObjectiveWithGradient& objective,
                                  Eigen::VectorXd x0, const OptimizerConfig& cfg);

/// Curvature history and the two-loop recursion, exposed for verification
/// against a dense BFGS oracle.
struct LbfgsHistory {
    struct Pair {
        Eigen::VectorXd s, y;
        double rho;
    };
    std::deque<Pair> pairs;
    int memory = 10;

    /// Returns false (pair skipped) when y.s fails the curvature guard.
    bool push(const Eigen::VectorXd& s, const Eigen::VectorXd& y);
};

Eigen::VectorXd two_loop_direction(const LbfgsHistory& history, const Eigen::VectorXd& grad,
                                   bool scale_init_hessian);

struct SolveSettings {
    double M_factor = 4.0;  // M = round(M_factor * D) unless M_override > 0
    int M_override = 0;
    double dt = 0.5;
    grape::GradientKind gradient = grape::GradientKind::centered;
    int taylor_order = 2;
    grape::PropagatorBackend backend;
    unsigned rng_seed = 0;
    double init_low = -1.0;
    double init_high = 1.0;

    int slots_for(int dim) const;
};

/// Full GRAPE loop: seeded uniform initial amplitudes, minimize infidelity.
/// Wall time covers the optimization only, not model construction.
OptimizationRecord solve_control(const grape::ControlProblem& problem,
                                 const SolveSettings& settings, const OptimizerConfig& cfg);

/// Run-time per field evaluation per time slot.
double elementary_runtime(const OptimizationRecord& record, int M);

}  // namespace kgrape::optim
