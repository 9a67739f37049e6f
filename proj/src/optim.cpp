#include "kgrape/optim.hpp"

#include <chrono>
#include <cmath>
#include <memory>
#include <random>
#include <stdexcept>

namespace kgrape::optim {

void OptimizerConfig::validate() const {
    if (memory < 1) throw std::invalid_argument("L-BFGS memory must be >= 1");
    if (!(0.0 < wolfe_c1 && wolfe_c1 < wolfe_c2 && wolfe_c2 < 1.0))
        throw std::invalid_argument("Wolfe constants must satisfy 0 < c1 < c2 < 1");
    if (max_iterations < 1) throw std::invalid_argument("max_iterations must be >= 1");
    if (max_linesearch_steps < 1) throw std::invalid_argument("max_linesearch_steps must be >= 1");
}

std::string to_string(StopStatus s) {
    switch (s) {
        case StopStatus::target_reached: return "target_reached";
        case StopStatus::stalled: return "stalled";
        case StopStatus::max_iter: return "max_iter";
    }
    return "unknown";
}

StopStatus status_from_string(const std::string& s) {
    if (s == "target_reached") return StopStatus::target_reached;
    if (s == "stalled") return StopStatus::stalled;
    if (s == "max_iter") return StopStatus::max_iter;
    throw std::invalid_argument("unknown stop status '" + s + "'");
}

bool LbfgsHistory::push(const Eigen::VectorXd& s, const Eigen::VectorXd& y) {
    const double ys = y.dot(s);
    if (ys <= 1e-10 * y.norm() * s.norm()) return false;  // curvature guard
    pairs.push_back({s, y, 1.0 / ys});
    while (static_cast<int>(pairs.size()) > memory) pairs.pop_front();
    return true;
}

Eigen::VectorXd two_loop_direction(const LbfgsHistory& history, const Eigen::VectorXd& grad,
                                   bool scale_init_hessian) {
    Eigen::VectorXd q = grad;
    const int k = static_cast<int>(history.pairs.size());
    std::vector<double> a(k);
    for (int i = k - 1; i >= 0; --i) {
        const auto& p = history.pairs[i];
        a[i] = p.rho * p.s.dot(q);
        q -= a[i] * p.y;
    }
    if (scale_init_hessian && k > 0) {
        const auto& last = history.pairs.back();
        q *= last.s.dot(last.y) / last.y.dot(last.y);
    }
    for (int i = 0; i < k; ++i) {
        const auto& p = history.pairs[i];
        const double b = p.rho * p.y.dot(q);
        q += (a[i] - b) * p.s;
    }
    return q;  // approximates B^{-1} grad
}

namespace {

struct LinePoint {
    double alpha = 0.0;
    double phi = 0.0;
    double dphi = 0.0;
};

struct LineSearchState {
    Eigen::VectorXd x, g;
    double f = 0.0;
    double alpha = 0.0;
};

class LineSearch {
public:
    LineSearch(const ObjectiveWithGradient& objective, int& eval_counter,
               const OptimizerConfig& cfg)
        : objective_(objective), evals_(eval_counter), cfg_(cfg) {}

    /// Strong Wolfe search along d from (x0, f0, g0). Returns false when no
    /// acceptable step was found within the evaluation budget.
    bool run(const Eigen::VectorXd& x0, double f0, const Eigen::VectorXd& g0,
             const Eigen::VectorXd& d, LineSearchState& out) {
        x0_ = &x0;
        d_ = &d;
        f0_ = f0;
        dphi0_ = g0.dot(d);
        used_ = 0;
        xt_.resize(x0.size());
        gt_.resize(x0.size());

        LinePoint prev{0.0, f0, dphi0_};
        double alpha = 1.0;
        bool first = true;
        while (used_ < cfg_.max_linesearch_steps) {
            LinePoint cur;
            if (!probe(alpha, cur)) {
                // Non-finite objective: shrink the step and retry.
                alpha *= 0.5;
                if (alpha < 1e-300) return false;
                continue;
            }
            if (cur.phi > f0_ + cfg_.wolfe_c1 * alpha * dphi0_ ||
                (!first && cur.phi >= prev.phi))
                return zoom(prev, cur, out);
            if (std::abs(cur.dphi) <= -cfg_.wolfe_c2 * dphi0_) return accept(cur, out);
            if (cur.dphi >= 0.0) return zoom(cur, prev, out);
            prev = cur;
            first = false;
            alpha = std::min(2.0 * alpha, kAlphaMax);
            if (prev.alpha >= kAlphaMax) return false;
        }
        return false;
    }

private:
    static constexpr double kAlphaMax = 1e8;

    bool probe(double alpha, LinePoint& pt) {
        xt_ = *x0_ + alpha * *d_;
        ++used_;
        ++evals_;
        const double phi = objective_(xt_, gt_);
        if (!std::isfinite(phi) || !gt_.allFinite()) return false;
        pt = {alpha, phi, gt_.dot(*d_)};
        return true;
    }

    bool accept(const LinePoint& pt, LineSearchState& out) {
        out.alpha = pt.alpha;
        out.f = pt.phi;
        out.x = xt_;
        out.g = gt_;
        return true;
    }

    // lo always satisfies the sufficient-decrease condition; hi brackets it.
    bool zoom(LinePoint lo, LinePoint hi, LineSearchState& out) {
        bool hi_known = std::isfinite(hi.phi);
        while (used_ < cfg_.max_linesearch_steps) {
            const double span = hi.alpha - lo.alpha;
            if (std::abs(span) < 1e-16 * std::max(1.0, std::abs(lo.alpha))) return false;

            double trial = lo.alpha + 0.5 * span;
            if (hi_known) {
                // Quadratic model through (lo, phi, dphi) and (hi, phi).
                const double denom = 2.0 * (hi.phi - lo.phi - lo.dphi * span);
                if (denom != 0.0 && std::isfinite(denom)) {
                    const double cand = lo.alpha - lo.dphi * span * span / denom;
                    const double t = (cand - lo.alpha) / span;
                    if (std::isfinite(cand) && t > 0.05 && t < 0.95) trial = cand;
                }
            }

            LinePoint cur;
            if (!probe(trial, cur)) {
                hi = {trial, std::numeric_limits<double>::quiet_NaN(), 0.0};
                hi_known = false;
                continue;
            }
            if (cur.phi > f0_ + cfg_.wolfe_c1 * cur.alpha * dphi0_ || cur.phi >= lo.phi) {
                hi = cur;
                hi_known = true;
            } else {
                if (std::abs(cur.dphi) <= -cfg_.wolfe_c2 * dphi0_) return accept(cur, out);
                if (cur.dphi * span >= 0.0) {
                    hi = lo;
                    hi_known = true;
                }
                lo = cur;
            }
        }
        return false;
    }

    const ObjectiveWithGradient& objective_;
    int& evals_;
    const OptimizerConfig& cfg_;
    const Eigen::VectorXd* x0_ = nullptr;
    const Eigen::VectorXd* d_ = nullptr;
    double f0_ = 0.0, dphi0_ = 0.0;
    int used_ = 0;
    Eigen::VectorXd xt_, gt_;
};

}  // namespace

OptimizationRecord lbfgs_minimize(const ObjectiveWithGradient& objective, Eigen::VectorXd x0,
                                  const OptimizerConfig& cfg) {
    cfg.validate();
    const auto t_start = std::chrono::steady_clock::now();

    OptimizationRecord rec;
    Eigen::VectorXd x = std::move(x0);
    Eigen::VectorXd g(x.size());
    int evals = 0;

    ++evals;
    double f = objective(x, g);
    if (!std::isfinite(f) || !g.allFinite())
        throw std::runtime_error("objective is not finite at the starting point");
    rec.trace.push_back(f);

    LbfgsHistory history;
    history.memory = cfg.memory;
    LineSearch search(objective, evals, cfg);
    StopStatus status = StopStatus::max_iter;
    int iter = 0;

    if (f <= cfg.target_infidelity) {
        status = StopStatus::target_reached;
    } else {
        while (iter < cfg.max_iterations) {
            Eigen::VectorXd d = -two_loop_direction(history, g, cfg.scale_init_hessian);
            if (!(g.dot(d) < 0.0)) {  // not a descent direction: restart
                history.pairs.clear();
                d = -g;
                if (!(g.dot(d) < 0.0)) {
                    status = StopStatus::stalled;
                    break;
                }
            }
            LineSearchState step;
            if (!search.run(x, f, g, d, step)) {
                status = StopStatus::stalled;
                break;
            }
            ++iter;
            history.push(step.x - x, step.g - g);
            const double f_old = f;
            x = std::move(step.x);
            g = std::move(step.g);
            f = step.f;
            rec.trace.push_back(f);
            if (f <= cfg.target_infidelity) {
                status = StopStatus::target_reached;
                break;
            }
            if (std::abs(f_old - f) < cfg.min_objective_change) {
                status = StopStatus::stalled;
                break;
            }
        }
    }

    rec.final_value = f;
    rec.iterations = iter;
    rec.field_evaluations = evals;
    rec.status = status;
    rec.solution = std::move(x);
    rec.wall_time_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    return rec;
}

int SolveSettings::slots_for(int dim) const {
    if (M_override > 0) return M_override;
    const int M = static_cast<int>(std::lround(M_factor * dim));
    if (M < 1) throw std::invalid_argument("M_factor * D rounds below one slot");
    return M;
}

OptimizationRecord solve_control(const grape::ControlProblem& problem,
                                 const SolveSettings& settings, const OptimizerConfig& cfg) {
    problem.validate();
    settings.backend.validate();
    const int M = settings.slots_for(problem.dim());

    std::mt19937 rng(settings.rng_seed);
    std::uniform_real_distribution<double> uniform(settings.init_low, settings.init_high);
    Eigen::VectorXd x0(M);
    for (int j = 0; j < M; ++j) x0[j] = uniform(rng);

    auto workspace = std::make_shared<grape::TrajectoryCache>();
    const auto objective = [&, workspace](const Eigen::VectorXd& x, Eigen::VectorXd& grad) {
        grape::PWCProtocol protocol{x, settings.dt};
        const auto eval = grape::evaluate(problem, protocol, settings.backend,
                                          settings.gradient, settings.taylor_order,
                                          workspace.get());
        grad = eval.gradient;
        return eval.infidelity;
    };

    OptimizationRecord rec = lbfgs_minimize(objective, std::move(x0), cfg);
    rec.dt = settings.dt;
    return rec;
}

double elementary_runtime(const OptimizationRecord& record, int M) {
    if (record.field_evaluations <= 0 || M <= 0)
        throw std::invalid_argument("elementary_runtime needs evaluations and slots");
    return record.wall_time_seconds / (static_cast<double>(record.field_evaluations) * M);
}

}  // namespace kgrape::optim
