// Command-line harness: single solves, benchmark sweeps, CSV summaries and a
// quick structural self-check on small models.

#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "kgrape/bench.hpp"

namespace {

using namespace kgrape;

struct SolveOptions {
    int L = 5;
    int K = 2;
    std::string parity = "even";
    double J = 1.0;
    double alpha_z = 0.5;
    std::string backend = "krylov";
    int N = 10;
    double dt = 0.5;
    double M_factor = 4.0;
    int M_override = 0;
    std::string gradient = "centered";
    int taylor_order = 2;
    int seed = 0;
    double target = 1e-2;
    int max_iterations = 5000;
    bool csv = false;
};

int run_solve(const SolveOptions& opt) {
    spinchain::ChainSpec spec{opt.L, opt.J, opt.alpha_z, opt.K,
                              spinchain::parity_from_string(opt.parity)};
    const auto model = spinchain::build_reduced_model(spec);

    grape::ControlProblem problem;
    problem.H_d = model.H_d;
    problem.H_c = model.H_c;
    std::tie(problem.initial, problem.target) = spinchain::task_states(model.dim);

    optim::SolveSettings settings;
    settings.M_factor = opt.M_factor;
    settings.M_override = opt.M_override;
    settings.dt = opt.dt;
    settings.gradient = grape::gradient_from_string(opt.gradient);
    settings.taylor_order = opt.taylor_order;
    settings.rng_seed = static_cast<unsigned>(opt.seed);
    if (opt.backend == "krylov") {
        krylov::KrylovStepConfig kcfg;
        kcfg.N = opt.N;
        settings.backend = grape::PropagatorBackend::with_krylov(kcfg);
    } else if (opt.backend == "dense" || opt.backend == "dense_cached") {
        settings.backend = grape::PropagatorBackend::dense(opt.backend == "dense_cached");
    } else {
        std::cerr << "unknown backend '" << opt.backend << "'\n";
        return 1;
    }

    optim::OptimizerConfig cfg;
    cfg.target_infidelity = opt.target;
    cfg.max_iterations = opt.max_iterations;

    const int M = settings.slots_for(model.dim);
    const auto rec = optim::solve_control(problem, settings, cfg);

    if (opt.csv) {
        bench::RunRecord row;
        row.study = "solve";
        row.L = opt.L;
        row.K = opt.K;
        row.parity = opt.parity;
        row.D = model.dim;
        row.backend = opt.backend;
        row.N = opt.backend == "krylov" ? opt.N : 0;
        row.dt = opt.dt;
        row.M = M;
        row.seed = opt.seed;
        row.iterations = rec.iterations;
        row.field_evaluations = rec.field_evaluations;
        row.wall_time_seconds = rec.wall_time_seconds;
        row.elementary_runtime = optim::elementary_runtime(rec, M);
        row.final_infidelity = rec.final_value;
        row.status = optim::to_string(rec.status);
        std::cout << bench::kCsvHeader << '\n' << bench::to_csv_row(row) << '\n';
        return 0;
    }

    std::cout << "sector            L=" << opt.L << " K=" << opt.K << " " << opt.parity
              << " (D=" << model.dim << ")\n"
              << "protocol          M=" << M << " dt=" << opt.dt << " T=" << M * opt.dt << "\n"
              << "backend           " << opt.backend
              << (opt.backend == "krylov" ? " (N=" + std::to_string(opt.N) + ")" : "") << "\n"
              << "gradient          " << opt.gradient << "\n"
              << "status            " << optim::to_string(rec.status) << "\n"
              << "final infidelity  " << rec.final_value << "\n"
              << "iterations        " << rec.iterations << "\n"
              << "field evaluations " << rec.field_evaluations << "\n"
              << "wall time [s]     " << rec.wall_time_seconds << "\n"
              << "elementary R~     " << optim::elementary_runtime(rec, M) << "\n";
    return 0;
}

int run_check() {
    int failures = 0;
    const auto report = [&](const std::string& name, bool ok) {
        std::cout << (ok ? "PASS " : "FAIL ") << name << '\n';
        if (!ok) ++failures;
    };

    // Dimension formulas against enumeration.
    {
        bool ok = true;
        for (int L = 2; L <= 10 && ok; ++L)
            for (int K = 1; K < L && ok; ++K) {
                const auto basis = spinchain::build_basis(L, K);
                double binom = 1.0;
                for (int i = 0; i < K; ++i) binom = binom * (L - i) / (i + 1);
                if (basis.dim() != static_cast<int>(std::lround(binom))) ok = false;
                const auto even = spinchain::build_parity_basis(basis, spinchain::Parity::even);
                const auto odd = spinchain::build_parity_basis(basis, spinchain::Parity::odd);
                int palin = 0;
                for (auto c : basis.configs)
                    if (basis.mirror(c) == c) ++palin;
                if (even.dim != (basis.dim() + palin) / 2) ok = false;
                if (odd.dim != (basis.dim() - palin) / 2) ok = false;
                if (even.dim + odd.dim != basis.dim()) ok = false;
            }
        report("subspace dimension formulas (L <= 10)", ok);
    }

    // Hermiticity + parity commutation of the builders.
    {
        bool ok = true;
        for (int L : {4, 6, 8}) {
            spinchain::ChainSpec spec{L, 1.0, 0.5, 2, spinchain::Parity::even};
            const auto basis = spinchain::build_basis(L, 2);
            const auto Hd = spinchain::build_drift(spec);
            const auto Hc = spinchain::build_control(spec);
            Hd.for_each([&](int a, int b, const linalg::Complex& v) {
                const int ma = basis.index_of(basis.mirror(basis.configs[a]));
                const int mb = basis.index_of(basis.mirror(basis.configs[b]));
                if (std::abs(Hd.coeff(ma, mb) - v) > 1e-12) ok = false;
                (void)Hc;
            });
        }
        report("drift commutes with mirror parity", ok);
    }

    // Spectrum preservation under parity reduction.
    {
        spinchain::ChainSpec spec{7, 1.0, 0.5, 3, spinchain::Parity::even};
        const auto basis = spinchain::build_basis(7, 3);
        const auto Hd = spinchain::build_drift(spec);
        const auto even = spinchain::build_parity_basis(basis, spinchain::Parity::even);
        const auto odd = spinchain::build_parity_basis(basis, spinchain::Parity::odd);
        const auto He = spinchain::parity_reduce(Hd, basis, even);
        const auto Ho = spinchain::parity_reduce(Hd, basis, odd);
        std::vector<double> reduced;
        for (const auto* H : {&He, &Ho}) {
            const auto eig = linalg::eigh(H->to_dense());
            for (int i = 0; i < eig.dim; ++i) reduced.push_back(eig.eigenvalues[i]);
        }
        std::sort(reduced.begin(), reduced.end());
        const auto full = linalg::eigh(Hd.to_dense());
        bool ok = reduced.size() == static_cast<std::size_t>(full.dim);
        for (int i = 0; ok && i < full.dim; ++i)
            if (std::abs(reduced[i] - full.eigenvalues[i]) > 1e-10) ok = false;
        report("parity reduction preserves the spectrum", ok);
    }

    // Lanczos orthonormality with full reorthogonalization.
    {
        const auto model = spinchain::build_reduced_model({9, 1.0, 0.5, 3,
                                                           spinchain::Parity::even});
        krylov::KrylovStepConfig cfg;
        cfg.N = 20;
        cfg.reorth = krylov::Reorthogonalize::full;
        const auto [e1, eD] = spinchain::task_states(model.dim);
        const auto fac = krylov::lanczos(model.H_d, e1, cfg);
        double worst = 0.0;
        for (int i = 0; i < fac.m; ++i)
            for (int j = 0; j < fac.m; ++j) {
                const double delta = i == j ? 1.0 : 0.0;
                worst = std::max(worst,
                                 std::abs(linalg::inner(fac.basis[i], fac.basis[j]) - delta));
            }
        report("Lanczos basis orthonormal to 1e-10", worst <= 1e-10);
    }

    // Norm conservation along a Krylov trajectory.
    {
        const auto model = spinchain::build_reduced_model({7, 1.0, 0.5, 3,
                                                           spinchain::Parity::even});
        grape::ControlProblem problem;
        problem.H_d = model.H_d;
        problem.H_c = model.H_c;
        std::tie(problem.initial, problem.target) = spinchain::task_states(model.dim);
        grape::PWCProtocol protocol;
        protocol.amplitudes = Eigen::VectorXd::LinSpaced(20, -1.0, 1.0);
        protocol.dt = 0.5;
        krylov::KrylovStepConfig cfg;
        cfg.N = 8;
        const auto cache =
            grape::propagate(problem, protocol, grape::PropagatorBackend::with_krylov(cfg));
        bool ok = true;
        for (const auto& psi : cache.forward)
            if (std::abs(psi.norm() - 1.0) > 1e-10) ok = false;
        report("trajectory norm conserved to 1e-10", ok);
    }

    // Controllability of a small even sector.
    {
        const auto model = spinchain::build_reduced_model({5, 1.0, 0.5, 2,
                                                           spinchain::Parity::even});
        const int rank = spinchain::controllability_rank(model.H_d, model.H_c);
        const int D = model.dim;
        report("PE sector Lie-algebra rank D^2-1 or D^2",
               rank == D * D - 1 || rank == D * D);
    }

    std::cout << (failures == 0 ? "all checks passed" : "some checks FAILED") << '\n';
    return failures == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"K-GRAPE quantum optimal control benchmark harness"};
    app.require_subcommand(1);

    SolveOptions sopt;
    auto* solve = app.add_subcommand("solve", "optimize a single state-transfer problem");
    solve->add_option("--L", sopt.L, "chain length");
    solve->add_option("--K", sopt.K, "excitation number");
    solve->add_option("--parity", sopt.parity, "even|odd");
    solve->add_option("--J", sopt.J, "coupling strength");
    solve->add_option("--alpha-z", sopt.alpha_z, "anisotropy");
    solve->add_option("--backend", sopt.backend, "krylov|dense|dense_cached");
    solve->add_option("--N", sopt.N, "Krylov truncation");
    solve->add_option("--dt", sopt.dt, "slot width");
    solve->add_option("--M-factor", sopt.M_factor, "slots per dimension");
    solve->add_option("--M", sopt.M_override, "explicit slot count (overrides --M-factor)");
    solve->add_option("--gradient", sopt.gradient, "zeroth|centered|taylor|exact_dense");
    solve->add_option("--taylor-order", sopt.taylor_order, "Taylor gradient order");
    solve->add_option("--seed", sopt.seed, "RNG seed for the initial amplitudes");
    solve->add_option("--target", sopt.target, "target infidelity");
    solve->add_option("--max-iter", sopt.max_iterations, "iteration budget");
    solve->add_flag("--csv", sopt.csv, "emit a CSV row instead of the human-readable record");

    std::string plan_path;
    auto* benchcmd = app.add_subcommand("bench", "run a benchmark plan file");
    benchcmd->add_option("plan", plan_path, "plan file")->required();

    std::string csv_path, summary_out;
    auto* summarize = app.add_subcommand("summarize", "aggregate a results CSV");
    summarize->add_option("csv", csv_path, "input CSV")->required();
    summarize->add_option("-o,--output", summary_out, "write the summary here (default stdout)");

    auto* check = app.add_subcommand("check", "run the structural invariant suite");

    CLI11_PARSE(app, argc, argv);

    try {
        if (solve->parsed()) return run_solve(sopt);
        if (check->parsed()) return run_check();
        if (benchcmd->parsed()) {
            const auto plan = bench::parse_plan_file(plan_path);
            const auto records = bench::run_plan(plan, &std::cerr);
            bool partial = false;
            for (const auto& r : records)
                if (r.status == "error") partial = true;
            std::cout << "wrote " << records.size() << " records to " << plan.output << '\n';
            return partial ? 2 : 0;
        }
        if (summarize->parsed()) {
            const auto records = bench::read_csv_file(csv_path);
            const auto text = bench::summarize(records);
            if (summary_out.empty()) {
                std::cout << text;
            } else {
                std::ofstream out(summary_out);
                if (!out) throw std::invalid_argument("cannot open '" + summary_out + "'");
                out << text;
            }
            return 0;
        }
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
