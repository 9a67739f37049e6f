#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "kgrape/optim.hpp"
#include "kgrape/spinchain.hpp"

namespace kgrape::bench {

enum class Study { dimension_sweep, timestep_sweep, truncation_sweep, window_sweep };

std::string to_string(Study s);
Study study_from_string(const std::string& s);

/// One sweep: Cartesian product of model grid x algorithm grid x seeds.
struct BenchPlan {
    Study study = Study::dimension_sweep;
    std::vector<int> L;
    std::vector<int> K;
    std::vector<spinchain::Parity> parity{spinchain::Parity::even};
    double J = 1.0;
    double alpha_z = 0.5;

    std::vector<std::string> backend{"krylov"};  // "krylov" | "dense" | "dense_cached"
    std::vector<int> N{10};                      // ignored by dense cells
    std::vector<double> dt{0.5};
    double M_factor = 4.0;
    grape::GradientKind gradient = grape::GradientKind::centered;
    int taylor_order = 2;

    std::vector<int> seeds{0};
    optim::OptimizerConfig optimizer;
    std::string output = "runs.csv";
    bool sequential = true;
    int threads = 1;

    void validate() const;
};

/// Parses the key-value plan format; unknown keys are rejected.
BenchPlan parse_plan(std::istream& in);
BenchPlan parse_plan_file(const std::string& path);

/// One CSV row.
struct RunRecord {
    std::string study;
    int L = 0;
    int K = 0;
    std::string parity;
    int D = 0;
    std::string backend;
    int N = 0;  // 0 for dense cells
    double dt = 0.0;
    int M = 0;
    int seed = 0;
    int iterations = 0;
    int field_evaluations = 0;
    double wall_time_seconds = 0.0;
    double elementary_runtime = 0.0;
    double final_infidelity = 0.0;
    std::string status;

    /// Cell identity used for crash resumption (everything but the results).
    std::string key() const;
};

extern const char* kCsvHeader;

std::string to_csv_row(const RunRecord& r);
RunRecord from_csv_row(const std::string& line);

std::vector<RunRecord> read_csv(std::istream& in);
std::vector<RunRecord> read_csv_file(const std::string& path);
void write_csv(std::ostream& out, const std::vector<RunRecord>& records);

/// Executes the plan, appending rows to plan.output as cells complete and
/// skipping cells already present there. Per-cell failures become rows with
/// status "error". Returns all rows (pre-existing ones included).
std::vector<RunRecord> run_plan(const BenchPlan& plan, std::ostream* progress = nullptr);

/// Per-(study, backend, D, N, dt) aggregates plus log-log runtime slopes.
std::string summarize(const std::vector<RunRecord>& records);

}  // namespace kgrape::bench
