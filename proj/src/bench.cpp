#include "kgrape/bench.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <mutex>
#include <ostream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace kgrape::bench {

namespace {

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

std::vector<std::string> split_list(const std::string& value) {
    // Either a bracketed list "[a, b, c]" or a single scalar.
    std::string body = trim(value);
    if (!body.empty() && body.front() == '[') {
        if (body.back() != ']') throw std::invalid_argument("unterminated list: " + value);
        body = body.substr(1, body.size() - 2);
    }
    std::vector<std::string> items;
    std::stringstream ss(body);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) items.push_back(item);
    }
    return items;
}

int to_int(const std::string& s) {
    std::size_t pos = 0;
    const int v = std::stoi(s, &pos);
    if (pos != s.size()) throw std::invalid_argument("not an integer: " + s);
    return v;
}

double to_double(const std::string& s) {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument("not a number: " + s);
    return v;
}

bool to_bool(const std::string& s) {
    if (s == "true" || s == "1") return true;
    if (s == "false" || s == "0") return false;
    throw std::invalid_argument("not a boolean: " + s);
}

std::string fmt(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

template <typename T, typename Fn>
std::vector<T> map_list(const std::string& value, Fn&& fn) {
    std::vector<T> out;
    for (const auto& item : split_list(value)) out.push_back(fn(item));
    return out;
}

}  // namespace

std::string to_string(Study s) {
    switch (s) {
        case Study::dimension_sweep: return "dimension_sweep";
        case Study::timestep_sweep: return "timestep_sweep";
        case Study::truncation_sweep: return "truncation_sweep";
        case Study::window_sweep: return "window_sweep";
    }
    return "unknown";
}

Study study_from_string(const std::string& s) {
    if (s == "dimension_sweep") return Study::dimension_sweep;
    if (s == "timestep_sweep") return Study::timestep_sweep;
    if (s == "truncation_sweep") return Study::truncation_sweep;
    if (s == "window_sweep") return Study::window_sweep;
    throw std::invalid_argument("unknown study '" + s + "'");
}

void BenchPlan::validate() const {
    if (L.empty() || K.empty() || parity.empty() || backend.empty() || N.empty() ||
        dt.empty() || seeds.empty())
        throw std::invalid_argument("plan grids must be non-empty");
    for (const auto& b : backend)
        if (b != "krylov" && b != "dense" && b != "dense_cached")
            throw std::invalid_argument("unknown backend '" + b + "'");
    for (int n : N)
        if (n < 1) throw std::invalid_argument("truncation N must be >= 1");
    for (double t : dt)
        if (!(t > 0.0)) throw std::invalid_argument("dt values must be positive");
    optimizer.validate();
    for (int l : L) {
        for (int k : K) {
            for (auto p : parity) {
                spinchain::ChainSpec spec{l, J, alpha_z, k, p};
                spec.validate();
                const auto basis = spinchain::build_basis(l, k);
                const auto pb = spinchain::build_parity_basis(basis, p);
                if (pb.dim < 2)
                    throw std::invalid_argument("sector (L=" + std::to_string(l) +
                                                ", K=" + std::to_string(k) + ", " +
                                                spinchain::to_string(p) + ") has dimension < 2");
            }
        }
    }
    if (output.empty()) throw std::invalid_argument("plan output path is empty");
}

BenchPlan parse_plan(std::istream& in) {
    BenchPlan plan;
    std::set<std::string> seen;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string stripped = trim(line);
        if (stripped.empty() || stripped[0] == '#') continue;
        const auto eq = stripped.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("plan line " + std::to_string(lineno) +
                                        ": expected 'key = value'");
        const std::string key = trim(stripped.substr(0, eq));
        const std::string value = trim(stripped.substr(eq + 1));
        if (!seen.insert(key).second)
            throw std::invalid_argument("duplicate plan key '" + key + "'");

        if (key == "study") plan.study = study_from_string(value);
        else if (key == "L") plan.L = map_list<int>(value, to_int);
        else if (key == "K") plan.K = map_list<int>(value, to_int);
        else if (key == "parity")
            plan.parity = map_list<spinchain::Parity>(value, spinchain::parity_from_string);
        else if (key == "J") plan.J = to_double(value);
        else if (key == "alpha_z") plan.alpha_z = to_double(value);
        else if (key == "backend")
            plan.backend = map_list<std::string>(value, [](const std::string& s) { return s; });
        else if (key == "N") plan.N = map_list<int>(value, to_int);
        else if (key == "dt") plan.dt = map_list<double>(value, to_double);
        else if (key == "M_factor") plan.M_factor = to_double(value);
        else if (key == "gradient") plan.gradient = grape::gradient_from_string(value);
        else if (key == "taylor_order") plan.taylor_order = to_int(value);
        else if (key == "seeds") plan.seeds = map_list<int>(value, to_int);
        else if (key == "output") plan.output = value;
        else if (key == "sequential") plan.sequential = to_bool(value);
        else if (key == "threads") plan.threads = to_int(value);
        else if (key == "max_iterations") plan.optimizer.max_iterations = to_int(value);
        else if (key == "target_infidelity") plan.optimizer.target_infidelity = to_double(value);
        else if (key == "memory") plan.optimizer.memory = to_int(value);
        else if (key == "wolfe_c1") plan.optimizer.wolfe_c1 = to_double(value);
        else if (key == "wolfe_c2") plan.optimizer.wolfe_c2 = to_double(value);
        else if (key == "max_linesearch_steps")
            plan.optimizer.max_linesearch_steps = to_int(value);
        else if (key == "min_objective_change")
            plan.optimizer.min_objective_change = to_double(value);
        else
            throw std::invalid_argument("unknown plan key '" + key + "'");
    }
    plan.validate();
    return plan;
}

BenchPlan parse_plan_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open plan file '" + path + "'");
    return parse_plan(in);
}

const char* kCsvHeader =
    "study,L,K,parity,D,backend,N,dt,M,seed,iterations,field_evaluations,"
    "wall_time_seconds,elementary_runtime,final_infidelity,status";

std::string RunRecord::key() const {
    std::ostringstream os;
    os << study << ',' << L << ',' << K << ',' << parity << ',' << backend << ',' << N << ','
       << fmt(dt) << ',' << M << ',' << seed;
    return os.str();
}

std::string to_csv_row(const RunRecord& r) {
    std::ostringstream os;
    os << r.study << ',' << r.L << ',' << r.K << ',' << r.parity << ',' << r.D << ','
       << r.backend << ',' << r.N << ',' << fmt(r.dt) << ',' << r.M << ',' << r.seed << ','
       << r.iterations << ',' << r.field_evaluations << ',' << fmt(r.wall_time_seconds) << ','
       << fmt(r.elementary_runtime) << ',' << fmt(r.final_infidelity) << ',' << r.status;
    return os.str();
}

RunRecord from_csv_row(const std::string& line) {
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (fields.size() != 16)
        throw std::invalid_argument("CSV row does not have 16 fields: " + line);
    RunRecord r;
    r.study = fields[0];
    r.L = to_int(fields[1]);
    r.K = to_int(fields[2]);
    r.parity = fields[3];
    r.D = to_int(fields[4]);
    r.backend = fields[5];
    r.N = to_int(fields[6]);
    r.dt = to_double(fields[7]);
    r.M = to_int(fields[8]);
    r.seed = to_int(fields[9]);
    r.iterations = to_int(fields[10]);
    r.field_evaluations = to_int(fields[11]);
    r.wall_time_seconds = to_double(fields[12]);
    r.elementary_runtime = to_double(fields[13]);
    r.final_infidelity = to_double(fields[14]);
    r.status = fields[15];
    return r;
}

std::vector<RunRecord> read_csv(std::istream& in) {
    std::vector<RunRecord> records;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        if (first) {
            first = false;
            if (trim(line) != kCsvHeader)
                throw std::invalid_argument("unexpected CSV header: " + line);
            continue;
        }
        records.push_back(from_csv_row(line));
    }
    return records;
}

std::vector<RunRecord> read_csv_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open CSV file '" + path + "'");
    return read_csv(in);
}

void write_csv(std::ostream& out, const std::vector<RunRecord>& records) {
    out << kCsvHeader << '\n';
    for (const auto& r : records) out << to_csv_row(r) << '\n';
}

namespace {

struct Cell {
    int L, K;
    spinchain::Parity parity;
    std::string backend;
    int N;
    double dt;
    int seed;
};

RunRecord execute_cell(const BenchPlan& plan, const Cell& cell,
                       const spinchain::ReducedModel& model) {
    RunRecord r;
    r.study = to_string(plan.study);
    r.L = cell.L;
    r.K = cell.K;
    r.parity = spinchain::to_string(cell.parity);
    r.D = model.dim;
    r.backend = cell.backend;
    r.N = cell.backend == "krylov" ? cell.N : 0;
    r.dt = cell.dt;
    r.seed = cell.seed;

    optim::SolveSettings settings;
    settings.M_factor = plan.M_factor;
    settings.dt = cell.dt;
    settings.gradient = plan.gradient;
    settings.taylor_order = plan.taylor_order;
    settings.rng_seed = static_cast<unsigned>(cell.seed);
    if (cell.backend == "krylov") {
        krylov::KrylovStepConfig kcfg;
        kcfg.N = cell.N;
        settings.backend = grape::PropagatorBackend::with_krylov(kcfg);
    } else {
        settings.backend = grape::PropagatorBackend::dense(cell.backend == "dense_cached");
    }
    r.M = settings.slots_for(model.dim);

    grape::ControlProblem problem;
    problem.H_d = model.H_d;
    problem.H_c = model.H_c;
    std::tie(problem.initial, problem.target) = spinchain::task_states(model.dim);

    try {
        const auto rec = optim::solve_control(problem, settings, plan.optimizer);
        r.iterations = rec.iterations;
        r.field_evaluations = rec.field_evaluations;
        r.wall_time_seconds = rec.wall_time_seconds;
        r.elementary_runtime = optim::elementary_runtime(rec, r.M);
        r.final_infidelity = rec.final_value;
        r.status = to_string(rec.status);
    } catch (const std::exception&) {
        r.final_infidelity = std::numeric_limits<double>::quiet_NaN();
        r.status = "error";
    }
    return r;
}

}  // namespace

std::vector<RunRecord> run_plan(const BenchPlan& plan, std::ostream* progress) {
    plan.validate();

    // Resume: skip cells already present in the output file.
    std::vector<RunRecord> existing;
    {
        std::ifstream in(plan.output);
        if (in) existing = read_csv(in);
    }
    std::set<std::string> done;
    for (const auto& r : existing) done.insert(r.key());

    std::map<std::tuple<int, int, spinchain::Parity>, spinchain::ReducedModel> models;
    std::vector<Cell> cells;
    for (int l : plan.L)
        for (int k : plan.K)
            for (auto p : plan.parity) {
                spinchain::ChainSpec spec{l, plan.J, plan.alpha_z, k, p};
                models.emplace(std::make_tuple(l, k, p), spinchain::build_reduced_model(spec));
                for (const auto& b : plan.backend)
                    for (int n : plan.N)
                        for (double t : plan.dt)
                            for (int s : plan.seeds) cells.push_back({l, k, p, b, n, t, s});
            }

    std::ofstream out(plan.output, std::ios::app);
    if (!out) throw std::invalid_argument("cannot open output file '" + plan.output + "'");
    if (existing.empty()) out << kCsvHeader << '\n';

    std::vector<RunRecord> results = existing;
    std::mutex sink_mutex;
    const auto emit = [&](const RunRecord& r) {
        std::lock_guard<std::mutex> lock(sink_mutex);
        out << to_csv_row(r) << '\n';
        out.flush();
        results.push_back(r);
        if (progress) *progress << r.key() << " -> " << r.status << '\n';
    };

    const auto cell_key = [&](const Cell& cell) {
        const auto& model = models.at(std::make_tuple(cell.L, cell.K, cell.parity));
        RunRecord id;
        id.study = to_string(plan.study);
        id.L = cell.L;
        id.K = cell.K;
        id.parity = spinchain::to_string(cell.parity);
        id.backend = cell.backend;
        id.N = cell.backend == "krylov" ? cell.N : 0;
        id.dt = cell.dt;
        id.seed = cell.seed;
        optim::SolveSettings s;
        s.M_factor = plan.M_factor;
        id.M = s.slots_for(model.dim);
        return id.key();
    };

    const auto run_one = [&](const Cell& cell) {
        const auto& model = models.at(std::make_tuple(cell.L, cell.K, cell.parity));
        emit(execute_cell(plan, cell, model));
    };

    std::vector<Cell> pending;
    for (const auto& cell : cells)
        if (!done.count(cell_key(cell))) pending.push_back(cell);

    const int workers = (plan.sequential || plan.threads <= 1)
                            ? 1
                            : std::min<int>(plan.threads, static_cast<int>(pending.size()));
    if (workers <= 1) {
        for (const auto& cell : pending) run_one(cell);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> pool;
        pool.reserve(workers);
        for (int w = 0; w < workers; ++w)
            pool.emplace_back([&] {
                for (std::size_t i = next.fetch_add(1); i < pending.size();
                     i = next.fetch_add(1))
                    run_one(pending[i]);
            });
        for (auto& t : pool) t.join();
    }
    return results;
}

namespace {

struct GroupKey {
    std::string study, backend;
    int D, N;
    double dt;
    bool operator<(const GroupKey& o) const {
        return std::tie(study, backend, D, N, dt) < std::tie(o.study, o.backend, o.D, o.N, o.dt);
    }
};

struct Aggregate {
    int runs = 0;
    double min_inf = std::numeric_limits<double>::infinity();
    double sum_inf = 0.0, sum_iter = 0.0, sum_R = 0.0, sum_Rt = 0.0;
};

}  // namespace

std::string summarize(const std::vector<RunRecord>& records) {
    if (records.empty()) throw std::invalid_argument("summarize needs at least one record");

    std::map<GroupKey, Aggregate> groups;
    for (const auto& r : records) {
        if (r.status == "error") continue;
        auto& a = groups[{r.study, r.backend, r.D, r.N, r.dt}];
        ++a.runs;
        a.min_inf = std::min(a.min_inf, r.final_infidelity);
        a.sum_inf += r.final_infidelity;
        a.sum_iter += r.iterations;
        a.sum_R += r.wall_time_seconds;
        a.sum_Rt += r.elementary_runtime;
    }

    std::ostringstream os;
    os << "[summary]\n"
       << "records = " << records.size() << "\n"
       << "groups = " << groups.size() << "\n\n";
    for (const auto& [key, a] : groups) {
        os << "[group study=" << key.study << " backend=" << key.backend << " D=" << key.D
           << " N=" << key.N << " dt=" << fmt(key.dt) << "]\n"
           << "runs = " << a.runs << "\n"
           << "min_infidelity = " << fmt(a.min_inf) << "\n"
           << "mean_infidelity = " << fmt(a.sum_inf / a.runs) << "\n"
           << "mean_iterations = " << fmt(a.sum_iter / a.runs) << "\n"
           << "mean_runtime = " << fmt(a.sum_R / a.runs) << "\n"
           << "mean_elementary_runtime = " << fmt(a.sum_Rt / a.runs) << "\n\n";
    }

    // Log-log slope of total runtime vs dimension per (study, backend),
    // successful runs only.
    std::map<std::pair<std::string, std::string>, std::vector<std::pair<double, double>>> pts;
    for (const auto& r : records)
        if (r.status == "target_reached" && r.wall_time_seconds > 0.0)
            pts[{r.study, r.backend}].emplace_back(std::log(static_cast<double>(r.D)),
                                                   std::log(r.wall_time_seconds));
    for (const auto& [key, xy] : pts) {
        if (xy.size() < 2) continue;
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        for (const auto& [x, y] : xy) {
            sx += x;
            sy += y;
            sxx += x * x;
            sxy += x * y;
        }
        const double n = static_cast<double>(xy.size());
        const double denom = n * sxx - sx * sx;
        if (std::abs(denom) < 1e-12) continue;
        const double slope = (n * sxy - sx * sy) / denom;
        os << "[slope study=" << key.first << " backend=" << key.second << "]\n"
           << "runtime_vs_D = " << fmt(slope) << "\n"
           << "points = " << xy.size() << "\n\n";
    }
    return os.str();
}

}  // namespace kgrape::bench
