#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>

#include <CLI11.hpp>
#include <json.hpp>

#include "dro/constrained.hpp"
#include "dro/problem_io.hpp"
#include "dro/solvers.hpp"

namespace fs = std::filesystem;
using namespace dro;

namespace {

fs::path output_dir() {
    if (const char* env = std::getenv("DRO_BENCH_OUTDIR")) return fs::path(env);
    return fs::current_path();
}

fs::path resolve_out(const std::string& out, const std::string& fallback) {
    fs::path p = out.empty() ? fs::path(fallback) : fs::path(out);
    if (p.is_relative()) p = output_dir() / p;
    return p;
}

void apply_overrides(SolveOptions& opts, const std::vector<std::string>& sets) {
    for (const std::string& s : sets) {
        const auto eq = s.find('=');
        if (eq == std::string::npos)
            throw CLI::ValidationError("--set expects key=value, got: " + s);
        const std::string key = s.substr(0, eq);
        const double v = std::stod(s.substr(eq + 1));
        if (key == "accel.c_m") opts.c_m = v;
        else if (key == "accel.c_lambda") opts.c_lambda = v;
        else if (key == "accel.c_K") opts.c_K = v;
        else if (key == "accel.bisect_hi") opts.bisect_lambda_hi_factor = v;
        else if (key == "broo.budget") opts.broo.budget_multiplier = v;
        else if (key == "broo.lambda_cap") opts.broo.lambda_cap_factor = v;
        else if (key == "broo.vr_budget") opts.broo.vr_budget_multiplier = v;
        else if (key == "broo.vr_momentum") opts.broo.vr_momentum = v != 0.0;
        else if (key == "baseline.T") opts.baseline_T = static_cast<std::int64_t>(v);
        else if (key == "baseline.c_eta") opts.c_eta = v;
        else throw CLI::ValidationError("unknown override key: " + key);
    }
}

struct TraceFile {
    std::string problem_id;
    std::string method;
    std::vector<SolverTrace::Row> rows;
};

TraceFile read_trace(const fs::path& file) {
    std::ifstream in(file);
    if (!in) throw std::runtime_error("cannot open trace: " + file.string());
    TraceFile t;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (line[0] == '#') {
            const auto ppos = line.find("problem=");
            const auto mpos = line.find(" method=");
            const auto spos = line.find(" seed=");
            if (ppos != std::string::npos && mpos != std::string::npos)
                t.problem_id = line.substr(ppos + 8, mpos - ppos - 8);
            if (mpos != std::string::npos && spos != std::string::npos)
                t.method = line.substr(mpos + 8, spos - mpos - 8);
            continue;
        }
        if (line.rfind("evals_value", 0) == 0) continue;
        SolverTrace::Row r;
        if (std::sscanf(line.c_str(), "%lld,%lld,%lg", (long long*)&r.value_evals,
                        (long long*)&r.subgrad_evals, &r.gap_estimate) == 3)
            t.rows.push_back(r);
    }
    return t;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"DRO benchmark: generate instances, run metered solvers, compare traces"};
    app.require_subcommand(1);

    // ---- generate ----
    auto* gen = app.add_subcommand("generate", "emit a reproducible problem instance");
    GenerateConfig cfg;
    std::string gen_out;
    bool with_reference = false;
    gen->add_option("--family", cfg.family,
                    "max-linear | hinge-groups | cvar-reg | chi2-reg")
        ->required();
    gen->add_option("--n", cfg.n, "number of losses");
    gen->add_option("--m", cfg.m, "number of groups (group families)");
    gen->add_option("--dim", cfg.dim, "ambient dimension");
    gen->add_option("--eps", cfg.eps, "target accuracy stored in the instance");
    gen->add_option("--alpha", cfg.alpha, "cvar level");
    gen->add_option("--rho", cfg.rho, "chi2 ball size");
    gen->add_option("--nu", cfg.nu, "f-divergence multiplier");
    gen->add_flag("--constrained", cfg.constrained, "mark the instance as constrained");
    gen->add_flag("--smooth", cfg.smooth, "huber losses (finite L)");
    gen->add_option("--radius", cfg.domain_radius, "domain ball radius (diameter R = 2x)");
    gen->add_option("--seed", cfg.seed, "generator seed");
    gen->add_option("--out", gen_out, "output path (default: <family>-<seed>.json)");
    gen->add_flag("--reference", with_reference,
                  "also compute and store the reference optimum");

    // ---- run ----
    auto* run = app.add_subcommand("run", "run one solver and emit a CSV trace");
    std::string run_problem, run_method = "subgradient", run_out, run_reference;
    double run_eps = 0.0;
    std::uint64_t run_seed = 0;
    bool run_constrained = false;
    std::vector<std::string> run_sets;
    run->add_option("--problem", run_problem, "problem JSON file")->required();
    run->add_option("--method", run_method,
                    "ball-accel-epochsgd | ball-accel-vr | subgradient | primal-dual | "
                    "agd-softmax");
    run->add_option("--eps", run_eps, "accuracy override (default: instance eps)");
    run->add_option("--seed", run_seed, "rng seed");
    run->add_option("--out", run_out, "trace CSV path");
    run->add_flag("--constrained", run_constrained,
                  "solve the constrained f-divergence problem");
    run->add_option("--set", run_sets, "constant overrides, key=value")->take_all();
    run->add_option("--reference", run_reference,
                    "reference optimum JSON (default: <problem>.ref.json when present)");

    // ---- compare ----
    auto* cmp = app.add_subcommand("compare", "align traces and tabulate evaluations-to-eps");
    std::vector<std::string> cmp_files;
    std::vector<double> cmp_eps;
    cmp->add_option("traces", cmp_files, "trace CSV files")->required()->expected(-1);
    cmp->add_option("--eps-grid", cmp_eps, "gap thresholds (default: 0.2 0.1 0.05)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed()) {
            ProblemSpec p = generate_problem(cfg);
            const fs::path out = resolve_out(
                gen_out, cfg.family + "-" + std::to_string(cfg.seed) + ".json");
            save_problem(p, out);
            if (with_reference)
                save_reference_optimum(out, compute_reference_optimum(p, cfg.eps));
            std::cout << out.string() << "\n";
            return 0;
        }

        if (run->parsed()) {
            ProblemSpec p = load_problem(run_problem);
            const Method method = parse_method(run_method);
            const double eps = run_eps > 0.0 ? run_eps : p.target_eps;

            // Configuration gate before any evaluation.
            if (run_constrained && p.is_group())
                throw std::invalid_argument(
                    "--constrained applies to f-divergence problems only");
            if (!p.is_group() && p.fdiv().constrained && !run_constrained &&
                (method == Method::ball_accel_epochsgd || method == Method::ball_accel_vr))
                std::cerr << "note: instance is marked constrained; solving the penalized "
                             "form (pass --constrained for the full reduction)\n";

            SolveOptions opts;
            apply_overrides(opts, run_sets);
            double ref = std::numeric_limits<double>::quiet_NaN();
            if (!run_reference.empty()) {
                std::ifstream in(run_reference);
                if (!in) throw std::runtime_error("cannot open reference: " + run_reference);
                nlohmann::json j;
                in >> j;
                ref = j.at("optimum").get<double>();
            } else {
                ref = load_reference_optimum(run_problem);
            }
            const bool have_ref = std::isfinite(ref);
            if (have_ref) opts.reference_optimum = &ref;

            Rng rng(run_seed);
            SolverTrace trace;
            if (run_constrained) {
                ConstrainedOptions copts;
                copts.solve = opts;
                copts.inner_method = method;
                ConstrainedResult cr = solve_constrained_fdiv(p, eps, rng, copts);
                trace.method = run_method + "+constrained";
                trace.add(p.ensemble.counter().value_evals(),
                          p.ensemble.counter().subgrad_evals(), 0.0,
                          have_ref ? cr.accepted_value - ref : cr.accepted_value);
            } else {
                SolveResult sr = solve(p, method, eps, rng, opts);
                trace = std::move(sr.trace);
            }
            trace.seed = run_seed;
            trace.problem_id = problem_digest(p);
            const fs::path out = resolve_out(run_out, "trace.csv");
            std::ofstream os(out, std::ios::binary);
            trace.write_csv(os);
            std::cout << out.string() << "\n";
            return 0;
        }

        if (cmp->parsed()) {
            if (cmp_eps.empty()) cmp_eps = {0.2, 0.1, 0.05};
            std::vector<TraceFile> traces;
            for (const std::string& f : cmp_files) traces.push_back(read_trace(f));
            for (std::size_t i = 1; i < traces.size(); ++i)
                if (traces[i].problem_id != traces[0].problem_id)
                    throw std::runtime_error("traces come from different problems");
            std::printf("%-24s", "method");
            for (double e : cmp_eps) std::printf("  evals@%-8g", e);
            std::printf("\n");
            for (const TraceFile& t : traces) {
                std::printf("%-24s", t.method.c_str());
                for (double e : cmp_eps) {
                    long long found = -1;
                    for (const auto& r : t.rows)
                        if (r.gap_estimate <= e) { found = r.value_evals + r.subgrad_evals; break; }
                    if (found >= 0) std::printf("  %-14lld", found);
                    else std::printf("  %-14s", "-");
                }
                std::printf("\n");
            }
            return 0;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
