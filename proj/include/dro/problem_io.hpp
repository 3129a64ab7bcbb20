#pragma once

#include <filesystem>
#include <string>

#include "dro/problem.hpp"

namespace dro {

// JSON document schema (single object):
//   dim, domain{center, radius}, losses[{family, a, b, delta?}],
//   constants{G, R, L (null = +inf), B_loss},
//   variant{type:"group", rows:[[[j,w],...],...]} or
//   variant{type:"fdiv", divergence:"cvar:alpha=0.5", nu, constrained, B_f?},
//   eps, optional reference_optimum.
ProblemSpec load_problem(const std::filesystem::path& file);
void save_problem(const ProblemSpec& problem, const std::filesystem::path& file);
std::string problem_to_json(const ProblemSpec& problem);
ProblemSpec problem_from_json(const std::string& text);

// Stable identifier used to match traces to their problem.
std::string problem_digest(const ProblemSpec& problem);

// Reference optimum stored alongside an instance (NaN when absent).
double load_reference_optimum(const std::filesystem::path& problem_file);
void save_reference_optimum(const std::filesystem::path& problem_file, double value);

struct GenerateConfig {
    std::string family;  // max-linear | hinge-groups | cvar-reg | chi2-reg
    std::size_t n = 8;
    std::size_t m = 4;      // groups (group families)
    std::size_t dim = 2;
    double eps = 0.1;
    double alpha = 0.5;     // cvar-reg
    double rho = 1.0;       // chi2-reg
    double nu = 0.5;        // fdiv multiplier
    bool constrained = false;
    bool smooth = false;    // huber losses instead of hinge/linear
    double domain_radius = 1.0;
    std::uint64_t seed = 0;
};

// Reproducible instances with analytic constants.
ProblemSpec generate_problem(const GenerateConfig& cfg);

// Reference optimum: exhaustive grid for dim <= 2, long-run subgradient
// (100x the eps budget) otherwise. Unmetered.
double compute_reference_optimum(const ProblemSpec& problem, double eps);

}  // namespace dro
