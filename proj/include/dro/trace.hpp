#pragma once

#include <cstdint>
#include <cstdio>
#include <ostream>
#include <string>
#include <vector>

namespace dro {

// Convergence record of a solver run: cumulative metered evaluations plus a
// suboptimality estimate per checkpoint. Wall time is kept out of the CSV so
// replays are byte-identical.
struct SolverTrace {
    struct Row {
        std::int64_t value_evals = 0;
        std::int64_t subgrad_evals = 0;
        double wall_seconds = 0.0;
        double gap_estimate = 0.0;
    };

    std::vector<Row> rows;
    std::uint64_t seed = 0;
    std::string problem_id;
    std::string method;
    double final_gap = 0.0;

    void add(std::int64_t ve, std::int64_t se, double wall, double gap) {
        rows.push_back({ve, se, wall, gap});
    }

    void write_csv(std::ostream& os) const {
        os << "# problem=" << problem_id << " method=" << method << " seed=" << seed << "\n";
        os << "evals_value,evals_subgrad,gap_estimate\n";
        char buf[64];
        for (const Row& r : rows) {
            std::snprintf(buf, sizeof buf, "%.17g", r.gap_estimate);
            os << r.value_evals << "," << r.subgrad_evals << "," << buf << "\n";
        }
    }
};

}  // namespace dro
