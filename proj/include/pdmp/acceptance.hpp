#pragma once

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

namespace pdmp {

struct AcceptanceOptions {
    std::uint64_t seed = 20240601;
    int threads = 1;
    std::string out;               // run directory for tables; empty: nothing written
    std::vector<int> only;         // criteria to run; empty: all
    std::size_t paths = 100000;    // Monte Carlo paths per estimate
    double flow_step = 0.05;       // RK4 step for the Monte Carlo criteria
};

struct CriterionResult {
    int id = 0;
    bool pass = false;
    std::string summary;
    double seconds = 0;
};

/// Runs the acceptance criteria, printing one PASS/FAIL line per criterion as it finishes.
std::vector<CriterionResult> run_acceptance(const AcceptanceOptions& opt, std::ostream& os);

/// Doubling schedule 1, 2, 4, ... up to n_max.
std::vector<double> doubling_schedule(double n_max);

} // namespace pdmp
