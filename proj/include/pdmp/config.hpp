#pragma once

#include "pdmp/bsde.hpp"
#include "pdmp/model.hpp"
#include "pdmp/semi_lagrangian.hpp"
#include "pdmp/simulate.hpp"

#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace pdmp {

/// Fully resolved run description.
struct RunConfig {
    // [problem]
    std::string problem;
    std::optional<double> discount;         // overrides the benchmark's delta
    std::vector<double> lambda0;            // empty: mass 1 per action
    double horizon = 20;                    // T*
    std::vector<double> x{0.0};
    ActionIndex action = 0;
    // [grid]
    GridConfig grid;
    std::vector<double> n_schedule{1, 2, 4, 8, 16, 32};
    double limit_tol = 1e-3;
    bool extrapolate = false;
    // [bsde]
    PicardConfig picard;
    double n = 4;
    bool run_picard = false;
    // [mc]
    std::size_t paths = 100000;
    double flow_step = 1e-2;
    std::uint64_t seed = 1;
    int threads = 1;
    // [dual]
    std::string nu = "const1";
    std::vector<double> eps{0.2, 0.1, 0.05, 0.025};
    ActionIndex a_prime = 1;
    // [output]
    std::string out = "out";

    Benchmark benchmark() const;
    SimulationConfig simulation() const;
    State start() const;
};

/// Parses the INI text; unknown keys and malformed values throw with the key path.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::string& path);

/// Defaults plus the given problem name, as when no file is supplied.
RunConfig default_config(const std::string& problem);

/// Checks values that need the benchmark (discount, weights, action indices, start state).
void validate_config(const RunConfig& cfg);

void write_config(std::ostream& os, const RunConfig& cfg);

} // namespace pdmp
