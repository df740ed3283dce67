#pragma once

#include "pdmp/bsde.hpp"
#include "pdmp/grid.hpp"
#include "pdmp/hjb.hpp"
#include "pdmp/semi_lagrangian.hpp"

#include <filesystem>
#include <fstream>
#include <ostream>
#include <string>
#include <vector>

namespace pdmp {

/// 12 significant digits, the precision of every CSV cell.
std::string fmt12(double v);

/// Rows: node coordinates, action (layer), value.
void write_value_csv(std::ostream& os, const GridValueFunction& v);

void write_policy_csv(std::ostream& os, const TensorGrid& grid, const std::vector<ActionIndex>& policy);

/// Records (iteration, residual, policy_changes).
void write_trace_json(std::ostream& os, const SolveDiagnostics& diag);

/// Records (n, iterations, residual, G, spread) along the schedule; G may be empty.
void write_limit_json(std::ostream& os, const MaximalLimit& limit, const std::vector<double>& g);

/// Opens a file in the run directory, creating the directory.
std::ofstream open_output(const std::filesystem::path& dir, const std::string& name);

} // namespace pdmp
