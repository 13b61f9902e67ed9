#pragma once

#include <string>

#include "marcus/characteristics.hpp"
#include "marcus/spde_solver.hpp"

namespace marcus {

/// Shortest round-trip decimal form ("%.17g"); NaN as "nan".
std::string format_number(double v);

/// `t,dW_1..dW_m`: one row per grid interval, t its left endpoint.
void write_increments_csv(const std::string& path, const DriverRealization& driver);
/// `time,z_1..z_m`: one row per jump event.
void write_events_csv(const std::string& path, const DriverRealization& driver);
/// `point,t,x_1..x_d,xi,zeta,E,I`: one row per (initial point, output time).
void write_trajectories_csv(const std::string& path, const FlowSolution& flow);
/// `x,<t_0>,<t_1>,...` (x_1..x_d for d > 1); flagged entries written as nan.
void write_field_csv(const std::string& path, const SolutionField& field);
/// Sidecar `x,t,flag` listing every flagged entry of the field.
void write_flags_csv(const std::string& path, const SolutionField& field);

}  // namespace marcus
