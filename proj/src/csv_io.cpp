#include "marcus/csv_io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "marcus/errors.hpp"

namespace marcus {

namespace {

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot open '" + path + "' for writing");
  return out;
}

void write_point(std::ostream& out, const Vec& x) {
  for (Eigen::Index i = 0; i < x.size(); ++i) out << (i ? "," : "") << format_number(x(i));
}

void point_header(std::ostream& out, int d) {
  if (d == 1) {
    out << "x";
    return;
  }
  for (int i = 1; i <= d; ++i) out << (i > 1 ? "," : "") << "x_" << i;
}

}  // namespace

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_increments_csv(const std::string& path, const DriverRealization& driver) {
  auto out = open_out(path);
  out << "t";
  for (int j = 1; j <= driver.m; ++j) out << ",dW_" << j;
  out << "\n";
  for (std::size_t i = 0; i < driver.brownian_increments.size(); ++i) {
    out << format_number(driver.grid[i]);
    for (int j = 0; j < driver.m; ++j) out << "," << format_number(driver.brownian_increments[i](j));
    out << "\n";
  }
}

void write_events_csv(const std::string& path, const DriverRealization& driver) {
  auto out = open_out(path);
  out << "time";
  for (int j = 1; j <= driver.m; ++j) out << ",z_" << j;
  out << "\n";
  for (const auto& e : driver.jump_events) {
    out << format_number(e.time);
    for (int j = 0; j < driver.m; ++j) out << "," << format_number(e.mark(j));
    out << "\n";
  }
}

void write_trajectories_csv(const std::string& path, const FlowSolution& flow) {
  auto out = open_out(path);
  out << "point,t";
  for (int i = 1; i <= flow.d; ++i) out << ",x_" << i;
  out << ",xi,zeta,E,I\n";
  for (std::size_t p = 0; p < flow.point_count(); ++p) {
    for (std::size_t k = 0; k < flow.times.size(); ++k) {
      const auto& s = flow.states[p][k];
      out << p << "," << format_number(flow.times[k]) << ",";
      write_point(out, s.x);
      out << "," << format_number(s.xi) << "," << format_number(s.zeta) << ","
          << format_number(flow.E(p, k)) << "," << format_number(flow.I(p, k)) << "\n";
    }
  }
}

void write_field_csv(const std::string& path, const SolutionField& field) {
  auto out = open_out(path);
  point_header(out, field.grid.dimension());
  for (double t : field.times) out << "," << format_number(t);
  out << "\n";
  for (std::size_t p = 0; p < field.grid.size(); ++p) {
    write_point(out, field.grid.points[p]);
    for (std::size_t k = 0; k < field.times.size(); ++k) {
      const double v = field.flags[k][p] == PointFlag::ok ? field.values[k][p] : NAN;
      out << "," << format_number(v);
    }
    out << "\n";
  }
}

void write_flags_csv(const std::string& path, const SolutionField& field) {
  auto out = open_out(path);
  point_header(out, field.grid.dimension());
  out << ",t,flag\n";
  for (std::size_t k = 0; k < field.times.size(); ++k) {
    for (std::size_t p = 0; p < field.grid.size(); ++p) {
      if (field.flags[k][p] == PointFlag::ok) continue;
      write_point(out, field.grid.points[p]);
      out << "," << format_number(field.times[k]) << "," << to_string(field.flags[k][p]) << "\n";
    }
  }
}

}  // namespace marcus
