#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "marcus/config.hpp"

namespace marcus::cli {

struct Check {
  std::string name;
  double value = 0.0;
  std::string bound;  // human-readable threshold, e.g. "<= 0.005"
  bool pass = false;
};

/// Files written, summary numbers and per-check status of one run.
class ReportBundle {
 public:
  ReportBundle(std::string command, std::string out_dir);

  /// Registers a written file (path relative to the output directory).
  void add_file(const std::string& name);
  std::string path(const std::string& name) const;

  void check(const std::string& name, double value, const std::string& bound, bool pass);
  nlohmann::json& summary() { return summary_; }
  void set_config(const Config& config, const std::string& preset);

  bool passed() const;
  const std::vector<Check>& checks() const { return checks_; }

  /// Writes report.json (listing itself in the manifest).
  void write();
  void print_checks() const;

 private:
  std::string command_;
  std::string dir_;
  std::vector<std::string> files_;
  std::vector<Check> checks_;
  nlohmann::json summary_ = nlohmann::json::object();
  nlohmann::json config_ = nlohmann::json::object();
};

}  // namespace marcus::cli
