#include "report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "marcus/errors.hpp"

namespace marcus::cli {

ReportBundle::ReportBundle(std::string command, std::string out_dir)
    : command_(std::move(command)), dir_(std::move(out_dir)) {
  std::filesystem::create_directories(dir_);
}

void ReportBundle::add_file(const std::string& name) {
  if (std::find(files_.begin(), files_.end(), name) == files_.end()) files_.push_back(name);
}

std::string ReportBundle::path(const std::string& name) const {
  return (std::filesystem::path(dir_) / name).string();
}

void ReportBundle::check(const std::string& name, double value, const std::string& bound, bool pass) {
  checks_.push_back({name, value, bound, pass});
}

void ReportBundle::set_config(const Config& config, const std::string& preset) {
  nlohmann::json sections = nlohmann::json::object();
  for (const auto& [section, entries] : config.sections()) {
    auto& s = sections[section.empty() ? "_" : section];
    for (const auto& [key, v] : entries) {
      switch (v.kind) {
        case ConfigValue::Kind::number: s[key] = v.text; break;
        case ConfigValue::Kind::boolean: s[key] = v.boolean; break;
        case ConfigValue::Kind::string: s[key] = v.text; break;
        case ConfigValue::Kind::list: s[key] = v.list; break;
      }
    }
  }
  config_ = {{"preset", preset}, {"entries", sections}};
}

bool ReportBundle::passed() const {
  return std::all_of(checks_.begin(), checks_.end(), [](const Check& c) { return c.pass; });
}

void ReportBundle::write() {
  add_file("report.json");
  nlohmann::json checks = nlohmann::json::array();
  for (const auto& c : checks_) {
    nlohmann::json value = std::isfinite(c.value) ? nlohmann::json(c.value) : nlohmann::json(nullptr);
    checks.push_back({{"name", c.name}, {"value", value}, {"bound", c.bound},
                      {"status", c.pass ? "pass" : "fail"}});
  }
  const nlohmann::json doc = {{"command", command_},
                              {"status", passed() ? "pass" : "fail"},
                              {"config", config_},
                              {"summary", summary_},
                              {"checks", checks},
                              {"files", files_}};
  std::ofstream out(path("report.json"));
  if (!out) throw InputError("cannot write " + path("report.json"));
  out << doc.dump(2) << "\n";
}

void ReportBundle::print_checks() const {
  for (const auto& c : checks_)
    std::printf("check %-28s %-6s value=%.6g (%s)\n", c.name.c_str(), c.pass ? "PASS" : "FAIL",
                c.value, c.bound.c_str());
}

}  // namespace marcus::cli
