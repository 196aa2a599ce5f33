#include "config_file.hpp"

#include <fstream>

#include <CLI11.hpp>

#include "neuroflag/error.hpp"

namespace neuroflag::cli {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string unquote(std::string v) {
  if (v.size() >= 2 && (v.front() == '"' || v.front() == '\'') && v.back() == v.front()) v = v.substr(1, v.size() - 2);
  return v;
}

}  // namespace

std::vector<std::pair<std::string, std::string>> read_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file " + path);
  std::vector<std::pair<std::string, std::string>> out;
  std::string line;
  for (int lineno = 1; std::getline(in, line); ++lineno) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw UsageError(path + ":" + std::to_string(lineno) + ": expected key = value");
    out.emplace_back(trim(line.substr(0, eq)), unquote(trim(line.substr(eq + 1))));
  }
  return out;
}

void apply_config_file(CLI::App& app, const std::vector<std::pair<std::string, std::string>>& entries) {
  for (const auto& [key, value] : entries) {
    CLI::Option* opt = nullptr;
    try {
      opt = app.get_option("--" + key);
    } catch (const CLI::OptionNotFound&) {
      throw UsageError("unknown config key '" + key + "' for " + app.get_name());
    }
    if (opt->count() > 0) continue;
    if (opt->get_type_size() == 0) {
      if (value != "true" && value != "false") throw UsageError("config key '" + key + "' expects true or false");
      if (value == "false") continue;
      opt->add_result(std::string("true"));
    } else {
      opt->add_result(value);
    }
    opt->run_callback();
  }
}

std::string resolved_config(const CLI::App& app) {
  std::string out;
  for (const auto* opt : app.get_options()) {
    const auto& name = opt->get_single_name();
    if (name.empty() || name == "help" || name == "config" || name == "help-all") continue;
    std::string value;
    if (opt->get_type_size() == 0) {
      value = opt->count() > 0 ? "true" : "false";
    } else if (opt->count() > 0) {
      value = opt->results().back();
    } else {
      value = opt->get_default_str();
    }
    out += name + " = " + value + "\n";
  }
  return out;
}

}  // namespace neuroflag::cli
