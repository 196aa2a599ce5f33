#include "neuroflag/rollout/report.hpp"

#include <fmt/format.h>
#include <json.hpp>

#include "neuroflag/binary_io.hpp"
#include "neuroflag/error.hpp"

namespace neuroflag::rollout {

std::string reports_to_json(const std::vector<RolloutReport>& reports) {
  nlohmann::json doc;
  doc["schema"] = kReportSchema;
  doc["reports"] = nlohmann::json::array();
  for (const auto& r : reports) {
    doc["reports"].push_back({{"condition", std::string(cloth::to_string(r.condition))},
                              {"mode", r.mode},
                              {"n_frames", r.n_frames()},
                              {"mu", r.mu},
                              {"sigma", r.sigma},
                              {"per_frame", r.per_frame}});
  }
  return doc.dump(2) + "\n";
}

std::vector<RolloutReport> reports_from_json(const std::string& text) {
  std::vector<RolloutReport> out;
  try {
    const auto doc = nlohmann::json::parse(text);
    if (doc.at("schema").get<std::string>() != kReportSchema) throw UsageError("unknown report schema");
    for (const auto& item : doc.at("reports")) {
      RolloutReport r;
      const auto condition = cloth::parse_wind_condition(item.at("condition").get<std::string>());
      if (!condition) throw UsageError("unknown wind condition in report");
      r.condition = *condition;
      r.mode = item.at("mode").get<std::string>();
      r.per_frame = item.at("per_frame").get<std::vector<double>>();
      r.mu = item.at("mu").get<double>();
      r.sigma = item.at("sigma").get<double>();
      if (item.at("n_frames").get<std::size_t>() != r.per_frame.size()) {
        throw UsageError("report n_frames disagrees with per_frame length");
      }
      out.push_back(std::move(r));
    }
  } catch (const nlohmann::json::exception& e) {
    throw UsageError(std::string("malformed report JSON: ") + e.what());
  }
  return out;
}

void write_reports_json(const std::vector<RolloutReport>& reports, const std::string& path) {
  const auto text = reports_to_json(reports);
  io::write_file(path, std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

std::string format_report_table(const std::vector<RolloutReport>& reports) {
  std::string out = fmt::format("{:<10} {:<15} {:>8} {:>10} {:>10}\n", "condition", "mode", "frames", "mu", "sigma");
  for (const auto& r : reports) {
    out += fmt::format("{:<10} {:<15} {:>8} {:>10.6f} {:>10.6f}\n", cloth::to_string(r.condition), r.mode,
                       r.n_frames(), r.mu, r.sigma);
  }
  return out;
}

}  // namespace neuroflag::rollout
