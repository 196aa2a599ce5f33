#pragma once

#include <string>
#include <vector>

#include "neuroflag/rollout/rollout.hpp"

// Report schema:
//   { "schema": "neuroflag.rollout_report/1",
//     "reports": [ { "condition": "strong", "mode": "teacher_forced",
//                    "n_frames": N, "mu": m, "sigma": s, "per_frame": [e0, ...] }, ... ] }
namespace neuroflag::rollout {

inline constexpr const char* kReportSchema = "neuroflag.rollout_report/1";

std::string reports_to_json(const std::vector<RolloutReport>& reports);
std::vector<RolloutReport> reports_from_json(const std::string& text);
void write_reports_json(const std::vector<RolloutReport>& reports, const std::string& path);

/// Fixed-width table: one line per report with condition, mode, frames, mu and sigma.
std::string format_report_table(const std::vector<RolloutReport>& reports);

}  // namespace neuroflag::rollout
