#pragma once

#include <string>
#include <vector>

#include "atlasfuse/metrics.hpp"
#include "atlasfuse/stats.hpp"
#include "json.hpp"

namespace atlasfuse::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kIo = 2, kValidation = 3, kNumeric = 4 };

/// Runs the command line (args excludes the program name) and returns the exit code.
int run(const std::vector<std::string>& args);

nlohmann::json report_to_json(const MetricsReport& report);
nlohmann::json comparison_to_json(const ComparisonResult& result);

}  // namespace atlasfuse::cli
