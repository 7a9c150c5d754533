#pragma once

// The `posi` command line: select, ci, experiment, budget.
//
// Exit codes: 0 ok, 1 other failure, 2 usage or parse error, 3 dimension
// mismatch, 4 rank deficiency, 5 estimated sigma with n <= d.

#include "stabposi/experiments.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace stabposi {

inline constexpr const char* kVersion = "0.1.0";
inline constexpr int kCsvSchemaVersion = 1;
/// Default worker count for `posi experiment` when --workers is absent.
inline constexpr const char* kWorkersEnv = "STABPOSI_WORKERS";

namespace exit_code {
inline constexpr int kOk = 0;
inline constexpr int kFailure = 1;
inline constexpr int kUsage = 2;
inline constexpr int kDimension = 3;
inline constexpr int kRank = 4;
inline constexpr int kSamples = 5;
}  // namespace exit_code

/// args[0] is the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Strict JSON config reader: unknown keys and wrong types throw ParseError.
ExperimentConfig parse_experiment_config(const std::string& json_text);
std::string experiment_config_to_json(const ExperimentConfig& cfg);

/// Experiment outputs under `dir`: records.csv, summary.csv, plot_data.csv.
void write_experiment_csvs(const std::string& dir, const std::vector<SweepPoint>& sweep);

}  // namespace stabposi
