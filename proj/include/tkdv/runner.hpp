#ifndef TKDV_RUNNER_HPP
#define TKDV_RUNNER_HPP

#include "tkdv/config.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace tkdv {

/// Shortest decimal string that reads back to the same double; "nan", "inf", "-inf" otherwise.
std::string format_double(double value);

/// Runs one experiment. When `output_dir` is nonempty, writes the CSV files and
/// summary.json there (creating the directory). Returns the summary.
///
/// Exceptions pass through: ConfigValidationError, BlowUpError, DegenerateUpdateError.
nlohmann::ordered_json run_experiment(const ExperimentConfig& config, const std::filesystem::path& output_dir);

/// Process exit code for an exception escaping run_experiment or config loading.
int exit_code_for(const std::exception& error);

struct BatchJob {
    ExperimentConfig config;
    std::filesystem::path output_dir;
};

struct BatchOutcome {
    int exit_code = 0;
    std::string message;
};

/// Runs independent jobs on up to `jobs` worker threads. Outcomes are in job order.
std::vector<BatchOutcome> run_batch(const std::vector<BatchJob>& batch, std::size_t jobs);

}  // namespace tkdv

#endif  // TKDV_RUNNER_HPP
