#ifndef TKDV_CONFIG_HPP
#define TKDV_CONFIG_HPP

#include "tkdv/scenarios.hpp"

#include "json.hpp"

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace tkdv {

/// Malformed config text: bad JSON, wrong types, unknown keys.
class ConfigParseError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Well-formed config whose values violate a precondition.
class ConfigValidationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class ExperimentKind { convergence, hamiltonian, heatmap, estimate, detect, toy };

std::string to_string(ExperimentKind kind);

struct SolverSection {
    double c2 = 1.0;
    double c3 = 1.0;
    double t_final = 1.0;
    std::vector<double> dt_list;
    double dt_reference = 1e-5;
    double report_every = 0.01;
    std::size_t sample_every = 1;  // drift maximum is taken over every sample_every-th step
};

struct NoiseSection {
    double state_std = 1e-3;
    double obs_std = 0.01;
    std::vector<double> obs_diagonal;  // empty: identity
};

struct DetectSection {
    std::vector<double> levels;  // empty: the schedule's distinct depths
    std::size_t hysteresis = 100;
};

struct FieldSection {
    std::size_t n_grid = 64;
    std::size_t sample_every = 100;
};

struct ToySection {
    ToyModelSpec spec;
    std::size_t steps = 400;
};

struct ExperimentConfig {
    ExperimentKind kind = ExperimentKind::estimate;
    std::string name;
    std::uint64_t seed = 1;
    std::string output = "out";

    std::size_t truncation = kDefaultTruncation;
    double dt = 1e-4;

    SolverSection solver;
    DepthSchedule schedule;
    CoefficientSchedule coefficients;  // heatmap only; overrides `schedule` when non-empty
    std::vector<double> depth_sweep;   // estimate only: one single-segment run per depth
    NoiseSection noise;
    FilterSettings filter;
    EstimatorConfig estimator;
    DetectSection detect;
    FieldSection field;
    ToySection toy;

    /// Throws ConfigValidationError.
    void validate() const;
};

nlohmann::ordered_json to_json(const ExperimentConfig& config);

/// Missing keys take defaults; unknown keys and type mismatches throw ConfigParseError.
ExperimentConfig config_from_json(const nlohmann::ordered_json& json);

ExperimentConfig load_config(const std::filesystem::path& path);

/// `key.path=value`; the value is read as JSON when it parses, else as a string.
void apply_override(nlohmann::ordered_json& json, const std::string& assignment);

std::vector<std::string> preset_names();

/// Throws ConfigValidationError listing the known names. `fast` selects the
/// reduced-cost variant where one exists.
ExperimentConfig preset(const std::string& name, bool fast = false);

}  // namespace tkdv

#endif  // TKDV_CONFIG_HPP
