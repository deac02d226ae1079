#ifndef TKDV_SCENARIOS_HPP
#define TKDV_SCENARIOS_HPP

#include "tkdv/direct_filter.hpp"
#include "tkdv/integrator.hpp"
#include "tkdv/spectral.hpp"

#include <Eigen/Dense>
#include <Eigen/LU>

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace tkdv {

struct DepthSegment {
    double duration = 0.0;
    double depth_ratio = 1.0;
};

/// Piecewise-constant depth ratio over consecutive time segments.
struct DepthSchedule {
    std::vector<DepthSegment> segments;
    DepthConstants constants;

    void validate() const;
    double total_duration() const;
};

struct CoefficientSegment {
    double duration = 0.0;
    TkdvParams params;
};

/// Piecewise-constant (C2, C3), either mapped from depths or given directly.
struct CoefficientSchedule {
    std::vector<CoefficientSegment> segments;

    static CoefficientSchedule from_depths(const DepthSchedule& schedule);
    void validate() const;
};

/// Invertible square observation operator H.
class LinearObservation {
public:
    /// Throws std::invalid_argument if H is not square or is singular.
    explicit LinearObservation(Eigen::MatrixXd matrix);
    static LinearObservation identity(std::size_t dim);
    static LinearObservation diagonal(std::span<const double> entries);

    std::size_t dim() const { return static_cast<std::size_t>(matrix_.rows()); }
    const Eigen::MatrixXd& matrix() const { return matrix_; }

    /// out = H x
    void apply(std::span<const double> x, std::span<double> out) const;
    /// H^{-1} y
    std::vector<double> solve(std::span<const double> y) const;

private:
    Eigen::MatrixXd matrix_;
    Eigen::MatrixXd inverse_;
    std::vector<double> diagonal_;  // non-empty when H is diagonal
};

struct ObservationSeries {
    std::vector<double> times;
    std::vector<std::vector<double>> observations;
    std::optional<LinearObservation> operator_h;
    std::vector<double> noise_std;
};

/// Truth run: integrates each segment from the previous segment's terminal state,
/// optionally adding i.i.d. N(0, state_noise_std^2) to every embedded component
/// after each step. Keeps every `sample_every`-th step of each segment plus its
/// first and last states.
Trajectory generate_tkdv_truth(const CoefficientSchedule& schedule, double dt, const SpectralState& initial,
                               double state_noise_std, std::uint64_t noise_seed, std::size_t sample_every = 1);

/// Same, starting from random_initial_state(seed, truncation).
Trajectory generate_tkdv_truth(const DepthSchedule& schedule, double dt, std::uint64_t seed,
                               double state_noise_std, std::size_t truncation = kDefaultTruncation);

/// Y_n = H embed(u_n) + xi_n with xi ~ N(0, obs_noise_std^2) per component.
ObservationSeries observe(const Trajectory& trajectory, const LinearObservation& h, double obs_noise_std,
                          std::uint64_t seed);

/// Y_{n+1} = H embed(RK4(unembed(H^{-1} Y_n), theta, dt)) with theta = (C2, C3).
class TkdvParameterModel final : public ParameterModel {
public:
    TkdvParameterModel(LinearObservation h, ObservationNoise noise, double dt, bool positive = true);

    std::size_t state_dim() const override { return h_.dim(); }
    std::size_t param_dim() const override { return 2; }
    std::size_t obs_dim() const override { return h_.dim(); }
    std::vector<double> proxy_state(std::span<const double> obs) const override;
    void propagate_observe(std::span<const double> proxy, std::span<const double> theta,
                           std::span<double> out) const override;
    const ObservationNoise& noise() const override { return noise_; }
    std::vector<std::uint8_t> positive_params() const override;

private:
    LinearObservation h_;
    ObservationNoise noise_;
    double dt_;
    bool positive_;
};

/// Builds the tKdV model with R = state_noise_std^2 H H^T + obs_noise_std^2 I.
TkdvParameterModel tkdv_parameter_model(const LinearObservation& h, double obs_noise_std, double state_noise_std,
                                        double dt, bool positive = true);

struct FilterSettings {
    std::size_t particles = 2000;
    std::vector<double> jitter_std{0.3, 0.017};
    std::vector<double> prior_center;  // empty: the D = 1 coefficients (c2, c3)
    std::vector<double> prior_spread{0.1, 0.5};
    PositivityRule positivity = PositivityRule::none;
    Execution execution = Execution::parallel;
};

struct EstimationSetup {
    DepthSchedule schedule;
    double dt = 1e-4;
    std::size_t truncation = kDefaultTruncation;
    std::uint64_t seed = 1;
    double state_noise_std = 1e-3;
    double obs_noise_std = 0.01;
    std::vector<double> obs_diagonal;  // empty: H = identity
    FilterSettings filter;
    EstimatorConfig estimator;
};

struct SegmentEstimate {
    double true_depth = 0.0;
    TkdvParams true_params;
    std::size_t first_step = 0;  // assimilation-step index range [first_step, end_step)
    std::size_t end_step = 0;
    std::size_t samples = 0;     // running estimates that contributed
    std::optional<double> c2_estimate;
    std::optional<double> c3_estimate;
    std::optional<double> depth_estimate;
};

struct EstimationResult {
    std::vector<double> times;  // time of the observation each step assimilated
    std::vector<std::vector<double>> posterior_means;
    std::vector<std::vector<double>> running;  // aligned with posterior_means from burn_in on
    std::vector<double> running_depth;         // NaN where C2 <= 0
    std::size_t burn_in = 0;
    std::vector<double> final_estimate;
    std::optional<double> final_depth;
    std::vector<SegmentEstimate> segments;
};

/// Truth -> observations -> assimilation loop -> running estimates; depth is
/// derived from the C2 component only.
EstimationResult run_estimation_experiment(const EstimationSetup& setup);

/// Per-segment summary over running estimates whose averaging span lies entirely
/// inside the segment: the last such value for a cumulative estimator, the mean
/// over all full windows for a windowed one.
std::vector<SegmentEstimate> summarize_segments(const DepthSchedule& schedule, double dt,
                                                std::span<const std::vector<double>> running, std::size_t burn_in,
                                                const EstimatorConfig& estimator);

struct Detection {
    std::size_t index = 0;
    double time = 0.0;
    double level = 0.0;
};

/// Level-crossing detector over a running depth series. A change is reported once
/// the series has stayed beyond the midpoint to an adjacent candidate level for
/// `hysteresis` consecutive samples; the report carries the confirming sample.
std::vector<Detection> detect_depth_changes(std::span<const double> running_depth, std::span<const double> times,
                                            std::span<const double> levels, std::size_t hysteresis);

struct ToyModelSpec {
    std::array<double, 4> a{4.0, 2.0, 3.0, 5.0};
    std::array<double, 2> sigma{0.1, 0.1};
    double dt = 0.05;
    std::array<double, 2> h_diagonal{5.0, 3.0};
    std::array<double, 2> sigma_y{0.1, 0.1};
    double sigma3 = 0.1;
    std::array<double, 2> x0{0.0, 0.0};

    void validate() const;
    /// Diagonal of the eta covariance: (H_ii sigma_i sqrt(dt))^2 + sigma_Y,i^2.
    std::array<double, 2> eta_variance() const;
};

/// Deterministic part of one toy step, h(X, theta).
std::array<double, 2> toy_drift_step(const std::array<double, 2>& x, std::span<const double> theta, double dt);

struct ToyData {
    std::vector<std::array<double, 2>> states;
    ObservationSeries series;
};

ToyData toy_truth_and_observations(const ToyModelSpec& spec, std::size_t n_steps, std::uint64_t seed);

class ToyParameterModel final : public ParameterModel {
public:
    explicit ToyParameterModel(const ToyModelSpec& spec);

    std::size_t state_dim() const override { return 2; }
    std::size_t param_dim() const override { return 4; }
    std::size_t obs_dim() const override { return 2; }
    std::vector<double> proxy_state(std::span<const double> obs) const override;
    void propagate_observe(std::span<const double> proxy, std::span<const double> theta,
                           std::span<double> out) const override;
    const ObservationNoise& noise() const override { return noise_; }

private:
    ToyModelSpec spec_;
    ObservationNoise noise_;
};

struct FieldGrid {
    TkdvParams params;
    std::vector<double> times;
    std::vector<std::vector<double>> rows;  // rows[i][j] = u(x_j, times[i])
};

/// Physical-space displacement per segment of a noise-free chained run.
std::vector<FieldGrid> multi_region_field(const CoefficientSchedule& schedule, double dt, std::size_t n_grid,
                                          std::size_t sample_every, const SpectralState& initial);

std::vector<FieldGrid> multi_region_field(const CoefficientSchedule& schedule, double dt, std::size_t n_grid,
                                          std::size_t sample_every, std::uint64_t seed,
                                          std::size_t truncation = kDefaultTruncation);

}  // namespace tkdv

#endif  // TKDV_SCENARIOS_HPP
