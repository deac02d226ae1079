#include "tkdv/scenarios.hpp"

#include "tkdv/random.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace tkdv {

void DepthSchedule::validate() const {
    if (segments.empty()) throw std::invalid_argument("depth schedule has no segments");
    for (const auto& s : segments) {
        if (!(s.duration > 0.0) || !std::isfinite(s.duration))
            throw std::invalid_argument("segment durations must be positive");
        if (!(s.depth_ratio > 0.0) || !std::isfinite(s.depth_ratio))
            throw std::invalid_argument("depth ratios must be positive");
    }
    if (!(constants.c2_base > 0.0) || !(constants.c3_base > 0.0))
        throw std::invalid_argument("depth constants must be positive");
}

double DepthSchedule::total_duration() const {
    double total = 0.0;
    for (const auto& s : segments) total += s.duration;
    return total;
}

CoefficientSchedule CoefficientSchedule::from_depths(const DepthSchedule& schedule) {
    schedule.validate();
    CoefficientSchedule out;
    for (const auto& s : schedule.segments)
        out.segments.push_back({s.duration, coefficients_from_depth(s.depth_ratio, schedule.constants)});
    return out;
}

void CoefficientSchedule::validate() const {
    if (segments.empty()) throw std::invalid_argument("coefficient schedule has no segments");
    for (const auto& s : segments) {
        if (!(s.duration > 0.0) || !std::isfinite(s.duration))
            throw std::invalid_argument("segment durations must be positive");
        if (!std::isfinite(s.params.c2_coeff) || !std::isfinite(s.params.c3_coeff))
            throw std::invalid_argument("segment coefficients must be finite");
    }
}

LinearObservation::LinearObservation(Eigen::MatrixXd matrix) : matrix_(std::move(matrix)) {
    if (matrix_.rows() == 0 || matrix_.rows() != matrix_.cols())
        throw std::invalid_argument("observation operator must be a nonempty square matrix");
    if (!matrix_.allFinite()) throw std::invalid_argument("observation operator has non-finite entries");
    const Eigen::FullPivLU<Eigen::MatrixXd> lu(matrix_);
    if (!lu.isInvertible()) throw std::invalid_argument("observation operator is singular");
    inverse_ = lu.inverse();
    const Eigen::MatrixXd off = matrix_ - Eigen::MatrixXd(matrix_.diagonal().asDiagonal());
    if (off.isZero(0.0)) {
        diagonal_.resize(dim());
        for (std::size_t i = 0; i < dim(); ++i)
            diagonal_[i] = matrix_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i));
    }
}

LinearObservation LinearObservation::identity(std::size_t dim) {
    return LinearObservation(Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim)));
}

LinearObservation LinearObservation::diagonal(std::span<const double> entries) {
    Eigen::VectorXd d(static_cast<Eigen::Index>(entries.size()));
    for (std::size_t i = 0; i < entries.size(); ++i) d(static_cast<Eigen::Index>(i)) = entries[i];
    return LinearObservation(Eigen::MatrixXd(d.asDiagonal()));
}

void LinearObservation::apply(std::span<const double> x, std::span<double> out) const {
    if (!diagonal_.empty()) {
        for (std::size_t i = 0; i < diagonal_.size(); ++i) out[i] = diagonal_[i] * x[i];
        return;
    }
    const Eigen::Map<const Eigen::VectorXd> in(x.data(), static_cast<Eigen::Index>(x.size()));
    Eigen::Map<Eigen::VectorXd>(out.data(), static_cast<Eigen::Index>(out.size())) = matrix_ * in;
}

std::vector<double> LinearObservation::solve(std::span<const double> y) const {
    if (y.size() != dim()) throw std::invalid_argument("observation dimension mismatch");
    std::vector<double> x(y.size());
    if (!diagonal_.empty()) {
        for (std::size_t i = 0; i < diagonal_.size(); ++i) x[i] = y[i] / diagonal_[i];
        return x;
    }
    const Eigen::Map<const Eigen::VectorXd> in(y.data(), static_cast<Eigen::Index>(y.size()));
    Eigen::Map<Eigen::VectorXd>(x.data(), static_cast<Eigen::Index>(x.size())) = inverse_ * in;
    return x;
}

Trajectory generate_tkdv_truth(const CoefficientSchedule& schedule, double dt, const SpectralState& initial,
                               double state_noise_std, std::uint64_t noise_seed, std::size_t sample_every) {
    schedule.validate();
    if (!(dt > 0.0)) throw std::invalid_argument("dt must be positive");
    if (!(state_noise_std >= 0.0)) throw std::invalid_argument("state noise must be nonnegative");
    if (sample_every == 0) throw std::invalid_argument("sample_every must be positive");

    Trajectory trajectory;
    trajectory.times.push_back(0.0);
    trajectory.states.push_back(initial);

    Rk4Workspace workspace(initial.truncation());
    SpectralState current = initial;
    std::size_t step = 0;
    for (const auto& segment : schedule.segments) {
        trajectory.segments.push_back({trajectory.size() - 1, step, segment.params});
        const std::size_t steps = IntegratorConfig{dt, segment.duration}.step_count();
        for (std::size_t j = 1; j <= steps; ++j) {
            workspace.step(current.modes(), segment.params, dt, current.modes());
            ++step;
            if (state_noise_std > 0.0) {
                CounterRng rng(noise_seed, Stream::state_noise, step);
                for (double& v : as_real(current.modes())) v += state_noise_std * rng.normal();
            }
            if (!current.is_finite())
                throw BlowUpError(step, "truth integration blew up at step " + std::to_string(step));
            if (j % sample_every == 0 || j == steps) {
                trajectory.times.push_back(static_cast<double>(step) * dt);
                trajectory.states.push_back(current);
            }
        }
    }
    return trajectory;
}

Trajectory generate_tkdv_truth(const DepthSchedule& schedule, double dt, std::uint64_t seed,
                               double state_noise_std, std::size_t truncation) {
    return generate_tkdv_truth(CoefficientSchedule::from_depths(schedule), dt,
                               random_initial_state(seed, truncation), state_noise_std, seed);
}

ObservationSeries observe(const Trajectory& trajectory, const LinearObservation& h, double obs_noise_std,
                          std::uint64_t seed) {
    if (!(obs_noise_std >= 0.0)) throw std::invalid_argument("observation noise must be nonnegative");
    ObservationSeries series;
    series.times = trajectory.times;
    series.operator_h = h;
    series.noise_std.assign(h.dim(), obs_noise_std);
    series.observations.reserve(trajectory.size());
    for (std::size_t n = 0; n < trajectory.size(); ++n) {
        const auto x = as_real(trajectory.states[n].modes());
        if (x.size() != h.dim()) throw std::invalid_argument("observation operator does not match the state");
        std::vector<double> y(h.dim());
        h.apply(x, y);
        if (obs_noise_std > 0.0) {
            CounterRng rng(seed, Stream::observation_noise, n);
            for (double& v : y) v += obs_noise_std * rng.normal();
        }
        series.observations.push_back(std::move(y));
    }
    return series;
}

TkdvParameterModel::TkdvParameterModel(LinearObservation h, ObservationNoise noise, double dt, bool positive)
    : h_(std::move(h)), noise_(std::move(noise)), dt_(dt), positive_(positive) {
    if (h_.dim() % 2 != 0) throw std::invalid_argument("tKdV observations must have even dimension");
    if (noise_.dim() != h_.dim()) throw std::invalid_argument("noise covariance does not match observations");
    if (!(dt_ > 0.0)) throw std::invalid_argument("dt must be positive");
}

std::vector<double> TkdvParameterModel::proxy_state(std::span<const double> obs) const { return h_.solve(obs); }

void TkdvParameterModel::propagate_observe(std::span<const double> proxy, std::span<const double> theta,
                                           std::span<double> out) const {
    thread_local Rk4Workspace workspace;
    thread_local std::vector<Complex> next;
    const auto modes = as_complex(proxy);
    next.resize(modes.size());
    workspace.step(modes, TkdvParams{theta[0], theta[1]}, dt_, next);
    h_.apply(as_real(std::span<const Complex>(next)), out);
}

std::vector<std::uint8_t> TkdvParameterModel::positive_params() const {
    return std::vector<std::uint8_t>(2, positive_ ? 1 : 0);
}

TkdvParameterModel tkdv_parameter_model(const LinearObservation& h, double obs_noise_std, double state_noise_std,
                                        double dt, bool positive) {
    // eta = H w + xi
    const auto n = static_cast<Eigen::Index>(h.dim());
    Eigen::MatrixXd r = state_noise_std * state_noise_std * (h.matrix() * h.matrix().transpose()) +
                        obs_noise_std * obs_noise_std * Eigen::MatrixXd::Identity(n, n);
    return TkdvParameterModel(h, ObservationNoise(std::move(r)), dt, positive);
}

std::vector<SegmentEstimate> summarize_segments(const DepthSchedule& schedule, double dt,
                                                std::span<const std::vector<double>> running, std::size_t burn_in,
                                                const EstimatorConfig& estimator) {
    std::vector<SegmentEstimate> out;
    std::size_t start = 0;
    for (const auto& segment : schedule.segments) {
        SegmentEstimate est;
        est.true_depth = segment.depth_ratio;
        est.true_params = coefficients_from_depth(segment.depth_ratio, schedule.constants);
        est.first_step = start;
        est.end_step = start + IntegratorConfig{dt, segment.duration}.step_count();
        start = est.end_step;

        // Cumulative: the last running value whose span sits in the segment.
        // Windowed: the mean of all full windows inside the segment.
        double c2_sum = 0.0, c3_sum = 0.0;
        std::optional<std::vector<double>> last;
        for (std::size_t r = 0; r < running.size(); ++r) {
            const std::size_t step = burn_in + r;
            std::size_t span_begin = burn_in;
            if (estimator.window) {
                if (r + 1 < *estimator.window) continue;
                span_begin = step + 1 - *estimator.window;
            }
            if (span_begin < est.first_step || step >= est.end_step) continue;
            ++est.samples;
            c2_sum += running[r][0];
            c3_sum += running[r][1];
            last = running[r];
        }
        if (est.samples > 0) {
            if (estimator.window) {
                est.c2_estimate = c2_sum / static_cast<double>(est.samples);
                est.c3_estimate = c3_sum / static_cast<double>(est.samples);
            } else {
                est.c2_estimate = (*last)[0];
                est.c3_estimate = (*last)[1];
            }
            if (*est.c2_estimate > 0.0) est.depth_estimate = depth_from_c2(*est.c2_estimate, schedule.constants);
        }
        out.push_back(est);
    }
    return out;
}

EstimationResult run_estimation_experiment(const EstimationSetup& setup) {
    setup.schedule.validate();
    const Trajectory truth = generate_tkdv_truth(setup.schedule, setup.dt, setup.seed, setup.state_noise_std,
                                                 setup.truncation);
    const std::size_t obs_dim = 2 * setup.truncation;
    const LinearObservation h = setup.obs_diagonal.empty() ? LinearObservation::identity(obs_dim)
                                                           : LinearObservation::diagonal(setup.obs_diagonal);
    const ObservationSeries series = observe(truth, h, setup.obs_noise_std, setup.seed);
    const bool clamp = setup.filter.positivity == PositivityRule::reflect;
    const TkdvParameterModel model =
        tkdv_parameter_model(h, setup.obs_noise_std, setup.state_noise_std, setup.dt, clamp);

    std::vector<double> center = setup.filter.prior_center;
    if (center.empty()) {
        const TkdvParams upstream = coefficients_from_depth(1.0, setup.schedule.constants);
        center = {upstream.c2_coeff, upstream.c3_coeff};
    }
    ParticleEnsemble ensemble = init_ensemble(center, setup.filter.prior_spread, setup.filter.particles, setup.seed);
    const JitterSpec jitter = JitterSpec::from_std(setup.filter.jitter_std);
    const FilterOptions options{setup.filter.positivity, setup.filter.execution};

    EstimationResult result;
    result.posterior_means = run_filter(ensemble, model, jitter, series.observations, options);
    result.times.assign(series.times.begin() + 1, series.times.end());
    result.burn_in = setup.estimator.burn_in;
    result.running = running_estimate(result.posterior_means, setup.estimator);
    result.running_depth.reserve(result.running.size());
    for (const auto& r : result.running)
        result.running_depth.push_back(r[0] > 0.0 ? depth_from_c2(r[0], setup.schedule.constants)
                                                  : std::numeric_limits<double>::quiet_NaN());
    if (!result.running.empty()) {
        result.final_estimate = result.running.back();
        if (result.final_estimate[0] > 0.0)
            result.final_depth = depth_from_c2(result.final_estimate[0], setup.schedule.constants);
    }
    result.segments =
        summarize_segments(setup.schedule, setup.dt, result.running, result.burn_in, setup.estimator);
    return result;
}

std::vector<Detection> detect_depth_changes(std::span<const double> running_depth, std::span<const double> times,
                                            std::span<const double> levels, std::size_t hysteresis) {
    if (levels.empty()) throw std::invalid_argument("need at least one candidate level");
    if (times.size() != running_depth.size()) throw std::invalid_argument("times and series differ in length");
    std::vector<double> sorted(levels.begin(), levels.end());
    std::sort(sorted.begin(), sorted.end());
    sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());

    std::vector<Detection> detections;
    std::optional<std::size_t> current;
    int pending = 0;  // +1 above the upper midpoint, -1 below the lower one
    std::size_t run = 0;
    const std::size_t needed = std::max<std::size_t>(hysteresis, 1);
    for (std::size_t i = 0; i < running_depth.size(); ++i) {
        const double d = running_depth[i];
        if (!std::isfinite(d)) {
            run = 0;
            continue;
        }
        if (!current) {
            std::size_t best = 0;
            for (std::size_t l = 1; l < sorted.size(); ++l)
                if (std::abs(sorted[l] - d) < std::abs(sorted[best] - d)) best = l;
            current = best;
            continue;
        }
        int side = 0;
        if (*current + 1 < sorted.size() && d > 0.5 * (sorted[*current] + sorted[*current + 1])) side = 1;
        if (*current > 0 && d < 0.5 * (sorted[*current] + sorted[*current - 1])) side = -1;
        if (side == 0) {
            run = 0;
            continue;
        }
        run = side == pending ? run + 1 : 1;
        pending = side;
        if (run >= needed) {
            current = side > 0 ? *current + 1 : *current - 1;
            detections.push_back({i, times[i], sorted[*current]});
            run = 0;
            pending = 0;
        }
    }
    return detections;
}

void ToyModelSpec::validate() const {
    if (!(dt > 0.0)) throw std::invalid_argument("toy dt must be positive");
    for (double s : sigma)
        if (!(s >= 0.0)) throw std::invalid_argument("toy process noise must be nonnegative");
    for (double s : sigma_y)
        if (!(s >= 0.0)) throw std::invalid_argument("toy observation noise must be nonnegative");
    for (double h : h_diagonal)
        if (h == 0.0 || !std::isfinite(h)) throw std::invalid_argument("toy H must be invertible");
    if (!(sigma3 >= 0.0)) throw std::invalid_argument("toy parameter jitter must be nonnegative");
}

std::array<double, 2> ToyModelSpec::eta_variance() const {
    const double root_dt = std::sqrt(dt);
    std::array<double, 2> v{};
    for (std::size_t i = 0; i < 2; ++i) {
        const double process = h_diagonal[i] * sigma[i] * root_dt;
        v[i] = process * process + sigma_y[i] * sigma_y[i];
    }
    return v;
}

std::array<double, 2> toy_drift_step(const std::array<double, 2>& x, std::span<const double> theta, double dt) {
    return {x[0] + (theta[0] * std::sin(x[1]) + theta[1] * x[0] / (1.0 + std::abs(x[0]))) * dt,
            x[1] + (theta[2] * std::cos(x[0]) + theta[3] * x[1] / (1.0 + std::abs(x[1]))) * dt};
}

ToyData toy_truth_and_observations(const ToyModelSpec& spec, std::size_t n_steps, std::uint64_t seed) {
    spec.validate();
    ToyData data;
    data.series.operator_h = LinearObservation::diagonal(spec.h_diagonal);
    data.series.noise_std.assign(spec.sigma_y.begin(), spec.sigma_y.end());
    const double root_dt = std::sqrt(spec.dt);

    const auto observe_state = [&](const std::array<double, 2>& x, std::size_t n) {
        CounterRng rng(seed, Stream::toy_observation, n);
        std::vector<double> y(2);
        for (std::size_t i = 0; i < 2; ++i) y[i] = spec.h_diagonal[i] * x[i] + spec.sigma_y[i] * rng.normal();
        return y;
    };

    std::array<double, 2> x = spec.x0;
    data.states.push_back(x);
    data.series.times.push_back(0.0);
    data.series.observations.push_back(observe_state(x, 0));
    for (std::size_t n = 1; n <= n_steps; ++n) {
        CounterRng rng(seed, Stream::toy_process, n);
        x = toy_drift_step(x, spec.a, spec.dt);
        for (std::size_t i = 0; i < 2; ++i) x[i] += spec.sigma[i] * root_dt * rng.normal();
        data.states.push_back(x);
        data.series.times.push_back(static_cast<double>(n) * spec.dt);
        data.series.observations.push_back(observe_state(x, n));
    }
    return data;
}

ToyParameterModel::ToyParameterModel(const ToyModelSpec& spec)
    : spec_(spec), noise_(ObservationNoise::diagonal(spec.eta_variance())) {
    spec_.validate();
}

std::vector<double> ToyParameterModel::proxy_state(std::span<const double> obs) const {
    if (obs.size() != 2) throw std::invalid_argument("toy observations are two-dimensional");
    return {obs[0] / spec_.h_diagonal[0], obs[1] / spec_.h_diagonal[1]};
}

void ToyParameterModel::propagate_observe(std::span<const double> proxy, std::span<const double> theta,
                                          std::span<double> out) const {
    const auto next = toy_drift_step({proxy[0], proxy[1]}, theta, spec_.dt);
    out[0] = spec_.h_diagonal[0] * next[0];
    out[1] = spec_.h_diagonal[1] * next[1];
}

std::vector<FieldGrid> multi_region_field(const CoefficientSchedule& schedule, double dt, std::size_t n_grid,
                                          std::size_t sample_every, const SpectralState& initial) {
    const Trajectory run = generate_tkdv_truth(schedule, dt, initial, 0.0, 0, sample_every);
    std::vector<FieldGrid> grids;
    for (std::size_t s = 0; s < run.segments.size(); ++s) {
        FieldGrid grid;
        grid.params = run.segments[s].params;
        const std::size_t first = run.segments[s].first_index;
        const std::size_t last = s + 1 < run.segments.size() ? run.segments[s + 1].first_index : run.size() - 1;
        for (std::size_t i = first; i <= last; ++i) {
            grid.times.push_back(run.times[i]);
            grid.rows.push_back(to_physical(run.states[i], n_grid));
        }
        grids.push_back(std::move(grid));
    }
    return grids;
}

std::vector<FieldGrid> multi_region_field(const CoefficientSchedule& schedule, double dt, std::size_t n_grid,
                                          std::size_t sample_every, std::uint64_t seed, std::size_t truncation) {
    return multi_region_field(schedule, dt, n_grid, sample_every, random_initial_state(seed, truncation));
}

}  // namespace tkdv
