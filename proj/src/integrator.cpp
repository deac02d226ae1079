#include "tkdv/integrator.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace tkdv {

std::size_t IntegratorConfig::step_count() const {
    if (!(dt > 0.0) || !std::isfinite(dt)) throw std::invalid_argument("dt must be positive");
    if (!(t_final >= 0.0) || !std::isfinite(t_final))
        throw std::invalid_argument("t_final must be nonnegative");
    const double ratio = t_final / dt;
    return static_cast<std::size_t>(std::llround(ratio));
}

const TkdvParams& Trajectory::params_at_sample(std::size_t index) const {
    if (segments.empty()) throw std::logic_error("trajectory has no segments");
    auto it = std::upper_bound(segments.begin(), segments.end(), index,
                               [](std::size_t i, const TrajectorySegment& s) { return i < s.first_index; });
    if (it != segments.begin()) --it;
    return it->params;
}

void Rk4Workspace::resize(std::size_t truncation) {
    k1_.resize(truncation);
    k2_.resize(truncation);
    k3_.resize(truncation);
    k4_.resize(truncation);
    stage_.resize(truncation);
}

void Rk4Workspace::step(std::span<const Complex> in, const TkdvParams& params, double dt,
                        std::span<Complex> out) {
    const std::size_t n = in.size();
    if (k1_.size() != n) resize(n);
    const double half = 0.5 * dt;

    tkdv_rhs(in, params, k1_);
    for (std::size_t i = 0; i < n; ++i) stage_[i] = in[i] + half * k1_[i];
    tkdv_rhs(stage_, params, k2_);
    for (std::size_t i = 0; i < n; ++i) stage_[i] = in[i] + half * k2_[i];
    tkdv_rhs(stage_, params, k3_);
    for (std::size_t i = 0; i < n; ++i) stage_[i] = in[i] + dt * k3_[i];
    tkdv_rhs(stage_, params, k4_);
    const double sixth = dt / 6.0;
    for (std::size_t i = 0; i < n; ++i)
        out[i] = in[i] + sixth * (k1_[i] + 2.0 * (k2_[i] + k3_[i]) + k4_[i]);
}

SpectralState rk4_step(const SpectralState& state, const TkdvParams& params, double dt) {
    if (!(dt > 0.0)) throw std::invalid_argument("dt must be positive");
    Rk4Workspace workspace(state.truncation());
    SpectralState out(state.truncation());
    workspace.step(state.modes(), params, dt, out.modes());
    if (!out.is_finite()) throw BlowUpError(0, "RK4 step produced a non-finite state");
    return out;
}

Trajectory integrate(const SpectralState& state0, const TkdvParams& params,
                     const IntegratorConfig& config, std::size_t sample_every) {
    if (sample_every == 0) throw std::invalid_argument("sample_every must be positive");
    const std::size_t steps = config.step_count();
    Trajectory trajectory;
    trajectory.segments.push_back({0, 0, params});
    trajectory.times.push_back(0.0);
    trajectory.states.push_back(state0);

    Rk4Workspace workspace(state0.truncation());
    SpectralState current = state0;
    for (std::size_t n = 1; n <= steps; ++n) {
        workspace.step(current.modes(), params, config.dt, current.modes());
        if (!current.is_finite())
            throw BlowUpError(n, "integration blew up at step " + std::to_string(n) +
                                     " (dt=" + std::to_string(config.dt) + ")");
        if (n % sample_every == 0 || n == steps) {
            trajectory.times.push_back(static_cast<double>(n) * config.dt);
            trajectory.states.push_back(current);
        }
    }
    return trajectory;
}

double sup_distance(const SpectralState& a, const SpectralState& b) {
    if (a.truncation() != b.truncation()) throw std::invalid_argument("truncation mismatch");
    const auto x = as_real(a.modes());
    const auto y = as_real(b.modes());
    double worst = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) worst = std::max(worst, std::abs(x[i] - y[i]));
    return worst;
}

double log_log_slope(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size() || x.size() < 2)
        throw std::invalid_argument("slope fit needs at least two matched points");
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += std::log(x[i]);
        my += std::log(y[i]);
    }
    mx /= static_cast<double>(x.size());
    my /= static_cast<double>(y.size());
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double dx = std::log(x[i]) - mx;
        sxy += dx * (std::log(y[i]) - my);
        sxx += dx * dx;
    }
    return sxy / sxx;
}

namespace {
SpectralState final_state(const SpectralState& state0, const TkdvParams& params, double t_final,
                          double dt) {
    // Only the endpoint is needed, so sample at the final step alone.
    const IntegratorConfig config{dt, t_final};
    const std::size_t steps = std::max<std::size_t>(config.step_count(), 1);
    return integrate(state0, params, config, steps).states.back();
}
}  // namespace

ConvergenceTable convergence_study(const SpectralState& state0, const TkdvParams& params,
                                   double t_final, std::span<const double> dt_list,
                                   double dt_reference) {
    if (dt_list.empty()) throw std::invalid_argument("dt list is empty");
    if (!(dt_reference > 0.0) || dt_reference >= *std::min_element(dt_list.begin(), dt_list.end()) / 10.0)
        throw std::invalid_argument("reference dt must be below a tenth of the smallest dt");

    const SpectralState reference = final_state(state0, params, t_final, dt_reference);
    ConvergenceTable table;
    std::vector<double> fit_dt, fit_err;
    for (const double dt : dt_list) {
        ConvergenceRow row{dt, std::nullopt, {}};
        try {
            row.error = sup_distance(final_state(state0, params, t_final, dt), reference);
            if (*row.error > 0.0) {
                fit_dt.push_back(dt);
                fit_err.push_back(*row.error);
            }
        } catch (const BlowUpError& e) {
            row.failure = e.what();
        }
        table.rows.push_back(std::move(row));
    }
    if (fit_dt.size() >= 2) table.slope = log_log_slope(fit_dt, fit_err);
    return table;
}

std::vector<DriftSample> hamiltonian_drift(const Trajectory& trajectory, const TkdvParams& params,
                                           double report_every) {
    if (!(report_every > 0.0)) throw std::invalid_argument("report interval must be positive");
    std::vector<DriftSample> series;
    if (trajectory.states.empty()) return series;
    const double h0 = hamiltonian(trajectory.states.front(), params);
    const double e0 = energy(trajectory.states.front());
    std::size_t next = 0;
    for (std::size_t i = 0; i < trajectory.size(); ++i) {
        const double t = trajectory.times[i];
        // Half a sample spacing absorbs floating error in n * dt.
        const double spacing = i + 1 < trajectory.size() ? trajectory.times[i + 1] - t
                               : i > 0                   ? t - trajectory.times[i - 1]
                                                         : 0.0;
        const double reach = t + 0.5 * spacing;
        if (reach < static_cast<double>(next) * report_every) continue;
        const auto& state = trajectory.states[i];
        series.push_back({t, std::abs(hamiltonian(state, params) - h0), std::abs(energy(state) - e0)});
        while (static_cast<double>(next) * report_every <= reach) ++next;
    }
    return series;
}

}  // namespace tkdv
