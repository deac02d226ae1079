#ifndef TKDV_INTEGRATOR_HPP
#define TKDV_INTEGRATOR_HPP

#include "tkdv/spectral.hpp"

#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace tkdv {

/// Raised when a step produces a non-finite mode.
class BlowUpError : public std::runtime_error {
public:
    BlowUpError(std::size_t step, const std::string& what)
        : std::runtime_error(what), step_(step) {}
    std::size_t step() const { return step_; }

private:
    std::size_t step_;
};

struct IntegratorConfig {
    double dt = 1e-4;
    double t_final = 1.0;

    /// round(t_final / dt); throws std::invalid_argument on invalid values.
    std::size_t step_count() const;
};

/// Coefficients applied from `first_index` (a sample index into the trajectory)
/// until the next segment begins.
struct TrajectorySegment {
    std::size_t first_index = 0;
    std::size_t first_step = 0;
    TkdvParams params;
};

struct Trajectory {
    std::vector<double> times;
    std::vector<SpectralState> states;
    std::vector<TrajectorySegment> segments;

    std::size_t size() const { return states.size(); }
    const TkdvParams& params_at_sample(std::size_t index) const;
};

/// Reusable scratch space for allocation-free RK4 stepping. One per thread.
class Rk4Workspace {
public:
    explicit Rk4Workspace(std::size_t truncation = kDefaultTruncation) { resize(truncation); }

    /// One classical RK4 step, `in` and `out` may alias.
    void step(std::span<const Complex> in, const TkdvParams& params, double dt, std::span<Complex> out);

private:
    void resize(std::size_t truncation);

    std::vector<Complex> k1_, k2_, k3_, k4_, stage_;
};

SpectralState rk4_step(const SpectralState& state, const TkdvParams& params, double dt);

/// Repeated RK4 steps from t = 0; keeps every `sample_every`-th state and the
/// final one. Throws BlowUpError with the failing step index.
Trajectory integrate(const SpectralState& state0, const TkdvParams& params,
                     const IntegratorConfig& config, std::size_t sample_every = 1);

struct ConvergenceRow {
    double dt = 0.0;
    std::optional<double> error;  // empty when the run blew up
    std::string failure;
};

struct ConvergenceTable {
    std::vector<ConvergenceRow> rows;
    std::optional<double> slope;  // least-squares slope of log(error) vs log(dt)
};

/// Sup-norm distance (on the real embedding) at t_final between runs with each dt
/// and a reference run. Rows that blow up are reported and left out of the fit.
ConvergenceTable convergence_study(const SpectralState& state0, const TkdvParams& params,
                                   double t_final, std::span<const double> dt_list,
                                   double dt_reference);

double sup_distance(const SpectralState& a, const SpectralState& b);

/// Least-squares slope of log(y) against log(x).
double log_log_slope(std::span<const double> x, std::span<const double> y);

struct DriftSample {
    double time = 0.0;
    double hamiltonian_drift = 0.0;
    double energy_drift = 0.0;
};

/// |H(t) - H(0)| and |E(t) - E(0)| at every `report_every` time units.
std::vector<DriftSample> hamiltonian_drift(const Trajectory& trajectory, const TkdvParams& params,
                                           double report_every);

}  // namespace tkdv

#endif  // TKDV_INTEGRATOR_HPP
