#ifndef TKDV_DIRECT_FILTER_HPP
#define TKDV_DIRECT_FILTER_HPP

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

namespace tkdv {

/// Serial reference loops or their OpenMP counterparts. Both produce bit-identical
/// per-particle results.
enum class Execution { serial, parallel };

/// All particle likelihoods vanished, i.e. the model cannot explain the observation.
class DegenerateUpdateError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Gaussian observation-noise covariance R with a cached Cholesky factor.
class ObservationNoise {
public:
    /// Throws std::invalid_argument unless R is symmetric positive definite.
    explicit ObservationNoise(Eigen::MatrixXd covariance);
    static ObservationNoise isotropic(std::size_t dim, double variance);
    static ObservationNoise diagonal(std::span<const double> variances);

    std::size_t dim() const { return static_cast<std::size_t>(covariance_.rows()); }
    const Eigen::MatrixXd& covariance() const { return covariance_; }

    /// r^T R^{-1} r
    double mahalanobis_squared(std::span<const double> residual) const;

private:
    Eigen::MatrixXd covariance_;
    Eigen::LLT<Eigen::MatrixXd> factor_;
    std::vector<double> inverse_diagonal_;  // filled when R is diagonal
};

/// A state-space model seen through its observations, Y_{n+1} = H h(X_n, theta) + eta.
///
/// The filter never estimates X: it substitutes the proxy H^{-1} Y_n for the
/// hidden state, so a model only needs to map a previous observation and a
/// parameter vector to a predicted observation.
class ParameterModel {
public:
    virtual ~ParameterModel() = default;

    virtual std::size_t state_dim() const = 0;
    virtual std::size_t param_dim() const = 0;
    virtual std::size_t obs_dim() const = 0;

    /// H^{-1} Y.
    virtual std::vector<double> proxy_state(std::span<const double> obs) const = 0;

    /// H h(proxy, theta) into `out` (length obs_dim). Must be deterministic and safe
    /// to call from several threads at once.
    virtual void propagate_observe(std::span<const double> proxy, std::span<const double> theta,
                                   std::span<double> out) const = 0;

    virtual const ObservationNoise& noise() const = 0;

    /// Parameters that must stay nonnegative. Defaults to none.
    virtual std::vector<std::uint8_t> positive_params() const { return std::vector<std::uint8_t>(param_dim(), 0); }

    /// H h(H^{-1} Y_n, theta).
    std::vector<double> predict_observation(std::span<const double> prev_obs,
                                            std::span<const double> theta) const;
};

/// Position in the counter-based random stream: (seed, assimilation step).
struct RngCursor {
    std::uint64_t seed = 0;
    std::uint64_t step = 0;
};

/// M particles of dimension p stored row-major, with normalized weights.
struct ParticleEnsemble {
    std::size_t dim = 0;
    std::vector<double> particles;
    std::vector<double> weights;
    RngCursor rng;

    std::size_t size() const { return weights.size(); }
    std::span<const double> particle(std::size_t m) const { return {particles.data() + m * dim, dim}; }
    std::span<double> particle(std::size_t m) { return {particles.data() + m * dim, dim}; }

    std::vector<double> weighted_mean() const;
    double weight_sum() const;
};

/// Diagonal covariance of the pseudo-dynamics jitter theta_{n+1} = theta_n + eps_n.
struct JitterSpec {
    std::vector<double> variances;

    static JitterSpec from_std(std::span<const double> stds);
};

/// What jitter does to parameters the model declares nonnegative.
enum class PositivityRule { none, reflect };

struct EstimatorConfig {
    std::size_t burn_in = 0;
    std::optional<std::size_t> window;
};

ParticleEnsemble init_ensemble(std::span<const double> prior_center, std::span<const double> prior_spread,
                               std::size_t particle_count, std::uint64_t seed);

/// Adds N(0, Sigma) to every particle; weights are untouched. Draws are keyed by
/// (seed, step, particle) so the result does not depend on the schedule.
ParticleEnsemble predict(const ParticleEnsemble& ensemble, const JitterSpec& jitter,
                         std::span<const std::uint8_t> positive = {}, PositivityRule rule = PositivityRule::reflect,
                         Execution execution = Execution::serial);

/// -1/2 r^T R^{-1} r with r = predict_observation(prev_obs, theta) - next_obs.
/// Non-finite predictions map to -infinity.
double log_likelihood(const ParameterModel& model, std::span<const double> theta,
                      std::span<const double> prev_obs, std::span<const double> next_obs);

/// Reweights by the likelihood in the log domain with max-subtraction.
/// Throws DegenerateUpdateError when every likelihood is zero.
ParticleEnsemble update(const ParticleEnsemble& ensemble, const ParameterModel& model,
                        std::span<const double> prev_obs, std::span<const double> next_obs,
                        Execution execution = Execution::serial);

/// Folds per-particle log-likelihoods into normalized weights.
std::vector<double> reweight(std::span<const double> weights, std::span<const double> log_likelihoods);

/// Systematic resampling to uniform weights.
ParticleEnsemble resample(const ParticleEnsemble& ensemble, std::uint64_t seed);

/// Copy counts N_m of systematic resampling for the given offset u in [0, 1).
std::vector<std::size_t> systematic_counts(std::span<const double> weights, double offset);

struct StepResult {
    ParticleEnsemble ensemble;
    std::vector<double> posterior_mean;
};

struct FilterOptions {
    PositivityRule positivity = PositivityRule::reflect;
    Execution execution = Execution::serial;
};

/// predict -> update -> posterior mean (pre-resampling) -> resample. Uses and
/// advances ensemble.rng.
StepResult assimilation_step(const ParticleEnsemble& ensemble, const ParameterModel& model,
                             const JitterSpec& jitter, std::span<const double> prev_obs,
                             std::span<const double> next_obs, const FilterOptions& options = {});

/// Runs assimilation_step over consecutive observation pairs and returns the
/// posterior mean after each one.
std::vector<std::vector<double>> run_filter(ParticleEnsemble& ensemble, const ParameterModel& model,
                                            const JitterSpec& jitter,
                                            std::span<const std::vector<double>> observations,
                                            const FilterOptions& options = {});

/// Cumulative mean from index burn_in onward, or a trailing window average when
/// `window` is set. Output has max(0, n - burn_in) entries.
std::vector<std::vector<double>> running_estimate(std::span<const std::vector<double>> posterior_means,
                                                  const EstimatorConfig& config);

}  // namespace tkdv

#endif  // TKDV_DIRECT_FILTER_HPP
