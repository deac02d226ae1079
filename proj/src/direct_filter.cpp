#include "tkdv/direct_filter.hpp"

#include "tkdv/kernels.hpp"
#include "tkdv/random.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace tkdv {

ObservationNoise::ObservationNoise(Eigen::MatrixXd covariance) : covariance_(std::move(covariance)) {
    if (covariance_.rows() == 0 || covariance_.rows() != covariance_.cols())
        throw std::invalid_argument("noise covariance must be a nonempty square matrix");
    if (!covariance_.allFinite()) throw std::invalid_argument("noise covariance has non-finite entries");
    if (!covariance_.isApprox(covariance_.transpose(), 1e-12))
        throw std::invalid_argument("noise covariance must be symmetric");
    factor_.compute(covariance_);
    if (factor_.info() != Eigen::Success)
        throw std::invalid_argument("noise covariance must be positive definite");

    const Eigen::MatrixXd off = covariance_ - Eigen::MatrixXd(covariance_.diagonal().asDiagonal());
    if (off.isZero(0.0)) {
        inverse_diagonal_.resize(dim());
        for (std::size_t i = 0; i < dim(); ++i) {
            const double v = covariance_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i));
            if (!(v > 0.0)) throw std::invalid_argument("noise covariance must be positive definite");
            inverse_diagonal_[i] = 1.0 / v;
        }
    }
}

ObservationNoise ObservationNoise::isotropic(std::size_t dim, double variance) {
    return ObservationNoise(Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim)) *
                            variance);
}

ObservationNoise ObservationNoise::diagonal(std::span<const double> variances) {
    Eigen::VectorXd diag(static_cast<Eigen::Index>(variances.size()));
    for (std::size_t i = 0; i < variances.size(); ++i) diag(static_cast<Eigen::Index>(i)) = variances[i];
    return ObservationNoise(Eigen::MatrixXd(diag.asDiagonal()));
}

double ObservationNoise::mahalanobis_squared(std::span<const double> residual) const {
    if (residual.size() != dim()) throw std::invalid_argument("residual dimension mismatch");
    if (!inverse_diagonal_.empty()) {
        double sum = 0.0;
        for (std::size_t i = 0; i < residual.size(); ++i) sum += residual[i] * residual[i] * inverse_diagonal_[i];
        return sum;
    }
    const Eigen::Map<const Eigen::VectorXd> r(residual.data(), static_cast<Eigen::Index>(residual.size()));
    const Eigen::VectorXd whitened = factor_.matrixL().solve(r);
    return whitened.squaredNorm();
}

std::vector<double> ParameterModel::predict_observation(std::span<const double> prev_obs,
                                                        std::span<const double> theta) const {
    if (prev_obs.size() != obs_dim() || theta.size() != param_dim())
        throw std::invalid_argument("observation or parameter dimension mismatch");
    const std::vector<double> proxy = proxy_state(prev_obs);
    std::vector<double> out(obs_dim());
    propagate_observe(proxy, theta, out);
    return out;
}

std::vector<double> ParticleEnsemble::weighted_mean() const {
    std::vector<double> mean(dim, 0.0);
    for (std::size_t m = 0; m < size(); ++m) {
        const auto p = particle(m);
        for (std::size_t j = 0; j < dim; ++j) mean[j] += weights[m] * p[j];
    }
    return mean;
}

double ParticleEnsemble::weight_sum() const { return std::accumulate(weights.begin(), weights.end(), 0.0); }

JitterSpec JitterSpec::from_std(std::span<const double> stds) {
    JitterSpec spec;
    for (const double s : stds) spec.variances.push_back(s * s);
    return spec;
}

ParticleEnsemble init_ensemble(std::span<const double> prior_center, std::span<const double> prior_spread,
                               std::size_t particle_count, std::uint64_t seed) {
    if (particle_count < 2) throw std::invalid_argument("need at least two particles");
    if (prior_center.empty() || prior_center.size() != prior_spread.size())
        throw std::invalid_argument("prior center and spread must have the same nonzero dimension");
    if (std::any_of(prior_spread.begin(), prior_spread.end(), [](double s) { return !(s >= 0.0); }))
        throw std::invalid_argument("prior spreads must be nonnegative");

    ParticleEnsemble ensemble;
    ensemble.dim = prior_center.size();
    ensemble.particles.resize(particle_count * ensemble.dim);
    ensemble.weights.assign(particle_count, 1.0 / static_cast<double>(particle_count));
    ensemble.rng = {seed, 0};
    for (std::size_t m = 0; m < particle_count; ++m) {
        CounterRng rng(seed, Stream::prior, 0, m);
        auto p = ensemble.particle(m);
        for (std::size_t j = 0; j < ensemble.dim; ++j) p[j] = prior_center[j] + prior_spread[j] * rng.normal();
    }
    return ensemble;
}

ParticleEnsemble predict(const ParticleEnsemble& ensemble, const JitterSpec& jitter,
                         std::span<const std::uint8_t> positive, PositivityRule rule, Execution execution) {
    if (jitter.variances.size() != ensemble.dim) throw std::invalid_argument("jitter dimension mismatch");
    if (std::any_of(jitter.variances.begin(), jitter.variances.end(), [](double v) { return !(v >= 0.0); }))
        throw std::invalid_argument("jitter variances must be nonnegative");
    ParticleEnsemble out = ensemble;
    const std::span<const std::uint8_t> reflect = rule == PositivityRule::reflect ? positive : std::span<const std::uint8_t>{};
    if (execution == Execution::parallel)
        kernels::jitter_parallel(out.particles, out.dim, jitter.variances, reflect, out.rng.seed, out.rng.step);
    else
        kernels::jitter_serial(out.particles, out.dim, jitter.variances, reflect, out.rng.seed, out.rng.step);
    return out;
}

double log_likelihood(const ParameterModel& model, std::span<const double> theta,
                      std::span<const double> prev_obs, std::span<const double> next_obs) {
    if (next_obs.size() != model.obs_dim()) throw std::invalid_argument("observation dimension mismatch");
    std::vector<double> residual = model.predict_observation(prev_obs, theta);
    for (std::size_t i = 0; i < residual.size(); ++i) {
        if (!std::isfinite(residual[i])) return -std::numeric_limits<double>::infinity();
        residual[i] -= next_obs[i];
    }
    return -0.5 * model.noise().mahalanobis_squared(residual);
}

std::vector<double> reweight(std::span<const double> weights, std::span<const double> log_likelihoods) {
    if (weights.size() != log_likelihoods.size()) throw std::invalid_argument("weight/likelihood size mismatch");
    std::vector<double> log_w(weights.size());
    double peak = -std::numeric_limits<double>::infinity();
    for (std::size_t m = 0; m < weights.size(); ++m) {
        const double ll = std::isnan(log_likelihoods[m]) ? -std::numeric_limits<double>::infinity() : log_likelihoods[m];
        log_w[m] = weights[m] > 0.0 ? std::log(weights[m]) + ll : -std::numeric_limits<double>::infinity();
        peak = std::max(peak, log_w[m]);
    }
    if (!std::isfinite(peak)) throw DegenerateUpdateError("every particle has zero likelihood");
    double total = 0.0;
    for (double& lw : log_w) {
        lw = std::exp(lw - peak);
        total += lw;
    }
    for (double& w : log_w) w /= total;
    return log_w;
}

ParticleEnsemble update(const ParticleEnsemble& ensemble, const ParameterModel& model,
                        std::span<const double> prev_obs, std::span<const double> next_obs, Execution execution) {
    if (ensemble.dim != model.param_dim()) throw std::invalid_argument("ensemble/model parameter dimension mismatch");
    if (prev_obs.size() != model.obs_dim() || next_obs.size() != model.obs_dim())
        throw std::invalid_argument("observation dimension mismatch");
    const std::vector<double> proxy = model.proxy_state(prev_obs);
    std::vector<double> ll(ensemble.size());
    if (execution == Execution::parallel)
        kernels::log_likelihoods_parallel(model, proxy, next_obs, ensemble.particles, ensemble.dim, ll);
    else
        kernels::log_likelihoods_serial(model, proxy, next_obs, ensemble.particles, ensemble.dim, ll);
    ParticleEnsemble out = ensemble;
    out.weights = reweight(ensemble.weights, ll);
    return out;
}

std::vector<std::size_t> systematic_counts(std::span<const double> weights, double offset) {
    const std::size_t n = weights.size();
    std::vector<std::size_t> counts(n, 0);
    double cumulative = 0.0;
    std::size_t source = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double point = (offset + static_cast<double>(i)) / static_cast<double>(n);
        while (source + 1 < n && cumulative + weights[source] <= point) {
            cumulative += weights[source];
            ++source;
        }
        ++counts[source];
    }
    return counts;
}

ParticleEnsemble resample(const ParticleEnsemble& ensemble, std::uint64_t seed) {
    CounterRng rng(seed, Stream::resample, ensemble.rng.step);
    const std::vector<std::size_t> counts = systematic_counts(ensemble.weights, rng.uniform());
    ParticleEnsemble out;
    out.dim = ensemble.dim;
    out.rng = ensemble.rng;
    out.particles.reserve(ensemble.particles.size());
    for (std::size_t m = 0; m < counts.size(); ++m) {
        const auto p = ensemble.particle(m);
        for (std::size_t c = 0; c < counts[m]; ++c) out.particles.insert(out.particles.end(), p.begin(), p.end());
    }
    out.weights.assign(ensemble.size(), 1.0 / static_cast<double>(ensemble.size()));
    return out;
}

StepResult assimilation_step(const ParticleEnsemble& ensemble, const ParameterModel& model,
                             const JitterSpec& jitter, std::span<const double> prev_obs,
                             std::span<const double> next_obs, const FilterOptions& options) {
    const std::vector<std::uint8_t> positive = model.positive_params();
    ParticleEnsemble predicted = predict(ensemble, jitter, positive, options.positivity, options.execution);
    ParticleEnsemble weighted = update(predicted, model, prev_obs, next_obs, options.execution);
    StepResult result{{}, weighted.weighted_mean()};
    result.ensemble = resample(weighted, weighted.rng.seed);
    ++result.ensemble.rng.step;
    return result;
}

std::vector<std::vector<double>> run_filter(ParticleEnsemble& ensemble, const ParameterModel& model,
                                            const JitterSpec& jitter,
                                            std::span<const std::vector<double>> observations,
                                            const FilterOptions& options) {
    std::vector<std::vector<double>> means;
    if (observations.size() < 2) return means;
    means.reserve(observations.size() - 1);
    for (std::size_t n = 0; n + 1 < observations.size(); ++n) {
        StepResult step = assimilation_step(ensemble, model, jitter, observations[n], observations[n + 1], options);
        ensemble = std::move(step.ensemble);
        means.push_back(std::move(step.posterior_mean));
    }
    return means;
}

std::vector<std::vector<double>> running_estimate(std::span<const std::vector<double>> posterior_means,
                                                  const EstimatorConfig& config) {
    std::vector<std::vector<double>> out;
    if (config.window && *config.window == 0) throw std::invalid_argument("window must be positive");
    if (config.burn_in >= posterior_means.size()) return out;
    const std::size_t dim = posterior_means.front().size();
    std::vector<double> sum(dim, 0.0);
    out.reserve(posterior_means.size() - config.burn_in);
    for (std::size_t i = config.burn_in; i < posterior_means.size(); ++i) {
        for (std::size_t j = 0; j < dim; ++j) sum[j] += posterior_means[i][j];
        std::size_t count = i - config.burn_in + 1;
        if (config.window && count > *config.window) {
            const auto& leaving = posterior_means[i - *config.window];
            for (std::size_t j = 0; j < dim; ++j) sum[j] -= leaving[j];
            count = *config.window;
        }
        std::vector<double> estimate(dim);
        for (std::size_t j = 0; j < dim; ++j) estimate[j] = sum[j] / static_cast<double>(count);
        out.push_back(std::move(estimate));
    }
    return out;
}

}  // namespace tkdv
