#include "tkdv/kernels.hpp"

#include "tkdv/random.hpp"

#include <cmath>
#include <limits>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace tkdv::kernels {

namespace {

inline void jitter_one(std::span<double> theta, std::span<const double> variances,
                       std::span<const std::uint8_t> reflect, std::uint64_t seed, std::uint64_t step,
                       std::size_t m) {
    CounterRng rng(seed, Stream::jitter, step, m);
    for (std::size_t j = 0; j < theta.size(); ++j) {
        const double z = rng.normal();
        if (variances[j] > 0.0) theta[j] += std::sqrt(variances[j]) * z;
        if (!reflect.empty() && reflect[j]) theta[j] = std::abs(theta[j]);
    }
}

inline double log_likelihood_one(const ParameterModel& model, std::span<const double> proxy,
                                 std::span<const double> next_obs, std::span<const double> theta,
                                 std::span<double> scratch) {
    model.propagate_observe(proxy, theta, scratch);
    for (std::size_t i = 0; i < scratch.size(); ++i) {
        if (!std::isfinite(scratch[i])) return -std::numeric_limits<double>::infinity();
        scratch[i] -= next_obs[i];
    }
    return -0.5 * model.noise().mahalanobis_squared(scratch);
}

}  // namespace

void jitter_serial(std::span<double> particles, std::size_t dim, std::span<const double> variances,
                   std::span<const std::uint8_t> reflect, std::uint64_t seed, std::uint64_t step) {
    const std::size_t count = particles.size() / dim;
    for (std::size_t m = 0; m < count; ++m)
        jitter_one(particles.subspan(m * dim, dim), variances, reflect, seed, step, m);
}

void jitter_parallel(std::span<double> particles, std::size_t dim, std::span<const double> variances,
                     std::span<const std::uint8_t> reflect, std::uint64_t seed, std::uint64_t step) {
    const auto count = static_cast<std::ptrdiff_t>(particles.size() / dim);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t m = 0; m < count; ++m) {
        const auto index = static_cast<std::size_t>(m);
        jitter_one(particles.subspan(index * dim, dim), variances, reflect, seed, step, index);
    }
}

void log_likelihoods_serial(const ParameterModel& model, std::span<const double> proxy,
                            std::span<const double> next_obs, std::span<const double> particles,
                            std::size_t dim, std::span<double> out) {
    std::vector<double> scratch(model.obs_dim());
    for (std::size_t m = 0; m < out.size(); ++m)
        out[m] = log_likelihood_one(model, proxy, next_obs, particles.subspan(m * dim, dim), scratch);
}

void log_likelihoods_parallel(const ParameterModel& model, std::span<const double> proxy,
                              std::span<const double> next_obs, std::span<const double> particles,
                              std::size_t dim, std::span<double> out) {
    const auto count = static_cast<std::ptrdiff_t>(out.size());
#pragma omp parallel
    {
        std::vector<double> scratch(model.obs_dim());
#pragma omp for schedule(static)
        for (std::ptrdiff_t m = 0; m < count; ++m) {
            const auto index = static_cast<std::size_t>(m);
            out[index] = log_likelihood_one(model, proxy, next_obs, particles.subspan(index * dim, dim), scratch);
        }
    }
}

int max_threads() {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

}  // namespace tkdv::kernels
