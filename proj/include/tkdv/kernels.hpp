#ifndef TKDV_KERNELS_HPP
#define TKDV_KERNELS_HPP

// Per-particle inner loops of the direct filter. Each kernel has a serial
// reference version and an OpenMP version; tests hold them bit-identical.

#include "tkdv/direct_filter.hpp"

#include <cstdint>
#include <span>

namespace tkdv::kernels {

/// particles[m*dim + j] += sqrt(variances[j]) * N(0,1), keyed by (seed, step, m).
void jitter_serial(std::span<double> particles, std::size_t dim, std::span<const double> variances,
                   std::span<const std::uint8_t> reflect, std::uint64_t seed, std::uint64_t step);
void jitter_parallel(std::span<double> particles, std::size_t dim, std::span<const double> variances,
                     std::span<const std::uint8_t> reflect, std::uint64_t seed, std::uint64_t step);

/// out[m] = log p(next_obs | particle m) given the shared proxy state.
void log_likelihoods_serial(const ParameterModel& model, std::span<const double> proxy,
                            std::span<const double> next_obs, std::span<const double> particles,
                            std::size_t dim, std::span<double> out);
void log_likelihoods_parallel(const ParameterModel& model, std::span<const double> proxy,
                              std::span<const double> next_obs, std::span<const double> particles,
                              std::size_t dim, std::span<double> out);

/// Worker threads the parallel kernels would use.
int max_threads();

}  // namespace tkdv::kernels

#endif  // TKDV_KERNELS_HPP
