#ifndef TKDV_RANDOM_HPP
#define TKDV_RANDOM_HPP

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace tkdv {

// Independent random streams used across the library. Each draw is addressed
// by (seed, stream, major, minor, draw) so that results do not depend on the
// order in which particles or time steps are visited.
enum class Stream : std::uint32_t {
    initial_state = 1,
    state_noise = 2,
    observation_noise = 3,
    prior = 4,
    jitter = 5,
    resample = 6,
    toy_process = 7,
    toy_observation = 8,
};

// Philox4x32-10 block function.
inline std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> ctr,
                                               std::array<std::uint32_t, 2> key) {
    constexpr std::uint32_t m0 = 0xD2511F53u;
    constexpr std::uint32_t m1 = 0xCD9E8D57u;
    constexpr std::uint32_t w0 = 0x9E3779B9u;
    constexpr std::uint32_t w1 = 0xBB67AE85u;
    for (int round = 0; round < 10; ++round) {
        const std::uint64_t p0 = static_cast<std::uint64_t>(m0) * ctr[0];
        const std::uint64_t p1 = static_cast<std::uint64_t>(m1) * ctr[2];
        const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
        const auto lo0 = static_cast<std::uint32_t>(p0);
        const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
        const auto lo1 = static_cast<std::uint32_t>(p1);
        ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
        key[0] += w0;
        key[1] += w1;
    }
    return ctr;
}

/// Counter-based generator: a lightweight cursor over one (stream, major, minor)
/// address. Cheap to construct, so every particle and step gets its own.
class CounterRng {
public:
    CounterRng(std::uint64_t seed, Stream stream, std::uint64_t major, std::uint64_t minor = 0)
        : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
          stream_(static_cast<std::uint32_t>(stream)),
          major_(static_cast<std::uint32_t>(major)),
          minor_(static_cast<std::uint32_t>(minor)),
          high_(static_cast<std::uint32_t>((major >> 32) ^ ((minor >> 32) << 16))) {}

    /// Uniform on the open interval (0, 1).
    double uniform() {
        if (buffered_ == 0) refill();
        const std::uint64_t bits = (static_cast<std::uint64_t>(block_[2 * (2 - buffered_)]) << 32) |
                                   block_[2 * (2 - buffered_) + 1];
        --buffered_;
        return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
    }

    /// Standard normal via Box-Muller.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double u1 = uniform();
        const double u2 = uniform();
        const double radius = std::sqrt(-2.0 * std::log(u1));
        const double angle = 2.0 * std::numbers::pi * u2;
        spare_ = radius * std::sin(angle);
        has_spare_ = true;
        return radius * std::cos(angle);
    }

private:
    void refill() {
        block_ = philox4x32({counter_++, minor_, major_, stream_ ^ (high_ << 8)}, key_);
        buffered_ = 2;
    }

    std::array<std::uint32_t, 2> key_;
    std::uint32_t stream_;
    std::uint32_t major_;
    std::uint32_t minor_;
    std::uint32_t high_;
    std::uint32_t counter_ = 0;
    std::array<std::uint32_t, 4> block_{};
    int buffered_ = 0;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace tkdv

#endif  // TKDV_RANDOM_HPP
