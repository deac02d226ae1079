#ifndef TKDV_TESTS_ORACLES_HPP
#define TKDV_TESTS_ORACLES_HPP

// Slow, straightforward reference implementations used only by the tests.

#include "tkdv/random.hpp"
#include "tkdv/spectral.hpp"

#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <vector>

namespace tkdv::test {

// Unnormalized random state (no energy rescaling), independent of the library helper.
inline SpectralState random_state(std::uint64_t seed, std::size_t truncation) {
    CounterRng rng(seed, Stream::toy_process, 999, truncation);
    SpectralState s(truncation);
    for (std::size_t k = 1; k <= truncation; ++k) {
        const double re = rng.normal();
        const double im = rng.normal();
        s.set_mode(k, {re, im});
    }
    return s;
}

// Full spectrum u_{-L..L}, index k + L.
inline std::vector<Complex> full_spectrum(const SpectralState& s) {
    const long n = static_cast<long>(s.truncation());
    std::vector<Complex> u(static_cast<std::size_t>(2 * n + 1));
    for (long k = 1; k <= n; ++k) {
        u[static_cast<std::size_t>(n + k)] = s.mode(static_cast<std::size_t>(k));
        u[static_cast<std::size_t>(n - k)] = std::conj(s.mode(static_cast<std::size_t>(k)));
    }
    return u;
}

// du_k/dt over all k in [-L, L] from the plain double loop over m + n = k.
inline std::vector<Complex> brute_force_full_derivative(const SpectralState& s, const TkdvParams& p) {
    const long n = static_cast<long>(s.truncation());
    const auto u = full_spectrum(s);
    auto at = [&](long k) { return u[static_cast<std::size_t>(k + n)]; };
    std::vector<Complex> d(u.size());
    const Complex i{0.0, 1.0};
    for (long k = -n; k <= n; ++k) {
        Complex conv{};
        for (long m = -n; m <= n; ++m) {
            const long r = k - m;
            if (r < -n || r > n) continue;
            conv += at(m) * at(r);
        }
        const double kd = static_cast<double>(k);
        d[static_cast<std::size_t>(k + n)] = -p.c3_coeff * (i * kd / 2.0) * conv + i * p.c2_coeff * kd * kd * kd * at(k);
    }
    return d;
}

inline SpectralState brute_force_rhs(const SpectralState& s, const TkdvParams& p) {
    const auto full = brute_force_full_derivative(s, p);
    const long n = static_cast<long>(s.truncation());
    SpectralState out(s.truncation());
    for (long k = 1; k <= n; ++k) out.set_mode(static_cast<std::size_t>(k), full[static_cast<std::size_t>(n + k)]);
    return out;
}

// Nonlinear term -(i k / 2) P_L[(u^2)_k] with u^2 formed pointwise on a grid fine
// enough (n_grid >= 3L + 1) that the quadratic product is alias-free.
inline SpectralState pseudo_spectral_nonlinear(const SpectralState& s, std::size_t n_grid) {
    const long n = static_cast<long>(s.truncation());
    const double two_pi = 2.0 * std::numbers::pi;
    std::vector<double> field(n_grid);
    for (std::size_t j = 0; j < n_grid; ++j) {
        const double x = two_pi * static_cast<double>(j) / static_cast<double>(n_grid);
        double v = 0.0;
        for (long k = 1; k <= n; ++k)
            v += 2.0 * (s.mode(static_cast<std::size_t>(k)) * std::polar(1.0, static_cast<double>(k) * x)).real();
        field[j] = v * v;
    }
    SpectralState out(s.truncation());
    for (long k = 1; k <= n; ++k) {
        Complex coeff{};
        for (std::size_t j = 0; j < n_grid; ++j) {
            const double x = two_pi * static_cast<double>(j) / static_cast<double>(n_grid);
            coeff += field[j] * std::polar(1.0, -static_cast<double>(k) * x);
        }
        coeff /= static_cast<double>(n_grid);
        out.set_mode(static_cast<std::size_t>(k), Complex{0.0, -static_cast<double>(k) / 2.0} * coeff);
    }
    return out;
}

// (pi / 3) sum_{m + n + l = 0} u_m u_n u_l as a triple loop.
inline double brute_force_cubic(const SpectralState& s) {
    const long n = static_cast<long>(s.truncation());
    const auto u = full_spectrum(s);
    Complex sum{};
    for (long a = -n; a <= n; ++a)
        for (long b = -n; b <= n; ++b)
            for (long c = -n; c <= n; ++c)
                if (a + b + c == 0)
                    sum += u[static_cast<std::size_t>(a + n)] * u[static_cast<std::size_t>(b + n)] *
                           u[static_cast<std::size_t>(c + n)];
    return std::numbers::pi / 3.0 * sum.real();
}

}  // namespace tkdv::test

#endif  // TKDV_TESTS_ORACLES_HPP
