#ifndef TKDV_SPECTRAL_HPP
#define TKDV_SPECTRAL_HPP

#include <complex>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

namespace tkdv {

using Complex = std::complex<double>;

inline constexpr std::size_t kDefaultTruncation = 16;

class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Positive Fourier modes u_1..u_L of a real, zero-mean field on [-pi, pi).
/// u_0 is identically zero and u_{-k} = conj(u_k) is implied.
class SpectralState {
public:
    SpectralState() = default;
    explicit SpectralState(std::size_t truncation);
    explicit SpectralState(std::vector<Complex> modes);

    std::size_t truncation() const { return modes_.size(); }

    /// Mode k for 1 <= k <= L.
    Complex mode(std::size_t k) const { return modes_.at(k - 1); }
    void set_mode(std::size_t k, Complex value) { modes_.at(k - 1) = value; }

    /// Any k in [-L, L], reconstructed through conjugate symmetry.
    Complex full(long k) const;

    std::span<const Complex> modes() const { return modes_; }
    std::span<Complex> modes() { return modes_; }

    bool is_finite() const;

    friend bool operator==(const SpectralState&, const SpectralState&) = default;

private:
    std::vector<Complex> modes_;
};

/// Interleaved (Re u_1, Im u_1, ..., Re u_L, Im u_L).
std::vector<double> embed(const SpectralState& state);
SpectralState unembed(std::span<const double> values);

/// std::complex<double> is layout compatible with double[2], so a contiguous mode
/// array can be viewed in place as its real embedding.
inline std::span<const double> as_real(std::span<const Complex> modes) {
    return {reinterpret_cast<const double*>(modes.data()), 2 * modes.size()};
}
inline std::span<double> as_real(std::span<Complex> modes) {
    return {reinterpret_cast<double*>(modes.data()), 2 * modes.size()};
}
inline std::span<const Complex> as_complex(std::span<const double> values) {
    return {reinterpret_cast<const Complex*>(values.data()), values.size() / 2};
}
inline std::span<Complex> as_complex(std::span<double> values) {
    return {reinterpret_cast<Complex*>(values.data()), values.size() / 2};
}

/// C2 multiplies the dispersive term, C3 the nonlinear term.
struct TkdvParams {
    double c2_coeff = 0.0;
    double c3_coeff = 0.0;

    friend bool operator==(const TkdvParams&, const TkdvParams&) = default;
};

/// Depth-independent base constants c2, c3.
struct DepthConstants {
    double c2_base = 0.0236;
    double c3_base = 0.1965;

    friend bool operator==(const DepthConstants&, const DepthConstants&) = default;
};

/// (C2, C3) = (c2 D^{1/2}, c3 D^{-3/2}). Throws DomainError for D <= 0.
TkdvParams coefficients_from_depth(double depth_ratio, const DepthConstants& consts);

/// Inverse of the C2 map: D = (C2 / c2)^2. Throws DomainError for C2 <= 0.
double depth_from_c2(double c2_coeff, const DepthConstants& consts);

/// Time derivative of the truncated system, written into `out` (same length as
/// `modes`). No allocation; safe to call concurrently.
void tkdv_rhs(std::span<const Complex> modes, const TkdvParams& params, std::span<Complex> out);

SpectralState tkdv_rhs(const SpectralState& state, const TkdvParams& params);

/// Always zero: u_0 is not represented.
double momentum(const SpectralState& state);

/// E = 2 pi sum_{k=1..L} |u_k|^2.
double energy(const SpectralState& state);

/// Truncated Hamiltonian C3 H3 - C2 H2. Throws std::logic_error if the cubic sum
/// picks up an imaginary part above round-off, which indicates broken symmetry.
double hamiltonian(const SpectralState& state, const TkdvParams& params);

/// Samples u(x_j) on x_j = -pi + 2 pi j / n_grid, j = 0..n_grid-1.
std::vector<double> to_physical(const SpectralState& state, std::size_t n_grid);

/// Rescales by a positive factor to unit energy. Throws DomainError on a zero state.
SpectralState normalize(const SpectralState& state);

/// i.i.d. standard normal real and imaginary parts, then normalized.
SpectralState random_initial_state(std::uint64_t seed, std::size_t truncation = kDefaultTruncation);

}  // namespace tkdv

#endif  // TKDV_SPECTRAL_HPP
