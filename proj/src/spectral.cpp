#include "tkdv/spectral.hpp"

#include "tkdv/random.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace tkdv {

namespace {
constexpr double kPi = std::numbers::pi;
constexpr double kImagResidueTolerance = 1e-10;
}  // namespace

SpectralState::SpectralState(std::size_t truncation) : modes_(truncation, Complex{0.0, 0.0}) {
    if (truncation == 0) throw std::invalid_argument("truncation must be positive");
}

SpectralState::SpectralState(std::vector<Complex> modes) : modes_(std::move(modes)) {
    if (modes_.empty()) throw std::invalid_argument("truncation must be positive");
}

Complex SpectralState::full(long k) const {
    if (k == 0) return {0.0, 0.0};
    const auto index = static_cast<std::size_t>(k > 0 ? k : -k);
    if (index > modes_.size()) throw std::out_of_range("mode index beyond truncation");
    return k > 0 ? modes_[index - 1] : std::conj(modes_[index - 1]);
}

bool SpectralState::is_finite() const {
    return std::all_of(modes_.begin(), modes_.end(),
                       [](Complex z) { return std::isfinite(z.real()) && std::isfinite(z.imag()); });
}

std::vector<double> embed(const SpectralState& state) {
    const auto view = as_real(state.modes());
    return {view.begin(), view.end()};
}

SpectralState unembed(std::span<const double> values) {
    if (values.empty() || values.size() % 2 != 0)
        throw std::invalid_argument("real embedding must have positive even length");
    const auto view = as_complex(values);
    return SpectralState(std::vector<Complex>(view.begin(), view.end()));
}

TkdvParams coefficients_from_depth(double depth_ratio, const DepthConstants& consts) {
    if (!(depth_ratio > 0.0)) throw DomainError("depth ratio must be positive");
    const double root = std::sqrt(depth_ratio);
    return {consts.c2_base * root, consts.c3_base / (depth_ratio * root)};
}

double depth_from_c2(double c2_coeff, const DepthConstants& consts) {
    if (!(c2_coeff > 0.0)) throw DomainError("C2 must be positive to infer a depth ratio");
    const double ratio = c2_coeff / consts.c2_base;
    return ratio * ratio;
}

// With u_0 = 0 and u_{-j} = conj(u_j), the convolution over |m|, |k-m| <= L splits into
//   S_k = sum_{m=1}^{k-1} u_m u_{k-m} + 2 sum_{j=1}^{L-k} conj(u_j) u_{j+k}.
void tkdv_rhs(std::span<const Complex> modes, const TkdvParams& params, std::span<Complex> out) {
    const std::size_t n = modes.size();
    const double* u = reinterpret_cast<const double*>(modes.data());
    for (std::size_t k = 1; k <= n; ++k) {
        double sr = 0.0;
        double si = 0.0;
        // Both indices positive; pairs (m, k-m) are counted twice except the middle.
        for (std::size_t m = 1; 2 * m < k; ++m) {
            const double ar = u[2 * (m - 1)], ai = u[2 * (m - 1) + 1];
            const double br = u[2 * (k - m - 1)], bi = u[2 * (k - m - 1) + 1];
            sr += 2.0 * (ar * br - ai * bi);
            si += 2.0 * (ar * bi + ai * br);
        }
        if (k % 2 == 0) {
            const double ar = u[2 * (k / 2 - 1)], ai = u[2 * (k / 2 - 1) + 1];
            sr += ar * ar - ai * ai;
            si += 2.0 * ar * ai;
        }
        double cr = 0.0;
        double ci = 0.0;
        for (std::size_t j = 1; j + k <= n; ++j) {
            const double ar = u[2 * (j - 1)], ai = -u[2 * (j - 1) + 1];
            const double br = u[2 * (j + k - 1)], bi = u[2 * (j + k - 1) + 1];
            cr += ar * br - ai * bi;
            ci += ar * bi + ai * br;
        }
        sr += 2.0 * cr;
        si += 2.0 * ci;

        const double kd = static_cast<double>(k);
        const double half_k_c3 = 0.5 * kd * params.c3_coeff;
        const double disp = params.c2_coeff * kd * kd * kd;
        const double ur = u[2 * (k - 1)], ui = u[2 * (k - 1) + 1];
        // -C3 (i k / 2) S_k + i C2 k^3 u_k
        out[k - 1] = Complex{half_k_c3 * si - disp * ui, -half_k_c3 * sr + disp * ur};
    }
}

SpectralState tkdv_rhs(const SpectralState& state, const TkdvParams& params) {
    SpectralState out(state.truncation());
    tkdv_rhs(state.modes(), params, out.modes());
    return out;
}

double momentum(const SpectralState&) { return 0.0; }

double energy(const SpectralState& state) {
    double sum = 0.0;
    for (const Complex z : state.modes()) sum += std::norm(z);
    return 2.0 * kPi * sum;
}

double hamiltonian(const SpectralState& state, const TkdvParams& params) {
    const long n = static_cast<long>(state.truncation());
    std::vector<Complex> spectrum(static_cast<std::size_t>(2 * n + 1));
    for (long k = -n; k <= n; ++k) spectrum[static_cast<std::size_t>(k + n)] = state.full(k);
    const auto at = [&](long k) { return spectrum[static_cast<std::size_t>(k + n)]; };

    Complex cubic{0.0, 0.0};
    for (long m = -n; m <= n; ++m) {
        for (long l = -n; l <= n; ++l) {
            const long r = -m - l;
            if (r < -n || r > n) continue;
            cubic += at(m) * at(l) * at(r);
        }
    }
    cubic *= kPi / 3.0;
    if (std::abs(cubic.imag()) >= kImagResidueTolerance * (1.0 + std::abs(cubic.real())))
        throw std::logic_error("cubic Hamiltonian term is not real; conjugate symmetry broken");

    double quadratic = 0.0;
    for (std::size_t k = 1; k <= state.truncation(); ++k) {
        const double kd = static_cast<double>(k);
        quadratic += kd * kd * std::norm(state.mode(k));
    }
    quadratic *= 2.0 * kPi;
    return params.c3_coeff * cubic.real() - params.c2_coeff * quadratic;
}

std::vector<double> to_physical(const SpectralState& state, std::size_t n_grid) {
    if (n_grid < 2 * state.truncation() + 1)
        throw std::invalid_argument("grid too coarse for the truncation (need n_grid >= 2L+1)");
    std::vector<double> field(n_grid, 0.0);
    for (std::size_t j = 0; j < n_grid; ++j) {
        const double x = -kPi + 2.0 * kPi * static_cast<double>(j) / static_cast<double>(n_grid);
        double value = 0.0;
        for (std::size_t k = 1; k <= state.truncation(); ++k)
            value += (state.mode(k) * std::polar(1.0, static_cast<double>(k) * x)).real();
        field[j] = 2.0 * value;
    }
    return field;
}

SpectralState normalize(const SpectralState& state) {
    const double e = energy(state);
    if (!(e > 0.0)) throw DomainError("cannot normalize a zero state");
    const double scale = 1.0 / std::sqrt(e);
    SpectralState out = state;
    for (Complex& z : out.modes()) z *= scale;
    return out;
}

SpectralState random_initial_state(std::uint64_t seed, std::size_t truncation) {
    SpectralState state(truncation);
    CounterRng rng(seed, Stream::initial_state, 0);
    for (Complex& z : state.modes()) {
        const double re = rng.normal();
        const double im = rng.normal();
        z = {re, im};
    }
    return normalize(state);
}

}  // namespace tkdv
