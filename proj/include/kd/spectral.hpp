#pragma once

#include <complex>
#include <cstddef>
#include <vector>

#include "kd/tensor.hpp"

namespace kd {

// Per-channel 2-D DFT coefficients, same layout as the source tensor:
// coeff index (c * W + u) * H + v. The transform is the unnormalized forward
// DFT F(c,u,v) = sum_x sum_y A(c,x,y) * e^{-i 2 pi (u x / W + v y / H)}, so DC
// sits at (0,0) and the highest frequencies at (W/2, H/2).
template <typename T>
struct Spectrum {
    std::size_t channels = 0;
    std::size_t width = 0;
    std::size_t height = 0;
    std::vector<std::complex<T>> coeff;

    std::complex<T> at(std::size_t c, std::size_t u, std::size_t v) const {
        return coeff[(c * width + u) * height + v];
    }
    std::complex<T>& at(std::size_t c, std::size_t u, std::size_t v) {
        return coeff[(c * width + u) * height + v];
    }
    bool same_shape(const Spectrum& o) const {
        return channels == o.channels && width == o.width && height == o.height;
    }
};

// Row-column FFT when both W and H are powers of two, naive evaluation
// otherwise. Cost on the fast path is O(W H (log W + log H)) per channel.
template <typename T>
Spectrum<T> dft2_per_channel(const Tensor<T>& a);

// Direct double-sum evaluation of the same transform; the correctness oracle
// for the fast path.
template <typename T>
Spectrum<T> naive_dft2(const Tensor<T>& a);

// Unnormalized adjoint transform with the opposite exponent sign,
// B(c,x,y) = Re sum_u sum_v G(c,u,v) * e^{+i 2 pi (u x / W + v y / H)}.
// This is the gradient pull-back of dft2_per_channel for real inputs.
template <typename T>
Tensor<T> dft2_adjoint_real(const Spectrum<T>& g);

// Per-frequency mean over channels of | |F_raw| - |F_degraded| |, scaled so the
// maximum is 1 (left identically zero when the inputs agree). Layout is the
// raw DFT layout: DC at the corner, highest frequencies near the center.
template <typename T>
struct SpectrumDiffMap {
    std::size_t width = 0;
    std::size_t height = 0;
    std::vector<T> values;

    T at(std::size_t u, std::size_t v) const { return values[u * height + v]; }
};

template <typename T>
SpectrumDiffMap<T> spectrum_diff(const Tensor<T>& raw, const Tensor<T>& degraded);

// Folded frequency along one axis: min(u, W - u), in [0, W/2].
inline std::size_t folded_frequency(std::size_t u, std::size_t n) {
    return u < n - u ? u : n - u;
}

// Band predicates used by the spectral-premise checks. The low band is the
// 3x3 wrapped corner around DC (folded u and v both <= 1); the high band is
// its mirror at the extreme frequencies, the 3x3 block around the map center
// (W/2, H/2) where the highest-frequency components sit.
bool in_low_corner_band(std::size_t u, std::size_t v, std::size_t w, std::size_t h);
bool in_high_band(std::size_t u, std::size_t v, std::size_t w, std::size_t h);

// Mean of map values over one of the two bands.
template <typename T>
T band_mean(const SpectrumDiffMap<T>& map, bool high_band);

// Fraction of total |F|^2 spectral energy outside the lowest-quarter band
// (folded u < W/8 and folded v < H/8 counts as low).
template <typename T>
T high_frequency_energy_fraction(const Tensor<T>& a);

} // namespace kd
