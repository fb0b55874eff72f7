#pragma once

#include <complex>
#include <cstddef>
#include <vector>

#include "kd/spectral.hpp"
#include "kd/tape.hpp"
#include "kd/tensor.hpp"

namespace kd {

enum class Reduction { sum, mean };

template <typename T>
struct FreqAttentionConfig {
    T gamma_fr = T(1);
    // When true the per-frequency weight is treated as a constant during
    // backprop, the way a focal modulation factor usually is.
    bool weight_detached = true;
    Reduction reduction = Reduction::sum;
};

// Per-frequency attention weights w(u,v) >= 1; exactly 1 where student and
// teacher spectra agree at every channel.
template <typename T>
struct WeightMap {
    std::size_t width = 0;
    std::size_t height = 0;
    std::vector<T> weights;

    T at(std::size_t u, std::size_t v) const { return weights[u * height + v]; }
};

// Squared modulus of the difference between two coefficients.
template <typename T>
T complex_sq_distance(std::complex<T> c1, std::complex<T> c2) {
    return std::norm(c1 - c2);
}

// w(u,v) = exp(gamma_fr * mean_c |F_S(c,u,v) - F_T(c,u,v)|^2). In single
// precision the exponent is clamped at 60 (with a one-time warning); in double
// precision a non-finite weight raises OverflowError naming the frequency.
template <typename T>
WeightMap<T> freq_weight(const Spectrum<T>& fs, const Spectrum<T>& ft,
                         const FreqAttentionConfig<T>& cfg);

// Weighted spectral loss between student and teacher features, recorded on the
// tape with its analytic gradient with respect to the student tensor. The
// teacher tensor is a constant. Sum reduction follows the loss as written;
// mean divides by C*W*H. With weight_detached the weights are recomputed from
// the current student every call but treated as constants by the gradient.
template <typename T>
Var<T> freq_loss(Tape<T>& tape, Var<T> a_s, const Tensor<T>& a_t,
                 const FreqAttentionConfig<T>& cfg);

// Same loss with an explicitly supplied weight map, which is a constant by
// construction. freq_loss with weight_detached == true computes the same value
// and gradient as this function fed freq_weight() of the current tensors.
template <typename T>
Var<T> freq_loss_with_weights(Tape<T>& tape, Var<T> a_s, const Tensor<T>& a_t,
                              const WeightMap<T>& weights, Reduction reduction);

// Value-only evaluation (no tape).
template <typename T>
T freq_loss_value(const Tensor<T>& a_s, const Tensor<T>& a_t, const FreqAttentionConfig<T>& cfg);

} // namespace kd
