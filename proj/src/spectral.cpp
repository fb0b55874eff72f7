#include "kd/spectral.hpp"

#include <algorithm>
#include <cmath>

#include "kd/errors.hpp"

namespace kd {

namespace {

constexpr double kTau = 6.283185307179586476925286766559;

bool is_pow2(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

// Iterative radix-2 FFT (decimation in time). Twiddles are evaluated in double
// regardless of T so the float path keeps close to reference accuracy.
template <typename T>
void fft_pow2(std::complex<T>* buf, std::size_t n) {
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(buf[i], buf[j]);
    }
    for (std::size_t len = 2; len <= n; len <<= 1) {
        const double ang = -kTau / static_cast<double>(len);
        const std::size_t half = len / 2;
        for (std::size_t i = 0; i < n; i += len) {
            for (std::size_t k = 0; k < half; ++k) {
                const std::complex<double> w(std::cos(ang * static_cast<double>(k)),
                                             std::sin(ang * static_cast<double>(k)));
                const std::complex<double> u(buf[i + k]);
                const std::complex<double> v = std::complex<double>(buf[i + k + half]) * w;
                buf[i + k] = std::complex<T>(u + v);
                buf[i + k + half] = std::complex<T>(u - v);
            }
        }
    }
}

// Row-column transform of one channel held as W rows of H contiguous values.
template <typename T>
void fft2_channel(std::complex<T>* chan, std::size_t w, std::size_t h) {
    for (std::size_t x = 0; x < w; ++x) fft_pow2(chan + x * h, h);
    std::vector<std::complex<T>> col(w);
    for (std::size_t v = 0; v < h; ++v) {
        for (std::size_t x = 0; x < w; ++x) col[x] = chan[x * h + v];
        fft_pow2(col.data(), w);
        for (std::size_t u = 0; u < w; ++u) chan[u * h + v] = col[u];
    }
}

// Direct double-sum DFT of one complex channel.
template <typename T>
void naive_dft2_channel(const std::complex<T>* in, std::complex<T>* out, std::size_t w,
                        std::size_t h) {
    for (std::size_t u = 0; u < w; ++u) {
        for (std::size_t v = 0; v < h; ++v) {
            std::complex<double> acc(0.0, 0.0);
            for (std::size_t x = 0; x < w; ++x) {
                for (std::size_t y = 0; y < h; ++y) {
                    const double phase =
                        -kTau * (static_cast<double>(u * x) / static_cast<double>(w) +
                                 static_cast<double>(v * y) / static_cast<double>(h));
                    acc += std::complex<double>(in[x * h + y]) *
                           std::complex<double>(std::cos(phase), std::sin(phase));
                }
            }
            out[u * h + v] = std::complex<T>(acc);
        }
    }
}

template <typename T>
void check_nonzero_shape(const Tensor<T>& a) {
    if (a.channels() == 0 || a.width() == 0 || a.height() == 0) {
        throw DimensionError("dft2: zero-sized dimension in shape " + a.shape_string());
    }
}

template <typename T>
Spectrum<T> spectrum_like(const Tensor<T>& a) {
    Spectrum<T> s;
    s.channels = a.channels();
    s.width = a.width();
    s.height = a.height();
    s.coeff.resize(a.size());
    return s;
}

} // namespace

template <typename T>
Spectrum<T> dft2_per_channel(const Tensor<T>& a) {
    check_nonzero_shape(a);
    const std::size_t w = a.width();
    const std::size_t h = a.height();
    Spectrum<T> s = spectrum_like(a);
    for (std::size_t i = 0; i < a.size(); ++i) s.coeff[i] = std::complex<T>(a[i], T(0));
    const std::size_t per_chan = w * h;
    if (is_pow2(w) && is_pow2(h)) {
        for (std::size_t c = 0; c < a.channels(); ++c) {
            fft2_channel(s.coeff.data() + c * per_chan, w, h);
        }
    } else {
        std::vector<std::complex<T>> scratch(per_chan);
        for (std::size_t c = 0; c < a.channels(); ++c) {
            std::complex<T>* chan = s.coeff.data() + c * per_chan;
            std::copy(chan, chan + per_chan, scratch.begin());
            naive_dft2_channel(scratch.data(), chan, w, h);
        }
    }
    return s;
}

template <typename T>
Spectrum<T> naive_dft2(const Tensor<T>& a) {
    check_nonzero_shape(a);
    const std::size_t per_chan = a.width() * a.height();
    Spectrum<T> s = spectrum_like(a);
    std::vector<std::complex<T>> in(per_chan);
    for (std::size_t c = 0; c < a.channels(); ++c) {
        for (std::size_t i = 0; i < per_chan; ++i) {
            in[i] = std::complex<T>(a[c * per_chan + i], T(0));
        }
        naive_dft2_channel(in.data(), s.coeff.data() + c * per_chan, a.width(), a.height());
    }
    return s;
}

template <typename T>
Tensor<T> dft2_adjoint_real(const Spectrum<T>& g) {
    // unnormalized inverse via conj(DFT(conj(.))), real part
    const std::size_t w = g.width;
    const std::size_t h = g.height;
    const std::size_t per_chan = w * h;
    Tensor<T> out(g.channels, w, h);
    std::vector<std::complex<T>> chan(per_chan);
    std::vector<std::complex<T>> scratch(per_chan);
    for (std::size_t c = 0; c < g.channels; ++c) {
        for (std::size_t i = 0; i < per_chan; ++i) chan[i] = std::conj(g.coeff[c * per_chan + i]);
        if (is_pow2(w) && is_pow2(h)) {
            fft2_channel(chan.data(), w, h);
        } else {
            std::copy(chan.begin(), chan.end(), scratch.begin());
            naive_dft2_channel(scratch.data(), chan.data(), w, h);
        }
        for (std::size_t i = 0; i < per_chan; ++i) out[c * per_chan + i] = chan[i].real();
    }
    return out;
}

template <typename T>
SpectrumDiffMap<T> spectrum_diff(const Tensor<T>& raw, const Tensor<T>& degraded) {
    if (!raw.same_shape(degraded)) {
        throw DimensionError("spectrum_diff: shape mismatch " + raw.shape_string() + " vs " +
                             degraded.shape_string());
    }
    const Spectrum<T> fr = dft2_per_channel(raw);
    const Spectrum<T> fd = dft2_per_channel(degraded);
    SpectrumDiffMap<T> map;
    map.width = raw.width();
    map.height = raw.height();
    map.values.assign(map.width * map.height, T(0));
    const T inv_c = T(1) / static_cast<T>(raw.channels());
    for (std::size_t c = 0; c < raw.channels(); ++c) {
        for (std::size_t i = 0; i < map.values.size(); ++i) {
            const T mr = std::abs(fr.coeff[c * map.values.size() + i]);
            const T md = std::abs(fd.coeff[c * map.values.size() + i]);
            map.values[i] += std::abs(mr - md) * inv_c;
        }
    }
    T max_v = T(0);
    for (const T v : map.values) max_v = std::max(max_v, v);
    if (max_v > T(0)) {
        for (T& v : map.values) v /= max_v;
    }
    return map;
}

bool in_low_corner_band(std::size_t u, std::size_t v, std::size_t w, std::size_t h) {
    return folded_frequency(u, w) <= 1 && folded_frequency(v, h) <= 1;
}

bool in_high_band(std::size_t u, std::size_t v, std::size_t w, std::size_t h) {
    return folded_frequency(u, w) + 1 >= w / 2 && folded_frequency(v, h) + 1 >= h / 2;
}

template <typename T>
T band_mean(const SpectrumDiffMap<T>& map, bool high_band) {
    T sum = T(0);
    std::size_t count = 0;
    for (std::size_t u = 0; u < map.width; ++u) {
        for (std::size_t v = 0; v < map.height; ++v) {
            const bool in_band = high_band ? in_high_band(u, v, map.width, map.height)
                                           : in_low_corner_band(u, v, map.width, map.height);
            if (in_band) {
                sum += map.at(u, v);
                ++count;
            }
        }
    }
    return count == 0 ? T(0) : sum / static_cast<T>(count);
}

template <typename T>
T high_frequency_energy_fraction(const Tensor<T>& a) {
    const Spectrum<T> f = dft2_per_channel(a);
    double total = 0.0;
    double low = 0.0;
    for (std::size_t c = 0; c < f.channels; ++c) {
        for (std::size_t u = 0; u < f.width; ++u) {
            for (std::size_t v = 0; v < f.height; ++v) {
                const double e = std::norm(std::complex<double>(f.at(c, u, v)));
                total += e;
                if (folded_frequency(u, f.width) * 8 < f.width &&
                    folded_frequency(v, f.height) * 8 < f.height) {
                    low += e;
                }
            }
        }
    }
    if (total == 0.0) return T(0);
    return static_cast<T>(1.0 - low / total);
}

template Spectrum<float> dft2_per_channel<float>(const Tensor<float>&);
template Spectrum<double> dft2_per_channel<double>(const Tensor<double>&);
template Spectrum<float> naive_dft2<float>(const Tensor<float>&);
template Spectrum<double> naive_dft2<double>(const Tensor<double>&);
template Tensor<float> dft2_adjoint_real<float>(const Spectrum<float>&);
template Tensor<double> dft2_adjoint_real<double>(const Spectrum<double>&);
template SpectrumDiffMap<float> spectrum_diff<float>(const Tensor<float>&, const Tensor<float>&);
template SpectrumDiffMap<double> spectrum_diff<double>(const Tensor<double>&,
                                                       const Tensor<double>&);
template float band_mean<float>(const SpectrumDiffMap<float>&, bool);
template double band_mean<double>(const SpectrumDiffMap<double>&, bool);
template float high_frequency_energy_fraction<float>(const Tensor<float>&);
template double high_frequency_energy_fraction<double>(const Tensor<double>&);

} // namespace kd
