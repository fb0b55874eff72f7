#include "kd/freq_attention.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <memory>

#include "kd/errors.hpp"

namespace kd {

namespace {

constexpr double kFloatExponentClamp = 60.0;

void warn_clamped_once() {
    static std::atomic<bool> warned{false};
    if (!warned.exchange(true)) {
        std::fprintf(stderr, "kd: frequency attention exponent clamped at %.0f\n",
                     kFloatExponentClamp);
    }
}

// Per-frequency sum over channels of |F_S - F_T|^2, accumulated in double.
template <typename T>
std::vector<double> channel_sq_distance_sum(const Spectrum<T>& fs, const Spectrum<T>& ft) {
    if (!fs.same_shape(ft)) {
        throw DimensionError("freq attention: spectrum shape mismatch");
    }
    const std::size_t per_chan = fs.width * fs.height;
    std::vector<double> sum(per_chan, 0.0);
    for (std::size_t c = 0; c < fs.channels; ++c) {
        for (std::size_t i = 0; i < per_chan; ++i) {
            sum[i] += std::norm(std::complex<double>(fs.coeff[c * per_chan + i]) -
                                std::complex<double>(ft.coeff[c * per_chan + i]));
        }
    }
    return sum;
}

template <typename T>
double weight_from_sum(double dist_sum, double gamma, double inv_channels, std::size_t u,
                       std::size_t v) {
    double arg = gamma * inv_channels * dist_sum;
    if constexpr (std::is_same_v<T, float>) {
        if (arg > kFloatExponentClamp) {
            arg = kFloatExponentClamp;
            warn_clamped_once();
        }
    }
    const double w = std::exp(arg);
    if (!std::isfinite(w)) {
        throw OverflowError("freq attention: weight overflow at (u=" + std::to_string(u) +
                            ", v=" + std::to_string(v) + ")");
    }
    return w;
}

} // namespace

template <typename T>
WeightMap<T> freq_weight(const Spectrum<T>& fs, const Spectrum<T>& ft,
                         const FreqAttentionConfig<T>& cfg) {
    const std::vector<double> dist = channel_sq_distance_sum(fs, ft);
    const double inv_c = 1.0 / static_cast<double>(fs.channels);
    WeightMap<T> map;
    map.width = fs.width;
    map.height = fs.height;
    map.weights.resize(dist.size());
    for (std::size_t u = 0; u < fs.width; ++u) {
        for (std::size_t v = 0; v < fs.height; ++v) {
            const std::size_t i = u * fs.height + v;
            map.weights[i] = static_cast<T>(
                weight_from_sum<T>(dist[i], static_cast<double>(cfg.gamma_fr), inv_c, u, v));
        }
    }
    return map;
}

namespace {

// Shared forward/gradient evaluation. The gradient of the loss with respect to
// the student feature tensor is the real adjoint DFT of m(u,v) * 2 * (F_S-F_T),
// where m = w when the weight is a constant (detached or externally supplied)
// and m = w * (1 + gamma/C * sum_c d) when the weight participates in
// differentiation.
template <typename T>
T freq_loss_eval(const Tensor<T>& a_s, const Tensor<T>& a_t, const FreqAttentionConfig<T>& cfg,
                 const WeightMap<T>* external_weights, Tensor<T>* grad_out) {
    if (!a_s.same_shape(a_t)) {
        throw DimensionError("freq_loss: shape mismatch " + a_s.shape_string() + " vs " +
                             a_t.shape_string());
    }
    const Spectrum<T> fs = dft2_per_channel(a_s);
    const Spectrum<T> ft = dft2_per_channel(a_t);
    const std::vector<double> dist = channel_sq_distance_sum(fs, ft);
    const double gamma = static_cast<double>(cfg.gamma_fr);
    const double inv_c = 1.0 / static_cast<double>(fs.channels);
    const std::size_t per_chan = fs.width * fs.height;
    if (external_weights != nullptr && (external_weights->width != fs.width ||
                                        external_weights->height != fs.height)) {
        throw DimensionError("freq_loss: weight map shape mismatch");
    }

    double loss = 0.0;
    std::vector<double> multiplier(per_chan);
    for (std::size_t u = 0; u < fs.width; ++u) {
        for (std::size_t v = 0; v < fs.height; ++v) {
            const std::size_t i = u * fs.height + v;
            double w;
            if (external_weights != nullptr) {
                w = static_cast<double>(external_weights->weights[i]);
                multiplier[i] = w;
            } else {
                w = weight_from_sum<T>(dist[i], gamma, inv_c, u, v);
                multiplier[i] = cfg.weight_detached ? w : w * (1.0 + gamma * inv_c * dist[i]);
            }
            loss += w * dist[i];
        }
    }
    const double reduction_scale =
        cfg.reduction == Reduction::mean ? 1.0 / static_cast<double>(a_s.size()) : 1.0;
    loss *= reduction_scale;

    if (grad_out != nullptr) {
        Spectrum<T> g;
        g.channels = fs.channels;
        g.width = fs.width;
        g.height = fs.height;
        g.coeff.resize(fs.coeff.size());
        for (std::size_t c = 0; c < fs.channels; ++c) {
            for (std::size_t i = 0; i < per_chan; ++i) {
                const std::complex<double> delta =
                    std::complex<double>(fs.coeff[c * per_chan + i]) -
                    std::complex<double>(ft.coeff[c * per_chan + i]);
                g.coeff[c * per_chan + i] = std::complex<T>(
                    delta * (2.0 * multiplier[i] * reduction_scale));
            }
        }
        *grad_out = dft2_adjoint_real(g);
    }
    return static_cast<T>(loss);
}

} // namespace

namespace {

template <typename T>
Var<T> record_precomputed_grad(Tape<T>& tape, Var<T> a_s, T loss,
                               std::shared_ptr<Tensor<T>> grad) {
    return tape.record(Tensor<T>::scalar(loss), {a_s.index},
                       [ai = a_s.index, grad](Tape<T>& tp, int self) {
                           const T g = tp.grad_at(self)[0];
                           Tensor<T>& ga = tp.grad_mut(ai);
                           for (std::size_t i = 0; i < ga.size(); ++i) {
                               ga[i] += (*grad)[i] * g;
                           }
                       });
}

} // namespace

template <typename T>
Var<T> freq_loss(Tape<T>& tape, Var<T> a_s, const Tensor<T>& a_t,
                 const FreqAttentionConfig<T>& cfg) {
    if (a_s.tape != &tape) throw ContractError("freq_loss: student var from another tape");
    auto grad = std::make_shared<Tensor<T>>();
    const T loss = freq_loss_eval(tape.value(a_s), a_t, cfg, static_cast<const WeightMap<T>*>(nullptr), grad.get());
    return record_precomputed_grad(tape, a_s, loss, std::move(grad));
}

template <typename T>
Var<T> freq_loss_with_weights(Tape<T>& tape, Var<T> a_s, const Tensor<T>& a_t,
                              const WeightMap<T>& weights, Reduction reduction) {
    if (a_s.tape != &tape) throw ContractError("freq_loss: student var from another tape");
    FreqAttentionConfig<T> cfg;
    cfg.reduction = reduction;
    auto grad = std::make_shared<Tensor<T>>();
    const T loss = freq_loss_eval(tape.value(a_s), a_t, cfg, &weights, grad.get());
    return record_precomputed_grad(tape, a_s, loss, std::move(grad));
}

template <typename T>
T freq_loss_value(const Tensor<T>& a_s, const Tensor<T>& a_t,
                  const FreqAttentionConfig<T>& cfg) {
    return freq_loss_eval(a_s, a_t, cfg, static_cast<const WeightMap<T>*>(nullptr), static_cast<Tensor<T>*>(nullptr));
}

template WeightMap<float> freq_weight<float>(const Spectrum<float>&, const Spectrum<float>&,
                                             const FreqAttentionConfig<float>&);
template WeightMap<double> freq_weight<double>(const Spectrum<double>&, const Spectrum<double>&,
                                               const FreqAttentionConfig<double>&);
template Var<float> freq_loss<float>(Tape<float>&, Var<float>, const Tensor<float>&,
                                     const FreqAttentionConfig<float>&);
template Var<double> freq_loss<double>(Tape<double>&, Var<double>, const Tensor<double>&,
                                       const FreqAttentionConfig<double>&);
template Var<float> freq_loss_with_weights<float>(Tape<float>&, Var<float>, const Tensor<float>&,
                                                  const WeightMap<float>&, Reduction);
template Var<double> freq_loss_with_weights<double>(Tape<double>&, Var<double>,
                                                    const Tensor<double>&,
                                                    const WeightMap<double>&, Reduction);
template float freq_loss_value<float>(const Tensor<float>&, const Tensor<float>&,
                                      const FreqAttentionConfig<float>&);
template double freq_loss_value<double>(const Tensor<double>&, const Tensor<double>&,
                                        const FreqAttentionConfig<double>&);

} // namespace kd
