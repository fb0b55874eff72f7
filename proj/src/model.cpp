#include "kd/model.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

#include "kd/errors.hpp"
#include "kd/rng.hpp"

namespace kd {

ModelSpec ModelSpec::desk_default() {
    ModelSpec spec;
    spec.in_channels = 1;
    spec.image_size = 32;
    spec.blocks = {{8, 1, true}, {16, 1, true}};
    spec.num_classes = 2;
    return spec;
}

ModelSpec::FeatureShape ModelSpec::backbone_shape() const {
    std::size_t c = in_channels;
    std::size_t s = image_size;
    for (const ConvBlockSpec& b : blocks) {
        c = b.out_channels;
        s = (s - 1) / b.stride + 1;
        if (b.avg_pool) s /= 2;
    }
    return {c, s, s};
}

std::string ModelSpec::param_name(std::size_t i) const {
    if (i < 2 * blocks.size()) {
        return "block" + std::to_string(i / 2) + (i % 2 == 0 ? ".weight" : ".bias");
    }
    return i == 2 * blocks.size() ? "head.weight" : "head.bias";
}

std::uint64_t ModelSpec::spec_hash() const {
    std::string desc = "in=" + std::to_string(in_channels) + ";img=" + std::to_string(image_size) +
                       ";classes=" + std::to_string(num_classes) + ";blocks=";
    for (const ConvBlockSpec& b : blocks) {
        desc += std::to_string(b.out_channels) + ":" + std::to_string(b.stride) + ":" +
                (b.avg_pool ? "1" : "0") + ",";
    }
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const char ch : desc) {
        h ^= static_cast<unsigned char>(ch);
        h *= 0x100000001b3ULL;
    }
    return h;
}

template <typename T>
ModelParams<T> init_params(const ModelSpec& spec, std::uint64_t seed) {
    Rng rng(seed);
    ModelParams<T> params;
    std::size_t c_in = spec.in_channels;
    for (const ConvBlockSpec& b : spec.blocks) {
        const std::size_t fan_in = c_in * 9;
        const double std_dev = std::sqrt(2.0 / static_cast<double>(fan_in));
        Tensor<T> w = Tensor<T>::matrix(b.out_channels, fan_in);
        for (std::size_t i = 0; i < w.size(); ++i) {
            w[i] = static_cast<T>(rng.gaussian() * std_dev);
        }
        params.tensors.push_back(std::move(w));
        params.tensors.push_back(Tensor<T>::vector(b.out_channels));
        c_in = b.out_channels;
    }
    const double head_std = std::sqrt(2.0 / static_cast<double>(c_in));
    Tensor<T> hw = Tensor<T>::matrix(spec.num_classes, c_in);
    for (std::size_t i = 0; i < hw.size(); ++i) {
        hw[i] = static_cast<T>(rng.gaussian() * head_std);
    }
    params.tensors.push_back(std::move(hw));
    params.tensors.push_back(Tensor<T>::vector(spec.num_classes));
    return params;
}

namespace {

// ---- value-level kernels shared by inference and tape nodes ----

template <typename T>
Tensor<T> conv3x3_forward(const Tensor<T>& in, const Tensor<T>& w, const Tensor<T>& b,
                          std::size_t stride) {
    const std::size_t cin = in.channels();
    const std::size_t iw = in.width();
    const std::size_t ih = in.height();
    const std::size_t cout = w.width();
    if (w.height() != cin * 9) {
        throw DimensionError("conv3x3: weight expects " + std::to_string(w.height() / 9) +
                             " input channels, image has " + std::to_string(cin));
    }
    const std::size_t ow = (iw - 1) / stride + 1;
    const std::size_t oh = (ih - 1) / stride + 1;
    Tensor<T> out(cout, ow, oh);
    for (std::size_t o = 0; o < cout; ++o) {
        const T bias = b[o];
        for (std::size_t x = 0; x < ow; ++x) {
            for (std::size_t y = 0; y < oh; ++y) out.at(o, x, y) = bias;
        }
    }
    for (std::size_t o = 0; o < cout; ++o) {
        for (std::size_t ci = 0; ci < cin; ++ci) {
            for (int dx = 0; dx < 3; ++dx) {
                for (int dy = 0; dy < 3; ++dy) {
                    const T coeff = w.at(0, o, ci * 9 + dx * 3 + dy);
                    if (coeff == T(0)) continue;
                    for (std::size_t ox = 0; ox < ow; ++ox) {
                        const long ix = static_cast<long>(ox * stride) + dx - 1;
                        if (ix < 0 || ix >= static_cast<long>(iw)) continue;
                        for (std::size_t oy = 0; oy < oh; ++oy) {
                            const long iy = static_cast<long>(oy * stride) + dy - 1;
                            if (iy < 0 || iy >= static_cast<long>(ih)) continue;
                            out.at(o, ox, oy) +=
                                coeff * in.at(ci, static_cast<std::size_t>(ix),
                                              static_cast<std::size_t>(iy));
                        }
                    }
                }
            }
        }
    }
    return out;
}

template <typename T>
void conv3x3_backward(const Tensor<T>& gout, const Tensor<T>& in, const Tensor<T>& w,
                      std::size_t stride, Tensor<T>* gin, Tensor<T>* gw, Tensor<T>* gb) {
    const std::size_t cin = in.channels();
    const std::size_t iw = in.width();
    const std::size_t ih = in.height();
    const std::size_t cout = gout.channels();
    const std::size_t ow = gout.width();
    const std::size_t oh = gout.height();
    if (gb != nullptr) {
        for (std::size_t o = 0; o < cout; ++o) {
            T acc = T(0);
            for (std::size_t x = 0; x < ow; ++x) {
                for (std::size_t y = 0; y < oh; ++y) acc += gout.at(o, x, y);
            }
            (*gb)[o] += acc;
        }
    }
    for (std::size_t o = 0; o < cout; ++o) {
        for (std::size_t ci = 0; ci < cin; ++ci) {
            for (int dx = 0; dx < 3; ++dx) {
                for (int dy = 0; dy < 3; ++dy) {
                    const std::size_t widx = ci * 9 + dx * 3 + dy;
                    const T coeff = w.at(0, o, widx);
                    T wacc = T(0);
                    for (std::size_t ox = 0; ox < ow; ++ox) {
                        const long ix = static_cast<long>(ox * stride) + dx - 1;
                        if (ix < 0 || ix >= static_cast<long>(iw)) continue;
                        for (std::size_t oy = 0; oy < oh; ++oy) {
                            const long iy = static_cast<long>(oy * stride) + dy - 1;
                            if (iy < 0 || iy >= static_cast<long>(ih)) continue;
                            const T g = gout.at(o, ox, oy);
                            const T a = in.at(ci, static_cast<std::size_t>(ix),
                                              static_cast<std::size_t>(iy));
                            wacc += g * a;
                            if (gin != nullptr) {
                                gin->at(ci, static_cast<std::size_t>(ix),
                                        static_cast<std::size_t>(iy)) += g * coeff;
                            }
                        }
                    }
                    if (gw != nullptr) gw->at(0, o, widx) += wacc;
                }
            }
        }
    }
}

template <typename T>
Tensor<T> avg_pool2x2_forward(const Tensor<T>& in) {
    if (in.width() % 2 != 0 || in.height() % 2 != 0) {
        throw DimensionError("avg_pool2x2: odd spatial size " + in.shape_string());
    }
    Tensor<T> out(in.channels(), in.width() / 2, in.height() / 2);
    for (std::size_t c = 0; c < in.channels(); ++c) {
        for (std::size_t x = 0; x < out.width(); ++x) {
            for (std::size_t y = 0; y < out.height(); ++y) {
                out.at(c, x, y) = (in.at(c, 2 * x, 2 * y) + in.at(c, 2 * x + 1, 2 * y) +
                                   in.at(c, 2 * x, 2 * y + 1) + in.at(c, 2 * x + 1, 2 * y + 1)) /
                                  T(4);
            }
        }
    }
    return out;
}

template <typename T>
Tensor<T> global_avg_pool_forward(const Tensor<T>& in) {
    Tensor<T> out = Tensor<T>::vector(in.channels());
    const T inv = T(1) / static_cast<T>(in.width() * in.height());
    for (std::size_t c = 0; c < in.channels(); ++c) {
        T acc = T(0);
        for (std::size_t x = 0; x < in.width(); ++x) {
            for (std::size_t y = 0; y < in.height(); ++y) acc += in.at(c, x, y);
        }
        out[c] = acc * inv;
    }
    return out;
}

template <typename T>
Tensor<T> affine_forward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b) {
    const std::size_t rows = w.width();
    const std::size_t cols = w.height();
    if (x.size() != cols) {
        throw DimensionError("affine: input size " + std::to_string(x.size()) +
                             " does not match weight columns " + std::to_string(cols));
    }
    Tensor<T> out = Tensor<T>::vector(rows);
    for (std::size_t r = 0; r < rows; ++r) {
        T acc = b[r];
        for (std::size_t c = 0; c < cols; ++c) acc += w.at(0, r, c) * x[c];
        out[r] = acc;
    }
    return out;
}

// ---- tape wrappers ----

template <typename T>
Var<T> conv3x3(Tape<T>& tape, Var<T> in, Var<T> w, Var<T> b, std::size_t stride) {
    Tensor<T> out = conv3x3_forward(tape.value(in), tape.value(w), tape.value(b), stride);
    return tape.record(std::move(out), {in.index, w.index, b.index},
                       [ii = in.index, wi = w.index, bi = b.index, stride](Tape<T>& tp, int self) {
                           const Tensor<T>& g = tp.grad_at(self);
                           conv3x3_backward(g, tp.value_at(ii), tp.value_at(wi), stride,
                                            tp.needs_grad_at(ii) ? &tp.grad_mut(ii) : nullptr,
                                            tp.needs_grad_at(wi) ? &tp.grad_mut(wi) : nullptr,
                                            tp.needs_grad_at(bi) ? &tp.grad_mut(bi) : nullptr);
                       });
}

template <typename T>
Var<T> avg_pool2x2(Tape<T>& tape, Var<T> in) {
    Tensor<T> out = avg_pool2x2_forward(tape.value(in));
    return tape.record(std::move(out), {in.index}, [ii = in.index](Tape<T>& tp, int self) {
        const Tensor<T>& g = tp.grad_at(self);
        Tensor<T>& gi = tp.grad_mut(ii);
        for (std::size_t c = 0; c < g.channels(); ++c) {
            for (std::size_t x = 0; x < g.width(); ++x) {
                for (std::size_t y = 0; y < g.height(); ++y) {
                    const T q = g.at(c, x, y) / T(4);
                    gi.at(c, 2 * x, 2 * y) += q;
                    gi.at(c, 2 * x + 1, 2 * y) += q;
                    gi.at(c, 2 * x, 2 * y + 1) += q;
                    gi.at(c, 2 * x + 1, 2 * y + 1) += q;
                }
            }
        }
    });
}

template <typename T>
Var<T> global_avg_pool(Tape<T>& tape, Var<T> in) {
    Tensor<T> out = global_avg_pool_forward(tape.value(in));
    return tape.record(std::move(out), {in.index}, [ii = in.index](Tape<T>& tp, int self) {
        const Tensor<T>& g = tp.grad_at(self);
        Tensor<T>& gi = tp.grad_mut(ii);
        const T inv = T(1) / static_cast<T>(gi.width() * gi.height());
        for (std::size_t c = 0; c < gi.channels(); ++c) {
            const T q = g[c] * inv;
            for (std::size_t x = 0; x < gi.width(); ++x) {
                for (std::size_t y = 0; y < gi.height(); ++y) gi.at(c, x, y) += q;
            }
        }
    });
}

template <typename T>
Var<T> affine(Tape<T>& tape, Var<T> x, Var<T> w, Var<T> b) {
    Tensor<T> out = affine_forward(tape.value(x), tape.value(w), tape.value(b));
    return tape.record(
        std::move(out), {x.index, w.index, b.index},
        [xi = x.index, wi = w.index, bi = b.index](Tape<T>& tp, int self) {
            const Tensor<T>& g = tp.grad_at(self);
            const Tensor<T>& xv = tp.value_at(xi);
            const Tensor<T>& wv = tp.value_at(wi);
            const std::size_t rows = wv.width();
            const std::size_t cols = wv.height();
            if (tp.needs_grad_at(xi)) {
                Tensor<T>& gx = tp.grad_mut(xi);
                for (std::size_t c = 0; c < cols; ++c) {
                    T acc = T(0);
                    for (std::size_t r = 0; r < rows; ++r) acc += g[r] * wv.at(0, r, c);
                    gx[c] += acc;
                }
            }
            if (tp.needs_grad_at(wi)) {
                Tensor<T>& gw = tp.grad_mut(wi);
                for (std::size_t r = 0; r < rows; ++r) {
                    for (std::size_t c = 0; c < cols; ++c) gw.at(0, r, c) += g[r] * xv[c];
                }
            }
            if (tp.needs_grad_at(bi)) {
                Tensor<T>& gb = tp.grad_mut(bi);
                for (std::size_t r = 0; r < rows; ++r) gb[r] += g[r];
            }
        });
}

template <typename T>
void check_param_count(const ModelSpec& spec, std::size_t got) {
    if (got != spec.num_param_tensors()) {
        throw ContractError("model: expected " + std::to_string(spec.num_param_tensors()) +
                            " parameter tensors, got " + std::to_string(got));
    }
}

template <typename T>
void check_image(const ModelSpec& spec, const Tensor<T>& image) {
    if (image.channels() != spec.in_channels || image.width() != spec.image_size ||
        image.height() != spec.image_size) {
        throw DimensionError("model: image shape " + image.shape_string() + " does not match " +
                             Tensor<T>::shape_string(spec.in_channels, spec.image_size,
                                                     spec.image_size));
    }
}

} // namespace

template <typename T>
ForwardResult<T> forward_infer(const ModelSpec& spec, const ModelParams<T>& params,
                               const Tensor<T>& image) {
    check_param_count<T>(spec, params.tensors.size());
    check_image(spec, image);
    Tensor<T> x = image;
    for (std::size_t b = 0; b < spec.blocks.size(); ++b) {
        Tensor<T> z = conv3x3_forward(x, params.tensors[2 * b], params.tensors[2 * b + 1],
                                      spec.blocks[b].stride);
        for (std::size_t i = 0; i < z.size(); ++i) z[i] = z[i] > T(0) ? z[i] : T(0);
        x = spec.blocks[b].avg_pool ? avg_pool2x2_forward(z) : std::move(z);
    }
    ForwardResult<T> result;
    result.backbone = x;
    result.pooled = global_avg_pool_forward(x);
    result.logits = affine_forward(result.pooled, params.tensors[2 * spec.blocks.size()],
                                   params.tensors[2 * spec.blocks.size() + 1]);
    return result;
}

template <typename T>
ForwardVars<T> forward_train(Tape<T>& tape, const ModelSpec& spec,
                             const std::vector<Var<T>>& params, const Tensor<T>& image) {
    check_param_count<T>(spec, params.size());
    check_image(spec, image);
    Var<T> x = tape.constant(image);
    for (std::size_t b = 0; b < spec.blocks.size(); ++b) {
        Var<T> z = relu(conv3x3(tape, x, params[2 * b], params[2 * b + 1], spec.blocks[b].stride));
        x = spec.blocks[b].avg_pool ? avg_pool2x2(tape, z) : z;
    }
    ForwardVars<T> result;
    result.backbone = x;
    result.pooled = global_avg_pool(tape, x);
    result.logits = affine(tape, result.pooled, params[2 * spec.blocks.size()],
                           params[2 * spec.blocks.size() + 1]);
    return result;
}

template <typename T>
Var<T> cross_entropy(Tape<T>& tape, Var<T> logits, std::size_t label) {
    const Tensor<T>& l = tape.value(logits);
    const std::size_t n = l.size();
    if (label >= n) {
        throw DataError("cross_entropy: label " + std::to_string(label) + " outside [0, " +
                        std::to_string(n) + ")");
    }
    T max_l = l[0];
    for (std::size_t i = 1; i < n; ++i) max_l = std::max(max_l, l[i]);
    T sum_exp = T(0);
    for (std::size_t i = 0; i < n; ++i) sum_exp += std::exp(l[i] - max_l);
    const T lse = max_l + std::log(sum_exp);
    const T loss = lse - l[label];
    auto softmax = std::make_shared<std::vector<T>>(n);
    for (std::size_t i = 0; i < n; ++i) (*softmax)[i] = std::exp(l[i] - lse);
    return tape.record(Tensor<T>::scalar(loss), {logits.index},
                       [li = logits.index, label, softmax](Tape<T>& tp, int self) {
                           const T g = tp.grad_at(self)[0];
                           Tensor<T>& gl = tp.grad_mut(li);
                           for (std::size_t i = 0; i < softmax->size(); ++i) {
                               const T onehot = i == label ? T(1) : T(0);
                               gl[i] += g * ((*softmax)[i] - onehot);
                           }
                       });
}

template ModelParams<float> init_params<float>(const ModelSpec&, std::uint64_t);
template ModelParams<double> init_params<double>(const ModelSpec&, std::uint64_t);
template ForwardResult<float> forward_infer<float>(const ModelSpec&, const ModelParams<float>&,
                                                   const Tensor<float>&);
template ForwardResult<double> forward_infer<double>(const ModelSpec&, const ModelParams<double>&,
                                                     const Tensor<double>&);
template ForwardVars<float> forward_train<float>(Tape<float>&, const ModelSpec&,
                                                 const std::vector<Var<float>>&,
                                                 const Tensor<float>&);
template ForwardVars<double> forward_train<double>(Tape<double>&, const ModelSpec&,
                                                   const std::vector<Var<double>>&,
                                                   const Tensor<double>&);
template Var<float> cross_entropy<float>(Tape<float>&, Var<float>, std::size_t);
template Var<double> cross_entropy<double>(Tape<double>&, Var<double>, std::size_t);

} // namespace kd
