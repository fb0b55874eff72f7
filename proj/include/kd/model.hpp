#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "kd/tape.hpp"
#include "kd/tensor.hpp"

namespace kd {

// One backbone stage: 3x3 convolution (zero padding 1), relu, and an optional
// 2x2 average pool.
struct ConvBlockSpec {
    std::size_t out_channels = 8;
    std::size_t stride = 1;
    bool avg_pool = true;
};

// Tiny CNN: a stack of conv blocks, then global average pooling and an affine
// head. The last block's output is the backbone feature both distillers see.
struct ModelSpec {
    std::size_t in_channels = 1;
    std::size_t image_size = 32;
    std::vector<ConvBlockSpec> blocks;
    std::size_t num_classes = 2;

    // two blocks (8 then 16 channels, both pooled): 16x8x8 backbone for 32x32
    static ModelSpec desk_default();

    struct FeatureShape {
        std::size_t channels, width, height;
    };
    FeatureShape backbone_shape() const;

    // parameter tensor order: per block weight then bias, then head weight and
    // bias; conv weights are (out_channels) x (in_channels * 9) matrices
    std::size_t num_param_tensors() const { return 2 * blocks.size() + 2; }
    std::string param_name(std::size_t i) const;

    std::uint64_t spec_hash() const;
};

template <typename T>
struct ModelParams {
    std::vector<Tensor<T>> tensors;

    template <typename U>
    ModelParams<U> cast() const {
        ModelParams<U> out;
        out.tensors.reserve(tensors.size());
        for (const auto& t : tensors) out.tensors.push_back(t.template cast<U>());
        return out;
    }
};

// He-normal conv/head weights, zero biases, from a seeded portable generator.
template <typename T>
ModelParams<T> init_params(const ModelSpec& spec, std::uint64_t seed);

template <typename T>
struct ForwardResult {
    Tensor<T> logits;   // num_classes vector
    Tensor<T> backbone; // last block output, C x W x H
    Tensor<T> pooled;   // global-average-pooled backbone, the penultimate vector
};

// Inference forward pass, no tape.
template <typename T>
ForwardResult<T> forward_infer(const ModelSpec& spec, const ModelParams<T>& params,
                               const Tensor<T>& image);

template <typename T>
struct ForwardVars {
    Var<T> logits;
    Var<T> backbone;
    Var<T> pooled;
};

// Training forward pass for one sample; params must be tape leaves in spec
// order and the image is recorded as a constant.
template <typename T>
ForwardVars<T> forward_train(Tape<T>& tape, const ModelSpec& spec,
                             const std::vector<Var<T>>& params, const Tensor<T>& image);

// Numerically stable softmax cross entropy against an integer label.
template <typename T>
Var<T> cross_entropy(Tape<T>& tape, Var<T> logits, std::size_t label);

} // namespace kd
