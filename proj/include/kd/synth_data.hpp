#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "kd/rng.hpp"
#include "kd/tensor.hpp"

namespace kd {

// Compression strength of the block codec; the two settings play the roles of
// medium and high compression.
enum class Quality { mild, heavy };

double quality_scale(Quality q); // mild -> 1x quantization table, heavy -> 8x

Quality quality_from_string(const std::string& s);
std::string to_string(Quality q);

struct GenConfig {
    std::size_t image_size = 32; // square, divisible by 8
    std::size_t num_train = 1000; // per class
    std::size_t num_val = 250;
    std::size_t num_test = 250;
    double artifact_amplitude = 0.3;
    std::size_t artifact_period = 2; // pixels; >= 2
    Quality quality = Quality::heavy;
    std::uint64_t seed = 1;
};

// Smooth random field: seeded white noise convolved with a Gaussian kernel
// (sigma = image_size / 8), min-max rescaled to [0, 1].
Tensor<float> generate_real(const GenConfig& cfg, Rng& rng);

// A real image plus a localized alternating-sign checkerboard patch at a
// random position (side = image_size / 4), clamped to [0, 1].
Tensor<float> generate_fake(const GenConfig& cfg, Rng& rng);

// Per 8x8 block: orthonormal DCT-II, quantization by the standard luminance
// table scaled by quant_scale, rounding, inverse DCT, clamp to [0, 1].
// Deterministic; all arithmetic in double.
Tensor<float> degrade(const Tensor<float>& image, double quant_scale);
Tensor<float> degrade(const Tensor<float>& image, Quality q);

enum class Split { train, val, test };

std::string to_string(Split s);
Split split_from_string(const std::string& s);

struct SampleRecord {
    std::uint64_t id = 0;
    int label = 0; // 0 real, 1 fake
    Split split = Split::train;
};

struct DatasetManifest {
    int schema_version = 1;
    GenConfig config;
    std::vector<SampleRecord> samples;
};

// Writes manifest.json, raw/<id>.adt1 and deg/<id>.adt1 under out_dir. Every
// sample derives its own child seed from (seed, id), so contents depend only
// on the config.
DatasetManifest build_dataset(const GenConfig& cfg, const std::string& out_dir);

DatasetManifest read_manifest(const std::string& dir);

struct Sample {
    Tensor<float> raw;
    Tensor<float> degraded;
    int label = 0;
};

struct Dataset {
    std::vector<Sample> train, val, test;
};

Dataset load_dataset(const std::string& dir);

// Same sample stream as build_dataset, kept in memory.
Dataset generate_dataset(const GenConfig& cfg);

} // namespace kd
