#pragma once

#include <string>

#include "kd/tensor.hpp"

namespace kd {

// ADT1 binary tensor container: magic "ADT1", little-endian u32 fields
// version=1, C, W, H, then C*W*H little-endian f32 values in channel-major
// row-major order. Round trips are bit-exact for float tensors.
void write_adt1(const Tensor<float>& t, const std::string& path);
Tensor<float> read_adt1(const std::string& path);

} // namespace kd
