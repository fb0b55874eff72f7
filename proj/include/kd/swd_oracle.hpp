#pragma once

#include <array>
#include <cstddef>

#include "kd/multiview.hpp"

namespace kd {

// Independent re-implementation of the project/sort/bin distance for one
// direction, used to cross-check the production path. It enumerates grid
// coordinates explicitly and sorts with its own insertion sort instead of the
// shared bin-plan machinery. Only intended for tiny tensors (N <= 64).
template <typename T>
double brute_force_binned_distance(const DensityTensor<T>& p_s, const DensityTensor<T>& p_t,
                                   const std::array<double, 3>& theta, std::size_t g);

} // namespace kd
