#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <vector>

#include "kd/tape.hpp"
#include "kd/tensor.hpp"

namespace kd {

// Discrete measure over the feature grid: nonnegative masses at integer
// coordinates (c, x, y), summing to 1.
template <typename T>
struct DensityTensor {
    Tensor<T> masses;
};

// K directions on the unit sphere in R^3 plus the seed that generated them.
struct ProjectionSet {
    std::size_t k = 0;
    std::vector<std::array<double, 3>> directions;
    std::uint64_t seed = 0;
};

// g-bin mass histogram of a projected, sorted density tensor.
template <typename T>
struct AttentionVector {
    std::size_t groups = 0;
    std::vector<T> bin_mass;
};

template <typename T>
struct MultiViewConfig {
    std::size_t k = 64;
    std::size_t g = 0; // 0 resolves to half the channel count at the point of use
    T gamma_mv = T(100);
    T eta_mv = T(50);
    T margin = T(0.012);
    std::uint64_t seed = 0;
};

inline std::size_t resolve_groups(std::size_t g, std::size_t channels) {
    if (g != 0) return g;
    return channels >= 2 ? channels / 2 : 1;
}

// The sort permutation of grid elements along a direction depends only on the
// tensor shape and theta, never on the masses, so it is computed once and
// reused: grid element i at coordinates (c_i, x_i, y_i) has projected position
// <theta, (c_i, x_i, y_i)>; elements are ordered by position ascending with
// ties broken by channel-major linear index, then split into g contiguous
// groups of near-equal count (the first N mod g groups take one extra).
struct BinPlan {
    std::vector<std::uint32_t> order;   // grid indices in sorted projection order
    std::vector<std::uint32_t> offsets; // g + 1 group boundaries into order
};

BinPlan make_bin_plan(std::size_t channels, std::size_t width, std::size_t height,
                      const std::array<double, 3>& theta, std::size_t g);

// Projections plus the bin plans for one tensor shape; shared across the three
// distance terms of one distillation step.
struct MvPlan {
    ProjectionSet proj;
    std::size_t channels = 0;
    std::size_t width = 0;
    std::size_t height = 0;
    std::size_t groups = 0;
    std::vector<BinPlan> plans;
};

MvPlan make_mv_plan(std::size_t channels, std::size_t width, std::size_t height, std::size_t k,
                    std::size_t g, std::uint64_t seed);

// P = A^2 / ||A||_F^2. The all-zero tensor has no density and is rejected.
template <typename T>
DensityTensor<T> normalize_density(const Tensor<T>& a);

// Tape version; the gradient flows through both the numerator and the
// normalizing sum.
template <typename T>
Var<T> normalize_density(Tape<T>& tape, Var<T> a);

// K directions sampled uniformly on the sphere by normalizing seeded
// standard-normal draws (mt19937_64 + explicit Box-Muller, so the stream is
// portable); zero-norm draws are rejected and resampled.
ProjectionSet sample_projections(std::size_t k, std::uint64_t seed);

// Project, sort, and bin one density tensor along one direction.
template <typename T>
AttentionVector<T> project_sort_bin(const DensityTensor<T>& p, const std::array<double, 3>& theta,
                                    std::size_t g);

// SWD(P_S, P_T) = sum_k sum_j (v_S[j] - v_T[j])^2 over the projection set.
template <typename T>
T swd(const DensityTensor<T>& p_s, const DensityTensor<T>& p_t, const ProjectionSet& proj,
      std::size_t g);

template <typename T>
T swd_with_plan(const DensityTensor<T>& p_s, const DensityTensor<T>& p_t, const MvPlan& plan);

// Tape version, differentiable with respect to the student density masses.
template <typename T>
Var<T> swd(Tape<T>& tape, Var<T> p_s, const DensityTensor<T>& p_t,
           std::shared_ptr<const MvPlan> plan);

// L_MV = gamma * SWD(P_S, P_T)
//      + eta * [ SWD(P_S, P_T+) + max(margin - SWD(P_S, P_T-), 0) ].
// One projection set (from cfg.seed, or the supplied plan) is shared by all
// three terms. a_t, a_t_pos, a_t_neg are constants; pos/neg may be null only
// when eta_mv is zero.
template <typename T>
Var<T> mv_loss(Tape<T>& tape, Var<T> a_s, const Tensor<T>& a_t, const Tensor<T>* a_t_pos,
               const Tensor<T>* a_t_neg, const MultiViewConfig<T>& cfg,
               std::shared_ptr<const MvPlan> plan = nullptr);

template <typename T>
T mv_loss_value(const Tensor<T>& a_s, const Tensor<T>& a_t, const Tensor<T>* a_t_pos,
                const Tensor<T>* a_t_neg, const MultiViewConfig<T>& cfg);

} // namespace kd
