#include "kd/swd_oracle.hpp"

#include <vector>

#include "kd/errors.hpp"

namespace kd {

namespace {

struct GridAtom {
    double position;
    std::size_t linear_index;
    double mass_s;
    double mass_t;
};

} // namespace

template <typename T>
double brute_force_binned_distance(const DensityTensor<T>& p_s, const DensityTensor<T>& p_t,
                                   const std::array<double, 3>& theta, std::size_t g) {
    const Tensor<T>& ms = p_s.masses;
    const Tensor<T>& mt = p_t.masses;
    if (!ms.same_shape(mt)) throw DimensionError("brute_force_binned_distance: shape mismatch");
    const std::size_t n = ms.size();
    if (n > 64) throw ContractError("brute_force_binned_distance: N must be <= 64");
    if (g < 1 || g > n) throw ConfigError("brute_force_binned_distance: bad g");

    std::vector<GridAtom> atoms;
    atoms.reserve(n);
    for (std::size_t c = 0; c < ms.channels(); ++c) {
        for (std::size_t x = 0; x < ms.width(); ++x) {
            for (std::size_t y = 0; y < ms.height(); ++y) {
                GridAtom a;
                a.position = theta[0] * static_cast<double>(c) +
                             theta[1] * static_cast<double>(x) +
                             theta[2] * static_cast<double>(y);
                a.linear_index = (c * ms.width() + x) * ms.height() + y;
                a.mass_s = static_cast<double>(ms.at(c, x, y));
                a.mass_t = static_cast<double>(mt.at(c, x, y));
                atoms.push_back(a);
            }
        }
    }

    // insertion sort by (position, linear index)
    for (std::size_t i = 1; i < atoms.size(); ++i) {
        GridAtom key = atoms[i];
        std::size_t j = i;
        while (j > 0 && (atoms[j - 1].position > key.position ||
                         (atoms[j - 1].position == key.position &&
                          atoms[j - 1].linear_index > key.linear_index))) {
            atoms[j] = atoms[j - 1];
            --j;
        }
        atoms[j] = key;
    }

    double distance = 0.0;
    std::size_t cursor = 0;
    for (std::size_t group = 0; group < g; ++group) {
        std::size_t count = n / g;
        if (group < n % g) ++count;
        double vs = 0.0;
        double vt = 0.0;
        for (std::size_t t = 0; t < count; ++t, ++cursor) {
            vs += atoms[cursor].mass_s;
            vt += atoms[cursor].mass_t;
        }
        distance += (vs - vt) * (vs - vt);
    }
    return distance;
}

template double brute_force_binned_distance<float>(const DensityTensor<float>&,
                                                   const DensityTensor<float>&,
                                                   const std::array<double, 3>&, std::size_t);
template double brute_force_binned_distance<double>(const DensityTensor<double>&,
                                                    const DensityTensor<double>&,
                                                    const std::array<double, 3>&, std::size_t);

} // namespace kd
