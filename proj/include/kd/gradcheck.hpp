#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <vector>

#include "kd/rng.hpp"
#include "kd/tape.hpp"

namespace kd {

template <typename T>
struct GradCheckReport {
    T max_relative_error = T(0);
    std::size_t num_parameters_checked = 0;
    T step_size = T(0);
};

namespace detail {

// pick which flat coordinates to probe; max_coords == 0 means all of them
inline std::vector<std::size_t> pick_coords(std::size_t n, std::size_t max_coords,
                                            std::uint64_t seed) {
    std::vector<std::size_t> coords(n);
    for (std::size_t i = 0; i < n; ++i) coords[i] = i;
    if (max_coords == 0 || max_coords >= n) return coords;
    Rng rng(mix_seed(seed, 0x6fdc));
    for (std::size_t i = 0; i < max_coords; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(rng.below(n - i));
        std::swap(coords[i], coords[j]);
    }
    coords.resize(max_coords);
    std::sort(coords.begin(), coords.end());
    return coords;
}

template <typename T>
T relative_error(T g, T g_fd) {
    const T denom = std::max({std::abs(g), std::abs(g_fd), T(1e-12)});
    return std::abs(g - g_fd) / denom;
}

} // namespace detail

// Central-difference check of the tape gradient of a scalar function of one
// tensor. `f` builds the scalar on the given tape from the given input var;
// it is re-invoked on perturbed copies to get the finite-difference gradient.
template <typename T>
GradCheckReport<T> finite_difference_check(
    const std::function<Var<T>(Tape<T>&, Var<T>)>& f, const Tensor<T>& x, T step,
    std::size_t max_coords = 0, std::uint64_t seed = 0) {
    if (!(step > T(0))) throw ContractError("finite_difference_check: step must be > 0");

    const auto eval = [&](const Tensor<T>& point) {
        Tape<T> t;
        Var<T> v = t.leaf(point);
        Var<T> root = f(t, v);
        const T y = t.value(root)[0];
        if (!std::isfinite(static_cast<double>(y))) {
            throw EvalError("finite_difference_check: function value is not finite");
        }
        return y;
    };

    Tape<T> tape;
    Var<T> vx = tape.leaf(x);
    Var<T> root = f(tape, vx);
    if (!std::isfinite(static_cast<double>(tape.value(root)[0]))) {
        throw EvalError("finite_difference_check: function value is not finite");
    }
    tape.backward(root);
    const Tensor<T>& g = tape.grad(vx);

    GradCheckReport<T> report;
    report.step_size = step;
    const std::vector<std::size_t> coords = detail::pick_coords(x.size(), max_coords, seed);
    for (const std::size_t i : coords) {
        Tensor<T> xp = x;
        Tensor<T> xm = x;
        xp[i] += step;
        xm[i] -= step;
        const T g_fd = (eval(xp) - eval(xm)) / (T(2) * step);
        report.max_relative_error =
            std::max(report.max_relative_error, detail::relative_error(g[i], g_fd));
    }
    report.num_parameters_checked = coords.size();
    return report;
}

// Same check for a scalar function of several tensors (model parameters).
// Coordinates are sampled across the union of all entries.
template <typename T>
GradCheckReport<T> finite_difference_check_multi(
    const std::function<Var<T>(Tape<T>&, const std::vector<Var<T>>&)>& f,
    const std::vector<Tensor<T>>& xs, T step, std::size_t max_coords = 0,
    std::uint64_t seed = 0) {
    if (!(step > T(0))) throw ContractError("finite_difference_check: step must be > 0");

    const auto eval = [&](const std::vector<Tensor<T>>& points) {
        Tape<T> t;
        std::vector<Var<T>> vars;
        vars.reserve(points.size());
        for (const Tensor<T>& p : points) vars.push_back(t.leaf(p));
        Var<T> root = f(t, vars);
        const T y = t.value(root)[0];
        if (!std::isfinite(static_cast<double>(y))) {
            throw EvalError("finite_difference_check: function value is not finite");
        }
        return y;
    };

    Tape<T> tape;
    std::vector<Var<T>> vars;
    vars.reserve(xs.size());
    for (const Tensor<T>& x : xs) vars.push_back(tape.leaf(x));
    Var<T> root = f(tape, vars);
    if (!std::isfinite(static_cast<double>(tape.value(root)[0]))) {
        throw EvalError("finite_difference_check: function value is not finite");
    }
    tape.backward(root);

    std::size_t total = 0;
    for (const Tensor<T>& x : xs) total += x.size();
    const std::vector<std::size_t> coords = detail::pick_coords(total, max_coords, seed);

    GradCheckReport<T> report;
    report.step_size = step;
    for (const std::size_t flat : coords) {
        std::size_t k = flat;
        std::size_t which = 0;
        while (k >= xs[which].size()) {
            k -= xs[which].size();
            ++which;
        }
        std::vector<Tensor<T>> xp = xs;
        std::vector<Tensor<T>> xm = xs;
        xp[which][k] += step;
        xm[which][k] -= step;
        const T g_fd = (eval(xp) - eval(xm)) / (T(2) * step);
        const T g = tape.grad(vars[which])[k];
        report.max_relative_error =
            std::max(report.max_relative_error, detail::relative_error(g, g_fd));
    }
    report.num_parameters_checked = coords.size();
    return report;
}

} // namespace kd
