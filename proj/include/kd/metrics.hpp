#pragma once

#include <cstddef>
#include <vector>

namespace kd {

struct EvalResult {
    double acc = 0.0;
    double recall_at_1 = 0.0;
    std::size_t n = 0;
};

// Fraction of samples whose argmax logit equals the label; argmax ties go to
// the lower class index.
template <typename T>
double accuracy(const std::vector<std::vector<T>>& logits, const std::vector<int>& labels);

// Fraction of samples with at least one same-class sample among the k nearest
// Euclidean neighbors (self excluded, distance ties broken by lower sample
// index). Brute-force scan.
template <typename T>
double recall_at_k(const std::vector<std::vector<T>>& features, const std::vector<int>& labels,
                   std::size_t k);

} // namespace kd
