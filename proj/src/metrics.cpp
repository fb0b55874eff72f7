#include "kd/metrics.hpp"

#include <algorithm>
#include <string>

#include "kd/errors.hpp"

namespace kd {

template <typename T>
double accuracy(const std::vector<std::vector<T>>& logits, const std::vector<int>& labels) {
    if (logits.empty()) throw DataError("accuracy: empty input");
    if (logits.size() != labels.size()) {
        throw DimensionError("accuracy: " + std::to_string(logits.size()) + " score rows vs " +
                             std::to_string(labels.size()) + " labels");
    }
    std::size_t correct = 0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        const std::vector<T>& row = logits[i];
        if (row.empty()) throw DataError("accuracy: empty score row");
        std::size_t best = 0;
        for (std::size_t j = 1; j < row.size(); ++j) {
            if (row[j] > row[best]) best = j; // ties keep the lower index
        }
        if (static_cast<int>(best) == labels[i]) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(logits.size());
}

template <typename T>
double recall_at_k(const std::vector<std::vector<T>>& features, const std::vector<int>& labels,
                   std::size_t k) {
    const std::size_t n = features.size();
    if (n < 2) throw DataError("recall_at_k: need at least 2 samples");
    if (features.size() != labels.size()) {
        throw DimensionError("recall_at_k: feature/label count mismatch");
    }
    if (k < 1 || k >= n) {
        throw ConfigError("recall_at_k: k = " + std::to_string(k) +
                          " must be in [1, n-1] with n = " + std::to_string(n));
    }
    const std::size_t dim = features[0].size();
    for (const auto& f : features) {
        if (f.size() != dim) throw DimensionError("recall_at_k: ragged feature vectors");
    }

    std::size_t hits = 0;
    std::vector<std::pair<double, std::size_t>> candidates;
    candidates.reserve(n - 1);
    for (std::size_t i = 0; i < n; ++i) {
        candidates.clear();
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            double d2 = 0.0;
            for (std::size_t t = 0; t < dim; ++t) {
                const double d = static_cast<double>(features[i][t]) -
                                 static_cast<double>(features[j][t]);
                d2 += d * d;
            }
            candidates.emplace_back(d2, j);
        }
        std::partial_sort(candidates.begin(), candidates.begin() + static_cast<long>(k),
                          candidates.end());
        bool hit = false;
        for (std::size_t t = 0; t < k; ++t) {
            if (labels[candidates[t].second] == labels[i]) {
                hit = true;
                break;
            }
        }
        if (hit) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(n);
}

template double accuracy<float>(const std::vector<std::vector<float>>&, const std::vector<int>&);
template double accuracy<double>(const std::vector<std::vector<double>>&, const std::vector<int>&);
template double recall_at_k<float>(const std::vector<std::vector<float>>&, const std::vector<int>&,
                                   std::size_t);
template double recall_at_k<double>(const std::vector<std::vector<double>>&,
                                    const std::vector<int>&, std::size_t);

} // namespace kd
