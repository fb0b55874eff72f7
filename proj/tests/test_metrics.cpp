#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "kd/errors.hpp"
#include "kd/metrics.hpp"
#include "kd/rng.hpp"

using namespace kd;

TEST_CASE("accuracy counts argmax matches") {
    const std::vector<std::vector<double>> perfect = {{0.9, 0.1}, {0.2, 0.8}};
    CHECK(accuracy(perfect, {0, 1}) == 1.0);

    const std::vector<std::vector<double>> mixed = {{0.9, 0.1}, {0.2, 0.8}, {0.6, 0.4}};
    CHECK(accuracy(mixed, {0, 1, 1}) == doctest::Approx(2.0 / 3.0));
}

TEST_CASE("accuracy breaks argmax ties toward the lower class index") {
    const std::vector<std::vector<double>> tied = {{0.5, 0.5}};
    CHECK(accuracy(tied, {0}) == 1.0);
    CHECK(accuracy(tied, {1}) == 0.0);
}

TEST_CASE("accuracy rejects empty input") {
    CHECK_THROWS_AS((void)accuracy(std::vector<std::vector<double>>{}, std::vector<int>{}),
                    DataError);
}

TEST_CASE("random predictions on balanced classes score near one half") {
    Rng rng(2024);
    const std::size_t n = 10000;
    std::vector<std::vector<double>> logits(n);
    std::vector<int> labels(n);
    for (std::size_t i = 0; i < n; ++i) {
        logits[i] = {rng.uniform(), rng.uniform()};
        labels[i] = static_cast<int>(i % 2);
    }
    const double acc = accuracy(logits, labels);
    CHECK(acc > 0.47);
    CHECK(acc < 0.53);
}

TEST_CASE("duplicated points give perfect recall at 1") {
    std::vector<std::vector<double>> features;
    std::vector<int> labels;
    Rng rng(5);
    for (int i = 0; i < 10; ++i) {
        std::vector<double> f = {rng.uniform(), rng.uniform(), rng.uniform()};
        features.push_back(f);
        features.push_back(f);
        labels.push_back(i % 2);
        labels.push_back(i % 2);
    }
    CHECK(recall_at_k(features, labels, 1) == 1.0);
}

TEST_CASE("worked 1-D recall example scores two thirds") {
    const std::vector<std::vector<double>> features = {{0.0}, {0.1}, {5.0}};
    const std::vector<int> labels = {0, 0, 1};
    CHECK(recall_at_k(features, labels, 1) == doctest::Approx(2.0 / 3.0));
}

TEST_CASE("recall_at_k matches an independent quadratic-scan oracle") {
    Rng rng(88);
    const std::size_t n = 200;
    std::vector<std::vector<double>> features(n);
    std::vector<int> labels(n);
    for (std::size_t i = 0; i < n; ++i) {
        features[i] = {rng.uniform(), rng.uniform()};
        labels[i] = static_cast<int>(rng.below(2));
    }
    for (const std::size_t k : {std::size_t(1), std::size_t(3), std::size_t(7)}) {
        // oracle: for each query, repeatedly pick the unused candidate with the
        // smallest (distance, index) pair, k times
        std::size_t hits = 0;
        for (std::size_t i = 0; i < n; ++i) {
            std::vector<bool> used(n, false);
            used[i] = true;
            bool hit = false;
            for (std::size_t round = 0; round < k; ++round) {
                double best_d = 0.0;
                std::size_t best_j = n;
                for (std::size_t j = 0; j < n; ++j) {
                    if (used[j]) continue;
                    double d = 0.0;
                    for (std::size_t t = 0; t < 2; ++t) {
                        const double diff = features[i][t] - features[j][t];
                        d += diff * diff;
                    }
                    if (best_j == n || d < best_d) {
                        best_d = d;
                        best_j = j;
                    }
                }
                used[best_j] = true;
                if (labels[best_j] == labels[i]) {
                    hit = true;
                    break;
                }
            }
            if (hit) ++hits;
        }
        const double oracle = static_cast<double>(hits) / static_cast<double>(n);
        CHECK(recall_at_k(features, labels, k) == doctest::Approx(oracle));
    }
}

TEST_CASE("recall_at_k validates k and self-exclusion") {
    const std::vector<std::vector<double>> two = {{0.0}, {1.0}};
    CHECK_THROWS_AS((void)recall_at_k(two, {0, 1}, 2), ConfigError);
    CHECK_THROWS_AS((void)recall_at_k(two, {0, 1}, 0), ConfigError);
    // with self excluded, the only neighbor is the other class
    CHECK(recall_at_k(two, {0, 1}, 1) == 0.0);
}
