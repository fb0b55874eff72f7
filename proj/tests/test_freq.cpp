#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <complex>

#include "kd/freq_attention.hpp"
#include "kd/gradcheck.hpp"
#include "kd/rng.hpp"
#include "kd/spectral.hpp"

using namespace kd;

namespace {

TensorD random_tensor(std::size_t c, std::size_t w, std::size_t h, std::uint64_t seed) {
    Rng rng(seed);
    TensorD t(c, w, h);
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform() * 2.0 - 1.0;
    return t;
}

Spectrum<double> single_coeff(double re, double im) {
    Spectrum<double> s;
    s.channels = 1;
    s.width = 1;
    s.height = 1;
    s.coeff = {std::complex<double>(re, im)};
    return s;
}

} // namespace

TEST_CASE("complex_sq_distance basics") {
    CHECK(complex_sq_distance<double>({1.0, 2.0}, {1.0, 2.0}) == 0.0);
    CHECK(complex_sq_distance<double>({0.0, 0.0}, {3.0, 4.0}) == doctest::Approx(25.0));
    CHECK(complex_sq_distance<double>({1.0, 0.0}, {-1.0, 0.0}) == doctest::Approx(4.0));
    // symmetry
    CHECK(complex_sq_distance<double>({0.3, -0.7}, {1.1, 0.2}) ==
          doctest::Approx(complex_sq_distance<double>({1.1, 0.2}, {0.3, -0.7})));
}

TEST_CASE("equal spectra give unit weights exactly") {
    const TensorD a = random_tensor(3, 4, 4, 17);
    const auto f = dft2_per_channel(a);
    FreqAttentionConfig<double> cfg;
    const auto w = freq_weight(f, f, cfg);
    for (const double v : w.weights) CHECK(v == 1.0);
}

TEST_CASE("config defaults follow the experiment settings") {
    FreqAttentionConfig<double> cfg;
    CHECK(cfg.gamma_fr == 1.0);
    CHECK(cfg.weight_detached == true);
    CHECK(cfg.reduction == Reduction::sum);
}

TEST_CASE("single coefficient pair (1, -1) weighs e^4") {
    FreqAttentionConfig<double> cfg;
    const auto w = freq_weight(single_coeff(1.0, 0.0), single_coeff(-1.0, 0.0), cfg);
    CHECK(w.at(0, 0) == doctest::Approx(54.598150).epsilon(1e-6));
    CHECK(w.at(0, 0) == doctest::Approx(std::exp(4.0)).epsilon(1e-12));
}

TEST_CASE("weights are always >= 1 and grow with the discrepancy") {
    const TensorD a = random_tensor(2, 8, 8, 3);
    const TensorD b = random_tensor(2, 8, 8, 4);
    FreqAttentionConfig<double> cfg;
    const auto w = freq_weight(dft2_per_channel(a), dft2_per_channel(b), cfg);
    for (const double v : w.weights) CHECK(v >= 1.0);

    // bumping the channel-mean discrepancy at one frequency strictly raises
    // its weight while the others stay put
    auto fs = dft2_per_channel(a);
    const auto ft = dft2_per_channel(b);
    const auto before = freq_weight(fs, ft, cfg);
    const std::size_t u = 3, v = 5;
    fs.at(0, u, v) += std::complex<double>(2.0, -1.0) * (fs.at(0, u, v) - ft.at(0, u, v)) +
                      std::complex<double>(0.5, 0.5);
    const auto after = freq_weight(fs, ft, cfg);
    const double d_before = std::norm(dft2_per_channel(a).at(0, u, v) - ft.at(0, u, v));
    const double d_after = std::norm(fs.at(0, u, v) - ft.at(0, u, v));
    REQUIRE(d_after > d_before);
    CHECK(after.at(u, v) > before.at(u, v));
    CHECK(after.at(0, 0) == before.at(0, 0));
}

TEST_CASE("freq_loss of identical tensors is zero, otherwise positive") {
    const TensorD a = random_tensor(2, 4, 4, 8);
    FreqAttentionConfig<double> cfg;
    CHECK(freq_loss_value(a, a, cfg) == 0.0);
    const TensorD b = random_tensor(2, 4, 4, 9);
    CHECK(freq_loss_value(a, b, cfg) > 0.0);
}

TEST_CASE("worked example: 1x1x2 student/teacher gives 4 e^4") {
    const TensorD a_s(1, 1, 2, {1.0, 0.0});
    const TensorD a_t(1, 1, 2, {0.0, 1.0});
    FreqAttentionConfig<double> cfg; // weight_detached = true
    const double loss = freq_loss_value(a_s, a_t, cfg);
    const double expected = 4.0 * std::exp(4.0); // 218.392600...
    CHECK(std::abs(loss - expected) / expected < 1e-9);
    CHECK(loss == doctest::Approx(218.3926).epsilon(1e-6));
    // the loss value itself does not depend on the detachment mode
    cfg.weight_detached = false;
    CHECK(freq_loss_value(a_s, a_t, cfg) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("mean reduction divides by the element count") {
    const TensorD a = random_tensor(2, 4, 4, 31);
    const TensorD b = random_tensor(2, 4, 4, 32);
    FreqAttentionConfig<double> sum_cfg;
    FreqAttentionConfig<double> mean_cfg;
    mean_cfg.reduction = Reduction::mean;
    CHECK(freq_loss_value(a, b, mean_cfg) ==
          doctest::Approx(freq_loss_value(a, b, sum_cfg) / 32.0).epsilon(1e-12));
}

TEST_CASE("gamma -> 0 recovers the unweighted spectral squared error") {
    const TensorD a = random_tensor(2, 4, 4, 41);
    const TensorD b = random_tensor(2, 4, 4, 42);
    FreqAttentionConfig<double> cfg;
    cfg.gamma_fr = 1e-8;
    const auto fa = dft2_per_channel(a);
    const auto fb = dft2_per_channel(b);
    double unweighted = 0.0;
    for (std::size_t i = 0; i < fa.coeff.size(); ++i) {
        unweighted += std::norm(fa.coeff[i] - fb.coeff[i]);
    }
    const double loss = freq_loss_value(a, b, cfg);
    CHECK(std::abs(loss - unweighted) / unweighted < 1e-3);
}

TEST_CASE("attached-weight gradient matches finite differences") {
    const TensorD teacher = random_tensor(2, 4, 4, 51);
    const TensorD student = random_tensor(2, 4, 4, 52);
    for (const Reduction red : {Reduction::sum, Reduction::mean}) {
        FreqAttentionConfig<double> cfg;
        cfg.weight_detached = false;
        cfg.reduction = red;
        const auto report = finite_difference_check<double>(
            [&](Tape<double>& t, Var<double> v) { return freq_loss(t, v, teacher, cfg); },
            student, 1e-5);
        CHECK(report.max_relative_error < 1e-4);
    }
}

TEST_CASE("detached-weight gradient matches finite differences of the frozen-weight loss") {
    const TensorD teacher = random_tensor(2, 4, 4, 61);
    const TensorD student = random_tensor(2, 4, 4, 62);
    FreqAttentionConfig<double> cfg; // detached
    const auto frozen =
        freq_weight(dft2_per_channel(student), dft2_per_channel(teacher), cfg);

    // the detached gradient equals the gradient of the loss with this fixed map
    Tape<double> t1;
    auto v1 = t1.leaf(student);
    t1.backward(freq_loss(t1, v1, teacher, cfg));
    Tape<double> t2;
    auto v2 = t2.leaf(student);
    t2.backward(freq_loss_with_weights(t2, v2, teacher, frozen, cfg.reduction));
    for (std::size_t i = 0; i < student.size(); ++i) {
        CHECK(t1.grad(v1)[i] == doctest::Approx(t2.grad(v2)[i]).epsilon(1e-12));
    }

    const auto report = finite_difference_check<double>(
        [&](Tape<double>& t, Var<double> v) {
            return freq_loss_with_weights(t, v, teacher, frozen, cfg.reduction);
        },
        student, 1e-5);
    CHECK(report.max_relative_error < 1e-4);
}

TEST_CASE("freq_loss rejects shape mismatches") {
    FreqAttentionConfig<double> cfg;
    CHECK_THROWS_AS((void)freq_loss_value(TensorD(1, 4, 4), TensorD(1, 4, 8), cfg),
                    DimensionError);
}

TEST_CASE("double-precision weight overflow names the frequency") {
    const TensorD a(1, 1, 1, {30.0});
    const TensorD b(1, 1, 1, {-30.0});
    FreqAttentionConfig<double> cfg; // d = 3600 -> exp overflows in double
    try {
        (void)freq_loss_value(a, b, cfg);
        FAIL("expected OverflowError");
    } catch (const OverflowError& e) {
        CHECK(std::string(e.what()).find("(u=0, v=0)") != std::string::npos);
    }
}

TEST_CASE("single-precision path clamps instead of overflowing") {
    const Tensor<float> a(1, 1, 1, {30.0f});
    const Tensor<float> b(1, 1, 1, {-30.0f});
    FreqAttentionConfig<float> cfg;
    const auto w = freq_weight(dft2_per_channel(a), dft2_per_channel(b), cfg);
    CHECK(std::isfinite(w.at(0, 0)));
    CHECK(w.at(0, 0) == doctest::Approx(std::exp(60.0)).epsilon(1e-5));
}
