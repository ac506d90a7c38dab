#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "dynaspect/core.hpp"
#include "dynaspect/errors.hpp"
#include "support.hpp"

#include <cmath>

using namespace dynaspect;

namespace {

SinogramSet make_set(std::mt19937_64& rng, int frames, int views, int bins, double lo, double hi) {
    SinogramSet s;
    for (int t = 0; t < frames; ++t) {
        SinogramFrame f;
        f.bins = bins;
        for (int v = 0; v < views; ++v)
            f.angles_deg.push_back(10.0 * v + t);
        f.counts = testsupport::random_vector(rng, views * bins, lo, hi);
        s.frames.push_back(f);
    }
    return s;
}

} // namespace

TEST_CASE("gaussian fidelity") {
    std::mt19937_64 rng(1);
    const SinogramSet a = make_set(rng, 3, 2, 7, -1, 1);
    CHECK(gaussian_fidelity(a, a) == 0.0);

    SinogramSet shifted = a;
    for (auto& f : shifted.frames)
        f.counts.array() += 1.0;
    CHECK(gaussian_fidelity(a, shifted) == doctest::Approx(0.5 * 3 * 2 * 7).epsilon(1e-14));

    const SinogramSet b = make_set(rng, 3, 2, 7, -2, 2);
    double direct = 0.0;
    for (int t = 0; t < 3; ++t)
        for (int k = 0; k < 14; ++k) {
            const double d = a.frames[t].counts[k] - b.frames[t].counts[k];
            direct += d * d;
        }
    direct *= 0.5;
    CHECK(std::abs(gaussian_fidelity(a, b) - direct) <= 1e-12 * direct);
    CHECK(gaussian_fidelity(a, b) == gaussian_fidelity(b, a));
}

TEST_CASE("gaussian fidelity rejects shape mismatch") {
    std::mt19937_64 rng(2);
    const SinogramSet a = make_set(rng, 3, 2, 7, -1, 1);
    const SinogramSet b = make_set(rng, 2, 2, 7, -1, 1);
    const SinogramSet c = make_set(rng, 3, 2, 5, -1, 1);
    CHECK_THROWS_AS(gaussian_fidelity(a, b), DimensionError);
    CHECK_THROWS_AS(gaussian_fidelity(a, c), DimensionError);
}

TEST_CASE("kl fidelity examples") {
    std::mt19937_64 rng(3);
    SinogramSet proj = make_set(rng, 2, 2, 5, 0.1, 2.0);
    SinogramSet zero = proj.zeros_like();
    double total = 0.0;
    for (const auto& f : proj.frames)
        total += f.counts.sum();
    CHECK(kl_fidelity(zero, proj) == doctest::Approx(total).epsilon(1e-14));

    SinogramSet ones = proj;
    for (auto& f : ones.frames)
        f.counts.setOnes();
    CHECK(kl_fidelity(ones, ones) == doctest::Approx(20.0).epsilon(1e-14));

    const SinogramSet f = make_set(rng, 2, 2, 5, 0.0, 3.0);
    double direct = 0.0;
    for (int t = 0; t < 2; ++t)
        for (int k = 0; k < 10; ++k)
            direct += proj.frames[t].counts[k] - f.frames[t].counts[k] * std::log(proj.frames[t].counts[k]);
    CHECK(std::abs(kl_fidelity(f, proj) - direct) <= 1e-12 * std::abs(direct));
}

TEST_CASE("kl fidelity domain handling") {
    std::mt19937_64 rng(4);
    SinogramSet f = make_set(rng, 1, 1, 4, 1.0, 2.0);
    SinogramSet proj = f;
    proj.frames[0].counts[2] = 0.0;
    CHECK_THROWS_AS(kl_fidelity(f, proj, false), DomainError);
    const double clamped = kl_fidelity(f, proj, true);
    CHECK(std::isfinite(clamped));
    // zero count against zero projection contributes nothing
    f.frames[0].counts[2] = 0.0;
    CHECK_NOTHROW(kl_fidelity(f, proj, false));
}

TEST_CASE("kl fidelity is minimised at proj = sino") {
    std::mt19937_64 rng(5);
    const SinogramSet f = make_set(rng, 2, 2, 6, 0.5, 4.0);
    const double base = kl_fidelity(f, f);
    for (int trial = 0; trial < 50; ++trial) {
        SinogramSet p = f;
        std::uniform_int_distribution<int> t(0, 1), k(0, 11);
        const int tt = t(rng), kk = k(rng);
        p.frames[tt].counts[kk] *= trial % 2 ? 1.01 : 0.99;
        CHECK(kl_fidelity(f, p) > base);
    }
}

TEST_CASE("fidelities are additive over frames") {
    std::mt19937_64 rng(6);
    const SinogramSet f = make_set(rng, 4, 2, 5, 0.5, 2.0);
    const SinogramSet p = make_set(rng, 4, 2, 5, 0.5, 2.0);
    double g = 0.0, k = 0.0;
    for (int t = 0; t < 4; ++t) {
        SinogramSet a, b;
        a.frames = {f.frames[t]};
        b.frames = {p.frames[t]};
        g += gaussian_fidelity(a, b);
        k += kl_fidelity(a, b);
    }
    CHECK(gaussian_fidelity(f, p) == doctest::Approx(g).epsilon(1e-15));
    CHECK(kl_fidelity(f, p) == doctest::Approx(k).epsilon(1e-15));
}

TEST_CASE("noise model validation and fidelity choice") {
    CHECK(fidelity_for(GaussianNoise{0.1}) == FidelityKind::Gaussian);
    CHECK(fidelity_for(PoissonNoise{100}) == FidelityKind::KullbackLeibler);
    CHECK(fidelity_for(MonteCarloNoise{2e4}) == FidelityKind::KullbackLeibler);
    CHECK_NOTHROW(validate_noise(GaussianNoise{1.0}));
    CHECK_THROWS_AS(validate_noise(GaussianNoise{0.0}), ConfigError);
    CHECK_THROWS_AS(validate_noise(GaussianNoise{1.5}), ConfigError);
    CHECK_THROWS_AS(validate_noise(PoissonNoise{0.0}), ConfigError);
    CHECK_THROWS_AS(validate_noise(MonteCarloNoise{-1.0}), ConfigError);
    CHECK(noise_name(MonteCarloNoise{}) == "monte_carlo");
}

TEST_CASE("dynamic image shape checks") {
    DynamicImage u(4, 3, 5);
    CHECK(u.pixels() == 12);
    CHECK(u.frames() == 5);
    CHECK(u.data.isZero());
    CHECK_NOTHROW(u.validate());
    CHECK_THROWS_AS(DynamicImage(Matrix::Zero(11, 2), 4, 3), DimensionError);
    DynamicImage single(2, 2, 1);
    CHECK(single.frames() == 1);
}

TEST_CASE("sinogram validation") {
    std::mt19937_64 rng(7);
    SinogramSet s = make_set(rng, 2, 2, 5, 0, 1);
    CHECK_NOTHROW(s.validate());
    CHECK(s.total_bins() == 20);
    s.frames[1].bins = 4;
    CHECK_THROWS(s.validate());
    s = make_set(rng, 2, 2, 5, 0, 1);
    s.frames[0].counts[0] = std::nan("");
    CHECK_THROWS_AS(s.validate(), DataError);
}
