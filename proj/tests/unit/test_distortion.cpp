#include <doctest.h>

#include <cmath>
#include <random>

#include "helpers.hpp"
#include "maskcal/distortion.hpp"

using namespace maskcal;

namespace {

// Brute-force per-window SSIM: explicit Gaussian weights, one window at a
// time. Kept independent of the separable-filter implementation.
double reference_mssim(const Image& a, const Image& b) {
    constexpr int win = 11;
    constexpr double sigma = 1.5;
    constexpr double c1 = 1e-4, c2 = 9e-4;
    double kernel[win][win];
    double total = 0.0;
    for (int i = 0; i < win; ++i) {
        for (int j = 0; j < win; ++j) {
            const double di = i - 5.0, dj = j - 5.0;
            kernel[i][j] = std::exp(-(di * di + dj * dj) / (2.0 * sigma * sigma));
            total += kernel[i][j];
        }
    }
    for (auto& row : kernel) {
        for (double& v : row) v /= total;
    }
    const auto h = static_cast<long>(a.height());
    const auto w = static_cast<long>(a.width());
    double acc = 0.0;
    long windows = 0;
    for (long r = 0; r + win <= h; ++r) {
        for (long c = 0; c + win <= w; ++c) {
            double m1 = 0, m2 = 0, e11 = 0, e22 = 0, e12 = 0;
            for (int i = 0; i < win; ++i) {
                for (int j = 0; j < win; ++j) {
                    const double av = a.at(r + i, c + j);
                    const double bv = b.at(r + i, c + j);
                    m1 += kernel[i][j] * av;
                    m2 += kernel[i][j] * bv;
                    e11 += kernel[i][j] * av * av;
                    e22 += kernel[i][j] * bv * bv;
                    e12 += kernel[i][j] * av * bv;
                }
            }
            const double s1 = e11 - m1 * m1;
            const double s2 = e22 - m2 * m2;
            const double s12 = e12 - m1 * m2;
            acc += ((2 * m1 * m2 + c1) * (2 * s12 + c2)) /
                   ((m1 * m1 + m2 * m2 + c1) * (s1 + s2 + c2));
            ++windows;
        }
    }
    return acc / windows;
}

}  // namespace

TEST_CASE("pnorm distortion") {
    Tensor a({2}, {0.5, 0.5});
    Tensor b({2}, {0.0, 1.0});
    CHECK(pnorm_distortion(a, a, 1.0) == 0.0);
    CHECK(pnorm_distortion(a, a, 2.7) == 0.0);
    CHECK(pnorm_distortion(a, b, 1.0) == doctest::Approx(1.0));
    Tensor c({2}, {1.0, 0.0});
    Tensor z({2}, 0.0);
    CHECK(pnorm_distortion(c, z, 2.0) == doctest::Approx(1.0));
    CHECK_THROWS_AS(pnorm_distortion(a, b, 0.5), DomainError);
    Tensor wrong({3}, 0.0);
    CHECK_THROWS_AS(pnorm_distortion(a, wrong, 2.0), ShapeError);
}

TEST_CASE("masked distortion") {
    Tensor y({2}, {0.2, 0.9});
    Tensor yh({2}, {0.5, 0.1});
    CHECK(masked_distortion(DistortionSpec::l1(), Tensor({2}, 0.0), y, yh) == 0.0);
    CHECK(masked_distortion(DistortionSpec::l1(), Tensor({2}, 1.0), y, yh) ==
          doctest::Approx(pnorm_distortion(y, yh, 1.0)));
    Tensor m({2}, {1.0, 0.0});
    CHECK(masked_distortion(DistortionSpec::l1(), m, y, yh) == doctest::Approx(0.3));
}

TEST_CASE("distortion ids") {
    CHECK(DistortionSpec::parse("l1").p == 1.0);
    CHECK(DistortionSpec::parse("l2").p == 2.0);
    CHECK(DistortionSpec::parse("pnorm:1.5").p == 1.5);
    CHECK(DistortionSpec::parse("ssim").kind == DistortionSpec::Kind::ssim);
    CHECK(DistortionSpec::parse("pnorm:1.5").id() == "pnorm:1.5");
    CHECK(DistortionSpec::l2().id() == "l2");
    CHECK(DistortionSpec::l1().monotone_in_mask());
    CHECK(!DistortionSpec::ssim().monotone_in_mask());
    CHECK_THROWS_AS(DistortionSpec::parse("pnorm:0.5"), DomainError);
    CHECK_THROWS_AS(DistortionSpec::parse("lpips"), DomainError);
}

TEST_CASE("ssim distortion") {
    std::mt19937_64 gen(5);
    const Image a = testutil::random_tensor(gen, {16, 16});
    CHECK(ssim_distortion(a, a) == doctest::Approx(0.0).epsilon(1e-12));

    // constant 0 vs constant 1: MSSIM = C1 / (1 + C1)
    const Image zeros = Tensor::image(12, 12, 1, 0.0);
    const Image ones = Tensor::image(12, 12, 1, 1.0);
    CHECK(ssim_distortion(zeros, ones) == doctest::Approx(1.0 - 1e-4 / (1.0 + 1e-4)));

    const Image b = testutil::random_tensor(gen, {16, 16});
    CHECK(ssim_distortion(a, b) == doctest::Approx(1.0 - reference_mssim(a, b)).epsilon(1e-9));

    // multichannel averages the per-channel scores
    const Image a3 = testutil::random_tensor(gen, {14, 13, 2});
    const Image b3 = testutil::random_tensor(gen, {14, 13, 2});
    CHECK(ssim_distortion(a3, b3) >= 0.0);

    const Image tiny = testutil::random_tensor(gen, {8, 8});
    CHECK_THROWS_AS(ssim_distortion(tiny, tiny), ShapeError);
}

TEST_CASE("masked distortion gradient") {
    // p=2, m=1, per-pixel error e: d/dm_i = 2 m e^2
    Tensor y({2}, {1.0, 0.3});
    Tensor yh({2}, {0.0, 0.3});
    const Tensor g = masked_distortion_grad(DistortionSpec::l2(), Tensor({2}, 1.0), y, yh);
    CHECK(g[0] == doctest::Approx(2.0));
    CHECK(g[1] == 0.0);

    const Tensor gz = masked_distortion_grad(DistortionSpec::l2(), Tensor({2}, 0.5), y, y);
    CHECK(gz[0] == 0.0);
    CHECK(gz[1] == 0.0);
}

TEST_CASE("pnorm gradient matches finite differences") {
    std::mt19937_64 gen(17);
    for (double p : {1.5, 2.0, 3.0}) {
        const DistortionSpec d = DistortionSpec::pnorm(p);
        for (int trial = 0; trial < 20; ++trial) {
            const Mask m = testutil::random_tensor(gen, {6}, 0.1, 1.0);
            const Image y = testutil::random_tensor(gen, {6});
            const Image yh = testutil::random_tensor(gen, {6});
            const Tensor g = masked_distortion_grad(d, m, y, yh);
            Tensor probe = m;
            const double step = 1e-6;
            double worst = 0.0, scale = 0.0;
            for (std::size_t i = 0; i < m.size(); ++i) {
                probe[i] = m[i] + step;
                const double hi = masked_distortion(d, probe, y, yh);
                probe[i] = m[i] - step;
                const double lo = masked_distortion(d, probe, y, yh);
                probe[i] = m[i];
                const double fd = (hi - lo) / (2.0 * step);
                worst = std::max(worst, std::abs(g[i] - fd));
                scale = std::max(scale, std::abs(fd));
            }
            CHECK(worst <= 1e-4 * std::max(scale, 1e-12));
        }
    }
}

TEST_CASE("ssim gradient is finite-difference based") {
    std::mt19937_64 gen(23);
    const Image y = testutil::random_tensor(gen, {11, 11});
    const Image yh = testutil::random_tensor(gen, {11, 11});
    const Mask m = testutil::random_tensor(gen, {11, 11}, 0.3, 0.9);
    const Tensor g = masked_distortion_grad(DistortionSpec::ssim(), m, y, yh);
    CHECK(g.size() == m.size());
    for (double v : g.values()) CHECK(std::isfinite(v));
}

TEST_CASE("pnorm masked distortion is monotone in the mask") {
    std::mt19937_64 gen(29);
    for (int trial = 0; trial < 50; ++trial) {
        const double p = trial % 2 == 0 ? 1.0 : 1.0 + (trial % 5);
        const DistortionSpec d = DistortionSpec::pnorm(p);
        Mask m = testutil::random_tensor(gen, {8});
        const Image y = testutil::random_tensor(gen, {8});
        const Image yh = testutil::random_tensor(gen, {8});
        const double before = masked_distortion(d, m, y, yh);
        const std::size_t i = gen() % m.size();
        m[i] = std::min(1.0, m[i] + 0.25);
        CHECK(masked_distortion(d, m, y, yh) >= before - 1e-12);
    }
}

TEST_CASE("pnorm scaling identity") {
    std::mt19937_64 gen(31);
    for (double p : {1.0, 1.5, 2.0, 3.0}) {
        const Image y = testutil::random_tensor(gen, {10});
        const Image yh = testutil::random_tensor(gen, {10});
        for (double mu : {0.25, 0.5, 0.9}) {
            Tensor ys = y, yhs = yh;
            for (auto& v : ys.values()) v *= mu;
            for (auto& v : yhs.values()) v *= mu;
            CHECK(pnorm_distortion(ys, yhs, p) ==
                  doctest::Approx(std::pow(mu, p) * pnorm_distortion(y, yh, p)));
        }
    }
}
