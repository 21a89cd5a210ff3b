#include <doctest.h>

#include <cmath>
#include <complex>
#include <vector>

#include "oracles.hpp"
#include "rootsr/align.hpp"
#include "rootsr/burst.hpp"
#include "rootsr/fft.hpp"
#include "rootsr/synth.hpp"

using namespace rootsr;

namespace {

// O(n^2) DFT for checking the fast transform on awkward sizes.
std::vector<std::complex<double>> naive_dft(const std::vector<std::complex<double>>& x,
                                            bool inverse) {
    const std::size_t n = x.size();
    std::vector<std::complex<double>> out(n);
    for (std::size_t k = 0; k < n; ++k) {
        std::complex<double> acc{0.0, 0.0};
        for (std::size_t j = 0; j < n; ++j) {
            const double ang = (inverse ? 2.0 : -2.0) * M_PI * static_cast<double>(k * j) /
                               static_cast<double>(n);
            acc += x[j] * std::complex<double>(std::cos(ang), std::sin(ang));
        }
        out[k] = inverse ? acc / static_cast<double>(n) : acc;
    }
    return out;
}

ImageBuffer structured_map(int h, int w, std::uint64_t seed) {
    Rng rng(seed);
    ImageBuffer m = oracle::random_image(h, w, 1, rng);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            m.at(y, x, 0) = 0.5 * m.at(y, x, 0) +
                            0.25 * (1.0 + std::sin(0.4 * y) * std::cos(0.3 * x));
    return m;
}

SceneParams shift_scene_params(std::uint64_t seed) {
    SceneParams p;
    p.height = 160;
    p.width = 144;
    p.root_width_px = 10.0;
    p.hair_rate = 8.0;
    p.hair_len_mean_px = 30.0;
    p.hair_len_std_px = 5.0;
    p.bg_roughness = 0.55;
    p.illum_gradient = 0.1;
    p.seed = seed;
    return p;
}

}  // namespace

TEST_SUITE("align") {

TEST_CASE("fft matches a naive DFT on mixed sizes") {
    for (const std::size_t n : {8ULL, 12ULL, 15ULL, 27ULL, 64ULL}) {
        Rng rng(n);
        std::vector<std::complex<double>> x(n);
        for (auto& v : x) v = {rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)};
        std::vector<std::complex<double>> fast = x;
        fft::transform(fast.data(), n, false);
        const std::vector<std::complex<double>> slow = naive_dft(x, false);
        for (std::size_t i = 0; i < n; ++i)
            CHECK(std::abs(fast[i] - slow[i]) <= 1e-9 * static_cast<double>(n));

        fft::transform(fast.data(), n, true);  // round trip
        for (std::size_t i = 0; i < n; ++i) CHECK(std::abs(fast[i] - x[i]) <= 1e-10);
    }
}

TEST_CASE("autocorrelation peaks at zero") {
    const ImageBuffer m = structured_map(32, 32, 1);
    const ShiftEstimate est = phase_correlate(m, m);
    CHECK(est.dy == 0.0);
    CHECK(est.dx == 0.0);
    CHECK(est.peak == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("circular shifts are recovered exactly") {
    const ImageBuffer m = structured_map(64, 64, 2);
    {
        const ShiftEstimate est = phase_correlate(m, oracle::circshift(m, 3, 0));
        CHECK(est.dy == 3.0);
        CHECK(est.dx == 0.0);
    }
    {
        const ShiftEstimate est = phase_correlate(m, oracle::circshift(m, 5, 2));
        CHECK(est.dy == 5.0);
        CHECK(est.dx == 2.0);
    }
    // property: exact recovery up to dims/4
    Rng rng(3);
    for (int trial = 0; trial < 20; ++trial) {
        const int dy = static_cast<int>(rng.uniform_index(33)) - 16;
        const int dx = static_cast<int>(rng.uniform_index(33)) - 16;
        const ShiftEstimate est = phase_correlate(m, oracle::circshift(m, dy, dx));
        CHECK(est.dy == static_cast<double>(dy));
        CHECK(est.dx == static_cast<double>(dx));
    }
}

TEST_CASE("phase correlation is antisymmetric") {
    const ImageBuffer m = structured_map(48, 48, 4);
    Rng rng(5);
    for (int trial = 0; trial < 10; ++trial) {
        const int dy = static_cast<int>(rng.uniform_index(21)) - 10;
        const int dx = static_cast<int>(rng.uniform_index(21)) - 10;
        const ImageBuffer q = oracle::circshift(m, dy, dx);
        const ShiftEstimate ab = phase_correlate(m, q);
        const ShiftEstimate ba = phase_correlate(q, m);
        CHECK(ab.dy == -ba.dy);
        CHECK(ab.dx == -ba.dx);
    }
}

TEST_CASE("degenerate inputs are refused") {
    const ImageBuffer flat(16, 16, 1, 0.5);
    const ImageBuffer m = structured_map(16, 16, 6);
    CHECK_THROWS_AS(phase_correlate(flat, m), DegenerateInputError);
    CHECK_THROWS_AS(phase_correlate(m, flat), DegenerateInputError);
    CHECK_THROWS_AS(estimate_vertical_subpixel_shift(flat, flat), DegenerateInputError);

    const ImageBuffer tiny(4, 4, 1, 0.1);
    CHECK_THROWS_AS(phase_correlate(tiny, tiny), ArgumentError);
    const ImageBuffer other(16, 18, 1, 0.1);
    CHECK_THROWS_AS(phase_correlate(m, other), ArgumentError);
}

TEST_CASE("vertical estimator on exact copies") {
    const ImageBuffer m = structured_map(32, 32, 7);
    const ShiftEstimate est = estimate_vertical_subpixel_shift(m, m);
    CHECK(est.dy == 0.0);
    CHECK(est.dx == 0.0);
}

TEST_CASE("vertical estimator recovers a constructed half-pixel shift") {
    // smooth bumps on a constant background: content stays clear of the
    // frame edge, so the replicate-boundary translate is an exact shift
    ImageBuffer smooth(48, 48, 1, 0.2);
    Rng rng(70);
    for (int b = 0; b < 12; ++b) {
        const double cy = rng.uniform(12.0, 36.0), cx = rng.uniform(12.0, 36.0);
        const double amp = rng.uniform(0.2, 0.6), s2 = rng.uniform(3.0, 10.0);
        for (int y = 0; y < 48; ++y)
            for (int x = 0; x < 48; ++x) {
                const double d2 = (y - cy) * (y - cy) + (x - cx) * (x - cx);
                smooth.at(y, x, 0) += amp * std::exp(-d2 / (2.0 * s2));
            }
    }
    for (double& v : smooth.data) v = std::clamp(v, 0.0, 1.0);
    // reference leads the query by half a pixel
    const ImageBuffer ref = translate(smooth, 0.5, 0.0, Boundary::Replicate);
    const ShiftEstimate est = estimate_vertical_subpixel_shift(ref, smooth);
    CHECK(std::abs(est.dy - 0.5) <= 0.25);
    CHECK(est.dx == 0.0);
}

TEST_CASE("vertical estimator recovers burst ground truth") {
    const RootScene scene = generate_scene(shift_scene_params(41));
    const Rect window{16, 8, 128, 128};
    const BurstSample s = synthesize_burst(scene.image, window, {-3, 0, 3});
    const ImageBuffer ref = to_grayscale(s.frames[1]);
    {
        const ShiftEstimate est =
            estimate_vertical_subpixel_shift(ref, to_grayscale(s.frames[0]));
        CHECK(std::abs(est.dy - (-1.5)) <= 0.25);
        CHECK(est.dx == 0.0);
    }
    {
        const ShiftEstimate est =
            estimate_vertical_subpixel_shift(ref, to_grayscale(s.frames[2]));
        CHECK(std::abs(est.dy - 1.5) <= 0.25);
        CHECK(est.dx == 0.0);
    }
}

TEST_CASE("warp_features basics") {
    Rng rng(8);
    Tensor feats(3, 8, 8);
    for (double& v : feats.data) v = rng.uniform(-1.0, 1.0);

    SUBCASE("zero shift is the identity") {
        const Tensor out = warp_features(feats, ShiftEstimate{});
        CHECK(out.data == feats.data);
    }
    SUBCASE("integer shift relocates rows and replicates the edge") {
        ShiftEstimate s;
        s.dy = 2.0;
        const Tensor out = warp_features(feats, s);
        for (int c = 0; c < 3; ++c)
            for (int x = 0; x < 8; ++x) {
                CHECK(out.at(c, 0, x) == feats.at(c, 0, x));  // replicated top
                CHECK(out.at(c, 1, x) == feats.at(c, 0, x));
                CHECK(out.at(c, 5, x) == feats.at(c, 3, x));
            }
    }
    SUBCASE("warp then inverse warp is near-identity in the interior") {
        Tensor smooth(2, 16, 16);
        for (int c = 0; c < 2; ++c)
            for (int y = 0; y < 16; ++y)
                for (int x = 0; x < 16; ++x)
                    smooth.at(c, y, x) = std::sin(0.3 * y + c) + 0.5 * std::cos(0.2 * x);
        ShiftEstimate fwd, back;
        fwd.dy = 1.5;
        back.dy = -1.5;
        const Tensor round = warp_features(warp_features(smooth, fwd), back);
        double worst = 0.0;
        for (int c = 0; c < 2; ++c)
            for (int y = 2; y < 14; ++y)
                for (int x = 0; x < 16; ++x)
                    worst = std::max(worst, std::abs(round.at(c, y, x) - smooth.at(c, y, x)));
        CHECK(worst <= 0.1);
    }
    SUBCASE("backward is the exact adjoint") {
        Rng r2(9);
        Tensor gy(3, 8, 8);
        for (double& v : gy.data) v = r2.uniform(-1.0, 1.0);
        ShiftEstimate s;
        s.dy = -1.5;
        const Tensor wy = warp_features(feats, s);
        const Tensor gx = warp_features_backward(gy, s);
        double lhs = 0.0, rhs = 0.0;
        for (std::size_t i = 0; i < feats.size(); ++i) {
            lhs += wy.data[i] * gy.data[i];
            rhs += feats.data[i] * gx.data[i];
        }
        CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
    }
}

TEST_CASE("channel mean map reduces stacks for correlation") {
    Tensor t(2, 8, 8);
    for (int y = 0; y < 8; ++y)
        for (int x = 0; x < 8; ++x) {
            t.at(0, y, x) = 0.25;
            t.at(1, y, x) = 0.75;
        }
    const ImageBuffer m = channel_mean_map(t);
    for (double v : m.data) CHECK(v == doctest::Approx(0.5).epsilon(1e-15));
}

}  // TEST_SUITE
