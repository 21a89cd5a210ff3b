// Timing comparison between the OpenMP kernels and their serial references.
// Run with different OMP_NUM_THREADS to see scaling; results are checked for
// bit equality while timing.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "rootsr/kernels.hpp"
#include "rootsr/rng.hpp"

using Clock = std::chrono::steady_clock;

namespace {

double ms_since(Clock::time_point start) {
    return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

std::vector<double> random_vec(std::size_t n, rootsr::Rng& rng) {
    std::vector<double> v(n);
    for (double& x : v) x = rng.uniform();
    return v;
}

bool bit_equal(const std::vector<double>& a, const std::vector<double>& b) {
    return a == b;
}

// the GEMM-shaped conv kernels reassociate sums, so compare to rounding
bool close_equal(const std::vector<double>& a, const std::vector<double>& b) {
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double scale = std::max({std::abs(a[i]), std::abs(b[i]), 1.0});
        if (std::abs(a[i] - b[i]) > 1e-12 * scale) return false;
    }
    return true;
}

struct Case {
    std::string name;
    double serial_ms;
    double parallel_ms;
    bool match;
};

void print(const Case& c) {
    std::printf("%-28s serial %9.2f ms   parallel %9.2f ms   speedup %5.2fx   %s\n",
                c.name.c_str(), c.serial_ms, c.parallel_ms, c.serial_ms / c.parallel_ms,
                c.match ? "match" : "MISMATCH");
}

}  // namespace

int main(int argc, char** argv) {
    const int reps = argc > 1 ? std::atoi(argv[1]) : 5;
    rootsr::Rng rng(42);
    namespace k = rootsr::kernels;

    {
        const int h = 512, w = 512;
        const std::vector<double> src = random_vec(static_cast<std::size_t>(h) * w, rng);
        std::vector<double> a(static_cast<std::size_t>(h) * 2 * w * 2), b(a.size());
        auto t0 = Clock::now();
        for (int r = 0; r < reps; ++r)
            k::serial::resize_bilinear(src.data(), h, w, a.data(), 2 * h, 2 * w);
        const double ts = ms_since(t0) / reps;
        t0 = Clock::now();
        for (int r = 0; r < reps; ++r)
            k::resize_bilinear(src.data(), h, w, b.data(), 2 * h, 2 * w);
        print({"resize_bilinear 512->1024", ts, ms_since(t0) / reps, bit_equal(a, b)});
    }
    {
        const int h = 1024, w = 1024;
        const std::vector<double> src = random_vec(static_cast<std::size_t>(h) * w, rng);
        std::vector<double> a(static_cast<std::size_t>(h) / 2 * w / 2), b(a.size());
        auto t0 = Clock::now();
        for (int r = 0; r < reps; ++r)
            k::serial::downscale_area(src.data(), h, w, a.data(), h / 2, w / 2);
        const double ts = ms_since(t0) / reps;
        t0 = Clock::now();
        for (int r = 0; r < reps; ++r)
            k::downscale_area(src.data(), h, w, b.data(), h / 2, w / 2);
        print({"downscale_area 1024->512", ts, ms_since(t0) / reps, bit_equal(a, b)});
    }
    {
        const int h = 512, w = 512;
        const std::vector<double> src = random_vec(static_cast<std::size_t>(h) * w, rng);
        std::vector<double> a(src.size()), b(src.size());
        auto t0 = Clock::now();
        for (int r = 0; r < reps; ++r)
            k::serial::translate_bilinear(src.data(), h, w, 1.5, -0.5, false, a.data());
        const double ts = ms_since(t0) / reps;
        t0 = Clock::now();
        for (int r = 0; r < reps; ++r)
            k::translate_bilinear(src.data(), h, w, 1.5, -0.5, false, b.data());
        print({"translate 512x512", ts, ms_since(t0) / reps, bit_equal(a, b)});
    }

    const int in_c = 32, out_c = 16, hh = 64, ww = 64, ks = 3;
    const std::vector<double> x = random_vec(static_cast<std::size_t>(in_c) * hh * ww, rng);
    const std::vector<double> wgt =
        random_vec(static_cast<std::size_t>(out_c) * in_c * ks * ks, rng);
    const std::vector<double> bias = random_vec(out_c, rng);
    {
        std::vector<double> a(static_cast<std::size_t>(out_c) * hh * ww), b(a.size());
        auto t0 = Clock::now();
        for (int r = 0; r < reps; ++r)
            k::serial::conv2d_forward(x.data(), in_c, hh, ww, wgt.data(), bias.data(),
                                      out_c, ks, a.data());
        const double ts = ms_since(t0) / reps;
        t0 = Clock::now();
        for (int r = 0; r < reps; ++r)
            k::conv2d_forward(x.data(), in_c, hh, ww, wgt.data(), bias.data(), out_c, ks,
                              b.data());
        print({"conv2d fwd 32->16 64x64", ts, ms_since(t0) / reps, close_equal(a, b)});
    }
    {
        const std::vector<double> gy = random_vec(static_cast<std::size_t>(out_c) * hh * ww, rng);
        std::vector<double> a(x.size()), b(x.size());
        auto t0 = Clock::now();
        for (int r = 0; r < reps; ++r)
            k::serial::conv2d_backward_input(gy.data(), out_c, hh, ww, wgt.data(), in_c, ks,
                                             a.data());
        const double ts = ms_since(t0) / reps;
        t0 = Clock::now();
        for (int r = 0; r < reps; ++r)
            k::conv2d_backward_input(gy.data(), out_c, hh, ww, wgt.data(), in_c, ks, b.data());
        print({"conv2d bwd-input", ts, ms_since(t0) / reps, close_equal(a, b)});

        std::vector<double> gwa(wgt.size(), 0.0), gba(out_c, 0.0);
        std::vector<double> gwb(wgt.size(), 0.0), gbb(out_c, 0.0);
        t0 = Clock::now();
        for (int r = 0; r < reps; ++r)
            k::serial::conv2d_backward_params(x.data(), in_c, hh, ww, gy.data(), out_c, ks,
                                              gwa.data(), gba.data());
        const double ts2 = ms_since(t0) / reps;
        t0 = Clock::now();
        for (int r = 0; r < reps; ++r)
            k::conv2d_backward_params(x.data(), in_c, hh, ww, gy.data(), out_c, ks,
                                      gwb.data(), gbb.data());
        print({"conv2d bwd-params", ts2, ms_since(t0) / reps,
               close_equal(gwa, gwb) && close_equal(gba, gbb)});
    }
    return 0;
}
