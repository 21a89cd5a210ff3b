#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include <png.h>

#include "oracles.hpp"
#include "rootsr/image.hpp"
#include "rootsr/png_io.hpp"
#include "rootsr/rng.hpp"

using namespace rootsr;
namespace fs = std::filesystem;

namespace {

ImageBuffer ramp4x4() {
    ImageBuffer img(4, 4, 1);
    for (int y = 0; y < 4; ++y)
        for (int x = 0; x < 4; ++x) img.at(y, x, 0) = (y * 4 + x) / 15.0;
    return img;
}

void check_in_range(const ImageBuffer& img) {
    for (double v : img.data) {
        CHECK(std::isfinite(v));
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
    }
}

}  // namespace

TEST_SUITE("image") {

TEST_CASE("crop full rect is identity") {
    Rng rng(1);
    const ImageBuffer img = oracle::random_image(6, 7, 3, rng);
    const ImageBuffer out = crop(img, {0, 0, 6, 7});
    CHECK(out.data == img.data);
}

TEST_CASE("crop copies the addressed block") {
    const ImageBuffer img = ramp4x4();
    const ImageBuffer out = crop(img, {0, 0, 2, 2});
    CHECK(out.height == 2);
    CHECK(out.width == 2);
    CHECK(out.at(0, 0, 0) == img.at(0, 0, 0));
    CHECK(out.at(0, 1, 0) == img.at(0, 1, 0));
    CHECK(out.at(1, 0, 0) == img.at(1, 0, 0));
    CHECK(out.at(1, 1, 0) == img.at(1, 1, 0));
}

TEST_CASE("crop composition equals composed crop") {
    Rng rng(2);
    const ImageBuffer img = oracle::random_image(32, 32, 3, rng);
    const ImageBuffer two_step = crop(crop(img, {4, 6, 20, 18}), {3, 2, 10, 12});
    const ImageBuffer one_step = crop(img, {7, 8, 10, 12});
    CHECK(two_step.data == one_step.data);
}

TEST_CASE("crop out of bounds") {
    const ImageBuffer img = ramp4x4();
    CHECK_THROWS_AS(crop(img, {2, 2, 4, 4}), BoundsError);
    CHECK_THROWS_AS(crop(img, {-1, 0, 2, 2}), BoundsError);
}

TEST_CASE("area downscale of constants") {
    ImageBuffer img(2, 2, 1, 0.37);
    const ImageBuffer out = resize(img, 1, 1, ResizeMode::Area);
    CHECK(out.at(0, 0, 0) == doctest::Approx(0.37).epsilon(1e-15));
}

TEST_CASE("area downscale block mean") {
    ImageBuffer img(2, 2, 1);
    img.at(0, 0, 0) = 0.0;
    img.at(0, 1, 0) = 0.0;
    img.at(1, 0, 0) = 1.0;
    img.at(1, 1, 0) = 1.0;
    const ImageBuffer out = resize(img, 1, 1, ResizeMode::Area);
    CHECK(out.at(0, 0, 0) == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("area mode rejects non-integer factors") {
    Rng rng(3);
    const ImageBuffer img = oracle::random_image(6, 6, 1, rng);
    CHECK_THROWS_AS(resize(img, 4, 4, ResizeMode::Area), ArgumentError);
    CHECK_THROWS_AS(resize(img, 3, 2, ResizeMode::Area), ArgumentError);
    CHECK_THROWS_AS(resize(img, 8, 8, ResizeMode::Area), ArgumentError);
}

TEST_CASE("area downscale preserves the global mean") {
    Rng rng(4);
    for (int factor : {2, 3, 4}) {
        const ImageBuffer img = oracle::random_image(12 * factor, 8 * factor, 3, rng);
        const ImageBuffer out = resize(img, 12, 8, ResizeMode::Area);
        double mean_in = 0.0, mean_out = 0.0;
        for (double v : img.data) mean_in += v;
        for (double v : out.data) mean_out += v;
        mean_in /= img.data.size();
        mean_out /= out.data.size();
        CHECK(std::abs(mean_in - mean_out) <= 1e-9);
    }
}

TEST_CASE("bilinear and area match the per-pixel reference") {
    Rng rng(5);
    const ImageBuffer img = oracle::random_image(64, 64, 1, rng);

    const ImageBuffer up = resize(img, 128, 128, ResizeMode::Bilinear);
    const ImageBuffer up_ref = oracle::resize_bilinear(img, 128, 128);
    CHECK(oracle::max_abs_diff(up, up_ref) <= 1e-6);

    const ImageBuffer down = resize(up, 64, 64, ResizeMode::Area);
    const ImageBuffer down_ref = oracle::downscale_area(up_ref, 2);
    CHECK(oracle::max_abs_diff(down, down_ref) <= 1e-6);

    // deviation from the original, measured independently, agrees
    const double dev_impl = oracle::max_abs_diff(down, img);
    const double dev_ref = oracle::max_abs_diff(down_ref, img);
    CHECK(std::abs(dev_impl - dev_ref) <= 1e-6);
}

TEST_CASE("bicubic matches the per-pixel reference") {
    Rng rng(6);
    const ImageBuffer img = oracle::random_image(32, 48, 3, rng);
    const ImageBuffer up = resize(img, 64, 96, ResizeMode::Bicubic);
    const ImageBuffer up_ref = oracle::resize_bicubic(img, 64, 96);
    CHECK(oracle::max_abs_diff(up, up_ref) <= 1e-6);
    check_in_range(up);
}

TEST_CASE("translate identity") {
    Rng rng(7);
    const ImageBuffer img = oracle::random_image(9, 9, 3, rng);
    const ImageBuffer out = translate(img, 0.0, 0.0, Boundary::Zero);
    CHECK(out.data == img.data);
}

TEST_CASE("translate by one row with zero boundary") {
    Rng rng(8);
    const ImageBuffer img = oracle::random_image(3, 3, 1, rng);
    const ImageBuffer out = translate(img, 1.0, 0.0, Boundary::Zero);
    for (int x = 0; x < 3; ++x) {
        CHECK(out.at(0, x, 0) == 0.0);
        CHECK(out.at(1, x, 0) == doctest::Approx(img.at(0, x, 0)).epsilon(1e-15));
        CHECK(out.at(2, x, 0) == doctest::Approx(img.at(1, x, 0)).epsilon(1e-15));
    }
}

TEST_CASE("half-pixel translate of a step edge") {
    ImageBuffer img(8, 8, 1);
    for (int y = 4; y < 8; ++y)
        for (int x = 0; x < 8; ++x) img.at(y, x, 0) = 1.0;
    const ImageBuffer out = translate(img, 0.5, 0.0, Boundary::Replicate);
    for (int x = 0; x < 8; ++x) CHECK(out.at(4, x, 0) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("translate matches reference and inverts") {
    Rng rng(9);
    const ImageBuffer img = oracle::random_image(24, 24, 1, rng);
    for (const auto [dy, dx] : {std::pair{2.0, -3.0}, {0.5, 0.25}, {-1.5, 0.0}}) {
        for (Boundary b : {Boundary::Replicate, Boundary::Zero}) {
            const ImageBuffer out = translate(img, dy, dx, b);
            const ImageBuffer ref = oracle::translate(img, dy, dx, b == Boundary::Zero);
            CHECK(oracle::max_abs_diff(out, ref) <= 1e-12);
            check_in_range(out);
        }
    }

    // round trip: exact for integer shifts away from the boundary band
    const ImageBuffer fwd_i = translate(img, 3.0, -2.0, Boundary::Replicate);
    const ImageBuffer back_i = translate(fwd_i, -3.0, 2.0, Boundary::Replicate);
    double worst = 0.0;
    for (int y = 4; y < 20; ++y)
        for (int x = 4; x < 20; ++x)
            worst = std::max(worst, std::abs(back_i.at(y, x, 0) - img.at(y, x, 0)));
    CHECK(worst <= 1e-6);

    // fractional on smooth content: small interior error
    ImageBuffer smooth(24, 24, 1);
    for (int y = 0; y < 24; ++y)
        for (int x = 0; x < 24; ++x)
            smooth.at(y, x, 0) = 0.5 + 0.4 * std::sin(y * 0.3) * std::cos(x * 0.25);
    const ImageBuffer fwd_f = translate(smooth, 1.5, 0.0, Boundary::Replicate);
    const ImageBuffer back_f = translate(fwd_f, -1.5, 0.0, Boundary::Replicate);
    worst = 0.0;
    for (int y = 3; y < 21; ++y)
        for (int x = 3; x < 21; ++x)
            worst = std::max(worst, std::abs(back_f.at(y, x, 0) - smooth.at(y, x, 0)));
    CHECK(worst <= 0.1);
}

TEST_CASE("translate precondition") {
    Rng rng(10);
    const ImageBuffer img = oracle::random_image(8, 8, 1, rng);
    CHECK_THROWS_AS(translate(img, 8.0, 0.0), ArgumentError);
    CHECK_THROWS_AS(translate(img, 0.0, -9.0), ArgumentError);
}

TEST_CASE("grayscale weights") {
    ImageBuffer gray3(2, 2, 3, 0.42);
    const ImageBuffer g = to_grayscale(gray3);
    CHECK(g.channels == 1);
    for (double v : g.data) CHECK(v == doctest::Approx(0.42).epsilon(1e-12));

    ImageBuffer red(1, 1, 3);
    red.at(0, 0, 0) = 1.0;
    CHECK(to_grayscale(red).at(0, 0, 0) == doctest::Approx(0.299).epsilon(1e-12));

    ImageBuffer mono(3, 2, 1, 0.8);
    CHECK(to_grayscale(mono).data == mono.data);
}

TEST_CASE("operations are pure") {
    Rng rng(11);
    const ImageBuffer img = oracle::random_image(16, 16, 3, rng);
    CHECK(resize(img, 32, 32, ResizeMode::Bicubic).data ==
          resize(img, 32, 32, ResizeMode::Bicubic).data);
    CHECK(translate(img, 0.7, -0.3).data == translate(img, 0.7, -0.3).data);
}

TEST_CASE("png round trip") {
    const fs::path dir = fs::temp_directory_path() / "rootsr_png_test";
    fs::create_directories(dir);
    Rng rng(12);

    const ImageBuffer img = oracle::random_image(21, 17, 3, rng);
    const std::string path = (dir / "roundtrip.png").string();
    write_png(path, img);
    const ImageBuffer back = read_png(path);
    CHECK(back.height == 21);
    CHECK(back.width == 17);
    CHECK(back.channels == 3);
    CHECK(oracle::max_abs_diff(img, back) <= 1.0 / 510.0);

    const ImageBuffer zeros(5, 5, 1, 0.0);
    write_png((dir / "zeros.png").string(), zeros);
    CHECK(read_png((dir / "zeros.png").string()).data == zeros.data);

    // the 8-bit value 128 decodes to exactly 128/255
    ImageBuffer mid(1, 1, 1, 128.0 / 255.0);
    write_png((dir / "mid.png").string(), mid);
    CHECK(read_png((dir / "mid.png").string()).at(0, 0, 0) == 128.0 / 255.0);

    fs::remove_all(dir);
}

TEST_CASE("png decode errors") {
    const fs::path dir = fs::temp_directory_path() / "rootsr_png_err";
    fs::create_directories(dir);

    {
        std::ofstream junk(dir / "junk.png", std::ios::binary);
        junk << "this is not a png at all";
    }
    CHECK_THROWS_AS(read_png((dir / "junk.png").string()), IoError);
    CHECK_THROWS_AS(read_png((dir / "missing.png").string()), IoError);

    // 16-bit gray PNG: well-formed but an unsupported bit depth
    {
        std::FILE* fp = std::fopen((dir / "deep.png").string().c_str(), "wb");
        REQUIRE(fp != nullptr);
        png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
        png_infop info = png_create_info_struct(png);
        REQUIRE(setjmp(png_jmpbuf(png)) == 0);
        png_init_io(png, fp);
        png_set_IHDR(png, info, 4, 4, 16, PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
                     PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
        png_write_info(png, info);
        std::vector<png_byte> row(8, 0);
        for (int y = 0; y < 4; ++y) png_write_row(png, row.data());
        png_write_end(png, nullptr);
        png_destroy_write_struct(&png, &info);
        std::fclose(fp);
    }
    CHECK_THROWS_AS(read_png((dir / "deep.png").string()), FormatError);

    fs::remove_all(dir);
}

}  // TEST_SUITE
