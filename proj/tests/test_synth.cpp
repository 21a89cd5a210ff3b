#include <doctest.h>

#include <array>
#include <cmath>

#include "rootsr/image.hpp"
#include "rootsr/synth.hpp"
#include "rootsr/traits.hpp"

using namespace rootsr;

namespace {

SceneParams small_params(std::uint64_t seed) {
    SceneParams p;
    p.height = 128;
    p.width = 128;
    p.root_width_px = 8.0;
    p.hair_rate = 6.0;
    p.hair_len_mean_px = 24.0;
    p.hair_len_std_px = 4.0;
    p.hair_width_px = 2.0;
    p.bg_roughness = 0.5;
    p.illum_gradient = 0.1;
    p.seed = seed;
    return p;
}

}  // namespace

TEST_SUITE("synth") {

TEST_CASE("flat parameters give a constant background") {
    SceneParams p = small_params(3);
    p.bg_roughness = 0.0;
    p.illum_gradient = 0.0;
    const ImageBuffer bg = render_background(p);
    for (int c = 0; c < 3; ++c) {
        const double v0 = bg.at(0, 0, c);
        for (int y = 0; y < p.height; ++y)
            for (int x = 0; x < p.width; ++x) CHECK(bg.at(y, x, c) == v0);
    }
}

TEST_CASE("background is deterministic in the seed") {
    const SceneParams p = small_params(7);
    CHECK(render_background(p).data == render_background(p).data);
    SceneParams q = p;
    q.seed = 8;
    CHECK(render_background(p).data != render_background(q).data);
}

TEST_CASE("illumination gradient tilts column means") {
    SceneParams p = small_params(11);
    p.height = 256;
    p.width = 256;
    p.illum_gradient = 0.2;
    const ImageBuffer gray = to_grayscale(render_background(p));
    double left = 0.0, right = 0.0;
    for (int y = 0; y < p.height; ++y) {
        left += gray.at(y, 0, 0);
        right += gray.at(y, p.width - 1, 0);
    }
    left /= p.height;
    right /= p.height;
    CHECK(std::abs((right - left) - 0.2) <= 0.02);
}

TEST_CASE("zero hair rate yields no hairs") {
    SceneParams p = small_params(5);
    p.hair_rate = 0.0;
    CHECK(sample_root_geometry(p).hairs.empty());
    const RootScene scene = generate_scene(p);
    CHECK(scene.hair_masks.empty());
    CHECK(scene.truth.hair_count == 0);
}

TEST_CASE("centerline spans the full image height") {
    for (std::uint64_t seed : {1ULL, 2ULL, 3ULL}) {
        const RootGeometry geo = sample_root_geometry(small_params(seed));
        REQUIRE(geo.centerline.size() == 128);
        CHECK(geo.centerline.front()[0] == 0.0);
        CHECK(geo.centerline.back()[0] == 127.0);
    }
}

TEST_CASE("hair count follows the arc-length Poisson intensity") {
    // Monte-Carlo over 500 seeds: mean count within 5% of rate * L / 100.
    SceneParams p = small_params(0);
    p.height = 64;
    p.width = 64;
    p.hair_rate = 10.0;
    double expected = 0.0, actual = 0.0;
    for (int s = 0; s < 500; ++s) {
        p.seed = 1000 + s;
        const RootGeometry geo = sample_root_geometry(p);
        expected += 10.0 * geo.arc_length_px / 100.0;
        actual += static_cast<double>(geo.hairs.size());
    }
    CHECK(std::abs(actual - expected) / expected <= 0.05);
}

TEST_CASE("scene generation is bit-identical for a fixed seed") {
    const SceneParams p = small_params(21);
    const RootScene a = generate_scene(p);
    const RootScene b = generate_scene(p);
    CHECK(a.image.data == b.image.data);
    CHECK(a.root_mask.data == b.root_mask.data);
    REQUIRE(a.hair_masks.size() == b.hair_masks.size());
    for (std::size_t i = 0; i < a.hair_masks.size(); ++i)
        CHECK(a.hair_masks[i].data == b.hair_masks[i].data);
    CHECK(a.truth.hair_lengths_px == b.truth.hair_lengths_px);
    CHECK(a.truth.hair_areas_px == b.truth.hair_areas_px);
}

TEST_CASE("masks are consistent with the truth record") {
    const RootScene scene = generate_scene(small_params(33));
    REQUIRE(scene.truth.hair_count == static_cast<int>(scene.hair_masks.size()));
    REQUIRE(scene.truth.hair_count > 0);

    const std::size_t n = scene.root_mask.data.size();
    ImageBuffer unioned(scene.root_mask.height, scene.root_mask.width, 1, 0.0);
    for (std::size_t k = 0; k < scene.hair_masks.size(); ++k) {
        const ImageBuffer& mask = scene.hair_masks[k];
        double area = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            area += mask.data[i];
            CHECK((mask.data[i] == 0.0 || mask.data[i] == 1.0));
            // pairwise disjoint and disjoint from the root body
            if (mask.data[i] == 1.0) {
                CHECK(unioned.data[i] == 0.0);
                CHECK(scene.root_mask.data[i] == 0.0);
                unioned.data[i] = 1.0;
            }
        }
        CHECK(area == scene.truth.hair_areas_px[k]);
    }

    // instance count equals connected components of the union
    CHECK(static_cast<int>(label_instances(unioned).size()) == scene.truth.hair_count);
    // the root body is one 8-connected component
    CHECK(label_instances(scene.root_mask).size() == 1);
}

TEST_CASE("horizontal stroke support has the nominal extent") {
    // nominal length 100 px, rasterized as a capsule; bbox width in [95, 105]
    std::vector<double> alpha(160 * 160, 0.0);
    rasterize_stroke({{80.0, 30.0}, {80.0, 130.0}}, 1.0, alpha, 160, 160);
    int min_x = 160, max_x = -1;
    for (int y = 0; y < 160; ++y)
        for (int x = 0; x < 160; ++x)
            if (alpha[y * 160 + x] >= 0.5) {
                min_x = std::min(min_x, x);
                max_x = std::max(max_x, x);
            }
    const int width = max_x - min_x + 1;
    CHECK(width >= 95);
    CHECK(width <= 105);
}

TEST_CASE("parameter validation") {
    SceneParams p = small_params(1);
    p.height = 32;
    CHECK_THROWS_AS(generate_scene(p), ArgumentError);
    p = small_params(1);
    p.root_width_px = 1.0;
    CHECK_THROWS_AS(generate_scene(p), ArgumentError);
    p = small_params(1);
    p.bg_roughness = 1.5;
    CHECK_THROWS_AS(render_background(p), ArgumentError);
    p = small_params(1);
    p.illum_gradient = 0.7;
    CHECK_THROWS_AS(render_background(p), ArgumentError);
}

}  // TEST_SUITE
