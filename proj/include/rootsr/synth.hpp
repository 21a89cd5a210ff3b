#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "rootsr/image.hpp"

namespace rootsr {

struct SceneParams {
    int height = 256;
    int width = 256;
    double root_width_px = 12.0;     // mean root thickness
    double hair_rate = 8.0;          // expected hairs per 100 px of root length
    double hair_len_mean_px = 40.0;
    double hair_len_std_px = 6.0;
    double hair_width_px = 2.0;
    double bg_roughness = 0.5;       // noise octave persistence, [0, 1]
    double illum_gradient = 0.1;     // luminance tilt magnitude, [0, 0.5]
    std::uint64_t seed = 0;

    void validate() const;
};

struct TraitTruth {
    int hair_count = 0;
    std::vector<double> hair_lengths_px;
    std::vector<double> hair_areas_px;
};

struct RootScene {
    ImageBuffer image;                    // 3-channel HR render
    ImageBuffer root_mask;                // 1-channel binary
    std::vector<ImageBuffer> hair_masks;  // one binary mask per hair instance
    TraitTruth truth;
};

struct HairRecord {
    double anchor_y = 0.0;  // on the root edge
    double anchor_x = 0.0;
    double angle = 0.0;     // growth direction, radians
    double length_px = 0.0;
    double width_px = 0.0;
};

struct RootGeometry {
    /// Dense centerline polyline (y, x), one point per image row.
    std::vector<std::array<double, 2>> centerline;
    std::vector<HairRecord> hairs;
    double arc_length_px = 0.0;
};

/// Soil-toned multi-octave value noise with a linear illumination tilt.
/// Octave o carries weight roughness^(o+1), so roughness 0 yields a flat
/// base color. Lattice values come from a seed-keyed integer hash, making
/// the output bit-identical across platforms.
ImageBuffer render_background(const SceneParams& p);

/// Spline centerline through a bounded lateral random walk plus a Poisson
/// process of hair records along its arc length.
RootGeometry sample_root_geometry(const SceneParams& p);

/// Full render: background, root stroke, hair strokes, instance masks, and
/// the matching ground-truth trait record. Hairs that cannot be placed
/// without touching an earlier hair are re-sampled up to 10 times and then
/// dropped (silently; the truth reflects what was rendered).
RootScene generate_scene(const SceneParams& p);

/// Capsule-chain rasterizer used for both the root body and single hairs:
/// alpha is 1 inside the half-width core and falls off as a Gaussian edge.
/// Exposed so stroke geometry can be tested directly.
void rasterize_stroke(const std::vector<std::array<double, 2>>& points,
                      double half_width, std::vector<double>& alpha,
                      int height, int width);

}  // namespace rootsr
