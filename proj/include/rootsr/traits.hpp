#pragma once

#include <utility>
#include <vector>

#include "rootsr/image.hpp"

namespace rootsr {

struct Component {
    std::vector<std::pair<int, int>> pixels;  // (y, x), row-major discovery order
    int area() const { return static_cast<int>(pixels.size()); }
};

/// 8-connected components of a strictly binary mask (values exactly 0 or 1),
/// filtered to >= min_area pixels and ordered by top-left-most pixel.
std::vector<Component> label_instances(const ImageBuffer& mask, int min_area = 5);

/// Length of the component's 1-px skeleton: iterative thinning, then the sum
/// of skeleton adjacencies (1 for axis neighbors, sqrt(2) for diagonals),
/// each edge counted once. A single pixel has length 0.
double skeleton_length(const Component& comp);

struct TraitReport {
    int root_count = 0;
    int hair_count = 0;
    double total_hair_length_mm = 0.0;
    double avg_hair_length_mm = 0.0;
    double avg_hair_area_mm2 = 0.0;
    double mm_per_px = 0.0;
    bool empty = false;  // no hairs found; averages reported as 0
    struct PerHair {
        double length_px = 0.0;
        double area_px = 0.0;
    };
    std::vector<PerHair> per_hair;
};

/// Root count from the root mask; hairs are components of the hair mask
/// after removing pixels inside the root body. Lengths and areas convert
/// to physical units through mm_per_px.
TraitReport analyze(const ImageBuffer& root_mask, const ImageBuffer& hair_mask,
                    double mm_per_px);

std::string trait_report_text(const TraitReport& report);
std::string trait_report_json(const TraitReport& report);

}  // namespace rootsr
