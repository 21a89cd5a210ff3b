#include "rootsr/traits.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <sstream>
#include <string>

#include <json.hpp>

namespace rootsr {

namespace {

void require_binary_mask(const ImageBuffer& mask, const char* who) {
    if (mask.channels != 1)
        throw ArgumentError(std::string(who) + ": mask must be single-channel");
    for (double v : mask.data)
        if (v != 0.0 && v != 1.0)
            throw ArgumentError(std::string(who) + ": mask values must be exactly 0 or 1");
}

// Guo-Hall two-subiteration thinning on a padded local bitmap. Chosen over
// Zhang-Suen, whose simultaneous deletions sever two-pixel diagonal
// staircases — exactly the shape of thin oblique hairs.
void thin_bitmap(std::vector<std::uint8_t>& bm, int h, int w) {
    const auto at = [&](int y, int x) -> std::uint8_t& { return bm[y * w + x]; };
    std::vector<std::pair<int, int>> kill;
    bool changed = true;
    while (changed) {
        changed = false;
        for (int pass = 0; pass < 2; ++pass) {
            kill.clear();
            for (int y = 1; y < h - 1; ++y)
                for (int x = 1; x < w - 1; ++x) {
                    if (!at(y, x)) continue;
                    const int p2 = at(y - 1, x), p3 = at(y - 1, x + 1), p4 = at(y, x + 1),
                              p5 = at(y + 1, x + 1), p6 = at(y + 1, x), p7 = at(y + 1, x - 1),
                              p8 = at(y, x - 1), p9 = at(y - 1, x - 1);
                    const int c = (!p2 && (p3 || p4)) + (!p4 && (p5 || p6)) +
                                  (!p6 && (p7 || p8)) + (!p8 && (p9 || p2));
                    if (c != 1) continue;
                    const int n1 = (p9 || p2) + (p3 || p4) + (p5 || p6) + (p7 || p8);
                    const int n2 = (p2 || p3) + (p4 || p5) + (p6 || p7) + (p8 || p9);
                    const int n = std::min(n1, n2);
                    if (n < 2 || n > 3) continue;
                    const int m = pass == 0 ? ((p6 || p7 || !p9) && p8)
                                            : ((p2 || p3 || !p5) && p4);
                    if (m != 0) continue;
                    kill.emplace_back(y, x);
                }
            for (const auto& [y, x] : kill) at(y, x) = 0;
            if (!kill.empty()) changed = true;
        }
    }
}

}  // namespace

std::vector<Component> label_instances(const ImageBuffer& mask, int min_area) {
    require_binary_mask(mask, "label_instances");
    const int h = mask.height, w = mask.width;
    std::vector<std::uint8_t> seen(mask.data.size(), 0);
    std::vector<Component> out;
    std::deque<std::pair<int, int>> queue;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const std::size_t idx = static_cast<std::size_t>(y) * w + x;
            if (mask.data[idx] != 1.0 || seen[idx]) continue;
            Component comp;
            seen[idx] = 1;
            queue.emplace_back(y, x);
            while (!queue.empty()) {
                const auto [cy, cx] = queue.front();
                queue.pop_front();
                comp.pixels.emplace_back(cy, cx);
                for (int dy = -1; dy <= 1; ++dy)
                    for (int dx = -1; dx <= 1; ++dx) {
                        const int ny = cy + dy, nx = cx + dx;
                        if (ny < 0 || ny >= h || nx < 0 || nx >= w) continue;
                        const std::size_t ni = static_cast<std::size_t>(ny) * w + nx;
                        if (mask.data[ni] == 1.0 && !seen[ni]) {
                            seen[ni] = 1;
                            queue.emplace_back(ny, nx);
                        }
                    }
            }
            if (comp.area() >= min_area) {
                std::sort(comp.pixels.begin(), comp.pixels.end());
                out.push_back(std::move(comp));
            }
        }
    // discovery already orders by first (top-left-most) pixel in scan order
    return out;
}

double skeleton_length(const Component& comp) {
    if (comp.pixels.empty()) throw ArgumentError("skeleton_length: empty component");
    if (comp.pixels.size() == 1) return 0.0;
    int min_y = comp.pixels[0].first, max_y = comp.pixels[0].first;
    int min_x = comp.pixels[0].second, max_x = comp.pixels[0].second;
    for (const auto& [y, x] : comp.pixels) {
        min_y = std::min(min_y, y);
        max_y = std::max(max_y, y);
        min_x = std::min(min_x, x);
        max_x = std::max(max_x, x);
    }
    const int h = max_y - min_y + 3, w = max_x - min_x + 3;  // one-pixel border
    std::vector<std::uint8_t> bm(static_cast<std::size_t>(h) * w, 0);
    for (const auto& [y, x] : comp.pixels)
        bm[static_cast<std::size_t>(y - min_y + 1) * w + (x - min_x + 1)] = 1;
    thin_bitmap(bm, h, w);

    // Each edge once: east, south, and the two down-diagonals. A diagonal
    // whose endpoints already share a cardinal skeleton neighbor is a
    // shortcut across a staircase corner, not a path edge; counting it
    // would double every corner.
    const auto on = [&](int y, int x) {
        return y >= 0 && y < h && x >= 0 && x < w &&
               bm[static_cast<std::size_t>(y) * w + x] != 0;
    };
    const double sqrt2 = std::sqrt(2.0);
    double length = 0.0;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            if (!on(y, x)) continue;
            if (on(y, x + 1)) length += 1.0;
            if (on(y + 1, x)) length += 1.0;
            if (on(y + 1, x + 1) && !on(y, x + 1) && !on(y + 1, x)) length += sqrt2;
            if (on(y + 1, x - 1) && !on(y, x - 1) && !on(y + 1, x)) length += sqrt2;
        }
    return length;
}

TraitReport analyze(const ImageBuffer& root_mask, const ImageBuffer& hair_mask,
                    double mm_per_px) {
    if (!root_mask.same_dims(hair_mask)) throw ArgumentError("analyze: mask dims mismatch");
    if (mm_per_px <= 0.0) throw ArgumentError("analyze: mm_per_px must be > 0");
    require_binary_mask(root_mask, "analyze");
    require_binary_mask(hair_mask, "analyze");

    TraitReport report;
    report.mm_per_px = mm_per_px;
    report.root_count = static_cast<int>(label_instances(root_mask).size());

    // hairs live outside the root body
    ImageBuffer hairs_only = hair_mask;
    for (std::size_t i = 0; i < hairs_only.data.size(); ++i)
        if (root_mask.data[i] == 1.0) hairs_only.data[i] = 0.0;

    const std::vector<Component> hairs = label_instances(hairs_only);
    report.hair_count = static_cast<int>(hairs.size());
    double total_len_px = 0.0, total_area_px = 0.0;
    for (const Component& c : hairs) {
        const double len = skeleton_length(c);
        report.per_hair.push_back({len, static_cast<double>(c.area())});
        total_len_px += len;
        total_area_px += c.area();
    }
    report.total_hair_length_mm = total_len_px * mm_per_px;
    if (report.hair_count > 0) {
        report.avg_hair_length_mm = report.total_hair_length_mm / report.hair_count;
        report.avg_hair_area_mm2 =
            total_area_px * mm_per_px * mm_per_px / report.hair_count;
    } else {
        report.empty = true;
    }
    return report;
}

std::string trait_report_text(const TraitReport& r) {
    std::ostringstream os;
    os.setf(std::ios::fixed);
    os.precision(2);
    os << "Root Trait                        Value\n";
    os << "Root Count                        " << r.root_count << "\n";
    os << "Root Hair Count                   " << r.hair_count << "\n";
    os << "Total Root Hair Length (mm)       " << r.total_hair_length_mm << "\n";
    os << "Average Root Hair Length (mm)     " << r.avg_hair_length_mm << "\n";
    os << "Average Root Hair Area (mm2)      " << r.avg_hair_area_mm2 << "\n";
    if (r.empty) os << "(no hairs found)\n";
    return os.str();
}

std::string trait_report_json(const TraitReport& r) {
    nlohmann::json j;
    j["root_count"] = r.root_count;
    j["hair_count"] = r.hair_count;
    j["total_hair_length_mm"] = r.total_hair_length_mm;
    j["avg_hair_length_mm"] = r.avg_hair_length_mm;
    j["avg_hair_area_mm2"] = r.avg_hair_area_mm2;
    j["mm_per_px"] = r.mm_per_px;
    j["empty"] = r.empty;
    nlohmann::json hairs = nlohmann::json::array();
    for (const TraitReport::PerHair& h : r.per_hair)
        hairs.push_back({{"length_px", h.length_px}, {"area_px", h.area_px}});
    j["per_hair"] = std::move(hairs);
    return j.dump(2);
}

}  // namespace rootsr
