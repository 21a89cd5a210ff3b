#include "rootsr/synth.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <utility>

#include "rootsr/rng.hpp"

namespace rootsr {

namespace {

constexpr double kPi = 3.14159265358979323846264338327950288;
constexpr double kEdgeSigma = 0.5;       // Gaussian falloff outside the stroke core
constexpr int kMinHairMaskArea = 8;      // below this the stroke did not render usefully
constexpr std::array<double, 3> kSoilTone = {0.34, 0.26, 0.18};
constexpr std::array<double, 3> kRootTone = {0.92, 0.89, 0.82};
constexpr std::array<double, 3> kHairTone = {0.88, 0.86, 0.78};

// splitmix64-style avalanche; lattice noise keyed on (seed, octave, ix, iy).
std::uint64_t hash_u64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

double lattice_value(std::uint64_t seed, int octave, std::int64_t ix, std::int64_t iy) {
    std::uint64_t h = hash_u64(seed ^ (0xa24baed4963ee407ULL * (octave + 1)));
    h = hash_u64(h ^ static_cast<std::uint64_t>(ix));
    h = hash_u64(h ^ static_cast<std::uint64_t>(iy));
    return static_cast<double>(h >> 11) * 0x1.0p-53;
}

double smoothstep(double t) { return t * t * (3.0 - 2.0 * t); }

double value_noise(std::uint64_t seed, int octave, double x, double y, double cell) {
    const double gx = x / cell, gy = y / cell;
    const std::int64_t x0 = static_cast<std::int64_t>(std::floor(gx));
    const std::int64_t y0 = static_cast<std::int64_t>(std::floor(gy));
    const double tx = smoothstep(gx - x0);
    const double ty = smoothstep(gy - y0);
    const double v00 = lattice_value(seed, octave, x0, y0);
    const double v01 = lattice_value(seed, octave, x0 + 1, y0);
    const double v10 = lattice_value(seed, octave, x0, y0 + 1);
    const double v11 = lattice_value(seed, octave, x0 + 1, y0 + 1);
    return (v00 * (1.0 - tx) + v01 * tx) * (1.0 - ty) + (v10 * (1.0 - tx) + v11 * tx) * ty;
}

// Natural cubic spline through (t_k, v_k); returns second derivatives.
std::vector<double> spline_second_derivs(const std::vector<double>& t,
                                         const std::vector<double>& v) {
    const int n = static_cast<int>(t.size());
    std::vector<double> m(n, 0.0), u(n, 0.0);
    for (int i = 1; i < n - 1; ++i) {
        const double sig = (t[i] - t[i - 1]) / (t[i + 1] - t[i - 1]);
        const double p = sig * m[i - 1] + 2.0;
        m[i] = (sig - 1.0) / p;
        u[i] = (v[i + 1] - v[i]) / (t[i + 1] - t[i]) - (v[i] - v[i - 1]) / (t[i] - t[i - 1]);
        u[i] = (6.0 * u[i] / (t[i + 1] - t[i - 1]) - sig * u[i - 1]) / p;
    }
    for (int i = n - 2; i >= 1; --i) m[i] = m[i] * m[i + 1] + u[i];
    return m;
}

double spline_eval(const std::vector<double>& t, const std::vector<double>& v,
                   const std::vector<double>& m, double x) {
    int lo = 0, hi = static_cast<int>(t.size()) - 1;
    while (hi - lo > 1) {
        const int mid = (lo + hi) / 2;
        (t[mid] > x ? hi : lo) = mid;
    }
    const double h = t[hi] - t[lo];
    const double a = (t[hi] - x) / h, b = (x - t[lo]) / h;
    return a * v[lo] + b * v[hi] +
           ((a * a * a - a) * m[lo] + (b * b * b - b) * m[hi]) * h * h / 6.0;
}

double dist_to_segment(double py, double px, const std::array<double, 2>& a,
                       const std::array<double, 2>& b) {
    const double vy = b[0] - a[0], vx = b[1] - a[1];
    const double wy = py - a[0], wx = px - a[1];
    const double len2 = vy * vy + vx * vx;
    double t = len2 > 0.0 ? (wy * vy + wx * vx) / len2 : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    const double dy = wy - t * vy, dx = wx - t * vx;
    return std::sqrt(dy * dy + dx * dx);
}

struct Centerline {
    std::vector<std::array<double, 2>> points;  // one per image row
    std::vector<double> cum;                    // cumulative arc length
    double total = 0.0;
};

Centerline sample_centerline(const SceneParams& p, Rng& rng) {
    const int h = p.height, w = p.width;
    constexpr int kKnots = 8;
    std::vector<double> knot_y(kKnots), knot_x(kKnots);
    const double step_std = w / 20.0;
    const double lo = 0.25 * w, hi = 0.75 * w;
    // Lateral random walk clamped to the middle half so the root stays in frame.
    double x = std::clamp(0.5 * w + rng.normal() * step_std, lo, hi);
    for (int k = 0; k < kKnots; ++k) {
        knot_y[k] = static_cast<double>(k) * (h - 1) / (kKnots - 1);
        knot_x[k] = x;
        x = std::clamp(x + rng.normal() * step_std, lo, hi);
    }
    const std::vector<double> m = spline_second_derivs(knot_y, knot_x);

    Centerline cl;
    cl.points.resize(h);
    cl.cum.assign(h, 0.0);
    for (int y = 0; y < h; ++y)
        cl.points[y] = {static_cast<double>(y), spline_eval(knot_y, knot_x, m, y)};
    for (int y = 1; y < h; ++y) {
        const double dx = cl.points[y][1] - cl.points[y - 1][1];
        cl.cum[y] = cl.cum[y - 1] + std::sqrt(1.0 + dx * dx);
    }
    cl.total = cl.cum.back();
    return cl;
}

// One hair: fixed draw order (arc position, side, angle jitter, length).
// The anchor sits on the rendered root support edge (half-width plus the
// Gaussian fringe), so the visible hair extent matches the record length.
HairRecord draw_hair(const SceneParams& p, const Centerline& cl, Rng& rng) {
    HairRecord hr;
    const double s = rng.uniform(0.0, cl.total);
    const auto it = std::upper_bound(cl.cum.begin(), cl.cum.end(), s);
    const int seg = std::clamp(static_cast<int>(it - cl.cum.begin()), 1,
                               static_cast<int>(cl.cum.size()) - 1);
    const double tx = cl.points[seg][1] - cl.points[seg - 1][1];
    const double tn = std::sqrt(1.0 + tx * tx);
    const double side = rng.uniform() < 0.5 ? 1.0 : -1.0;
    const double ny = side * (-tx / tn), nx = side * (1.0 / tn);
    const double span = cl.cum[seg] - cl.cum[seg - 1];
    const double frac = span > 0.0 ? (s - cl.cum[seg - 1]) / span : 0.0;
    const double cy = cl.points[seg - 1][0] + frac;
    const double cx = cl.points[seg - 1][1] + frac * tx;
    const double support_edge =
        p.root_width_px * 0.5 + kEdgeSigma * std::sqrt(2.0 * std::log(2.0));
    hr.anchor_y = cy + ny * support_edge;
    hr.anchor_x = cx + nx * support_edge;
    const double jitter = rng.uniform(-25.0 * kPi / 180.0, 25.0 * kPi / 180.0);
    hr.angle = std::atan2(ny, nx) + jitter;
    hr.length_px = std::clamp(rng.normal(p.hair_len_mean_px, p.hair_len_std_px), 3.0,
                              3.0 * p.hair_len_mean_px);
    hr.width_px = p.hair_width_px;
    return hr;
}

struct StrokeMask {
    std::vector<std::uint8_t> on;  // support: alpha >= 0.5
    std::vector<double> alpha;
    int area = 0;
    int min_y = 0, max_y = -1, min_x = 0, max_x = -1;
    bool touches_border = false;
};

StrokeMask hair_stroke(const HairRecord& hr, int h, int w) {
    StrokeMask sm;
    sm.alpha.assign(static_cast<std::size_t>(h) * w, 0.0);
    // The record length is the hair's digital path length. An 8-connected
    // chain measures a unit Euclidean step at angle t as
    // max|cos,sin| + (sqrt(2)-1)*min|cos,sin|, so the drawn Euclidean
    // segment is shortened by that factor. (The tip cap extends the support
    // by one radius; thinning eats about the same back at the blunt
    // root-side cut, so those cancel, measured.)
    const double c = std::abs(std::cos(hr.angle));
    const double s = std::abs(std::sin(hr.angle));
    const double digital_factor =
        std::max(c, s) + (std::sqrt(2.0) - 1.0) * std::min(c, s);
    const double seg_len = std::max(hr.length_px / digital_factor, 1.0);
    const std::array<double, 2> a = {hr.anchor_y, hr.anchor_x};
    const std::array<double, 2> b = {hr.anchor_y + std::sin(hr.angle) * seg_len,
                                     hr.anchor_x + std::cos(hr.angle) * seg_len};
    rasterize_stroke({a, b}, hr.width_px * 0.5, sm.alpha, h, w);
    sm.on.assign(sm.alpha.size(), 0);
    sm.min_y = h;
    sm.min_x = w;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            if (sm.alpha[static_cast<std::size_t>(y) * w + x] >= 0.5) {
                sm.on[static_cast<std::size_t>(y) * w + x] = 1;
                ++sm.area;
                sm.min_y = std::min(sm.min_y, y);
                sm.max_y = std::max(sm.max_y, y);
                sm.min_x = std::min(sm.min_x, x);
                sm.max_x = std::max(sm.max_x, x);
                if (y == 0 || y == h - 1 || x == 0 || x == w - 1) sm.touches_border = true;
            }
    return sm;
}

bool single_component(const StrokeMask& sm, int h, int w) {
    if (sm.area == 0) return false;
    std::vector<std::uint8_t> seen(sm.on.size(), 0);
    std::deque<std::pair<int, int>> queue;
    for (int y = sm.min_y; y <= sm.max_y && queue.empty(); ++y)
        for (int x = sm.min_x; x <= sm.max_x && queue.empty(); ++x)
            if (sm.on[static_cast<std::size_t>(y) * w + x]) queue.emplace_back(y, x);
    seen[static_cast<std::size_t>(queue.front().first) * w + queue.front().second] = 1;
    int visited = 0;
    while (!queue.empty()) {
        const auto [y, x] = queue.front();
        queue.pop_front();
        ++visited;
        for (int dy = -1; dy <= 1; ++dy)
            for (int dx = -1; dx <= 1; ++dx) {
                const int ny = y + dy, nx = x + dx;
                if (ny < 0 || ny >= h || nx < 0 || nx >= w) continue;
                const std::size_t i = static_cast<std::size_t>(ny) * w + nx;
                if (sm.on[i] && !seen[i]) {
                    seen[i] = 1;
                    queue.emplace_back(ny, nx);
                }
            }
    }
    return visited == sm.area;
}

// True when the candidate mask comes within one pixel (8-neighborhood) of
// the union of earlier hair masks; separation keeps instance count equal to
// connected-component count downstream.
bool near_union(const StrokeMask& sm, const std::vector<std::uint8_t>& unioned,
                int h, int w) {
    for (int y = sm.min_y; y <= sm.max_y; ++y)
        for (int x = sm.min_x; x <= sm.max_x; ++x) {
            if (!sm.on[static_cast<std::size_t>(y) * w + x]) continue;
            for (int dy = -1; dy <= 1; ++dy)
                for (int dx = -1; dx <= 1; ++dx) {
                    const int ny = y + dy, nx = x + dx;
                    if (ny < 0 || ny >= h || nx < 0 || nx >= w) continue;
                    if (unioned[static_cast<std::size_t>(ny) * w + nx]) return true;
                }
        }
    return false;
}

void composite_stroke(ImageBuffer& img, const std::vector<double>& alpha,
                      const std::array<double, 3>& tone) {
    const std::size_t n = img.pixel_count();
    for (std::size_t i = 0; i < n; ++i) {
        const double a = alpha[i];
        if (a <= 0.0) continue;
        for (int c = 0; c < 3; ++c)
            img.data[i * 3 + c] = img.data[i * 3 + c] * (1.0 - a) + tone[c] * a;
    }
}

}  // namespace

void SceneParams::validate() const {
    if (height < 64 || width < 64) throw ArgumentError("SceneParams: dims must be >= 64");
    if (root_width_px < 2.0) throw ArgumentError("SceneParams: root_width_px must be >= 2");
    if (hair_rate < 0.0) throw ArgumentError("SceneParams: hair_rate must be >= 0");
    if (hair_len_mean_px <= 0.0) throw ArgumentError("SceneParams: hair_len_mean_px must be > 0");
    if (hair_len_std_px < 0.0) throw ArgumentError("SceneParams: hair_len_std_px must be >= 0");
    if (hair_width_px <= 0.0) throw ArgumentError("SceneParams: hair_width_px must be > 0");
    if (bg_roughness < 0.0 || bg_roughness > 1.0)
        throw ArgumentError("SceneParams: bg_roughness must be in [0, 1]");
    if (illum_gradient < 0.0 || illum_gradient > 0.5)
        throw ArgumentError("SceneParams: illum_gradient must be in [0, 0.5]");
}

void rasterize_stroke(const std::vector<std::array<double, 2>>& points,
                      double half_width, std::vector<double>& alpha,
                      int height, int width) {
    if (points.size() < 2) return;
    const double reach = half_width + 4.0 * kEdgeSigma;
    const int nseg = static_cast<int>(points.size()) - 1;
    std::vector<double> seg_min_y(nseg), seg_max_y(nseg);
    for (int s = 0; s < nseg; ++s) {
        seg_min_y[s] = std::min(points[s][0], points[s + 1][0]) - reach;
        seg_max_y[s] = std::max(points[s][0], points[s + 1][0]) + reach;
    }
#pragma omp parallel for schedule(static)
    for (int y = 0; y < height; ++y) {
        for (int s = 0; s < nseg; ++s) {
            if (y < seg_min_y[s] || y > seg_max_y[s]) continue;
            const double x_lo = std::min(points[s][1], points[s + 1][1]) - reach;
            const double x_hi = std::max(points[s][1], points[s + 1][1]) + reach;
            const int xa = std::max(0, static_cast<int>(std::floor(x_lo)));
            const int xb = std::min(width - 1, static_cast<int>(std::ceil(x_hi)));
            for (int x = xa; x <= xb; ++x) {
                const double d = dist_to_segment(y, x, points[s], points[s + 1]);
                double a;
                if (d <= half_width) {
                    a = 1.0;
                } else {
                    const double t = (d - half_width) / kEdgeSigma;
                    a = std::exp(-0.5 * t * t);
                }
                double& cell = alpha[static_cast<std::size_t>(y) * width + x];
                cell = std::max(cell, a);
            }
        }
    }
}

ImageBuffer render_background(const SceneParams& p) {
    p.validate();
    ImageBuffer img(p.height, p.width, 3);
    const double r = p.bg_roughness;
    double norm = 0.0;
    double weight[4];
    for (int o = 0; o < 4; ++o) {
        weight[o] = std::pow(r, o + 1);
        norm += weight[o];
    }
#pragma omp parallel for schedule(static)
    for (int y = 0; y < p.height; ++y) {
        for (int x = 0; x < p.width; ++x) {
            double n = 0.0;
            for (int o = 0; o < 4; ++o) {
                if (weight[o] == 0.0) continue;
                const double cell = std::max(2.0, 16.0 / (1 << o));
                n += weight[o] * value_noise(p.seed, o, x, y, cell);
            }
            const double nn = norm > 0.0 ? n / norm : 0.5;
            const double tilt =
                p.illum_gradient * (static_cast<double>(x) / (p.width - 1) - 0.5);
            for (int c = 0; c < 3; ++c) {
                const double v = kSoilTone[c] * (0.7 + 0.6 * nn) + tilt;
                img.at(y, x, c) = std::clamp(v, 0.0, 1.0);
            }
        }
    }
    return img;
}

RootGeometry sample_root_geometry(const SceneParams& p) {
    p.validate();
    Rng rng(p.seed);
    const Centerline cl = sample_centerline(p, rng);
    RootGeometry geo;
    geo.centerline = cl.points;
    geo.arc_length_px = cl.total;
    const std::uint64_t count = rng.poisson(p.hair_rate * cl.total / 100.0);
    geo.hairs.reserve(count);
    for (std::uint64_t i = 0; i < count; ++i) geo.hairs.push_back(draw_hair(p, cl, rng));
    return geo;
}

RootScene generate_scene(const SceneParams& p) {
    p.validate();
    Rng rng(p.seed);
    const Centerline cl = sample_centerline(p, rng);
    const std::uint64_t count = rng.poisson(p.hair_rate * cl.total / 100.0);
    std::vector<HairRecord> initial;
    initial.reserve(count);
    for (std::uint64_t i = 0; i < count; ++i) initial.push_back(draw_hair(p, cl, rng));

    const int h = p.height, w = p.width;
    const std::size_t n = static_cast<std::size_t>(h) * w;

    RootScene scene;
    scene.image = render_background(p);

    std::vector<double> root_alpha(n, 0.0);
    rasterize_stroke(cl.points, p.root_width_px * 0.5, root_alpha, h, w);
    composite_stroke(scene.image, root_alpha, kRootTone);
    scene.root_mask = ImageBuffer(h, w, 1);
    std::vector<std::uint8_t> root_on(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
        root_on[i] = root_alpha[i] >= 0.5 ? 1 : 0;
        scene.root_mask.data[i] = root_on[i];
    }

    // Pixels a well-placed hair may lose to the root body: roughly the
    // backward half of the anchor cap. Losing more means the stroke grazes
    // along or pokes into the root and its visible length no longer matches
    // the record.
    const double support_r =
        p.hair_width_px * 0.5 + kEdgeSigma * std::sqrt(2.0 * std::log(2.0));
    const int swallow_budget = static_cast<int>(1.6 * support_r * support_r) + 3;

    std::vector<std::uint8_t> hair_union(n, 0);
    for (const HairRecord& first : initial) {
        HairRecord hr = first;
        bool placed = false;
        for (int attempt = 0; attempt <= 10 && !placed; ++attempt) {
            if (attempt > 0) hr = draw_hair(p, cl, rng);
            StrokeMask sm = hair_stroke(hr, h, w);
            if (sm.touches_border) continue;
            // Instance mask excludes the root body so downstream labeling
            // sees exactly this pixel set.
            int removed = 0;
            for (std::size_t i = 0; i < n; ++i)
                if (sm.on[i] && root_on[i]) {
                    sm.on[i] = 0;
                    --sm.area;
                    ++removed;
                }
            if (removed > swallow_budget) continue;
            if (sm.area < kMinHairMaskArea) continue;
            if (!single_component(sm, h, w)) continue;
            if (near_union(sm, hair_union, h, w)) continue;

            composite_stroke(scene.image, sm.alpha, kHairTone);
            ImageBuffer mask(h, w, 1);
            for (std::size_t i = 0; i < n; ++i) {
                mask.data[i] = sm.on[i];
                if (sm.on[i]) hair_union[i] = 1;
            }
            scene.hair_masks.push_back(std::move(mask));
            scene.truth.hair_lengths_px.push_back(hr.length_px);
            scene.truth.hair_areas_px.push_back(static_cast<double>(sm.area));
            placed = true;
        }
    }
    scene.truth.hair_count = static_cast<int>(scene.hair_masks.size());
    return scene;
}

}  // namespace rootsr
