#include "rootsr/network.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>
#include <numeric>

#include <json.hpp>

#include "rootsr/kernels.hpp"
#include "rootsr/parallel.hpp"
#include "rootsr/rng.hpp"

using nlohmann::json;

namespace rootsr {

namespace {

constexpr double kInvSqrt2 = 0.70710678118654752440084436210485;
constexpr double kInvSqrt2Pi = 0.39894228040143267793994605993438;

double gelu_scalar(double x) { return 0.5 * x * (1.0 + std::erf(x * kInvSqrt2)); }

double gelu_grad_scalar(double x) {
    return 0.5 * (1.0 + std::erf(x * kInvSqrt2)) + x * kInvSqrt2Pi * std::exp(-0.5 * x * x);
}

}  // namespace

void NetworkConfig::validate() const {
    if (n_frames < 3 || n_frames % 2 == 0)
        throw ConfigError("network.n_frames: must be odd and >= 3");
    if (embed_dim < 4) throw ConfigError("network.embed_dim: must be >= 4");
    if (scale != 2) throw ConfigError("network.scale: only 2 is supported");
    if (rdg_count < 1) throw ConfigError("network.rdg_count: must be >= 1");
    if (blocks_per_group < 1) throw ConfigError("network.blocks_per_group: must be >= 1");
    if (growth < 1) throw ConfigError("network.growth: must be >= 1");
}

void Conv2d::init(int in_channels, int out_channels, int k, Rng& rng) {
    in_c = in_channels;
    out_c = out_channels;
    ksize = k;
    w.resize(static_cast<std::size_t>(out_c) * in_c * k * k);
    b.assign(out_c, 0.0);
    // variance-preserving init: most of the pipeline is linear conv chains
    // (shallow -> fusion -> merge -> head), so a gain above 1 compounds and
    // the untrained output lands far outside [0, 1]
    const double stddev = std::sqrt(1.0 / (static_cast<double>(in_c) * k * k));
    for (double& v : w) v = rng.normal() * stddev;
    gw.assign(w.size(), 0.0);
    gb.assign(b.size(), 0.0);
}

Tensor Conv2d::forward(const Tensor& x) const {
    if (x.channels != in_c) throw ArgumentError("Conv2d: channel mismatch");
    Tensor y(out_c, x.height, x.width);
    kernels::conv2d_forward(x.data.data(), in_c, x.height, x.width, w.data(), b.data(),
                            out_c, ksize, y.data.data());
    return y;
}

Tensor Conv2d::backward(const Tensor& x, const Tensor& gy) {
    Tensor gx(in_c, x.height, x.width);
    kernels::conv2d_backward_input(gy.data.data(), out_c, x.height, x.width, w.data(),
                                   in_c, ksize, gx.data.data());
    kernels::conv2d_backward_params(x.data.data(), in_c, x.height, x.width,
                                    gy.data.data(), out_c, ksize, gw.data(), gb.data());
    return gx;
}

void Conv2d::zero_grad() {
    std::fill(gw.begin(), gw.end(), 0.0);
    std::fill(gb.begin(), gb.end(), 0.0);
}

Tensor gelu(const Tensor& x) {
    Tensor y(x.channels, x.height, x.width);
    const std::int64_t n = static_cast<std::int64_t>(x.size());
#pragma omp parallel for schedule(static) if (n >= 16384)
    for (std::int64_t i = 0; i < n; ++i) y.data[i] = gelu_scalar(x.data[i]);
    return y;
}

Tensor gelu_backward(const Tensor& x, const Tensor& gy) {
    Tensor gx(x.channels, x.height, x.width);
    const std::int64_t n = static_cast<std::int64_t>(x.size());
#pragma omp parallel for schedule(static) if (n >= 16384)
    for (std::int64_t i = 0; i < n; ++i)
        gx.data[i] = gy.data[i] * gelu_grad_scalar(x.data[i]);
    return gx;
}

Tensor pixel_shuffle2(const Tensor& x) {
    if (x.channels % 4 != 0) throw ArgumentError("pixel_shuffle2: channels must divide by 4");
    const int oc = x.channels / 4;
    Tensor y(oc, x.height * 2, x.width * 2);
    for (int c = 0; c < oc; ++c)
        for (int r = 0; r < 2; ++r)
            for (int s = 0; s < 2; ++s) {
                const double* src = x.plane(c * 4 + r * 2 + s);
                for (int yy = 0; yy < x.height; ++yy)
                    for (int xx = 0; xx < x.width; ++xx)
                        y.at(c, 2 * yy + r, 2 * xx + s) = src[yy * x.width + xx];
            }
    return y;
}

Tensor pixel_shuffle2_backward(const Tensor& gy) {
    if (gy.height % 2 != 0 || gy.width % 2 != 0)
        throw ArgumentError("pixel_shuffle2_backward: odd dims");
    const int h = gy.height / 2, w = gy.width / 2;
    Tensor gx(gy.channels * 4, h, w);
    for (int c = 0; c < gy.channels; ++c)
        for (int r = 0; r < 2; ++r)
            for (int s = 0; s < 2; ++s) {
                double* dst = gx.plane(c * 4 + r * 2 + s);
                for (int yy = 0; yy < h; ++yy)
                    for (int xx = 0; xx < w; ++xx)
                        dst[yy * w + xx] = gy.at(c, 2 * yy + r, 2 * xx + s);
            }
    return gx;
}

MiDrct MiDrct::create(const NetworkConfig& cfg) {
    cfg.validate();
    MiDrct m;
    m.cfg = cfg;
    Rng rng(cfg.seed ^ 0x5eed5eedULL);
    const int f = cfg.embed_dim;
    m.shallow.init(3, f, 3, rng);
    m.fusion.init(cfg.n_frames * f, f, 3, rng);
    m.rdgs.resize(cfg.rdg_count);
    for (Rdg& g : m.rdgs) {
        g.blocks.resize(cfg.blocks_per_group);
        for (int b = 0; b < cfg.blocks_per_group; ++b)
            g.blocks[b].init(f + b * cfg.growth, cfg.growth, 3, rng);
        g.compress.init(f + cfg.blocks_per_group * cfg.growth, f, 1, rng);
    }
    m.merge.init(2 * f, f, 3, rng);
    m.head.init(f, 4 * 3, 3, rng);
    return m;
}

void MiDrct::zero_grad() {
    for_each_param([](const std::string&, std::vector<double>&, std::vector<double>& g) {
        std::fill(g.begin(), g.end(), 0.0);
    });
}

void MiDrct::for_each_param(const std::function<void(const std::string&, std::vector<double>&,
                                                     std::vector<double>&)>& fn) {
    fn("shallow.w", shallow.w, shallow.gw);
    fn("shallow.b", shallow.b, shallow.gb);
    fn("fusion.w", fusion.w, fusion.gw);
    fn("fusion.b", fusion.b, fusion.gb);
    for (std::size_t g = 0; g < rdgs.size(); ++g) {
        const std::string base = "rdg" + std::to_string(g) + ".";
        for (std::size_t b = 0; b < rdgs[g].blocks.size(); ++b) {
            const std::string bb = base + "block" + std::to_string(b) + ".";
            fn(bb + "w", rdgs[g].blocks[b].w, rdgs[g].blocks[b].gw);
            fn(bb + "b", rdgs[g].blocks[b].b, rdgs[g].blocks[b].gb);
        }
        fn(base + "compress.w", rdgs[g].compress.w, rdgs[g].compress.gw);
        fn(base + "compress.b", rdgs[g].compress.b, rdgs[g].compress.gb);
    }
    fn("merge.w", merge.w, merge.gw);
    fn("merge.b", merge.b, merge.gb);
    fn("head.w", head.w, head.gw);
    fn("head.b", head.b, head.gb);
}

std::size_t MiDrct::param_count() const {
    std::size_t total = shallow.param_count() + fusion.param_count() +
                        merge.param_count() + head.param_count();
    for (const Rdg& g : rdgs) {
        for (const Conv2d& blk : g.blocks) total += blk.param_count();
        total += g.compress.param_count();
    }
    return total;
}

namespace {

struct RdgTrace {
    std::vector<Tensor> cats;     // cats[b]: input to block b; cats[B]: input to compress
    std::vector<Tensor> preacts;  // conv output before the nonlinearity
};

struct Trace {
    std::vector<Tensor> frames;
    std::vector<Tensor> shallow;
    std::vector<ShiftEstimate> shifts;
    Tensor concat;
    Tensor fused;
    std::vector<RdgTrace> rdg;
    Tensor deep;
    Tensor skip;
    Tensor merged;
    Tensor up;
    Tensor out;
};

Tensor append_channels(const Tensor& a, const Tensor& b) {
    return concat_channels({&a, &b});
}

void rdg_forward(const MiDrct::Rdg& g, const Tensor& x, RdgTrace& tr, Tensor& out) {
    const int blocks = static_cast<int>(g.blocks.size());
    tr.cats.clear();
    tr.preacts.clear();
    tr.cats.reserve(blocks + 1);
    tr.preacts.reserve(blocks);
    tr.cats.push_back(x);
    for (int b = 0; b < blocks; ++b) {
        tr.preacts.push_back(g.blocks[b].forward(tr.cats[b]));
        tr.cats.push_back(append_channels(tr.cats[b], gelu(tr.preacts[b])));
    }
    out = g.compress.forward(tr.cats[blocks]);
    // residual over the group
    for (std::size_t i = 0; i < out.size(); ++i) out.data[i] += x.data[i];
}

// pinned_shifts, when given, bypasses estimation; the finite-difference
// checker uses it because the analytic gradient treats the shift as a
// constant of the graph.
void forward_impl(const MiDrct& m, const std::vector<Tensor>& frames, Trace& tr,
                  FusionStats* stats,
                  const std::vector<ShiftEstimate>* pinned_shifts = nullptr) {
    const int n = m.cfg.n_frames;
    if (static_cast<int>(frames.size()) != n)
        throw ConfigError("forward: expected " + std::to_string(n) + " frames, got " +
                          std::to_string(frames.size()));
    const int ref = n / 2;
    tr.shallow.resize(n);
    tr.shifts.assign(n, ShiftEstimate{});
    for (int i = 0; i < n; ++i) {
        if (frames[i].channels != 3) throw ArgumentError("forward: frames must be 3-channel");
        if (frames[i].height != frames[0].height || frames[i].width != frames[0].width)
            throw ArgumentError("forward: frame dims mismatch");
        tr.shallow[i] = m.shallow.forward(frames[i]);
    }

    std::vector<Tensor> aligned(n);
    for (int i = 0; i < n; ++i) {
        if (!m.cfg.align_enabled || i == ref) {
            aligned[i] = tr.shallow[i];
            continue;
        }
        ShiftEstimate est;
        if (pinned_shifts) {
            est = (*pinned_shifts)[i];
        } else {
            if (stats) ++stats->align_attempts;
            try {
                est = estimate_feature_shift(tr.shallow[ref], tr.shallow[i]);
            } catch (const DegenerateInputError&) {
                est = ShiftEstimate{};  // flat patch: no shift evidence, fall back to zero
                if (stats) ++stats->degenerate_fallbacks;
            }
        }
        tr.shifts[i] = est;
        aligned[i] = warp_features(tr.shallow[i], est);
    }

    std::vector<const Tensor*> parts(n);
    for (int i = 0; i < n; ++i) parts[i] = &aligned[i];
    tr.concat = concat_channels(parts);
    tr.fused = m.fusion.forward(tr.concat);

    tr.rdg.resize(m.rdgs.size());
    Tensor x = tr.fused;
    for (std::size_t g = 0; g < m.rdgs.size(); ++g) {
        Tensor out;
        rdg_forward(m.rdgs[g], x, tr.rdg[g], out);
        x = std::move(out);
    }
    tr.deep = std::move(x);

    tr.skip = append_channels(tr.fused, tr.deep);
    tr.merged = m.merge.forward(tr.skip);
    tr.up = m.head.forward(tr.merged);
    tr.out = pixel_shuffle2(tr.up);
}

// Mirrors forward_impl exactly; const_cast-free by taking the mutable model.
void backward_impl(MiDrct& m, const Trace& tr, const Tensor& gout) {
    const int n = m.cfg.n_frames;
    const int ref = n / 2;
    const int f = m.cfg.embed_dim;

    Tensor g_up = pixel_shuffle2_backward(gout);
    Tensor g_merged = m.head.backward(tr.merged, g_up);
    Tensor g_skip = m.merge.backward(tr.skip, g_merged);

    // split skip gradient into (fused, deep)
    Tensor g_fused(f, g_skip.height, g_skip.width);
    Tensor g_deep(f, g_skip.height, g_skip.width);
    const std::size_t plane = static_cast<std::size_t>(g_skip.height) * g_skip.width;
    std::copy_n(g_skip.data.begin(), plane * f, g_fused.data.begin());
    std::copy_n(g_skip.data.begin() + plane * f, plane * f, g_deep.data.begin());

    Tensor g_x = std::move(g_deep);
    for (int g = static_cast<int>(m.rdgs.size()) - 1; g >= 0; --g) {
        const RdgTrace& rt = tr.rdg[g];
        MiDrct::Rdg& grp = m.rdgs[g];
        const int blocks = static_cast<int>(grp.blocks.size());

        // out = compress(cat_B) + x  => gradient reaches both branches
        Tensor g_cat = grp.compress.backward(rt.cats[blocks], g_x);
        // g_cat spans [x | y_0 | ... | y_{B-1}]; peel blocks from the back,
        // accumulating what each block's input gradient adds to the front.
        for (int b = blocks - 1; b >= 0; --b) {
            const std::size_t front = rt.cats[b].size();
            Tensor g_y(m.cfg.growth, g_x.height, g_x.width);
            std::copy_n(g_cat.data.begin() + front, g_y.size(), g_y.data.begin());
            Tensor g_pre = gelu_backward(rt.preacts[b], g_y);
            Tensor g_in = grp.blocks[b].backward(rt.cats[b], g_pre);
            g_cat.data.resize(front);
            g_cat.channels = rt.cats[b].channels;
            for (std::size_t i = 0; i < front; ++i) g_cat.data[i] += g_in.data[i];
        }
        // g_cat now covers the group input; add the residual path
        for (std::size_t i = 0; i < g_x.size(); ++i) g_cat.data[i] += g_x.data[i];
        g_x = std::move(g_cat);
    }
    for (std::size_t i = 0; i < g_fused.size(); ++i) g_fused.data[i] += g_x.data[i];

    Tensor g_concat = m.fusion.backward(tr.concat, g_fused);
    for (int i = 0; i < n; ++i) {
        Tensor g_aligned(f, g_concat.height, g_concat.width);
        std::copy_n(g_concat.data.begin() + plane * f * i, plane * f,
                    g_aligned.data.begin());
        Tensor g_shallow = (m.cfg.align_enabled && i != ref)
                               ? warp_features_backward(g_aligned, tr.shifts[i])
                               : std::move(g_aligned);
        m.shallow.backward(tr.frames[i], g_shallow);
    }
}

std::vector<Tensor> frames_to_tensors(const BurstSample& sample) {
    std::vector<Tensor> frames;
    frames.reserve(sample.frames.size());
    for (const ImageBuffer& f : sample.frames) frames.push_back(tensor_from_image(f));
    return frames;
}

}  // namespace

Tensor MiDrct::shallow_extract(const ImageBuffer& frame) const {
    if (frame.channels != 3) throw ArgumentError("shallow_extract: frame must be 3-channel");
    return shallow.forward(tensor_from_image(frame));
}

Tensor MiDrct::fuse_features(const std::vector<Tensor>& feats, FusionStats* stats) const {
    const int n = cfg.n_frames;
    if (static_cast<int>(feats.size()) != n)
        throw ArgumentError("fuse_features: expected " + std::to_string(n) + " feature maps");
    for (const Tensor& t : feats)
        if (!t.same_shape(feats[0])) throw ArgumentError("fuse_features: dims mismatch");
    const int ref = n / 2;
    std::vector<Tensor> aligned(n);
    for (int i = 0; i < n; ++i) {
        if (!cfg.align_enabled || i == ref) {
            aligned[i] = feats[i];
            continue;
        }
        if (stats) ++stats->align_attempts;
        ShiftEstimate est;
        try {
            est = estimate_feature_shift(feats[ref], feats[i]);
        } catch (const DegenerateInputError&) {
            est = ShiftEstimate{};
            if (stats) ++stats->degenerate_fallbacks;
        }
        aligned[i] = warp_features(feats[i], est);
    }
    std::vector<const Tensor*> parts(n);
    for (int i = 0; i < n; ++i) parts[i] = &aligned[i];
    return fusion.forward(concat_channels(parts));
}

Tensor MiDrct::deep_extract(const Tensor& x) const {
    if (x.channels != cfg.embed_dim) throw ArgumentError("deep_extract: channel mismatch");
    Tensor cur = x;
    for (const Rdg& g : rdgs) {
        RdgTrace tr;
        Tensor out;
        rdg_forward(g, cur, tr, out);
        cur = std::move(out);
    }
    return cur;
}

Tensor MiDrct::reconstruct_raw(const Tensor& shallow_feats, const Tensor& deep_feats) const {
    if (!shallow_feats.same_shape(deep_feats))
        throw ArgumentError("reconstruct: shallow/deep dims mismatch");
    const Tensor skip = concat_channels({&shallow_feats, &deep_feats});
    return pixel_shuffle2(head.forward(merge.forward(skip)));
}

ImageBuffer MiDrct::reconstruct(const Tensor& shallow_feats, const Tensor& deep_feats) const {
    return image_from_tensor(reconstruct_raw(shallow_feats, deep_feats), true);
}

Tensor MiDrct::forward_raw(const std::vector<Tensor>& frames, FusionStats* stats) const {
    Trace tr;
    tr.frames = frames;
    forward_impl(*this, frames, tr, stats);
    return std::move(tr.out);
}

ImageBuffer MiDrct::forward(const BurstSample& sample, FusionStats* stats) const {
    return image_from_tensor(forward_raw(frames_to_tensors(sample), stats), true);
}

double loss_value(const Tensor& pred, const Tensor& target, LossKind kind, Tensor* grad) {
    if (!pred.same_shape(target)) throw ArgumentError("loss: shape mismatch");
    const std::size_t n = pred.size();
    const double inv = 1.0 / static_cast<double>(n);
    double total;
    if (kind == LossKind::L1) {
        total = parallel_sum_indexed(n, [&](std::size_t i) {
            return std::abs(pred.data[i] - target.data[i]);
        });
        if (grad) {
            *grad = Tensor(pred.channels, pred.height, pred.width);
            for (std::size_t i = 0; i < n; ++i) {
                const double d = pred.data[i] - target.data[i];
                grad->data[i] = d > 0.0 ? inv : (d < 0.0 ? -inv : 0.0);
            }
        }
    } else {
        total = parallel_sum_indexed(n, [&](std::size_t i) {
            const double d = pred.data[i] - target.data[i];
            return d * d;
        });
        if (grad) {
            *grad = Tensor(pred.channels, pred.height, pred.width);
            for (std::size_t i = 0; i < n; ++i)
                grad->data[i] = 2.0 * (pred.data[i] - target.data[i]) * inv;
        }
    }
    return total * inv;
}

namespace {

struct FlatParams {
    std::vector<std::vector<double>*> weights;
    std::vector<std::vector<double>*> grads;
    std::vector<std::string> names;
    std::size_t total = 0;
};

FlatParams flatten(MiDrct& m) {
    FlatParams fp;
    m.for_each_param([&](const std::string& name, std::vector<double>& w,
                         std::vector<double>& g) {
        fp.names.push_back(name);
        fp.weights.push_back(&w);
        fp.grads.push_back(&g);
        fp.total += w.size();
    });
    return fp;
}

void check_training_sample(const BurstSample& s, const NetworkConfig& cfg,
                           const char* which, std::size_t idx) {
    const std::string at = std::string(which) + " sample " + std::to_string(idx);
    if (s.frame_count() != cfg.n_frames)
        throw ConfigError(at + ": has " + std::to_string(s.frame_count()) +
                          " frames, config expects " + std::to_string(cfg.n_frames));
    if (!s.hr_target) throw ArgumentError(at + ": missing HR target");
    const ImageBuffer& hr = *s.hr_target;
    const ImageBuffer& f0 = s.frames[0];
    if (hr.height != f0.height * cfg.scale || hr.width != f0.width * cfg.scale)
        throw ArgumentError(at + ": HR target dims do not match scale x LR dims");
}

}  // namespace

Checkpoint train(const std::vector<BurstSample>& train_set,
                 const std::vector<BurstSample>& val_set, const NetworkConfig& cfg,
                 const TrainHyper& hyper, TrainLog* log) {
    cfg.validate();
    if (train_set.empty()) throw ArgumentError("train: empty training set");
    if (val_set.empty()) throw ArgumentError("train: empty validation set");
    if (hyper.epochs < 1) throw ArgumentError("train: epochs must be >= 1");
    if (hyper.batch_size < 1) throw ArgumentError("train: batch_size must be >= 1");
    for (std::size_t i = 0; i < train_set.size(); ++i)
        check_training_sample(train_set[i], cfg, "train", i);
    for (std::size_t i = 0; i < val_set.size(); ++i)
        check_training_sample(val_set[i], cfg, "val", i);

    // Pre-convert once; the sets are reused every epoch.
    std::vector<std::vector<Tensor>> train_frames(train_set.size());
    std::vector<Tensor> train_targets(train_set.size());
    for (std::size_t i = 0; i < train_set.size(); ++i) {
        train_frames[i] = frames_to_tensors(train_set[i]);
        train_targets[i] = tensor_from_image(*train_set[i].hr_target);
    }
    std::vector<std::vector<Tensor>> val_frames(val_set.size());
    std::vector<Tensor> val_targets(val_set.size());
    for (std::size_t i = 0; i < val_set.size(); ++i) {
        val_frames[i] = frames_to_tensors(val_set[i]);
        val_targets[i] = tensor_from_image(*val_set[i].hr_target);
    }

    MiDrct model = MiDrct::create(cfg);
    FlatParams fp = flatten(model);
    std::vector<double> adam_m(fp.total, 0.0), adam_v(fp.total, 0.0);
    std::int64_t adam_t = 0;

    double best_val = std::numeric_limits<double>::infinity();
    int best_epoch = 0;
    std::vector<std::vector<double>> best_weights;

    const auto eval_val = [&]() {
        std::vector<double> losses(val_set.size());
#pragma omp parallel for schedule(dynamic)
        for (std::int64_t i = 0; i < static_cast<std::int64_t>(val_set.size()); ++i) {
            FusionStats st;
            const Tensor out = model.forward_raw(val_frames[i], &st);
            losses[i] = loss_value(out, val_targets[i], hyper.loss);
        }
        double total = 0.0;
        for (double v : losses) total += v;
        return total / static_cast<double>(val_set.size());
    };

    std::vector<std::size_t> order(train_set.size());
    std::iota(order.begin(), order.end(), 0);

    for (int epoch = 1; epoch <= hyper.epochs; ++epoch) {
        // Fixed per-(seed, epoch) shuffle: Fisher-Yates on our own Rng.
        Rng shuffle_rng(hyper.seed * 1000003ULL + static_cast<std::uint64_t>(epoch));
        for (std::size_t i = order.size(); i > 1; --i) {
            const std::size_t j = shuffle_rng.uniform_index(i);
            std::swap(order[i - 1], order[j]);
        }

        int step = 0;
        for (std::size_t start = 0; start < order.size(); start += hyper.batch_size) {
            const std::size_t stop = std::min(order.size(),
                                              start + static_cast<std::size_t>(hyper.batch_size));
            const int items = static_cast<int>(stop - start);

            std::vector<MiDrct> clones(items, model);
            std::vector<double> item_losses(items, 0.0);
            std::vector<FusionStats> item_stats(items);
#pragma omp parallel for schedule(dynamic)
            for (int it = 0; it < items; ++it) {
                const std::size_t si = order[start + it];
                clones[it].zero_grad();
                Trace tr;
                tr.frames = train_frames[si];
                forward_impl(clones[it], train_frames[si], tr, &item_stats[it]);
                Tensor grad;
                item_losses[it] = loss_value(tr.out, train_targets[si], hyper.loss, &grad);
                backward_impl(clones[it], tr, grad);
            }

            double batch_loss = 0.0;
            for (int it = 0; it < items; ++it) batch_loss += item_losses[it];
            batch_loss /= items;
            if (!std::isfinite(batch_loss))
                throw Error("train: loss diverged (non-finite) at epoch " +
                            std::to_string(epoch) + " step " + std::to_string(step));
            if (log) {
                log->steps.push_back({epoch, step, batch_loss});
                for (const FusionStats& st : item_stats)
                    log->align_fallbacks += st.degenerate_fallbacks;
            }

            // Reduce clone gradients in item order, then one Adam step.
            ++adam_t;
            const double bc1 = 1.0 - std::pow(hyper.beta1, static_cast<double>(adam_t));
            const double bc2 = 1.0 - std::pow(hyper.beta2, static_cast<double>(adam_t));
            std::vector<std::vector<std::vector<double>*>> clone_grads(items);
            for (int it = 0; it < items; ++it) {
                FlatParams cfp = flatten(clones[it]);
                clone_grads[it] = cfp.grads;
            }
            std::size_t cursor = 0;
            for (std::size_t p = 0; p < fp.weights.size(); ++p) {
                std::vector<double>& w = *fp.weights[p];
                for (std::size_t k = 0; k < w.size(); ++k, ++cursor) {
                    double g = 0.0;
                    for (int it = 0; it < items; ++it) g += (*clone_grads[it][p])[k];
                    g /= items;
                    adam_m[cursor] = hyper.beta1 * adam_m[cursor] + (1.0 - hyper.beta1) * g;
                    adam_v[cursor] = hyper.beta2 * adam_v[cursor] + (1.0 - hyper.beta2) * g * g;
                    const double mhat = adam_m[cursor] / bc1;
                    const double vhat = adam_v[cursor] / bc2;
                    w[k] -= hyper.lr * mhat / (std::sqrt(vhat) + hyper.eps);
                }
            }
            ++step;
        }

        const double val_loss = eval_val();
        if (!std::isfinite(val_loss))
            throw Error("train: validation loss diverged (non-finite) at epoch " +
                        std::to_string(epoch));
        if (log) log->epochs.push_back({epoch, val_loss});
        if (val_loss < best_val) {
            best_val = val_loss;
            best_epoch = epoch;
            best_weights.clear();
            for (std::vector<double>* w : fp.weights) best_weights.push_back(*w);
        }
    }

    // Restore best weights before packaging the checkpoint.
    for (std::size_t p = 0; p < fp.weights.size(); ++p) *fp.weights[p] = best_weights[p];
    return checkpoint_from_model(model, best_epoch, best_val);
}

Checkpoint checkpoint_from_model(const MiDrct& model, int epoch, double val_loss) {
    Checkpoint ckpt;
    ckpt.config = model.cfg;
    ckpt.epoch = epoch;
    ckpt.val_loss = val_loss;
    MiDrct& m = const_cast<MiDrct&>(model);
    m.for_each_param([&](const std::string& name, std::vector<double>& w,
                         std::vector<double>&) { ckpt.parameters.emplace_back(name, w); });
    return ckpt;
}

MiDrct model_from_checkpoint(const Checkpoint& ckpt) {
    MiDrct model = MiDrct::create(ckpt.config);
    std::size_t idx = 0;
    model.for_each_param([&](const std::string& name, std::vector<double>& w,
                             std::vector<double>&) {
        if (idx >= ckpt.parameters.size())
            throw FormatError("checkpoint: missing parameter '" + name + "'");
        const auto& [pname, values] = ckpt.parameters[idx];
        if (pname != name)
            throw FormatError("checkpoint: parameter order mismatch: expected '" + name +
                              "', found '" + pname + "'");
        if (values.size() != w.size())
            throw FormatError("checkpoint: parameter '" + name + "' has " +
                              std::to_string(values.size()) + " values, architecture needs " +
                              std::to_string(w.size()));
        w = values;
        ++idx;
    });
    if (idx != ckpt.parameters.size())
        throw FormatError("checkpoint: " + std::to_string(ckpt.parameters.size() - idx) +
                          " unexpected extra parameters");
    return model;
}

namespace {

json config_to_json(const NetworkConfig& c) {
    return json{{"n_frames", c.n_frames},   {"embed_dim", c.embed_dim},
                {"scale", c.scale},         {"rdg_count", c.rdg_count},
                {"blocks_per_group", c.blocks_per_group},
                {"growth", c.growth},       {"align_enabled", c.align_enabled},
                {"seed", c.seed}};
}

NetworkConfig config_from_json(const json& j) {
    NetworkConfig c;
    c.n_frames = j.value("n_frames", c.n_frames);
    c.embed_dim = j.value("embed_dim", c.embed_dim);
    c.scale = j.value("scale", c.scale);
    c.rdg_count = j.value("rdg_count", c.rdg_count);
    c.blocks_per_group = j.value("blocks_per_group", c.blocks_per_group);
    c.growth = j.value("growth", c.growth);
    c.align_enabled = j.value("align_enabled", c.align_enabled);
    c.seed = j.value("seed", c.seed);
    return c;
}

constexpr char kCkptMagic[8] = {'R', 'S', 'R', 'C', 'K', 'P', 'T', '1'};

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
    json header;
    header["config"] = config_to_json(ckpt.config);
    header["epoch"] = ckpt.epoch;
    header["val_loss"] = ckpt.val_loss;
    json params = json::array();
    for (const auto& [name, values] : ckpt.parameters)
        params.push_back({{"name", name}, {"count", values.size()}});
    header["params"] = params;
    const std::string htext = header.dump();

    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("save_checkpoint: cannot write " + path);
    out.write(kCkptMagic, 8);
    const std::uint32_t hlen = static_cast<std::uint32_t>(htext.size());
    out.write(reinterpret_cast<const char*>(&hlen), 4);
    out.write(htext.data(), htext.size());
    for (const auto& [name, values] : ckpt.parameters) {
        std::vector<float> f32(values.size());
        for (std::size_t i = 0; i < values.size(); ++i)
            f32[i] = static_cast<float>(values[i]);
        out.write(reinterpret_cast<const char*>(f32.data()),
                  static_cast<std::streamsize>(f32.size() * sizeof(float)));
    }
    if (!out) throw IoError("save_checkpoint: write failed for " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("load_checkpoint: cannot open " + path);
    char magic[8];
    in.read(magic, 8);
    if (!in || std::memcmp(magic, kCkptMagic, 8) != 0)
        throw FormatError("load_checkpoint: bad magic in " + path);
    std::uint32_t hlen = 0;
    in.read(reinterpret_cast<char*>(&hlen), 4);
    std::string htext(hlen, '\0');
    in.read(htext.data(), hlen);
    if (!in) throw FormatError("load_checkpoint: truncated header in " + path);
    json header;
    try {
        header = json::parse(htext);
    } catch (const json::exception& ex) {
        throw FormatError("load_checkpoint: bad header JSON: " + std::string(ex.what()));
    }

    Checkpoint ckpt;
    ckpt.config = config_from_json(header.at("config"));
    ckpt.epoch = header.value("epoch", 0);
    ckpt.val_loss = header.value("val_loss", 0.0);
    for (const auto& p : header.at("params")) {
        const std::string name = p.at("name");
        const std::size_t count = p.at("count");
        std::vector<float> f32(count);
        in.read(reinterpret_cast<char*>(f32.data()),
                static_cast<std::streamsize>(count * sizeof(float)));
        if (!in) throw FormatError("load_checkpoint: truncated payload at '" + name + "'");
        std::vector<double> values(count);
        for (std::size_t i = 0; i < count; ++i) values[i] = f32[i];
        ckpt.parameters.emplace_back(name, std::move(values));
    }
    // Validate against the architecture right away.
    (void)model_from_checkpoint(ckpt);
    return ckpt;
}

namespace {

double rel_err(double analytic, double numeric) {
    const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
    return std::abs(analytic - numeric) / denom;
}

Tensor random_tensor(int c, int h, int w, Rng& rng, double lo = -1.0, double hi = 1.0) {
    Tensor t(c, h, w);
    for (double& v : t.data) v = rng.uniform(lo, hi);
    return t;
}

double dot(const Tensor& a, const Tensor& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a.data[i] * b.data[i];
    return s;
}

}  // namespace

double gradient_check_conv(int in_c, int out_c, int k, int h, int w,
                           std::uint64_t seed, double eps) {
    Rng rng(seed);
    Conv2d conv;
    conv.init(in_c, out_c, k, rng);
    for (double& v : conv.b) v = rng.uniform(-0.5, 0.5);
    Tensor x = random_tensor(in_c, h, w, rng);
    const Tensor proj = random_tensor(out_c, h, w, rng);

    conv.zero_grad();
    Tensor gx = conv.backward(x, proj);  // objective: sum(proj * conv(x))

    double worst = 0.0;
    const auto objective = [&]() { return dot(conv.forward(x), proj); };
    for (std::size_t i = 0; i < conv.w.size(); ++i) {
        const double keep = conv.w[i];
        conv.w[i] = keep + eps;
        const double lp = objective();
        conv.w[i] = keep - eps;
        const double lm = objective();
        conv.w[i] = keep;
        worst = std::max(worst, rel_err(conv.gw[i], (lp - lm) / (2.0 * eps)));
    }
    for (std::size_t i = 0; i < conv.b.size(); ++i) {
        const double keep = conv.b[i];
        conv.b[i] = keep + eps;
        const double lp = objective();
        conv.b[i] = keep - eps;
        const double lm = objective();
        conv.b[i] = keep;
        worst = std::max(worst, rel_err(conv.gb[i], (lp - lm) / (2.0 * eps)));
    }
    for (std::size_t i = 0; i < x.data.size(); ++i) {
        const double keep = x.data[i];
        x.data[i] = keep + eps;
        const double lp = objective();
        x.data[i] = keep - eps;
        const double lm = objective();
        x.data[i] = keep;
        worst = std::max(worst, rel_err(gx.data[i], (lp - lm) / (2.0 * eps)));
    }
    return worst;
}

double gradient_check_gelu(int c, int h, int w, std::uint64_t seed, double eps) {
    Rng rng(seed);
    Tensor x = random_tensor(c, h, w, rng, -2.0, 2.0);
    const Tensor proj = random_tensor(c, h, w, rng);
    const Tensor gx = gelu_backward(x, proj);
    double worst = 0.0;
    for (std::size_t i = 0; i < x.data.size(); ++i) {
        const double keep = x.data[i];
        x.data[i] = keep + eps;
        const double lp = dot(gelu(x), proj);
        x.data[i] = keep - eps;
        const double lm = dot(gelu(x), proj);
        x.data[i] = keep;
        worst = std::max(worst, rel_err(gx.data[i], (lp - lm) / (2.0 * eps)));
    }
    return worst;
}

double gradient_check_pixel_shuffle(int c, int h, int w, std::uint64_t seed, double eps) {
    Rng rng(seed);
    Tensor x = random_tensor(c, h, w, rng);
    const Tensor proj = random_tensor(c / 4, h * 2, w * 2, rng);
    const Tensor gx = pixel_shuffle2_backward(proj);
    double worst = 0.0;
    for (std::size_t i = 0; i < x.data.size(); ++i) {
        const double keep = x.data[i];
        x.data[i] = keep + eps;
        const double lp = dot(pixel_shuffle2(x), proj);
        x.data[i] = keep - eps;
        const double lm = dot(pixel_shuffle2(x), proj);
        x.data[i] = keep;
        worst = std::max(worst, rel_err(gx.data[i], (lp - lm) / (2.0 * eps)));
    }
    return worst;
}

double gradient_check_warp(double dy, int c, int h, int w, std::uint64_t seed, double eps) {
    Rng rng(seed);
    Tensor x = random_tensor(c, h, w, rng);
    const Tensor proj = random_tensor(c, h, w, rng);
    ShiftEstimate shift;
    shift.dy = dy;
    const Tensor gx = warp_features_backward(proj, shift);
    double worst = 0.0;
    for (std::size_t i = 0; i < x.data.size(); ++i) {
        const double keep = x.data[i];
        x.data[i] = keep + eps;
        const double lp = dot(warp_features(x, shift), proj);
        x.data[i] = keep - eps;
        const double lm = dot(warp_features(x, shift), proj);
        x.data[i] = keep;
        worst = std::max(worst, rel_err(gx.data[i], (lp - lm) / (2.0 * eps)));
    }
    return worst;
}

double gradient_check_model(const NetworkConfig& cfg, std::uint64_t seed, double eps,
                            LossKind loss) {
    Rng rng(seed);
    MiDrct model = MiDrct::create(cfg);
    const int h = 8, w = 8;
    std::vector<Tensor> frames;
    for (int i = 0; i < cfg.n_frames; ++i)
        frames.push_back(random_tensor(3, h, w, rng, 0.0, 1.0));
    const Tensor target = random_tensor(3, h * 2, w * 2, rng, 0.1, 0.9);

    model.zero_grad();
    Trace tr;
    tr.frames = frames;
    forward_impl(model, frames, tr, nullptr);
    Tensor grad;
    loss_value(tr.out, target, loss, &grad);
    backward_impl(model, tr, grad);
    const std::vector<ShiftEstimate> pinned = tr.shifts;

    // Copies of the analytic gradients, indexed like the parameter groups,
    // plus a flat index so the FD work parallelizes in balanced blocks.
    std::vector<std::vector<double>> analytic;
    std::vector<std::size_t> prefix{0};
    model.for_each_param([&](const std::string&, std::vector<double>&,
                             std::vector<double>& gv) {
        analytic.push_back(gv);
        prefix.push_back(prefix.back() + gv.size());
    });
    const std::size_t total = prefix.back();
    const std::size_t block = 512;
    const std::int64_t nblocks = static_cast<std::int64_t>((total + block - 1) / block);

    double worst = 0.0;
#pragma omp parallel
    {
        MiDrct clone = model;
        FlatParams cfp = flatten(clone);
        double local_worst = 0.0;
        const auto objective = [&]() {
            Trace t2;
            t2.frames = frames;
            forward_impl(clone, frames, t2, nullptr, &pinned);
            return loss_value(t2.out, target, loss);
        };
#pragma omp for schedule(dynamic)
        for (std::int64_t b = 0; b < nblocks; ++b) {
            const std::size_t lo = static_cast<std::size_t>(b) * block;
            const std::size_t hi = std::min(total, lo + block);
            std::size_t group = static_cast<std::size_t>(
                std::upper_bound(prefix.begin(), prefix.end(), lo) - prefix.begin() - 1);
            for (std::size_t idx = lo; idx < hi; ++idx) {
                while (idx >= prefix[group + 1]) ++group;
                std::vector<double>& wv = *cfp.weights[group];
                const std::size_t i = idx - prefix[group];
                const double keep = wv[i];
                wv[i] = keep + eps;
                const double lp = objective();
                wv[i] = keep - eps;
                const double lm = objective();
                wv[i] = keep;
                local_worst = std::max(local_worst,
                                       rel_err(analytic[group][i], (lp - lm) / (2.0 * eps)));
            }
        }
#pragma omp critical
        worst = std::max(worst, local_worst);
    }
    return worst;
}

}  // namespace rootsr
