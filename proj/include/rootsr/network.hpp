#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "rootsr/align.hpp"
#include "rootsr/burst.hpp"
#include "rootsr/tensor.hpp"

namespace rootsr {

struct NetworkConfig {
    int n_frames = 3;
    int embed_dim = 16;  // f; 96 at full scale, 16 for the toy runs
    int scale = 2;
    int rdg_count = 2;
    int blocks_per_group = 4;
    int growth = 8;
    bool align_enabled = true;
    std::uint64_t seed = 0;

    void validate() const;
};

/// 2D convolution with zero padding k/2 (spatial dims always preserved).
/// Gradients accumulate into gw / gb until zero_grad.
struct Conv2d {
    int in_c = 0, out_c = 0, ksize = 3;
    std::vector<double> w, b;    // w: [out][in][k][k]
    std::vector<double> gw, gb;

    void init(int in_channels, int out_channels, int k, class Rng& rng);
    Tensor forward(const Tensor& x) const;
    Tensor backward(const Tensor& x, const Tensor& gy);
    void zero_grad();
    std::size_t param_count() const { return w.size() + b.size(); }
};

Tensor gelu(const Tensor& x);
Tensor gelu_backward(const Tensor& x, const Tensor& gy);

/// (4c, H, W) -> (c, 2H, 2W); out(c, 2y+r, 2x+s) = in(4c + 2r + s, y, x).
Tensor pixel_shuffle2(const Tensor& x);
Tensor pixel_shuffle2_backward(const Tensor& gy);

struct FusionStats {
    int align_attempts = 0;
    int degenerate_fallbacks = 0;  // flat maps aligned with zero shift instead
};

/// The burst fusion model: shared shallow conv per frame, phase-correlation
/// alignment of non-reference features to the middle frame, N*f -> f fusion,
/// dense-residual deep extraction groups, shallow+deep skip, and a x2
/// pixel-shuffle reconstruction head.
struct MiDrct {
    NetworkConfig cfg;
    Conv2d shallow;  // 3 -> f
    Conv2d fusion;   // N*f -> f
    struct Rdg {
        std::vector<Conv2d> blocks;  // block b: (f + b*growth) -> growth, 3x3
        Conv2d compress;             // (f + blocks*growth) -> f, 1x1
    };
    std::vector<Rdg> rdgs;
    Conv2d merge;  // 2f -> f
    Conv2d head;   // f -> 4*3

    static MiDrct create(const NetworkConfig& cfg);

    void zero_grad();
    void for_each_param(const std::function<void(const std::string&, std::vector<double>&,
                                                 std::vector<double>&)>& fn);
    std::size_t param_count() const;

    Tensor shallow_extract(const ImageBuffer& frame) const;
    Tensor fuse_features(const std::vector<Tensor>& feats, FusionStats* stats = nullptr) const;
    Tensor deep_extract(const Tensor& x) const;
    /// concat(shallow, deep) -> merge conv -> head conv -> pixel shuffle.
    Tensor reconstruct_raw(const Tensor& shallow_feats, const Tensor& deep_feats) const;
    ImageBuffer reconstruct(const Tensor& shallow_feats, const Tensor& deep_feats) const;

    /// Inference: clamped [0,1] image at 2H x 2W for the central frame.
    ImageBuffer forward(const BurstSample& sample, FusionStats* stats = nullptr) const;
    /// Training/eval path: unclamped output tensor.
    Tensor forward_raw(const std::vector<Tensor>& frames, FusionStats* stats = nullptr) const;
};

enum class LossKind { L1, L2 };

/// Mean loss over all elements; fills grad (d loss / d pred) when non-null.
double loss_value(const Tensor& pred, const Tensor& target, LossKind kind,
                  Tensor* grad = nullptr);

struct TrainHyper {
    int epochs = 15;
    int batch_size = 8;
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    LossKind loss = LossKind::L1;
    std::uint64_t seed = 0;  // data order; model init comes from cfg.seed
};

struct TrainLog {
    struct Step {
        int epoch;
        int step;
        double train_loss;
    };
    struct Epoch {
        int epoch;
        double val_loss;
    };
    std::vector<Step> steps;
    std::vector<Epoch> epochs;
    int align_fallbacks = 0;
};

struct Checkpoint {
    NetworkConfig config;
    std::vector<std::pair<std::string, std::vector<double>>> parameters;
    int epoch = 0;
    double val_loss = 0.0;
};

/// Adam (beta1 0.9, beta2 0.999, eps 1e-8) on the reconstruction loss with
/// a fixed per-seed data order; returns the best-validation-epoch weights.
/// Aborts with an epoch/step report when the loss turns non-finite.
Checkpoint train(const std::vector<BurstSample>& train_set,
                 const std::vector<BurstSample>& val_set, const NetworkConfig& cfg,
                 const TrainHyper& hyper, TrainLog* log = nullptr);

MiDrct model_from_checkpoint(const Checkpoint& ckpt);
Checkpoint checkpoint_from_model(const MiDrct& model, int epoch, double val_loss);

/// Container format: magic, JSON header (config + named array index),
/// then little-endian float32 payloads. Loading re-derives the
/// architecture from the header config and demands an exact name/shape match.
void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

// Central finite-difference validation at double precision on small shapes.
// Each returns the max relative gradient error over every parameter and
// input entry.
double gradient_check_conv(int in_c, int out_c, int k, int h, int w,
                           std::uint64_t seed, double eps = 1e-4);
double gradient_check_gelu(int c, int h, int w, std::uint64_t seed, double eps = 1e-4);
double gradient_check_pixel_shuffle(int c, int h, int w, std::uint64_t seed,
                                    double eps = 1e-4);
double gradient_check_warp(double dy, int c, int h, int w, std::uint64_t seed,
                           double eps = 1e-4);
/// Whole toy model + loss, gradients for every parameter.
double gradient_check_model(const NetworkConfig& cfg, std::uint64_t seed,
                            double eps = 1e-4, LossKind loss = LossKind::L1);

}  // namespace rootsr
