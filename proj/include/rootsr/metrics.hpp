#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "rootsr/image.hpp"

namespace rootsr {

// All metrics operate on the 255 scale: internal [0,1] data is rescaled
// before any arithmetic, matching the value ranges convention of common IQA
// tooling.

/// Mean over pixels/channels of (255a - 255b)^2.
double mse(const ImageBuffer& a, const ImageBuffer& b);

/// 10 log10(255^2 / mse); +infinity for identical images (callers exclude
/// the sentinel from means).
double psnr(const ImageBuffer& a, const ImageBuffer& b);

/// Single-scale SSIM: 11x11 Gaussian window sigma 1.5, K1 0.01, K2 0.03,
/// dynamic range 255, averaged over fully-interior window positions.
/// 3-channel inputs are converted to grayscale first. Images must be at
/// least 11x11.
double ssim(const ImageBuffer& a, const ImageBuffer& b);

struct GgdFit {
    double alpha = 0.0;
    double sigma_sq = 0.0;
};

struct AggdFit {
    double alpha = 0.0;
    double sigma_l = 0.0;
    double sigma_r = 0.0;
    double mean_eta = 0.0;
};

/// Generalized Gaussian moment-matching fit (alpha grid [0.2, 10], step 1e-3).
GgdFit ggd_fit(const std::vector<double>& samples);

/// Asymmetric generalized Gaussian fit, same grid. Needs >= 64 samples with
/// variation on both sides of zero.
AggdFit aggd_fit(const std::vector<double>& samples);

/// Mean-subtracted contrast-normalized coefficients of the grayscale image
/// on the 255 scale (7x7 Gaussian weights sigma 7/6, stabilizer C = 1);
/// row-major H*W.
std::vector<double> mscn_map(const ImageBuffer& img);

/// 18 features per scale: MSCN GGD (alpha, sigma^2) plus AGGD
/// (alpha, mean_eta, sigma_l^2, sigma_r^2) of the four pairwise-product
/// orientations H, V, D1, D2; computed at full and half (area /2)
/// resolution. Constant images are degenerate.
std::array<double, 36> brisque_features(const ImageBuffer& img);

/// RBF-kernel support vector regression scorer loaded from the documented
/// JSON schema (version, gamma, bias, coefficients, support_vectors,
/// feature_min, feature_max).
struct SvrModel {
    double gamma = 0.0;
    double bias = 0.0;
    std::vector<double> coefficients;
    std::vector<std::array<double, 36>> support_vectors;
    std::array<double, 36> feature_min{};
    std::array<double, 36> feature_max{};
};

SvrModel load_svr_model(const std::string& path);

/// Min-max scale features to [-1, 1], then evaluate the SVR. Lower output
/// means better naturalness.
double brisque_score(const std::array<double, 36>& features, const SvrModel& model);

struct QualityRow {
    std::string name;
    double mse = 0.0;
    double psnr_db = 0.0;
    bool psnr_inf = false;
    double ssim = 0.0;
    std::optional<double> brisque;
};

struct QualityReport {
    bool has_reference = false;
    std::vector<QualityRow> rows;
    std::vector<std::string> skipped;  // unmatched filenames
    int warning_count = 0;
    double mean_mse = 0.0;
    double mean_psnr_db = 0.0;
    int psnr_counted = 0;  // rows in the PSNR mean (inf excluded)
    double mean_ssim = 0.0;
    std::optional<double> mean_brisque;
};

/// Directory-level evaluation: full-reference metrics when refs_dir matches
/// by filename, BRISQUE when a scoring model is supplied. Unmatched files
/// are listed and skipped with a nonzero warning count.
QualityReport evaluate_dataset(const std::string& outputs_dir,
                               const std::optional<std::string>& refs_dir,
                               const std::optional<std::string>& model_file);

std::string report_text(const QualityReport& report);
std::string report_json(const QualityReport& report);

}  // namespace rootsr
