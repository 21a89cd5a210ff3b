#include "rootsr/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "rootsr/parallel.hpp"
#include "rootsr/png_io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace rootsr {

namespace {

void require_same(const ImageBuffer& a, const ImageBuffer& b, const char* who) {
    if (!a.same_dims(b)) throw ArgumentError(std::string(who) + ": dims mismatch");
}

// Gamma-ratio curves for the moment-matching estimators, evaluated over the
// alpha grid once per call (cheap next to the pixel work).
double ggd_rho(double alpha) {
    // E[x^2] * E[|x|]^-2 for a generalized Gaussian of shape alpha
    return std::exp(std::lgamma(1.0 / alpha) + std::lgamma(3.0 / alpha) -
                    2.0 * std::lgamma(2.0 / alpha));
}

constexpr double kAlphaLo = 0.2;
constexpr double kAlphaHi = 10.0;
constexpr double kAlphaStep = 1e-3;

double grid_search_alpha(double target_rho) {
    double best_alpha = kAlphaLo;
    double best_err = std::numeric_limits<double>::infinity();
    for (double a = kAlphaLo; a <= kAlphaHi + 1e-12; a += kAlphaStep) {
        const double err = std::abs(ggd_rho(a) - target_rho);
        if (err < best_err) {
            best_err = err;
            best_alpha = a;
        }
    }
    return best_alpha;
}

// 7x7 Gaussian, sigma 7/6, unit sum — the local statistics window for MSCN.
std::array<double, 49> mscn_window() {
    std::array<double, 49> w{};
    const double sigma = 7.0 / 6.0;
    double total = 0.0;
    for (int y = -3; y <= 3; ++y)
        for (int x = -3; x <= 3; ++x) {
            const double v = std::exp(-(y * y + x * x) / (2.0 * sigma * sigma));
            w[(y + 3) * 7 + (x + 3)] = v;
            total += v;
        }
    for (double& v : w) v /= total;
    return w;
}

std::vector<double> mscn_coefficients(const std::vector<double>& gray, int h, int w) {
    static const std::array<double, 49> win = mscn_window();
    std::vector<double> mu(gray.size()), out(gray.size());
#pragma omp parallel for schedule(static)
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            double m = 0.0, m2 = 0.0;
            for (int dy = -3; dy <= 3; ++dy) {
                const int yy = std::clamp(y + dy, 0, h - 1);
                for (int dx = -3; dx <= 3; ++dx) {
                    const int xx = std::clamp(x + dx, 0, w - 1);
                    const double wv = win[(dy + 3) * 7 + (dx + 3)];
                    const double px = gray[yy * w + xx];
                    m += wv * px;
                    m2 += wv * px * px;
                }
            }
            const double var = std::max(m2 - m * m, 0.0);
            mu[y * w + x] = m;
            out[y * w + x] = (gray[y * w + x] - m) / (std::sqrt(var) + 1.0);
        }
    }
    return out;
}

void append_scale_features(const std::vector<double>& gray, int h, int w,
                           double* feats) {
    const std::vector<double> m = mscn_coefficients(gray, h, w);
    const GgdFit g = ggd_fit(m);
    feats[0] = g.alpha;
    feats[1] = g.sigma_sq;

    // pairwise products along H, V, D1 (main diagonal), D2 (anti-diagonal)
    const auto fit_pairs = [&](int dy, int dx, int slot) {
        std::vector<double> prod;
        prod.reserve(m.size());
        for (int y = 0; y < h; ++y) {
            const int yy = y + dy;
            if (yy < 0 || yy >= h) continue;
            for (int x = 0; x < w; ++x) {
                const int xx = x + dx;
                if (xx < 0 || xx >= w) continue;
                prod.push_back(m[y * w + x] * m[yy * w + xx]);
            }
        }
        const AggdFit a = aggd_fit(prod);
        feats[2 + slot * 4 + 0] = a.alpha;
        feats[2 + slot * 4 + 1] = a.mean_eta;
        feats[2 + slot * 4 + 2] = a.sigma_l * a.sigma_l;
        feats[2 + slot * 4 + 3] = a.sigma_r * a.sigma_r;
    };
    fit_pairs(0, 1, 0);   // H
    fit_pairs(1, 0, 1);   // V
    fit_pairs(1, 1, 2);   // D1
    fit_pairs(1, -1, 3);  // D2
}

}  // namespace

double mse(const ImageBuffer& a, const ImageBuffer& b) {
    require_same(a, b, "mse");
    const std::size_t n = a.data.size();
    // difference first: identical images must give exactly zero, which
    // 255a - 255b does not guarantee once the compiler contracts to FMA
    const double total = parallel_sum_indexed(n, [&](std::size_t i) {
        const double d = 255.0 * (a.data[i] - b.data[i]);
        return d * d;
    });
    return total / static_cast<double>(n);
}

double psnr(const ImageBuffer& a, const ImageBuffer& b) {
    const double m = mse(a, b);
    if (m == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(255.0 * 255.0 / m);
}

double ssim(const ImageBuffer& a, const ImageBuffer& b) {
    require_same(a, b, "ssim");
    if (a.height < 11 || a.width < 11)
        throw ArgumentError("ssim: images must be at least 11x11");
    const ImageBuffer ga = to_grayscale(a);
    const ImageBuffer gb = to_grayscale(b);
    const int h = a.height, w = a.width;

    // 11x11 Gaussian window, sigma 1.5, unit sum
    static const std::array<double, 121> win = [] {
        std::array<double, 121> k{};
        double total = 0.0;
        for (int y = -5; y <= 5; ++y)
            for (int x = -5; x <= 5; ++x) {
                const double v = std::exp(-(y * y + x * x) / (2.0 * 1.5 * 1.5));
                k[(y + 5) * 11 + (x + 5)] = v;
                total += v;
            }
        for (double& v : k) v /= total;
        return k;
    }();

    constexpr double kC1 = (0.01 * 255.0) * (0.01 * 255.0);
    constexpr double kC2 = (0.03 * 255.0) * (0.03 * 255.0);
    const int oh = h - 10, ow = w - 10;
    std::vector<double> row_sums(oh, 0.0);
#pragma omp parallel for schedule(static)
    for (int y = 0; y < oh; ++y) {
        double acc = 0.0;
        for (int x = 0; x < ow; ++x) {
            double mx = 0.0, my = 0.0, sxx = 0.0, syy = 0.0, sxy = 0.0;
            for (int dy = 0; dy < 11; ++dy)
                for (int dx = 0; dx < 11; ++dx) {
                    const double wv = win[dy * 11 + dx];
                    const double px = 255.0 * ga.data[(y + dy) * w + (x + dx)];
                    const double py = 255.0 * gb.data[(y + dy) * w + (x + dx)];
                    mx += wv * px;
                    my += wv * py;
                    sxx += wv * px * px;
                    syy += wv * py * py;
                    sxy += wv * px * py;
                }
            const double vx = sxx - mx * mx;
            const double vy = syy - my * my;
            const double cxy = sxy - mx * my;
            acc += ((2.0 * mx * my + kC1) * (2.0 * cxy + kC2)) /
                   ((mx * mx + my * my + kC1) * (vx + vy + kC2));
        }
        row_sums[y] = acc;
    }
    double total = 0.0;
    for (double v : row_sums) total += v;
    return total / (static_cast<double>(oh) * ow);
}

GgdFit ggd_fit(const std::vector<double>& samples) {
    if (samples.size() < 64) throw DegenerateInputError("ggd_fit: need >= 64 samples");
    double sum_sq = 0.0, sum_abs = 0.0;
    for (double v : samples) {
        sum_sq += v * v;
        sum_abs += std::abs(v);
    }
    const double n = static_cast<double>(samples.size());
    const double sigma_sq = sum_sq / n;
    const double mean_abs = sum_abs / n;
    if (sigma_sq == 0.0 || mean_abs == 0.0)
        throw DegenerateInputError("ggd_fit: samples carry no variation");
    const double rho = sigma_sq / (mean_abs * mean_abs);
    GgdFit fit;
    fit.alpha = grid_search_alpha(rho);
    fit.sigma_sq = sigma_sq;
    return fit;
}

AggdFit aggd_fit(const std::vector<double>& samples) {
    if (samples.size() < 64) throw DegenerateInputError("aggd_fit: need >= 64 samples");
    double left_sq = 0.0, right_sq = 0.0, sum_abs = 0.0, sum_sq = 0.0;
    std::size_t left_n = 0, right_n = 0;
    for (double v : samples) {
        if (v < 0.0) {
            left_sq += v * v;
            ++left_n;
        } else if (v > 0.0) {
            right_sq += v * v;
            ++right_n;
        }
        sum_abs += std::abs(v);
        sum_sq += v * v;
    }
    if (left_n == 0 || right_n == 0 || sum_sq == 0.0)
        throw DegenerateInputError("aggd_fit: need variation on both sides of zero");

    const double n = static_cast<double>(samples.size());
    const double sigma_l = std::sqrt(left_sq / static_cast<double>(left_n));
    const double sigma_r = std::sqrt(right_sq / static_cast<double>(right_n));
    const double gamma_hat = sigma_l / sigma_r;
    const double r_hat = (sum_abs / n) * (sum_abs / n) / (sum_sq / n);
    const double g2 = gamma_hat * gamma_hat;
    const double r_norm = r_hat * (gamma_hat * g2 + 1.0) * (gamma_hat + 1.0) /
                          ((g2 + 1.0) * (g2 + 1.0));
    // r_norm targets the inverse ratio of ggd_rho
    AggdFit fit;
    fit.alpha = grid_search_alpha(1.0 / r_norm);
    fit.sigma_l = sigma_l;
    fit.sigma_r = sigma_r;
    const double ratio = std::exp(std::lgamma(2.0 / fit.alpha) - std::lgamma(1.0 / fit.alpha));
    const double scale = std::exp(0.5 * (std::lgamma(1.0 / fit.alpha) -
                                         std::lgamma(3.0 / fit.alpha)));
    fit.mean_eta = (sigma_r - sigma_l) * scale * ratio;
    return fit;
}

std::vector<double> mscn_map(const ImageBuffer& img) {
    const ImageBuffer gray_img = to_grayscale(img);
    std::vector<double> gray(gray_img.data.size());
    for (std::size_t i = 0; i < gray.size(); ++i) gray[i] = 255.0 * gray_img.data[i];
    return mscn_coefficients(gray, img.height, img.width);
}

std::array<double, 36> brisque_features(const ImageBuffer& img) {
    if (img.height < 32 || img.width < 32)
        throw ArgumentError("brisque_features: image must be at least 32x32");
    const ImageBuffer gray_img = to_grayscale(img);
    const auto [lo, hi] = std::minmax_element(gray_img.data.begin(), gray_img.data.end());
    if (*lo == *hi) throw DegenerateInputError("brisque_features: constant image");

    std::vector<double> gray(gray_img.data.size());
    for (std::size_t i = 0; i < gray.size(); ++i) gray[i] = 255.0 * gray_img.data[i];

    std::array<double, 36> feats{};
    append_scale_features(gray, img.height, img.width, feats.data());

    // half resolution via 2x2 block means; odd trailing row/col dropped
    const int h2 = img.height / 2, w2 = img.width / 2;
    std::vector<double> half(static_cast<std::size_t>(h2) * w2);
    for (int y = 0; y < h2; ++y)
        for (int x = 0; x < w2; ++x) {
            const int sy = 2 * y, sx = 2 * x;
            half[y * w2 + x] = 0.25 * (gray[sy * img.width + sx] +
                                       gray[sy * img.width + sx + 1] +
                                       gray[(sy + 1) * img.width + sx] +
                                       gray[(sy + 1) * img.width + sx + 1]);
        }
    append_scale_features(half, h2, w2, feats.data() + 18);
    return feats;
}

SvrModel load_svr_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("svr model: cannot open " + path);
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& ex) {
        throw ConfigError("svr model: bad JSON in " + path + ": " + ex.what());
    }
    if (!j.contains("version")) throw ConfigError("svr model: missing 'version' field");
    for (const char* field : {"gamma", "bias", "coefficients", "support_vectors",
                              "feature_min", "feature_max"})
        if (!j.contains(field))
            throw ConfigError("svr model: missing '" + std::string(field) + "' field");

    SvrModel model;
    model.gamma = j.at("gamma").get<double>();
    model.bias = j.at("bias").get<double>();
    model.coefficients = j.at("coefficients").get<std::vector<double>>();
    const auto read36 = [&](const json& arr, const char* what) {
        if (arr.size() != 36)
            throw ConfigError("svr model: '" + std::string(what) + "' must have 36 entries");
        std::array<double, 36> out{};
        for (std::size_t i = 0; i < 36; ++i) out[i] = arr[i].get<double>();
        return out;
    };
    for (const auto& sv : j.at("support_vectors"))
        model.support_vectors.push_back(read36(sv, "support_vectors[i]"));
    model.feature_min = read36(j.at("feature_min"), "feature_min");
    model.feature_max = read36(j.at("feature_max"), "feature_max");
    if (model.coefficients.size() != model.support_vectors.size())
        throw ConfigError("svr model: coefficients and support_vectors sizes differ");
    return model;
}

double brisque_score(const std::array<double, 36>& features, const SvrModel& model) {
    std::array<double, 36> x{};
    for (std::size_t i = 0; i < 36; ++i) {
        const double span = model.feature_max[i] - model.feature_min[i];
        x[i] = span != 0.0 ? -1.0 + 2.0 * (features[i] - model.feature_min[i]) / span : 0.0;
    }
    double score = model.bias;
    for (std::size_t s = 0; s < model.support_vectors.size(); ++s) {
        double d2 = 0.0;
        for (std::size_t i = 0; i < 36; ++i) {
            const double d = x[i] - model.support_vectors[s][i];
            d2 += d * d;
        }
        score += model.coefficients[s] * std::exp(-model.gamma * d2);
    }
    return score;
}

QualityReport evaluate_dataset(const std::string& outputs_dir,
                               const std::optional<std::string>& refs_dir,
                               const std::optional<std::string>& model_file) {
    if (!fs::is_directory(outputs_dir))
        throw IoError("evaluate_dataset: not a directory: " + outputs_dir);
    std::optional<SvrModel> svr;
    if (model_file) svr = load_svr_model(*model_file);

    std::vector<std::string> names;
    for (const auto& e : fs::directory_iterator(outputs_dir))
        if (e.is_regular_file() && e.path().extension() == ".png")
            names.push_back(e.path().filename().string());
    std::sort(names.begin(), names.end());

    QualityReport report;
    report.has_reference = refs_dir.has_value();

    std::vector<std::string> matched;
    for (const std::string& name : names) {
        if (refs_dir && !fs::exists(fs::path(*refs_dir) / name)) {
            report.skipped.push_back(name);
            ++report.warning_count;
            continue;
        }
        matched.push_back(name);
    }

    report.rows.resize(matched.size());
#pragma omp parallel for schedule(dynamic)
    for (std::int64_t i = 0; i < static_cast<std::int64_t>(matched.size()); ++i) {
        QualityRow row;
        row.name = matched[i];
        const ImageBuffer out = read_png((fs::path(outputs_dir) / matched[i]).string());
        if (refs_dir) {
            const ImageBuffer ref = read_png((fs::path(*refs_dir) / matched[i]).string());
            row.mse = mse(out, ref);
            const double p = psnr(out, ref);
            row.psnr_inf = std::isinf(p);
            row.psnr_db = p;
            row.ssim = ssim(out, ref);
        }
        if (svr) row.brisque = brisque_score(brisque_features(out), *svr);
        report.rows[i] = std::move(row);
    }

    double sum_mse = 0.0, sum_psnr = 0.0, sum_ssim = 0.0, sum_brisque = 0.0;
    int brisque_n = 0;
    for (const QualityRow& row : report.rows) {
        sum_mse += row.mse;
        sum_ssim += row.ssim;
        if (report.has_reference) {
            if (row.psnr_inf) {
                ++report.warning_count;  // identical pair excluded from the PSNR mean
            } else {
                sum_psnr += row.psnr_db;
                ++report.psnr_counted;
            }
        }
        if (row.brisque) {
            sum_brisque += *row.brisque;
            ++brisque_n;
        }
    }
    const double n = static_cast<double>(report.rows.size());
    if (!report.rows.empty() && report.has_reference) {
        report.mean_mse = sum_mse / n;
        report.mean_ssim = sum_ssim / n;
        report.mean_psnr_db = report.psnr_counted > 0 ? sum_psnr / report.psnr_counted
                                                      : std::numeric_limits<double>::infinity();
    }
    if (brisque_n > 0) report.mean_brisque = sum_brisque / brisque_n;
    return report;
}

std::string report_text(const QualityReport& report) {
    std::ostringstream os;
    os.setf(std::ios::fixed);
    os.precision(4);
    if (report.has_reference)
        os << "image                              MSE      PSNR     SSIM";
    else
        os << "image                          ";
    os << (report.rows.empty() || !report.rows.front().brisque ? "" : "  BRISQUE") << "\n";
    for (const QualityRow& r : report.rows) {
        os << r.name;
        for (std::size_t i = r.name.size(); i < 30; ++i) os << ' ';
        if (report.has_reference) {
            os << ' ' << r.mse << "  ";
            if (r.psnr_inf)
                os << "inf     ";
            else
                os << r.psnr_db;
            os << "  " << r.ssim;
        }
        if (r.brisque) os << "  " << *r.brisque;
        os << "\n";
    }
    os << "----\n";
    if (report.has_reference) {
        os << "mean MSE  " << report.mean_mse << "\n";
        os << "mean PSNR " << report.mean_psnr_db << " dB over " << report.psnr_counted
           << " images\n";
        os << "mean SSIM " << report.mean_ssim << "\n";
    }
    if (report.mean_brisque) os << "mean BRISQUE " << *report.mean_brisque << "\n";
    if (!report.skipped.empty()) {
        os << "skipped (no matching reference):";
        for (const std::string& s : report.skipped) os << ' ' << s;
        os << "\n";
    }
    os << "warnings: " << report.warning_count << "\n";
    return os.str();
}

std::string report_json(const QualityReport& report) {
    json j;
    j["has_reference"] = report.has_reference;
    j["warning_count"] = report.warning_count;
    j["skipped"] = report.skipped;
    json rows = json::array();
    for (const QualityRow& r : report.rows) {
        json row;
        row["name"] = r.name;
        if (report.has_reference) {
            row["mse"] = r.mse;
            if (r.psnr_inf)
                row["psnr_db"] = "inf";
            else
                row["psnr_db"] = r.psnr_db;
            row["ssim"] = r.ssim;
        }
        if (r.brisque) row["brisque"] = *r.brisque;
        // reserved for externally computed perceptual scores
        row["clip_iqa"] = nullptr;
        rows.push_back(std::move(row));
    }
    j["images"] = std::move(rows);
    json means;
    if (report.has_reference) {
        means["mse"] = report.mean_mse;
        means["psnr_db"] = report.mean_psnr_db;
        means["psnr_counted"] = report.psnr_counted;
        means["ssim"] = report.mean_ssim;
    }
    if (report.mean_brisque) means["brisque"] = *report.mean_brisque;
    j["means"] = std::move(means);
    return j.dump(2);
}

}  // namespace rootsr
