#include "rootsr/config.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

using nlohmann::json;

namespace rootsr {

namespace {

constexpr int kConfigVersion = 1;

template <typename T>
T field(const json& j, const std::string& section, const char* name, T fallback) {
    if (!j.contains(section) || !j[section].contains(name)) return fallback;
    try {
        return j[section][name].get<T>();
    } catch (const json::exception&) {
        throw ConfigError(section + "." + name + ": wrong type");
    }
}

}  // namespace

PipelineConfig PipelineConfig::from_json(const json& j) {
    if (j.contains("version") && j["version"].get<int>() != kConfigVersion)
        throw ConfigError("version: expected " + std::to_string(kConfigVersion));

    PipelineConfig c;
    c.scene.height = field(j, "scene", "height", c.scene.height);
    c.scene.width = field(j, "scene", "width", c.scene.width);
    c.scene.root_width_px = field(j, "scene", "root_width_px", c.scene.root_width_px);
    c.scene.hair_rate = field(j, "scene", "hair_rate", c.scene.hair_rate);
    c.scene.hair_len_mean_px = field(j, "scene", "hair_len_mean_px", c.scene.hair_len_mean_px);
    c.scene.hair_len_std_px = field(j, "scene", "hair_len_std_px", c.scene.hair_len_std_px);
    c.scene.hair_width_px = field(j, "scene", "hair_width_px", c.scene.hair_width_px);
    c.scene.bg_roughness = field(j, "scene", "bg_roughness", c.scene.bg_roughness);
    c.scene.illum_gradient = field(j, "scene", "illum_gradient", c.scene.illum_gradient);
    c.scene.seed = field(j, "scene", "seed", c.scene.seed);

    if (j.contains("burst") && j["burst"].contains("offsets"))
        c.burst_offsets = j["burst"]["offsets"].get<std::vector<int>>();
    if (j.contains("burst") && j["burst"].contains("offset_magnitudes"))
        c.offset_magnitudes = j["burst"]["offset_magnitudes"].get<std::vector<int>>();
    c.window_height = field(j, "burst", "window_height", c.window_height);
    c.window_width = field(j, "burst", "window_width", c.window_width);

    c.network.n_frames = field(j, "network", "n_frames", c.network.n_frames);
    c.network.embed_dim = field(j, "network", "embed_dim", c.network.embed_dim);
    c.network.scale = field(j, "network", "scale", c.network.scale);
    c.network.rdg_count = field(j, "network", "rdg_count", c.network.rdg_count);
    c.network.blocks_per_group =
        field(j, "network", "blocks_per_group", c.network.blocks_per_group);
    c.network.growth = field(j, "network", "growth", c.network.growth);
    c.network.align_enabled = field(j, "network", "align_enabled", c.network.align_enabled);
    c.network.seed = field(j, "network", "seed", c.network.seed);

    c.train.epochs = field(j, "train", "epochs", c.train.epochs);
    c.train.batch_size = field(j, "train", "batch_size", c.train.batch_size);
    c.train.lr = field(j, "train", "lr", c.train.lr);
    c.train.beta1 = field(j, "train", "beta1", c.train.beta1);
    c.train.beta2 = field(j, "train", "beta2", c.train.beta2);
    c.train.eps = field(j, "train", "eps", c.train.eps);
    c.train.seed = field(j, "train", "seed", c.train.seed);
    const std::string loss = field<std::string>(j, "train", "loss", "l1");
    if (loss == "l1")
        c.train.loss = LossKind::L1;
    else if (loss == "l2")
        c.train.loss = LossKind::L2;
    else
        throw ConfigError("train.loss: must be 'l1' or 'l2'");

    c.scene_count = field(j, "data", "scene_count", c.scene_count);
    c.val_fraction = field(j, "data", "val_fraction", c.val_fraction);
    c.svr_model = field<std::string>(j, "metrics", "svr_model", c.svr_model);
    c.mm_per_px = field(j, "calibration", "mm_per_px", c.mm_per_px);

    c.validate();
    return c;
}

PipelineConfig PipelineConfig::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open " + path);
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& ex) {
        throw ConfigError("config: bad JSON in " + path + ": " + ex.what());
    }
    return from_json(j);
}

json PipelineConfig::to_json() const {
    json j;
    j["version"] = kConfigVersion;
    j["scene"] = {{"height", scene.height},
                  {"width", scene.width},
                  {"root_width_px", scene.root_width_px},
                  {"hair_rate", scene.hair_rate},
                  {"hair_len_mean_px", scene.hair_len_mean_px},
                  {"hair_len_std_px", scene.hair_len_std_px},
                  {"hair_width_px", scene.hair_width_px},
                  {"bg_roughness", scene.bg_roughness},
                  {"illum_gradient", scene.illum_gradient},
                  {"seed", scene.seed}};
    j["burst"] = {{"offsets", burst_offsets},
                  {"offset_magnitudes", offset_magnitudes},
                  {"window_height", window_height},
                  {"window_width", window_width}};
    j["network"] = {{"n_frames", network.n_frames},
                    {"embed_dim", network.embed_dim},
                    {"scale", network.scale},
                    {"rdg_count", network.rdg_count},
                    {"blocks_per_group", network.blocks_per_group},
                    {"growth", network.growth},
                    {"align_enabled", network.align_enabled},
                    {"seed", network.seed}};
    j["train"] = {{"epochs", train.epochs},
                  {"batch_size", train.batch_size},
                  {"lr", train.lr},
                  {"beta1", train.beta1},
                  {"beta2", train.beta2},
                  {"eps", train.eps},
                  {"loss", train.loss == LossKind::L1 ? "l1" : "l2"},
                  {"seed", train.seed}};
    j["data"] = {{"scene_count", scene_count}, {"val_fraction", val_fraction}};
    j["metrics"] = {{"svr_model", svr_model}};
    j["calibration"] = {{"mm_per_px", mm_per_px}};
    return j;
}

void PipelineConfig::validate() const {
    try {
        scene.validate();
    } catch (const ArgumentError& ex) {
        throw ConfigError(std::string("scene: ") + ex.what());
    }
    network.validate();

    // fixed-offsets mode only; magnitude mode synthesizes per-sample offsets
    if (offset_magnitudes.empty()) {
        const int n = static_cast<int>(burst_offsets.size());
        if (n < 3 || n % 2 == 0)
            throw ConfigError("burst.offsets: need an odd count >= 3");
        if (burst_offsets[n / 2] != 0)
            throw ConfigError("burst.offsets: middle offset must be 0");
        for (int i = 0; i < n; ++i)
            if (i != n / 2 && burst_offsets[i] % 2 == 0)
                throw ConfigError("burst.offsets: non-reference offsets must be odd");
        if (n != network.n_frames)
            throw ConfigError("burst.offsets: count must equal network.n_frames");
    }

    if (window_height % 2 != 0 || window_width % 2 != 0)
        throw ConfigError("burst.window_height/window_width: must be even");
    if (window_height < 16 || window_width < 16)
        throw ConfigError("burst.window_height/window_width: must be >= 16");
    for (int m : offset_magnitudes)
        if (m < 1 || m % 2 == 0)
            throw ConfigError("burst.offset_magnitudes: entries must be odd and >= 1");
    int max_off = 0;
    for (int o : burst_offsets) max_off = std::max(max_off, std::abs(o));
    for (int m : offset_magnitudes) max_off = std::max(max_off, m);
    if (window_height + 2 * max_off > scene.height || window_width > scene.width)
        throw ConfigError("burst.window: window plus offsets must fit inside scene dims");

    if (train.epochs < 1) throw ConfigError("train.epochs: must be >= 1");
    if (train.batch_size < 1) throw ConfigError("train.batch_size: must be >= 1");
    if (!(train.lr > 0.0)) throw ConfigError("train.lr: must be > 0");
    if (!(train.eps > 0.0)) throw ConfigError("train.eps: must be > 0");
    if (train.beta1 < 0.0 || train.beta1 >= 1.0) throw ConfigError("train.beta1: must be in [0, 1)");
    if (train.beta2 < 0.0 || train.beta2 >= 1.0) throw ConfigError("train.beta2: must be in [0, 1)");

    if (scene_count < 1) throw ConfigError("data.scene_count: must be >= 1");
    if (val_fraction <= 0.0 || val_fraction >= 1.0)
        throw ConfigError("data.val_fraction: must be in (0, 1)");
    if (!(mm_per_px > 0.0)) throw ConfigError("calibration.mm_per_px: must be > 0");
}

void apply_override(json& j, const std::string& assignment) {
    const std::size_t eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0)
        throw ConfigError("--set expects key.path=value, got '" + assignment + "'");
    const std::string keypath = assignment.substr(0, eq);
    const std::string value = assignment.substr(eq + 1);

    json* node = &j;
    std::stringstream ss(keypath);
    std::string part;
    std::vector<std::string> parts;
    while (std::getline(ss, part, '.')) {
        if (part.empty()) throw ConfigError("--set: empty path segment in '" + keypath + "'");
        parts.push_back(part);
    }
    for (std::size_t i = 0; i + 1 < parts.size(); ++i) node = &((*node)[parts[i]]);

    json parsed;
    try {
        parsed = json::parse(value);
    } catch (const json::exception&) {
        parsed = value;  // plain string
    }
    (*node)[parts.back()] = parsed;
}

}  // namespace rootsr
