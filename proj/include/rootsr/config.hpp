#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "rootsr/network.hpp"
#include "rootsr/synth.hpp"

namespace rootsr {

/// Whole-pipeline configuration, loaded from a versioned JSON file.
/// Every numeric field is validated against its module's preconditions at
/// load time; violations raise ConfigError naming the field path.
struct PipelineConfig {
    SceneParams scene;
    std::vector<int> burst_offsets{-3, 0, 3};
    /// When non-empty, make-burst draws each sample's non-reference offsets
    /// as random odd magnitudes from this list (seeded) instead of using the
    /// fixed burst_offsets; varied shifts are what give the alignment module
    /// information a static network cannot bake in.
    std::vector<int> offset_magnitudes;
    int window_height = 128;
    int window_width = 128;
    NetworkConfig network;
    TrainHyper train;
    int scene_count = 20;
    double val_fraction = 0.2;
    std::string svr_model;  // empty: BRISQUE scoring unavailable
    double mm_per_px = 0.01;

    static PipelineConfig from_json(const nlohmann::json& j);
    static PipelineConfig from_file(const std::string& path);
    nlohmann::json to_json() const;
    void validate() const;
};

/// `--set key.path=value` override on the raw JSON; value parsed as JSON
/// when possible, kept as a string otherwise.
void apply_override(nlohmann::json& j, const std::string& assignment);

}  // namespace rootsr
