#pragma once

#include <optional>
#include <string>
#include <vector>

#include "rootsr/image.hpp"
#include "rootsr/synth.hpp"

namespace rootsr {

struct CaptureMeta {
    double depth_mm = 0.0;
    int rotation_step = 0;
    std::string acquired_at;  // ISO-8601 string, stored verbatim
    double mm_per_px = 0.01;
};

/// One HR reference target plus N overlapping LR frames. The reference is
/// the middle frame (N odd); every non-reference true shift carries a
/// fractional part of exactly 0.5 LR pixels by construction. Real captures
/// have no hr_target and shifts_known == false — never zeros, so nothing
/// downstream can mistake them for aligned.
struct BurstSample {
    std::optional<ImageBuffer> hr_target;
    std::vector<ImageBuffer> frames;
    std::vector<double> true_shifts_lr;  // vertical, LR pixel units; empty when unknown
    bool shifts_known = false;
    std::optional<CaptureMeta> meta;

    int frame_count() const { return static_cast<int>(frames.size()); }
    int reference_index() const { return frame_count() / 2; }
};

constexpr int kBurstScale = 2;

/// Crop the window at each vertical HR offset and area-downscale by 2.
/// Offsets must be odd except the middle one (exactly 0): halving an odd
/// offset is what creates the half-pixel LR shifts.
BurstSample synthesize_burst(const ImageBuffer& scene_img, const Rect& window,
                             const std::vector<int>& hr_offsets);

/// One dataset row: a burst plus whatever scene-level ground truth exists.
struct DatasetEntry {
    std::string sample_id;
    std::string split = "train";
    BurstSample sample;
    std::optional<TraitTruth> truth;
    std::optional<SceneParams> scene_params;
    std::optional<ImageBuffer> root_mask;
    std::vector<ImageBuffer> hair_masks;
};

struct ManifestRecord {
    std::string sample_id;
    std::string split;
    std::string hr_path;  // empty when the sample has no HR target
    std::vector<std::string> frame_paths;
    std::string root_mask_path;
    std::vector<std::string> hair_mask_paths;
    std::string truth_path;
    std::string meta_path;
    std::vector<double> true_shifts_lr;
    bool shifts_known = false;
    int scale = kBurstScale;
};

struct DatasetManifest {
    std::vector<ManifestRecord> records;
};

/// Writes manifest.jsonl plus samples/<id>/{hr.png, lr_k.png, root_mask.png,
/// hair_k.png, truth.json, meta.json}. Shifts are serialized as exact
/// decimal strings ("-1.5") and reload bit-equal; pixels round-trip within
/// PNG quantization (1/510).
DatasetManifest persist_dataset(const std::vector<DatasetEntry>& entries,
                                const std::string& dir);

std::vector<DatasetEntry> load_dataset(const std::string& dir);

/// Real-capture ingestion: each subdirectory of dir is one burst — PNG
/// frames in filename order plus a meta.json sidecar (depth_mm,
/// rotation_step, acquired_at, mm_per_px). Shifts are unknown; even frame
/// counts are rejected. group_names, when given, receives the matching
/// subdirectory names.
std::vector<BurstSample> ingest_real_capture(const std::string& dir,
                                             std::vector<std::string>* group_names = nullptr);

}  // namespace rootsr
