#include "rootsr/burst.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "rootsr/png_io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace rootsr {

namespace {

// Shifts are always an integer number of half pixels; format them as exact
// decimal strings so the manifest round-trips bit-equal.
std::string shift_to_string(double shift) {
    const long long half_units = std::llround(shift * 2.0);
    const long long a = half_units < 0 ? -half_units : half_units;
    std::string s = half_units < 0 ? "-" : "";
    s += std::to_string(a / 2);
    s += (a % 2) ? ".5" : ".0";
    return s;
}

double shift_from_string(const std::string& s) {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw IoError("manifest: bad shift value '" + s + "'");
    return v;
}

json meta_to_json(const CaptureMeta& m) {
    return json{{"depth_mm", m.depth_mm},
                {"rotation_step", m.rotation_step},
                {"acquired_at", m.acquired_at},
                {"mm_per_px", m.mm_per_px}};
}

CaptureMeta meta_from_json(const json& j, const std::string& where) {
    for (const char* field : {"depth_mm", "rotation_step", "acquired_at", "mm_per_px"})
        if (!j.contains(field))
            throw IoError(where + ": metadata missing field '" + std::string(field) + "'");
    CaptureMeta m;
    m.depth_mm = j.at("depth_mm").get<double>();
    m.rotation_step = j.at("rotation_step").get<int>();
    m.acquired_at = j.at("acquired_at").get<std::string>();
    m.mm_per_px = j.at("mm_per_px").get<double>();
    if (m.mm_per_px <= 0.0) throw IoError(where + ": mm_per_px must be > 0");
    return m;
}

json scene_params_to_json(const SceneParams& p) {
    return json{{"height", p.height},
                {"width", p.width},
                {"root_width_px", p.root_width_px},
                {"hair_rate", p.hair_rate},
                {"hair_len_mean_px", p.hair_len_mean_px},
                {"hair_len_std_px", p.hair_len_std_px},
                {"hair_width_px", p.hair_width_px},
                {"bg_roughness", p.bg_roughness},
                {"illum_gradient", p.illum_gradient},
                {"seed", p.seed}};
}

SceneParams scene_params_from_json(const json& j) {
    SceneParams p;
    p.height = j.value("height", p.height);
    p.width = j.value("width", p.width);
    p.root_width_px = j.value("root_width_px", p.root_width_px);
    p.hair_rate = j.value("hair_rate", p.hair_rate);
    p.hair_len_mean_px = j.value("hair_len_mean_px", p.hair_len_mean_px);
    p.hair_len_std_px = j.value("hair_len_std_px", p.hair_len_std_px);
    p.hair_width_px = j.value("hair_width_px", p.hair_width_px);
    p.bg_roughness = j.value("bg_roughness", p.bg_roughness);
    p.illum_gradient = j.value("illum_gradient", p.illum_gradient);
    p.seed = j.value("seed", p.seed);
    return p;
}

}  // namespace

BurstSample synthesize_burst(const ImageBuffer& scene_img, const Rect& window,
                             const std::vector<int>& hr_offsets) {
    const int n = static_cast<int>(hr_offsets.size());
    if (n < 2) throw ArgumentError("synthesize_burst: need at least 2 frames");
    if (n % 2 == 0) throw ArgumentError("synthesize_burst: frame count must be odd");
    const int ref = n / 2;
    if (hr_offsets[ref] != 0)
        throw ArgumentError("synthesize_burst: middle offset must be 0");
    for (int i = 0; i < n; ++i) {
        if (i == ref) continue;
        if (hr_offsets[i] % 2 == 0)
            throw ArgumentError("synthesize_burst: non-reference offset " +
                                std::to_string(hr_offsets[i]) +
                                " must be an odd number of pixels");
    }
    if (window.height % 2 != 0 || window.width % 2 != 0)
        throw ArgumentError("synthesize_burst: window dims must be even");

    BurstSample sample;
    sample.hr_target = crop(scene_img, window);
    sample.frames.reserve(n);
    sample.true_shifts_lr.reserve(n);
    for (int i = 0; i < n; ++i) {
        Rect shifted = window;
        shifted.top += hr_offsets[i];
        const ImageBuffer hr_view = crop(scene_img, shifted);  // throws BoundsError if outside
        sample.frames.push_back(resize(hr_view, window.height / kBurstScale,
                                       window.width / kBurstScale, ResizeMode::Area));
        sample.true_shifts_lr.push_back(hr_offsets[i] / 2.0);
    }
    sample.shifts_known = true;
    return sample;
}

DatasetManifest persist_dataset(const std::vector<DatasetEntry>& entries,
                                const std::string& dir) {
    std::set<std::string> ids;
    for (const DatasetEntry& e : entries) {
        if (e.sample_id.empty()) throw ArgumentError("persist_dataset: empty sample_id");
        if (!ids.insert(e.sample_id).second)
            throw ArgumentError("persist_dataset: duplicate sample_id '" + e.sample_id + "'");
    }

    fs::create_directories(fs::path(dir) / "samples");
    DatasetManifest manifest;
    std::ofstream out(fs::path(dir) / "manifest.jsonl");
    if (!out) throw IoError("persist_dataset: cannot write manifest in " + dir);

    for (const DatasetEntry& e : entries) {
        const fs::path sdir = fs::path(dir) / "samples" / e.sample_id;
        fs::create_directories(sdir);
        ManifestRecord rec;
        rec.sample_id = e.sample_id;
        rec.split = e.split;
        rec.shifts_known = e.sample.shifts_known;
        rec.true_shifts_lr = e.sample.true_shifts_lr;

        const auto rel = [&](const std::string& name) {
            return (fs::path("samples") / e.sample_id / name).generic_string();
        };
        if (e.sample.hr_target) {
            rec.hr_path = rel("hr.png");
            write_png((fs::path(dir) / rec.hr_path).string(), *e.sample.hr_target);
        }
        for (int i = 0; i < e.sample.frame_count(); ++i) {
            rec.frame_paths.push_back(rel("lr_" + std::to_string(i) + ".png"));
            write_png((fs::path(dir) / rec.frame_paths.back()).string(), e.sample.frames[i]);
        }
        if (e.root_mask) {
            rec.root_mask_path = rel("root_mask.png");
            write_png((fs::path(dir) / rec.root_mask_path).string(), *e.root_mask);
        }
        for (std::size_t k = 0; k < e.hair_masks.size(); ++k) {
            rec.hair_mask_paths.push_back(rel("hair_" + std::to_string(k) + ".png"));
            write_png((fs::path(dir) / rec.hair_mask_paths.back()).string(), e.hair_masks[k]);
        }
        if (e.truth || e.scene_params) {
            rec.truth_path = rel("truth.json");
            json jt;
            if (e.truth) {
                jt["truth"] = {{"hair_count", e.truth->hair_count},
                               {"hair_lengths_px", e.truth->hair_lengths_px},
                               {"hair_areas_px", e.truth->hair_areas_px}};
            }
            if (e.scene_params) jt["scene_params"] = scene_params_to_json(*e.scene_params);
            std::ofstream tf(fs::path(dir) / rec.truth_path);
            tf << jt.dump(2) << "\n";
        }
        if (e.sample.meta) {
            rec.meta_path = rel("meta.json");
            std::ofstream mf(fs::path(dir) / rec.meta_path);
            mf << meta_to_json(*e.sample.meta).dump(2) << "\n";
        }

        json line = {{"sample_id", rec.sample_id},
                     {"split", rec.split},
                     {"scale", rec.scale},
                     {"shifts_known", rec.shifts_known},
                     {"frames", rec.frame_paths}};
        json shifts = json::array();
        for (double s : rec.true_shifts_lr) shifts.push_back(shift_to_string(s));
        line["true_shifts_lr"] = shifts;
        if (!rec.hr_path.empty()) line["hr"] = rec.hr_path;
        if (!rec.root_mask_path.empty()) line["root_mask"] = rec.root_mask_path;
        if (!rec.hair_mask_paths.empty()) line["hair_masks"] = rec.hair_mask_paths;
        if (!rec.truth_path.empty()) line["truth"] = rec.truth_path;
        if (!rec.meta_path.empty()) line["meta"] = rec.meta_path;
        out << line.dump() << "\n";
        manifest.records.push_back(std::move(rec));
    }
    return manifest;
}

std::vector<DatasetEntry> load_dataset(const std::string& dir) {
    std::ifstream in(fs::path(dir) / "manifest.jsonl");
    if (!in) throw IoError("load_dataset: no manifest.jsonl in " + dir);

    std::vector<DatasetEntry> entries;
    std::set<std::string> ids;
    std::string linebuf;
    int lineno = 0;
    while (std::getline(in, linebuf)) {
        ++lineno;
        if (linebuf.empty()) continue;
        json line;
        try {
            line = json::parse(linebuf);
        } catch (const json::exception& ex) {
            throw IoError("load_dataset: malformed manifest line " + std::to_string(lineno) +
                          ": " + ex.what());
        }
        DatasetEntry e;
        e.sample_id = line.value("sample_id", "");
        if (e.sample_id.empty())
            throw IoError("load_dataset: manifest line " + std::to_string(lineno) +
                          " has no sample_id");
        if (!ids.insert(e.sample_id).second)
            throw IoError("load_dataset: duplicate sample_id '" + e.sample_id + "'");
        e.split = line.value("split", "train");

        const auto read_one = [&](const std::string& rel_path) {
            const fs::path p = fs::path(dir) / rel_path;
            if (!fs::exists(p))
                throw IoError("load_dataset: sample '" + e.sample_id + "': missing file " +
                              rel_path);
            return read_png(p.string());
        };

        if (line.contains("hr")) e.sample.hr_target = read_one(line.at("hr"));
        for (const auto& fp : line.at("frames")) e.sample.frames.push_back(read_one(fp));
        e.sample.shifts_known = line.value("shifts_known", false);
        if (line.contains("true_shifts_lr"))
            for (const auto& s : line.at("true_shifts_lr"))
                e.sample.true_shifts_lr.push_back(shift_from_string(s.get<std::string>()));
        if (line.contains("root_mask")) e.root_mask = read_one(line.at("root_mask"));
        if (line.contains("hair_masks"))
            for (const auto& hp : line.at("hair_masks")) e.hair_masks.push_back(read_one(hp));

        if (line.contains("truth")) {
            const fs::path tp = fs::path(dir) / line.at("truth").get<std::string>();
            if (!fs::exists(tp))
                throw IoError("load_dataset: sample '" + e.sample_id + "': missing file " +
                              line.at("truth").get<std::string>());
            std::ifstream tf(tp);
            json jt = json::parse(tf, nullptr, true);
            if (jt.contains("truth")) {
                TraitTruth t;
                t.hair_count = jt["truth"].value("hair_count", 0);
                if (jt["truth"].contains("hair_lengths_px"))
                    t.hair_lengths_px = jt["truth"]["hair_lengths_px"].get<std::vector<double>>();
                if (jt["truth"].contains("hair_areas_px"))
                    t.hair_areas_px = jt["truth"]["hair_areas_px"].get<std::vector<double>>();
                e.truth = std::move(t);
            }
            if (jt.contains("scene_params"))
                e.scene_params = scene_params_from_json(jt["scene_params"]);
        }
        if (line.contains("meta")) {
            const fs::path mp = fs::path(dir) / line.at("meta").get<std::string>();
            if (!fs::exists(mp))
                throw IoError("load_dataset: sample '" + e.sample_id + "': missing file " +
                              line.at("meta").get<std::string>());
            std::ifstream mf(mp);
            e.sample.meta = meta_from_json(json::parse(mf), "sample '" + e.sample_id + "'");
        }
        entries.push_back(std::move(e));
    }
    return entries;
}

std::vector<BurstSample> ingest_real_capture(const std::string& dir,
                                             std::vector<std::string>* group_names) {
    if (!fs::is_directory(dir)) throw IoError("ingest_real_capture: not a directory: " + dir);
    std::vector<fs::path> groups;
    for (const auto& entry : fs::directory_iterator(dir))
        if (entry.is_directory()) groups.push_back(entry.path());
    std::sort(groups.begin(), groups.end());
    if (groups.empty()) throw IoError("ingest_real_capture: no capture groups in " + dir);

    std::vector<BurstSample> samples;
    for (const fs::path& g : groups) {
        std::vector<fs::path> pngs;
        for (const auto& entry : fs::directory_iterator(g))
            if (entry.is_regular_file() && entry.path().extension() == ".png")
                pngs.push_back(entry.path());
        std::sort(pngs.begin(), pngs.end());  // acquisition position order
        if (pngs.empty()) continue;
        if (pngs.size() % 2 == 0)
            throw IoError("ingest_real_capture: group '" + g.filename().string() +
                          "' has an even frame count (" + std::to_string(pngs.size()) +
                          "); a unique middle reference requires an odd count");
        const fs::path meta_path = g / "meta.json";
        if (!fs::exists(meta_path))
            throw IoError("ingest_real_capture: group '" + g.filename().string() +
                          "' has no meta.json");
        std::ifstream mf(meta_path);
        json jm;
        try {
            jm = json::parse(mf);
        } catch (const json::exception& ex) {
            throw IoError("ingest_real_capture: group '" + g.filename().string() +
                          "': bad meta.json: " + ex.what());
        }

        BurstSample s;
        s.meta = meta_from_json(jm, "group '" + g.filename().string() + "'");
        for (const fs::path& p : pngs) s.frames.push_back(read_png(p.string()));
        for (std::size_t i = 1; i < s.frames.size(); ++i)
            if (!s.frames[i].same_dims(s.frames[0]))
                throw IoError("ingest_real_capture: group '" + g.filename().string() +
                              "' has frames of mixed dimensions");
        s.shifts_known = false;  // never zeros: unknown stays unknown
        samples.push_back(std::move(s));
        if (group_names) group_names->push_back(g.filename().string());
    }
    if (samples.empty()) throw IoError("ingest_real_capture: no frames found in " + dir);
    return samples;
}

}  // namespace rootsr
