#include "rootsr/cli.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "rootsr/align.hpp"
#include "rootsr/burst.hpp"
#include "rootsr/config.hpp"
#include "rootsr/metrics.hpp"
#include "rootsr/network.hpp"
#include "rootsr/png_io.hpp"
#include "rootsr/rng.hpp"
#include "rootsr/synth.hpp"
#include "rootsr/traits.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace rootsr::cli {

namespace {

struct CommonOpts {
    std::string config_path;
    std::string out_dir;
    std::vector<std::string> overrides;
    std::optional<std::uint64_t> seed;
};

void add_common(CLI::App* cmd, CommonOpts& opts, bool out_required = true) {
    cmd->add_option("--config", opts.config_path, "pipeline config JSON");
    auto* out = cmd->add_option("--out", opts.out_dir, "output directory");
    if (out_required) out->required();
    cmd->add_option("--set", opts.overrides, "override config value (key.path=value)")
        ->take_all();
    cmd->add_option("--seed", opts.seed, "override scene/network/train seeds");
}

PipelineConfig load_config(const CommonOpts& opts) {
    json j;
    if (opts.config_path.empty()) {
        j = PipelineConfig{}.to_json();
    } else {
        std::ifstream in(opts.config_path);
        if (!in) throw ConfigError("config: cannot open " + opts.config_path);
        try {
            j = json::parse(in);
        } catch (const json::exception& ex) {
            throw ConfigError("config: bad JSON: " + std::string(ex.what()));
        }
    }
    for (const std::string& s : opts.overrides) apply_override(j, s);
    PipelineConfig cfg = PipelineConfig::from_json(j);
    if (opts.seed) {
        cfg.scene.seed = *opts.seed;
        cfg.network.seed = *opts.seed;
        cfg.train.seed = *opts.seed;
    }
    return cfg;
}

std::string scene_id(int index) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "scene_%05d", index);
    return buf;
}

// ---- gen-data ----------------------------------------------------------

int cmd_gen_data(const CommonOpts& opts) {
    const PipelineConfig cfg = load_config(opts);
    fs::create_directories(fs::path(opts.out_dir) / "scenes");
    std::ofstream manifest(fs::path(opts.out_dir) / "scenes.jsonl");
    if (!manifest) throw IoError("gen-data: cannot write manifest in " + opts.out_dir);

    for (int i = 0; i < cfg.scene_count; ++i) {
        SceneParams p = cfg.scene;
        p.seed = cfg.scene.seed + static_cast<std::uint64_t>(i);
        const RootScene scene = generate_scene(p);
        const std::string id = scene_id(i);
        const fs::path sdir = fs::path(opts.out_dir) / "scenes" / id;
        fs::create_directories(sdir);
        write_png((sdir / "image.png").string(), scene.image);
        write_png((sdir / "root_mask.png").string(), scene.root_mask);
        json hair_paths = json::array();
        for (std::size_t k = 0; k < scene.hair_masks.size(); ++k) {
            const std::string name = "hair_" + std::to_string(k) + ".png";
            write_png((sdir / name).string(), scene.hair_masks[k]);
            hair_paths.push_back(("scenes/" + id + "/" + name));
        }
        json record = {
            {"scene_id", id},
            {"image", "scenes/" + id + "/image.png"},
            {"root_mask", "scenes/" + id + "/root_mask.png"},
            {"hair_masks", hair_paths},
            {"truth",
             {{"hair_count", scene.truth.hair_count},
              {"hair_lengths_px", scene.truth.hair_lengths_px},
              {"hair_areas_px", scene.truth.hair_areas_px}}},
            {"params",
             {{"height", p.height},
              {"width", p.width},
              {"root_width_px", p.root_width_px},
              {"hair_rate", p.hair_rate},
              {"hair_len_mean_px", p.hair_len_mean_px},
              {"hair_len_std_px", p.hair_len_std_px},
              {"hair_width_px", p.hair_width_px},
              {"bg_roughness", p.bg_roughness},
              {"illum_gradient", p.illum_gradient},
              {"seed", p.seed}}}};
        std::ofstream sj(sdir / "scene.json");
        sj << record.dump(2) << "\n";
        manifest << record.dump() << "\n";
    }
    std::cout << "gen-data: wrote " << cfg.scene_count << " scenes to " << opts.out_dir
              << "\n";
    return 0;
}

// ---- make-burst --------------------------------------------------------

struct LoadedScene {
    std::string id;
    ImageBuffer image;
    ImageBuffer root_mask;
    std::vector<ImageBuffer> hair_masks;
    TraitTruth truth;
    SceneParams params;
};

std::vector<LoadedScene> load_scenes(const std::string& dir) {
    std::ifstream manifest(fs::path(dir) / "scenes.jsonl");
    if (!manifest) throw IoError("make-burst: no scenes.jsonl in " + dir);
    std::vector<LoadedScene> scenes;
    std::string line;
    while (std::getline(manifest, line)) {
        if (line.empty()) continue;
        json j = json::parse(line);
        LoadedScene s;
        s.id = j.at("scene_id");
        s.image = read_png((fs::path(dir) / j.at("image").get<std::string>()).string());
        s.root_mask = read_png((fs::path(dir) / j.at("root_mask").get<std::string>()).string());
        for (const auto& hp : j.value("hair_masks", json::array()))
            s.hair_masks.push_back(read_png((fs::path(dir) / hp.get<std::string>()).string()));
        if (j.contains("truth")) {
            s.truth.hair_count = j["truth"].value("hair_count", 0);
            if (j["truth"].contains("hair_lengths_px"))
                s.truth.hair_lengths_px = j["truth"]["hair_lengths_px"].get<std::vector<double>>();
            if (j["truth"].contains("hair_areas_px"))
                s.truth.hair_areas_px = j["truth"]["hair_areas_px"].get<std::vector<double>>();
        }
        scenes.push_back(std::move(s));
    }
    return scenes;
}

int cmd_make_burst(const CommonOpts& opts, const std::string& scenes_dir) {
    const PipelineConfig cfg = load_config(opts);
    const std::vector<LoadedScene> scenes = load_scenes(scenes_dir);
    if (scenes.empty()) throw IoError("make-burst: scene list is empty");

    const int train_count =
        std::max(1, static_cast<int>(std::lround(scenes.size() * (1.0 - cfg.val_fraction))));

    // per-sample randomized offsets (seeded) when magnitudes are configured
    Rng offsets_rng(cfg.scene.seed ^ 0x0ff5e75ULL);
    const auto sample_offsets = [&]() {
        if (cfg.offset_magnitudes.empty()) return cfg.burst_offsets;
        std::vector<int> offs(cfg.network.n_frames, 0);
        const int ref = cfg.network.n_frames / 2;
        for (int f = 0; f < cfg.network.n_frames; ++f) {
            if (f == ref) continue;
            const int mag = cfg.offset_magnitudes[offsets_rng.uniform_index(
                cfg.offset_magnitudes.size())];
            offs[f] = f < ref ? -mag : mag;
        }
        return offs;
    };

    std::vector<DatasetEntry> entries;
    for (std::size_t i = 0; i < scenes.size(); ++i) {
        const LoadedScene& s = scenes[i];
        Rect window;
        window.height = cfg.window_height;
        window.width = cfg.window_width;
        window.top = (s.image.height - cfg.window_height) / 2;
        window.left = (s.image.width - cfg.window_width) / 2;

        DatasetEntry e;
        e.sample_id = s.id;
        e.split = static_cast<int>(i) < train_count ? "train" : "val";
        e.sample = synthesize_burst(s.image, window, sample_offsets());
        CaptureMeta meta;
        meta.acquired_at = "synthetic";
        meta.mm_per_px = cfg.mm_per_px;
        e.sample.meta = meta;
        e.truth = s.truth;
        e.root_mask = s.root_mask;
        e.hair_masks = s.hair_masks;
        entries.push_back(std::move(e));
    }
    persist_dataset(entries, opts.out_dir);
    std::cout << "make-burst: wrote " << entries.size() << " samples (" << train_count
              << " train) to " << opts.out_dir << "\n";
    return 0;
}

// ---- align -------------------------------------------------------------

int cmd_align(const CommonOpts& opts, const std::string& data_dir) {
    const std::vector<DatasetEntry> entries = load_dataset(data_dir);
    fs::create_directories(opts.out_dir);

    json out = json::array();
    int total = 0, within_quarter = 0, degenerate = 0;
    for (const DatasetEntry& e : entries) {
        const int ref = e.sample.reference_index();
        const ImageBuffer ref_gray = to_grayscale(e.sample.frames[ref]);
        json sample_j = {{"sample_id", e.sample_id}};
        json ests = json::array();
        for (int i = 0; i < e.sample.frame_count(); ++i) {
            json row = {{"frame", i}};
            if (i == ref) {
                row["dy"] = 0.0;
                row["reference"] = true;
            } else {
                try {
                    const ShiftEstimate est = estimate_vertical_subpixel_shift(
                        ref_gray, to_grayscale(e.sample.frames[i]));
                    row["dy"] = est.dy;
                    row["peak"] = est.peak;
                    if (e.sample.shifts_known) {
                        const double err = std::abs(est.dy - e.sample.true_shifts_lr[i]);
                        row["true_dy"] = e.sample.true_shifts_lr[i];
                        row["abs_error"] = err;
                        ++total;
                        if (err <= 0.25) ++within_quarter;
                    }
                } catch (const DegenerateInputError&) {
                    row["dy"] = nullptr;
                    row["degenerate"] = true;
                    ++degenerate;
                }
            }
            ests.push_back(std::move(row));
        }
        sample_j["estimates"] = std::move(ests);
        out.push_back(std::move(sample_j));
    }
    std::ofstream of(fs::path(opts.out_dir) / "estimates.json");
    of << out.dump(2) << "\n";
    if (total > 0)
        std::cout << "align: " << within_quarter << "/" << total
                  << " frames within 0.25 px of ground truth\n";
    if (degenerate > 0) std::cout << "align: " << degenerate << " degenerate frames\n";
    std::cout << "align: wrote " << (fs::path(opts.out_dir) / "estimates.json").string()
              << "\n";
    return 0;
}

// ---- train -------------------------------------------------------------

int cmd_train(const CommonOpts& opts, const std::string& data_dir) {
    const PipelineConfig cfg = load_config(opts);
    const std::vector<DatasetEntry> entries = load_dataset(data_dir);
    std::vector<BurstSample> train_set, val_set;
    for (const DatasetEntry& e : entries) {
        if (e.split == "val")
            val_set.push_back(e.sample);
        else
            train_set.push_back(e.sample);
    }

    fs::create_directories(opts.out_dir);
    TrainLog log;
    const Checkpoint ckpt = train(train_set, val_set, cfg.network, cfg.train, &log);

    std::ofstream csv(fs::path(opts.out_dir) / "loss.csv");
    csv << "epoch,step,train_loss,val_loss\n";
    csv.precision(17);
    std::size_t ei = 0;
    for (std::size_t si = 0; si < log.steps.size(); ++si) {
        const TrainLog::Step& st = log.steps[si];
        csv << st.epoch << "," << st.step << "," << st.train_loss << ",\n";
        const bool last_of_epoch =
            si + 1 == log.steps.size() || log.steps[si + 1].epoch != st.epoch;
        if (last_of_epoch && ei < log.epochs.size()) {
            csv << log.epochs[ei].epoch << ",," << "," << log.epochs[ei].val_loss << "\n";
            ++ei;
        }
    }
    const std::string ckpt_path = (fs::path(opts.out_dir) / "midrct.ckpt").string();
    save_checkpoint(ckpt, ckpt_path);
    std::cout << "train: best epoch " << ckpt.epoch << " val_loss " << ckpt.val_loss
              << "; checkpoint " << ckpt_path << "\n";
    if (log.align_fallbacks > 0)
        std::cout << "train: " << log.align_fallbacks
                  << " degenerate-correlation fallbacks to zero shift\n";
    return 0;
}

// ---- enhance -----------------------------------------------------------

int cmd_enhance(const CommonOpts& opts, const std::string& data_dir,
                const std::string& real_dir, const std::string& ckpt_path) {
    if (data_dir.empty() == real_dir.empty())
        throw ConfigError("enhance: give exactly one of --data or --real");
    const Checkpoint ckpt = load_checkpoint(ckpt_path);
    const MiDrct model = model_from_checkpoint(ckpt);
    fs::create_directories(opts.out_dir);

    std::vector<std::string> names;
    std::vector<BurstSample> samples;
    if (!data_dir.empty()) {
        std::vector<DatasetEntry> entries = load_dataset(data_dir);
        for (DatasetEntry& e : entries) {
            names.push_back(e.sample_id);
            samples.push_back(std::move(e.sample));
        }
    } else {
        samples = ingest_real_capture(real_dir, &names);
    }

    for (std::size_t i = 0; i < samples.size(); ++i) {
        const ImageBuffer sr = model.forward(samples[i]);
        write_png((fs::path(opts.out_dir) / (names[i] + ".png")).string(), sr);
    }
    std::cout << "enhance: wrote " << samples.size() << " images to " << opts.out_dir << "\n";
    return 0;
}

// ---- baseline ----------------------------------------------------------

int cmd_baseline(const CommonOpts& opts, const std::string& data_dir) {
    const std::vector<DatasetEntry> entries = load_dataset(data_dir);
    const fs::path bil = fs::path(opts.out_dir) / "bilinear";
    const fs::path bic = fs::path(opts.out_dir) / "bicubic";
    fs::create_directories(bil);
    fs::create_directories(bic);
    for (const DatasetEntry& e : entries) {
        const ImageBuffer& ref = e.sample.frames[e.sample.reference_index()];
        write_png((bil / (e.sample_id + ".png")).string(),
                  resize(ref, ref.height * 2, ref.width * 2, ResizeMode::Bilinear));
        write_png((bic / (e.sample_id + ".png")).string(),
                  resize(ref, ref.height * 2, ref.width * 2, ResizeMode::Bicubic));
    }
    std::cout << "baseline: wrote " << entries.size() << " bilinear and bicubic x2 images to "
              << opts.out_dir << "\n";
    return 0;
}

// ---- eval --------------------------------------------------------------

int cmd_eval(const CommonOpts& opts, const std::string& outputs_dir,
             const std::string& refs_dir, const std::string& model_file) {
    std::optional<std::string> refs, model;
    if (!refs_dir.empty()) refs = refs_dir;
    if (!model_file.empty()) model = model_file;
    const QualityReport report = evaluate_dataset(outputs_dir, refs, model);
    std::cout << report_text(report);
    fs::create_directories(opts.out_dir);
    std::ofstream of(fs::path(opts.out_dir) / "report.json");
    of << report_json(report) << "\n";
    std::cout << "eval: wrote " << (fs::path(opts.out_dir) / "report.json").string() << "\n";
    return 0;
}

// ---- analyze -----------------------------------------------------------

int cmd_analyze(const CommonOpts& opts, const std::string& root_mask_path,
                const std::vector<std::string>& hair_mask_paths,
                std::optional<double> mm_per_px_flag) {
    const PipelineConfig cfg = load_config(opts);
    const double mm_per_px = mm_per_px_flag.value_or(cfg.mm_per_px);
    const ImageBuffer root_mask = read_png(root_mask_path);
    if (hair_mask_paths.empty()) throw ConfigError("analyze: need at least one --hair-mask");

    ImageBuffer hair_union = read_png(hair_mask_paths[0]);
    for (std::size_t i = 1; i < hair_mask_paths.size(); ++i) {
        const ImageBuffer m = read_png(hair_mask_paths[i]);
        if (!m.same_dims(hair_union)) throw ArgumentError("analyze: hair mask dims mismatch");
        for (std::size_t k = 0; k < hair_union.data.size(); ++k)
            hair_union.data[k] = std::max(hair_union.data[k], m.data[k]);
    }

    const TraitReport report = analyze(root_mask, hair_union, mm_per_px);
    std::cout << trait_report_text(report);
    if (!opts.out_dir.empty()) {
        fs::create_directories(opts.out_dir);
        std::ofstream of(fs::path(opts.out_dir) / "traits.json");
        of << trait_report_json(report) << "\n";
        std::cout << "analyze: wrote " << (fs::path(opts.out_dir) / "traits.json").string()
                  << "\n";
    }
    return 0;
}

}  // namespace

int run(int argc, const char* const* argv) {
    CLI::App app{"multi-image super-resolution toolkit for underground root imagery"};
    app.require_subcommand(1);

    CommonOpts gen_opts;
    auto* gen = app.add_subcommand("gen-data", "generate synthetic root scenes");
    add_common(gen, gen_opts);

    CommonOpts burst_opts;
    std::string burst_scenes;
    auto* mb = app.add_subcommand("make-burst", "turn scenes into LR burst samples");
    add_common(mb, burst_opts);
    mb->add_option("--scenes", burst_scenes, "scene directory from gen-data")->required();

    CommonOpts align_opts;
    std::string align_data;
    auto* al = app.add_subcommand("align", "estimate vertical sub-pixel shifts");
    add_common(al, align_opts);
    al->add_option("--data", align_data, "burst dataset directory")->required();

    CommonOpts train_opts;
    std::string train_data;
    auto* tr = app.add_subcommand("train", "train the fusion network");
    add_common(tr, train_opts);
    tr->add_option("--data", train_data, "burst dataset directory")->required();

    CommonOpts enh_opts;
    std::string enh_data, enh_real, enh_ckpt;
    auto* en = app.add_subcommand("enhance", "super-resolve bursts with a checkpoint");
    add_common(en, enh_opts);
    en->add_option("--data", enh_data, "burst dataset directory");
    en->add_option("--real", enh_real, "real capture directory (ingested)");
    en->add_option("--checkpoint", enh_ckpt, "trained checkpoint file")->required();

    CommonOpts base_opts;
    std::string base_data;
    auto* ba = app.add_subcommand("baseline", "bilinear/bicubic x2 reference outputs");
    add_common(ba, base_opts);
    ba->add_option("--data", base_data, "burst dataset directory")->required();

    CommonOpts eval_opts;
    std::string eval_outputs, eval_refs, eval_model;
    auto* ev = app.add_subcommand("eval", "image quality report");
    add_common(ev, eval_opts);
    ev->add_option("--outputs", eval_outputs, "directory of PNGs to score")->required();
    ev->add_option("--refs", eval_refs, "directory of reference PNGs");
    ev->add_option("--model", eval_model, "BRISQUE SVR model JSON");

    CommonOpts ana_opts;
    std::string ana_root;
    std::vector<std::string> ana_hairs;
    std::optional<double> ana_mm;
    auto* an = app.add_subcommand("analyze", "root/hair trait quantification from masks");
    add_common(an, ana_opts, /*out_required=*/false);
    an->add_option("--root-mask", ana_root, "binary root mask PNG")->required();
    an->add_option("--hair-mask", ana_hairs, "binary hair mask PNG (repeatable)")
        ->required()
        ->take_all();
    an->add_option("--mm-per-px", ana_mm, "spatial calibration override");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (gen->parsed()) return cmd_gen_data(gen_opts);
        if (mb->parsed()) return cmd_make_burst(burst_opts, burst_scenes);
        if (al->parsed()) return cmd_align(align_opts, align_data);
        if (tr->parsed()) return cmd_train(train_opts, train_data);
        if (en->parsed()) return cmd_enhance(enh_opts, enh_data, enh_real, enh_ckpt);
        if (ba->parsed()) return cmd_baseline(base_opts, base_data);
        if (ev->parsed()) return cmd_eval(eval_opts, eval_outputs, eval_refs, eval_model);
        if (an->parsed()) return cmd_analyze(ana_opts, ana_root, ana_hairs, ana_mm);
    } catch (const ConfigError& e) {
        std::cerr << "error: config: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}

}  // namespace rootsr::cli
