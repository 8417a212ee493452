#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "gwnet/data_io.hpp"
#include "gwnet/error.hpp"
#include "gwnet/synthetic.hpp"
#include "gwnet/training.hpp"
#include "gwnet/verify.hpp"

namespace gwnet::cli {

// Command implementations shared by the binary and the test suite. Every
// command is rerunnable: identical inputs and seed produce byte-identical
// outputs. Exit codes: 0 success, 1 verification failure, 2 configuration
// error, 3 I/O or format error.

inline constexpr int kExitOk = 0;
inline constexpr int kExitVerifyFailed = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitIo = 3;

template <typename Fn>
int guarded(std::ostream& err, Fn&& fn) {
    try {
        return fn();
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const DomainError& e) {
        err << "error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const FormatError& e) {
        err << "error: " << e.what() << "\n";
        return kExitIo;
    } catch (const InputError& e) {
        err << "error: " << e.what() << "\n";
        return kExitIo;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitIo;
    }
}

// ---------------------------------------------------------------------------
// preprocess: raw frame directories -> aggregated clip files + manifest.

struct PreprocessOptions {
    std::string manifest;
    std::string out_dir = "clips";
    std::size_t window_size = 5;
    std::size_t max_frames = 100;
    std::size_t target_h = 34;
    std::size_t target_w = 54;
};

inline int run_preprocess(const PreprocessOptions& opt, std::ostream& out, std::ostream& err) {
    return guarded(err, [&]() {
        if (opt.manifest.empty()) throw ConfigError("preprocess requires --manifest");
        const DatasetManifest manifest = load_manifest(opt.manifest);
        if (manifest.entries.empty()) throw InputError("manifest '" + opt.manifest + "' is empty");
        std::filesystem::create_directories(opt.out_dir);

        std::vector<ManifestEntry> out_entries;
        Shape clip_shape;
        for (std::size_t ei = 0; ei < manifest.entries.size(); ++ei) {
            const ManifestEntry& entry = manifest.entries[ei];
            try {
                FrameSequence<float> seq = read_frame_dir<float>(entry.path);
                std::vector<BBox> boxes;
                if (!entry.bbox_path.empty()) boxes = read_bbox_file(entry.bbox_path);
                FrameSequence<float> cropped;
                cropped.frames.reserve(seq.frames.size());
                for (std::size_t fi = 0; fi < seq.frames.size(); ++fi) {
                    if (boxes.empty()) {
                        cropped.frames.push_back(
                            center_crop_resize(seq.frames[fi], opt.target_h, opt.target_w));
                    } else {
                        const BBox& box = boxes[std::min(fi, boxes.size() - 1)];
                        cropped.frames.push_back(
                            crop_person_bbox(seq.frames[fi], box, opt.target_h, opt.target_w));
                    }
                }
                const std::string stem = std::filesystem::path(entry.path).filename().string();
                std::ostringstream name;
                name << opt.out_dir << '/' << std::setw(4) << std::setfill('0') << ei << '_' << stem
                     << ".clip";
                ClipVolume<float> clip =
                    aggregate_video(cropped, opt.window_size, opt.max_frames, stem);
                write_clip(name.str(), clip);
                clip_shape = clip.voxels.shape();
                out_entries.push_back({name.str(), entry.label, entry.subject, ""});
            } catch (const std::exception& e) {
                throw InputError("entry '" + entry.path + "': " + e.what());
            }
        }
        const std::string out_manifest = opt.out_dir + "/manifest.tsv";
        write_manifest(out_manifest, out_entries);
        out << "preprocessed " << out_entries.size() << " clips -> " << clip_shape[0] << 'x'
            << clip_shape[1] << 'x' << clip_shape[2] << ", manifest " << out_manifest << "\n";
        return kExitOk;
    });
}

// ---------------------------------------------------------------------------
// Clip dataset loading shared by train and sweep.

template <typename T = float>
Dataset<T> load_clip_dataset(const std::string& manifest_path) {
    const DatasetManifest manifest = load_manifest(manifest_path);
    if (manifest.entries.empty()) throw InputError("manifest '" + manifest_path + "' is empty");
    Dataset<T> ds;
    ds.label_names = manifest.labels;
    for (const ManifestEntry& e : manifest.entries) {
        LabeledClip<T> lc;
        ClipVolume<float> loaded = read_clip(e.path);
        if constexpr (std::is_same_v<T, float>) {
            lc.clip = std::move(loaded);
        } else {
            lc.clip.voxels = loaded.voxels.template cast<T>();
            lc.clip.source_id = loaded.source_id;
        }
        lc.label = manifest.label_index(e.label);
        lc.subject = e.subject;
        ds.clips.push_back(std::move(lc));
    }
    const Shape& first = ds.clips.front().clip.voxels.shape();
    for (const auto& lc : ds.clips)
        if (lc.clip.voxels.shape() != first)
            throw InputError("clips in '" + manifest_path + "' disagree in shape");
    return ds;
}

// ---------------------------------------------------------------------------
// train: two-step training with k-fold cross-validation or a holdout split.

struct TrainOptions {
    std::string manifest;
    std::string preset = "kth";
    std::string out_dir = "train_out";
    std::string eval_mode = "folds";  // "folds" | "holdout"
    std::size_t folds = 5;
    std::size_t epochs = 300;
    std::optional<std::size_t> lstm_epochs;  // defaults to epochs
    std::uint64_t seed = 0;
    std::string fine_tune_from;              // checkpoint path
    std::string trainable = "Conv4,FC1";     // used with --fine-tune-from
    std::size_t batch_size = 16;
    double lr = 1e-4;
    double dropout = 0.4;
    std::size_t augment_count = 0;
    std::size_t lstm_cells = 50;
    std::size_t neighborhood = 4;
    std::string group_by = "clip";  // "clip" | "subject"
};

inline std::vector<std::string> split_csv(const std::string& csv) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : csv) {
        if (c == ',') {
            if (!cur.empty()) out.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    if (!cur.empty()) out.push_back(cur);
    return out;
}

namespace cli_detail {

inline TrainingConfig config_from(const TrainOptions& opt) {
    TrainingConfig cfg;
    cfg.base_lr = opt.lr;
    cfg.epochs = opt.epochs;
    cfg.lstm_epochs = opt.lstm_epochs.value_or(opt.epochs);
    cfg.dropout_rate = opt.dropout;
    cfg.batch_size = opt.batch_size;
    cfg.seed = opt.seed;
    cfg.folds = opt.folds;
    cfg.lstm_hidden = opt.lstm_cells;
    cfg.neighborhood = opt.neighborhood;
    cfg.augment_count = opt.augment_count;
    cfg.validate();
    return cfg;
}

struct FoldOutcome {
    double accuracy = 0;
};

template <typename T>
FoldOutcome run_one_fold(const TrainOptions& opt, const TrainingConfig& base_cfg,
                         const Dataset<T>& ds, const std::vector<std::size_t>& train_idx,
                         const std::vector<std::size_t>& test_idx, std::size_t fold,
                         const std::optional<LoadedArtifacts>& pretrained, std::ostream& out) {
    TrainingConfig cfg = base_cfg;
    cfg.seed = Rng(base_cfg.seed).fork(fold + 1).next_u64();

    TrainedArtifacts<T> art;
    if (pretrained) {
        TrainedArtifacts<T> pre;
        pre.model = pretrained->model;
        if (pretrained->lstm) {
            pre.lstm = *pretrained->lstm;
        } else {
            Rng lstm_rng(cfg.seed);
            pre.lstm = lstm_init<T>(pre.model.feature_size(), cfg.lstm_hidden, ds.num_classes(),
                                    lstm_rng);
        }
        art = fine_tune(pre, ds, split_csv(opt.trainable), cfg, train_idx, test_idx);
    } else {
        Rng init_rng(Rng(cfg.seed).fork(0x696e6974).next_u64());
        const std::size_t window = ds.clips.front().clip.frames();
        Model<T> model = build_preset<T>(opt.preset, window, init_rng, InitRule::GlorotUniform,
                                         cfg.dropout_rate);
        attach_head(model, ds.num_classes(), init_rng);
        LstmParams<T> lstm =
            lstm_init<T>(model.feature_size(), cfg.lstm_hidden, ds.num_classes(), init_rng);
        art = train(std::move(model), std::move(lstm), ds, cfg, train_idx, test_idx);
    }

    std::filesystem::create_directories(opt.out_dir);
    const std::string metrics_path =
        opt.out_dir + "/fold" + std::to_string(fold) + "_metrics.tsv";
    std::ofstream metrics(metrics_path, std::ios::binary);
    metrics << metrics_to_tsv(art.log);
    metrics.close();

    CheckpointMeta meta;
    meta.num_classes = static_cast<std::uint32_t>(ds.num_classes());
    meta.seed = cfg.seed;
    meta.epoch = static_cast<std::uint32_t>(cfg.epochs);
    meta.dropout_rate = static_cast<float>(cfg.dropout_rate);
    if constexpr (std::is_same_v<T, float>) {
        save_checkpoint(opt.out_dir + "/fold" + std::to_string(fold) + ".ckpt", art.model,
                        &art.lstm, meta);
    }

    FoldOutcome outcome;
    if (!test_idx.empty()) {
        const EvalResult ev = evaluate(art, ds, test_idx, cfg.neighborhood);
        outcome.accuracy = ev.accuracy;
    } else if (!train_idx.empty()) {
        const EvalResult ev = evaluate(art, ds, train_idx, cfg.neighborhood);
        outcome.accuracy = ev.accuracy;
    }
    const MetricsRow& last_cnn = art.log.empty() ? MetricsRow{} : art.log[cfg.epochs ? cfg.epochs - 1 : 0];
    out << "fold " << fold << ": test_acc=" << format_g6(outcome.accuracy)
        << " cnn_train_acc=" << format_g6(last_cnn.train_acc) << "\n";
    return outcome;
}

inline std::pair<double, double> mean_std(const std::vector<double>& xs) {
    if (xs.empty()) return {0.0, 0.0};
    double mean = 0;
    for (double x : xs) mean += x;
    mean /= static_cast<double>(xs.size());
    double var = 0;
    for (double x : xs) var += (x - mean) * (x - mean);
    var /= static_cast<double>(xs.size());
    return {mean, std::sqrt(var)};
}

}  // namespace cli_detail

inline int run_train(const TrainOptions& opt, std::ostream& out, std::ostream& err) {
    return guarded(err, [&]() {
        if (opt.manifest.empty()) throw ConfigError("train requires --manifest");
        if (opt.eval_mode != "folds" && opt.eval_mode != "holdout")
            throw ConfigError("--eval-mode must be 'folds' or 'holdout'");
        if (opt.group_by != "clip" && opt.group_by != "subject")
            throw ConfigError("--group-by must be 'clip' or 'subject'");
        const TrainingConfig cfg = cli_detail::config_from(opt);

        Dataset<float> ds = load_clip_dataset<float>(opt.manifest);

        std::optional<LoadedArtifacts> pretrained;
        if (!opt.fine_tune_from.empty()) {
            pretrained = load_checkpoint(opt.fine_tune_from);
            // Input adapter: crop/pad clips onto the pretrained spatial grid.
            const auto& spec = pretrained->model.spec;
            for (auto& lc : ds.clips) {
                if (lc.clip.height() != spec.in_h || lc.clip.width() != spec.in_w)
                    lc.clip = adapt_clip(lc.clip, spec.in_h, spec.in_w);
                if (lc.clip.frames() != spec.in_t)
                    throw ShapeError("clip temporal extent " + std::to_string(lc.clip.frames()) +
                                     " does not match pretrained window count " +
                                     std::to_string(spec.in_t));
            }
        }

        expand_with_augmentation(ds, cfg.augment_count);

        FoldPlan plan;
        if (opt.eval_mode == "holdout") {
            plan = build_holdout_plan(ds, cfg.train_fraction, cfg.seed);
        } else {
            plan = build_fold_plan(ds, cfg.folds, cfg.seed,
                                   opt.group_by == "subject" ? FoldGrouping::Subject
                                                             : FoldGrouping::Clip);
        }

        std::vector<double> accuracies;
        for (std::size_t f = 0; f < plan.folds(); ++f) {
            const auto outcome = cli_detail::run_one_fold(opt, cfg, ds, plan.train_indices[f],
                                                          plan.test_indices[f], f, pretrained, out);
            accuracies.push_back(outcome.accuracy);
        }

        const auto [mean, std_dev] = cli_detail::mean_std(accuracies);
        std::filesystem::create_directories(opt.out_dir);
        std::ofstream summary(opt.out_dir + "/summary.tsv", std::ios::binary);
        for (std::size_t f = 0; f < accuracies.size(); ++f)
            summary << f << '\t' << format_g6(accuracies[f]) << '\n';
        summary << "mean\t" << format_g6(mean) << "\tstd\t" << format_g6(std_dev) << '\n';
        summary.close();
        out << "accuracy " << format_g6(mean) << " \xc2\xb1 " << format_g6(std_dev) << "\n";
        return kExitOk;
    });
}

// ---------------------------------------------------------------------------
// verify: invariant suites with one line per check.

struct VerifyOptions {
    std::string suite = "all";
};

inline int run_verify(const VerifyOptions& opt, std::ostream& out, std::ostream& err) {
    return guarded(err, [&]() {
        const std::vector<CheckResult> checks = run_verification(opt.suite);
        bool all_pass = true;
        for (const CheckResult& c : checks) {
            out << (c.pass ? "PASS" : "FAIL") << ' ' << c.name << ": measured " << c.measured
                << ", expected " << c.expected << "\n";
            all_pass = all_pass && c.pass;
        }
        out << (all_pass ? "verification passed" : "verification FAILED") << " (" << checks.size()
            << " checks)\n";
        return all_pass ? kExitOk : kExitVerifyFailed;
    });
}

// ---------------------------------------------------------------------------
// sweep: window-size (re-preprocesses raw frames) or trainable-layer count.

struct SweepOptions {
    std::string param;  // "window-size" | "layers"
    std::string range;  // "lo..hi"; defaults per parameter
    std::string manifest;
    std::string preset = "kth";
    std::string out_file;  // optional TSV
    std::size_t epochs = 300;
    std::optional<std::size_t> lstm_epochs;
    std::size_t folds = 5;
    std::uint64_t seed = 0;
    std::size_t batch_size = 16;
    double lr = 1e-4;
    double dropout = 0.4;
    std::size_t lstm_cells = 50;
    std::size_t max_frames = 100;
};

namespace cli_detail {

inline std::pair<std::size_t, std::size_t> parse_range(const std::string& range,
                                                       std::size_t def_lo, std::size_t def_hi) {
    if (range.empty()) return {def_lo, def_hi};
    const std::size_t dots = range.find("..");
    if (dots == std::string::npos)
        throw ConfigError("sweep range must look like 'lo..hi', got '" + range + "'");
    try {
        const std::size_t lo = std::stoul(range.substr(0, dots));
        const std::size_t hi = std::stoul(range.substr(dots + 2));
        if (lo > hi) throw ConfigError("sweep range is empty: '" + range + "'");
        return {lo, hi};
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception&) {
        throw ConfigError("cannot parse sweep range '" + range + "'");
    }
}

// Mean/std of k-fold accuracies for one fully built dataset + preset name.
template <typename T>
std::pair<double, double> sweep_point(const Dataset<T>& ds, const std::string& preset,
                                      const TrainingConfig& cfg) {
    FoldPlan plan = build_fold_plan(ds, cfg.folds, cfg.seed);
    std::vector<double> accs;
    for (std::size_t f = 0; f < plan.folds(); ++f) {
        TrainingConfig fold_cfg = cfg;
        fold_cfg.seed = Rng(cfg.seed).fork(f + 1).next_u64();
        Rng init_rng(Rng(fold_cfg.seed).fork(0x696e6974).next_u64());
        const std::size_t window = ds.clips.front().clip.frames();
        Model<T> model =
            build_preset<T>(preset, window, init_rng, InitRule::GlorotUniform, cfg.dropout_rate);
        attach_head(model, ds.num_classes(), init_rng);
        LstmParams<T> lstm =
            lstm_init<T>(model.feature_size(), cfg.lstm_hidden, ds.num_classes(), init_rng);
        TrainedArtifacts<T> art = train(std::move(model), std::move(lstm), ds, fold_cfg,
                                        plan.train_indices[f], plan.test_indices[f]);
        accs.push_back(evaluate(art, ds, plan.test_indices[f], cfg.neighborhood).accuracy);
    }
    return mean_std(accs);
}

}  // namespace cli_detail

inline int run_sweep(const SweepOptions& opt, std::ostream& out, std::ostream& err) {
    return guarded(err, [&]() {
        if (opt.manifest.empty()) throw ConfigError("sweep requires --manifest");
        if (opt.param != "window-size" && opt.param != "layers")
            throw ConfigError("--param must be 'window-size' or 'layers'");
        TrainingConfig cfg;
        cfg.base_lr = opt.lr;
        cfg.epochs = opt.epochs;
        cfg.lstm_epochs = opt.lstm_epochs.value_or(opt.epochs);
        cfg.dropout_rate = opt.dropout;
        cfg.batch_size = opt.batch_size;
        cfg.seed = opt.seed;
        cfg.folds = opt.folds;
        cfg.lstm_hidden = opt.lstm_cells;
        cfg.validate();

        std::ostringstream table;
        table << "setting\tmean_acc\tstd_acc\n";

        if (opt.param == "window-size") {
            const auto [lo, hi] = cli_detail::parse_range(opt.range, 3, 8);
            if (lo < 3 || hi > 8) throw ConfigError("window-size sweep range must stay in [3,8]");
            // Re-preprocess the raw manifest once per window size.
            const DatasetManifest manifest = load_manifest(opt.manifest);
            if (manifest.entries.empty()) throw ConfigError("manifest is empty");
            const ArchitectureSpec probe = preset_spec(opt.preset, 20);
            for (std::size_t L = lo; L <= hi; ++L) {
                Dataset<float> ds;
                ds.label_names = manifest.labels;
                for (const ManifestEntry& e : manifest.entries) {
                    FrameSequence<float> seq = read_frame_dir<float>(e.path);
                    std::vector<BBox> boxes;
                    if (!e.bbox_path.empty()) boxes = read_bbox_file(e.bbox_path);
                    FrameSequence<float> cropped;
                    for (std::size_t fi = 0; fi < seq.frames.size(); ++fi) {
                        if (boxes.empty())
                            cropped.frames.push_back(
                                center_crop_resize(seq.frames[fi], probe.in_h, probe.in_w));
                        else
                            cropped.frames.push_back(crop_person_bbox(
                                seq.frames[fi], boxes[std::min(fi, boxes.size() - 1)], probe.in_h,
                                probe.in_w));
                    }
                    LabeledClip<float> lc;
                    lc.clip = aggregate_video(cropped, L, opt.max_frames,
                                              std::filesystem::path(e.path).filename().string());
                    lc.label = manifest.label_index(e.label);
                    lc.subject = e.subject;
                    ds.clips.push_back(std::move(lc));
                }
                const auto [mean, std_dev] = cli_detail::sweep_point(ds, opt.preset, cfg);
                table << L << '\t' << format_g6(mean) << '\t' << format_g6(std_dev) << '\n';
            }
        } else {
            const auto [lo, hi] = cli_detail::parse_range(opt.range, 5, 8);
            if (lo < 5 || hi > 8) throw ConfigError("layers sweep range must stay in [5,8]");
            Dataset<float> ds = load_clip_dataset<float>(opt.manifest);
            for (std::size_t depth = lo; depth <= hi; ++depth) {
                const std::string preset =
                    depth == 5 ? opt.preset : opt.preset + "-" + std::to_string(depth);
                const auto [mean, std_dev] = cli_detail::sweep_point(ds, preset, cfg);
                table << depth << '\t' << format_g6(mean) << '\t' << format_g6(std_dev) << '\n';
            }
        }

        out << table.str();
        if (!opt.out_file.empty()) {
            std::ofstream os(opt.out_file, std::ios::binary);
            if (!os) throw FormatError("cannot open '" + opt.out_file + "' for writing");
            os << table.str();
        }
        return kExitOk;
    });
}

// ---------------------------------------------------------------------------
// synth: generates the moving-square demo dataset (raw PGM frames).

struct SynthOptions {
    std::string out_dir = "synth_data";
    std::size_t clips_per_class = 6;
    std::size_t frames = 100;
};

inline int run_synth(const SynthOptions& opt, std::ostream& out, std::ostream& err) {
    return guarded(err, [&]() {
        const std::string manifest = write_synthetic_raw<float>(opt.out_dir, opt.clips_per_class,
                                                                opt.frames);
        out << "wrote " << (2 * opt.clips_per_class) << " raw clips under " << opt.out_dir
            << ", manifest " << manifest << "\n";
        return kExitOk;
    });
}

}  // namespace gwnet::cli
