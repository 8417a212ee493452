#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "gwnet/data_io.hpp"
#include "gwnet/rng.hpp"
#include "gwnet/sampler.hpp"
#include "gwnet/tensor.hpp"
#include "gwnet/training.hpp"

namespace gwnet {

// Two-class sanity task: a bright square translating left-to-right (class 0,
// "right") or right-to-left (class 1, "left") over an otherwise dark scene.
// Linearly separable from motion direction, so a correct training pipeline
// must overfit a handful of clips quickly.

inline const std::vector<std::string>& synthetic_label_names() {
    static const std::vector<std::string> names = {"left", "right"};
    return names;
}

// "right" = class index of rightward motion under sorted label names
// {left, right}: left -> 0, right -> 1.
inline std::size_t synthetic_class_rightward() { return 1; }

namespace synth_detail {

template <typename T>
void paint_square(Tensor<T>& frame, double cy, double cx, std::size_t half, T value) {
    const long long h = static_cast<long long>(frame.extent(0));
    const long long w = static_cast<long long>(frame.extent(1));
    const long long y0 = static_cast<long long>(std::lround(cy)) - static_cast<long long>(half);
    const long long x0 = static_cast<long long>(std::lround(cx)) - static_cast<long long>(half);
    const long long side = 2 * static_cast<long long>(half) + 1;
    for (long long y = y0; y < y0 + side; ++y) {
        if (y < 0 || y >= h) continue;
        for (long long x = x0; x < x0 + side; ++x) {
            if (x < 0 || x >= w) continue;
            frame(static_cast<std::size_t>(y), static_cast<std::size_t>(x)) = value;
        }
    }
}

}  // namespace synth_detail

// Raw frame sequence for one clip: `frames` frames of h x w with the square
// sweeping across. `rightward` picks the motion direction; the vertical
// offset and brightness vary per variant so clips are not identical.
template <typename T = float>
FrameSequence<T> make_synthetic_frames(bool rightward, std::size_t variant, std::size_t frames = 100,
                                       std::size_t h = 24, std::size_t w = 24) {
    Rng rng(0x53594e54ULL ^ (variant * 2654435761ULL) ^ (rightward ? 1 : 0));
    const std::size_t half = std::max<std::size_t>(1, w / 8);
    const double margin = static_cast<double>(half) + 1.0;
    const double lo = margin, hi = static_cast<double>(w) - 1.0 - margin;
    const double cy = static_cast<double>(h) / 2.0 + rng.uniform(-2.0, 2.0);
    const T bright = static_cast<T>(0.75 + 0.25 * rng.uniform());

    FrameSequence<T> seq;
    seq.frames.reserve(frames);
    for (std::size_t t = 0; t < frames; ++t) {
        const double phase = static_cast<double>(t) / static_cast<double>(frames - 1);
        const double cx = rightward ? lo + phase * (hi - lo) : hi - phase * (hi - lo);
        Tensor<T> frame({h, w}, static_cast<T>(0.05));
        synth_detail::paint_square(frame, cy, cx, half, bright);
        seq.frames.push_back(std::move(frame));
    }
    return seq;
}

// In-memory dataset of already aggregated clips sized for the "synth"
// preset: 12x12 spatial, floor(100/window) aggregated frames.
template <typename T = float>
Dataset<T> make_synthetic_dataset(std::size_t clips_per_class, std::size_t window_size = 5,
                                  std::size_t spatial = 12) {
    Dataset<T> ds;
    ds.label_names = synthetic_label_names();
    for (std::size_t v = 0; v < clips_per_class; ++v) {
        for (int cls = 0; cls < 2; ++cls) {
            const bool rightward = static_cast<std::size_t>(cls) == synthetic_class_rightward();
            FrameSequence<T> raw = make_synthetic_frames<T>(rightward, v, 100, spatial * 2, spatial * 2);
            FrameSequence<T> small;
            small.frames.reserve(raw.frames.size());
            for (const Tensor<T>& f : raw.frames)
                small.frames.push_back(center_crop_resize(f, spatial, spatial));
            LabeledClip<T> lc;
            lc.clip = aggregate_video(small, window_size, 100,
                                      std::string(rightward ? "right" : "left") + "_v" + std::to_string(v));
            lc.label = static_cast<std::size_t>(cls);
            lc.subject = "s" + std::to_string(v);
            ds.clips.push_back(std::move(lc));
        }
    }
    return ds;
}

// Writes the raw form of the task to disk: one PGM directory per clip plus a
// manifest, so the preprocess -> train CLI pipeline can run end to end.
template <typename T = float>
std::string write_synthetic_raw(const std::string& out_dir, std::size_t clips_per_class,
                                std::size_t frames = 100) {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);
    std::vector<ManifestEntry> entries;
    for (std::size_t v = 0; v < clips_per_class; ++v) {
        for (int cls = 0; cls < 2; ++cls) {
            const bool rightward = static_cast<std::size_t>(cls) == synthetic_class_rightward();
            const std::string label = synthetic_label_names()[static_cast<std::size_t>(cls)];
            const std::string clip_dir = out_dir + "/" + label + "_v" + std::to_string(v);
            fs::create_directories(clip_dir);
            FrameSequence<T> seq = make_synthetic_frames<T>(rightward, v, frames);
            for (std::size_t t = 0; t < seq.frames.size(); ++t) {
                char name[32];
                std::snprintf(name, sizeof(name), "/f%04zu.pgm", t);
                write_pgm(clip_dir + name, seq.frames[t]);
            }
            entries.push_back({clip_dir, label, "s" + std::to_string(v), ""});
        }
    }
    const std::string manifest = out_dir + "/manifest.tsv";
    write_manifest(manifest, entries);
    return manifest;
}

}  // namespace gwnet
