#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "gwnet/error.hpp"
#include "gwnet/tensor.hpp"

namespace gwnet {

// Temporal aggregation: a raw video is cut into exhaustive non-overlapping
// windows of L consecutive frames and every window collapses to one frame by
// a normalized Gaussian-weighted sum. 100 raw frames at L = 5 become the 20
// aggregated frames the 3D network consumes.

template <typename T>
struct FrameSequence {
    std::vector<Tensor<T>> frames;  // rank-2, height x width, values in [0,1]
    double frame_rate = 25.0;       // informational only
};

struct GaussianWeightVector {
    std::vector<double> weights;
    std::size_t window_size = 0;
};

template <typename T>
struct ClipVolume {
    Tensor<T> voxels;  // rank-3, height x width x t_agg
    std::string source_id;

    std::size_t height() const { return voxels.extent(0); }
    std::size_t width() const { return voxels.extent(1); }
    std::size_t frames() const { return voxels.extent(2); }
};

// Sampled Gaussian centered on the window: w_j = exp(-((j-c)/sigma)^2 / 2)
// with c = (L+1)/2 and sigma = (L-1)/4, j = 1..L. For L = 5 this gives
// [0.135, 0.607, 1, 0.607, 0.135]. Odd L peaks at exactly 1; even L has no
// center sample so the two middle weights tie below 1.
inline GaussianWeightVector gaussian_weights(std::size_t window_size, bool allow_any_size = false) {
    if (!allow_any_size && (window_size < 3 || window_size > 8))
        throw DomainError("window size " + std::to_string(window_size) +
                          " outside the supported range [3,8]");
    if (window_size < 2) throw DomainError("window size must be at least 2");
    const double c = (static_cast<double>(window_size) + 1.0) / 2.0;
    const double sigma = (static_cast<double>(window_size) - 1.0) / 4.0;
    GaussianWeightVector w;
    w.window_size = window_size;
    w.weights.resize(window_size);
    for (std::size_t j = 1; j <= window_size; ++j) {
        const double z = (static_cast<double>(j) - c) / sigma;
        w.weights[j - 1] = std::exp(-0.5 * z * z);
    }
    return w;
}

// Contiguous non-overlapping windows of exactly L frames, in order; a
// trailing remainder shorter than L is discarded.
template <typename T>
std::vector<std::vector<const Tensor<T>*>> partition_sequence(const FrameSequence<T>& seq,
                                                              std::size_t window_size) {
    if (window_size == 0) throw DomainError("window size must be positive");
    if (seq.frames.size() < window_size)
        throw InputError("sequence of " + std::to_string(seq.frames.size()) +
                         " frames is shorter than one window of " + std::to_string(window_size));
    const std::size_t count = seq.frames.size() / window_size;
    std::vector<std::vector<const Tensor<T>*>> windows(count);
    for (std::size_t k = 0; k < count; ++k) {
        windows[k].reserve(window_size);
        for (std::size_t j = 0; j < window_size; ++j)
            windows[k].push_back(&seq.frames[k * window_size + j]);
    }
    return windows;
}

// Pixelwise convex combination of one window: out = sum_j frame_j * w_j / sum(w).
template <typename T>
Tensor<T> aggregate_window(const std::vector<const Tensor<T>*>& window, const GaussianWeightVector& w) {
    if (window.size() != w.window_size)
        throw ShapeError("window of " + std::to_string(window.size()) + " frames does not match weight vector of size " +
                         std::to_string(w.window_size));
    if (window.empty()) throw ShapeError("empty aggregation window");
    double wsum = 0.0;
    for (double v : w.weights) wsum += v;
    Tensor<T> out = Tensor<T>::zeros_like(*window[0]);
    for (std::size_t j = 0; j < window.size(); ++j) {
        const Tensor<T>& f = *window[j];
        if (!f.same_shape(out))
            throw ShapeError("frame " + std::to_string(j) + " shape " + shape_to_string(f.shape()) +
                             " differs from " + shape_to_string(out.shape()));
        const T coeff = static_cast<T>(w.weights[j] / wsum);
        for (std::size_t i = 0; i < out.size(); ++i) out[i] += coeff * f[i];
    }
    return out;
}

template <typename T>
Tensor<T> aggregate_window(const std::vector<Tensor<T>>& window, const GaussianWeightVector& w) {
    std::vector<const Tensor<T>*> ptrs;
    ptrs.reserve(window.size());
    for (const auto& f : window) ptrs.push_back(&f);
    return aggregate_window(ptrs, w);
}

// Full clip pipeline: keep the first max_raw_frames frames (repeating the
// last frame when the video is shorter), aggregate every window, and stack
// the results along the temporal axis.
template <typename T>
ClipVolume<T> aggregate_video(const FrameSequence<T>& seq, std::size_t window_size,
                              std::size_t max_raw_frames = 100, const std::string& source_id = {},
                              bool allow_any_window_size = false) {
    if (seq.frames.empty()) throw InputError("cannot aggregate an empty frame sequence");
    if (max_raw_frames < window_size)
        throw InputError("max_raw_frames shorter than a single window");
    const GaussianWeightVector w = gaussian_weights(window_size, allow_any_window_size);

    FrameSequence<T> padded;
    padded.frame_rate = seq.frame_rate;
    padded.frames.reserve(max_raw_frames);
    for (std::size_t i = 0; i < max_raw_frames; ++i)
        padded.frames.push_back(i < seq.frames.size() ? seq.frames[i] : seq.frames.back());

    const auto windows = partition_sequence(padded, window_size);
    const std::size_t h = padded.frames[0].extent(0);
    const std::size_t wd = padded.frames[0].extent(1);

    ClipVolume<T> clip;
    clip.source_id = source_id;
    clip.voxels = Tensor<T>({h, wd, windows.size()}, T(0));
    for (std::size_t k = 0; k < windows.size(); ++k) {
        Tensor<T> frame = aggregate_window(windows[k], w);
        for (std::size_t y = 0; y < h; ++y)
            for (std::size_t x = 0; x < wd; ++x) clip.voxels(y, x, k) = frame(y, x);
    }
    return clip;
}

}  // namespace gwnet
