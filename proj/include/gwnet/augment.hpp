#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "gwnet/error.hpp"
#include "gwnet/sampler.hpp"
#include "gwnet/tensor.hpp"

namespace gwnet {

// Deterministic clip augmentations: horizontal flip, vertical flip, and a
// +30 degree rotation with bilinear interpolation and zero fill. Each op acts
// frame by frame; the temporal axis is untouched and shapes are preserved.

enum class AugmentOp { HFlip, VFlip, Rotate30 };

inline const char* augment_op_name(AugmentOp op) {
    switch (op) {
        case AugmentOp::HFlip: return "hflip";
        case AugmentOp::VFlip: return "vflip";
        case AugmentOp::Rotate30: return "rot30";
    }
    return "?";
}

template <typename T>
ClipVolume<T> augment(const ClipVolume<T>& clip, AugmentOp op) {
    const std::size_t h = clip.height(), w = clip.width(), tn = clip.frames();
    ClipVolume<T> out;
    out.source_id = clip.source_id + "+" + augment_op_name(op);
    out.voxels = Tensor<T>::zeros_like(clip.voxels);

    switch (op) {
        case AugmentOp::HFlip:  // mirror about the vertical axis: columns reverse
            for (std::size_t y = 0; y < h; ++y)
                for (std::size_t x = 0; x < w; ++x)
                    for (std::size_t t = 0; t < tn; ++t)
                        out.voxels(y, x, t) = clip.voxels(y, w - 1 - x, t);
            break;
        case AugmentOp::VFlip:  // mirror about the horizontal axis: rows reverse
            for (std::size_t y = 0; y < h; ++y)
                for (std::size_t x = 0; x < w; ++x)
                    for (std::size_t t = 0; t < tn; ++t)
                        out.voxels(y, x, t) = clip.voxels(h - 1 - y, x, t);
            break;
        case AugmentOp::Rotate30: {
            const double theta = 30.0 * M_PI / 180.0;
            const double ct = std::cos(theta), st = std::sin(theta);
            const double cy = (static_cast<double>(h) - 1.0) / 2.0;
            const double cx = (static_cast<double>(w) - 1.0) / 2.0;
            for (std::size_t y = 0; y < h; ++y)
                for (std::size_t x = 0; x < w; ++x) {
                    // Inverse map: rotate the output position back into the source.
                    const double dy = static_cast<double>(y) - cy;
                    const double dx = static_cast<double>(x) - cx;
                    const double sy = ct * dy + st * dx + cy;
                    const double sx = -st * dy + ct * dx + cx;
                    const double fy = std::floor(sy), fx = std::floor(sx);
                    const long long y0 = static_cast<long long>(fy);
                    const long long x0 = static_cast<long long>(fx);
                    const double ay = sy - fy, ax = sx - fx;
                    auto sample = [&](long long yy, long long xx, std::size_t t) -> double {
                        if (yy < 0 || xx < 0 || yy >= static_cast<long long>(h) ||
                            xx >= static_cast<long long>(w))
                            return 0.0;
                        return static_cast<double>(
                            clip.voxels(static_cast<std::size_t>(yy), static_cast<std::size_t>(xx), t));
                    };
                    for (std::size_t t = 0; t < tn; ++t) {
                        const double v =
                            (1 - ay) * ((1 - ax) * sample(y0, x0, t) + ax * sample(y0, x0 + 1, t)) +
                            ay * ((1 - ax) * sample(y0 + 1, x0, t) + ax * sample(y0 + 1, x0 + 1, t));
                        out.voxels(y, x, t) = static_cast<T>(v);
                    }
                }
            break;
        }
    }
    return out;
}

// One generated clip plus the index of the source it came from, so fold
// assignments can follow clip lineage.
template <typename T>
struct AugmentedClip {
    ClipVolume<T> clip;
    std::size_t source_index;
    AugmentOp op;
};

// Generates `target_count` clips by cycling hflip, vflip, rot30 over the
// sources: one full pass applies each op to every source once, so 600
// sources reach 1800 generated clips after exactly one pass. Sources whose
// op budget is exhausted repeat ops on later passes.
template <typename T>
std::vector<AugmentedClip<T>> augment_round_robin(const std::vector<ClipVolume<T>>& sources,
                                                  std::size_t target_count) {
    if (sources.empty() && target_count > 0)
        throw InputError("cannot augment an empty clip set");
    static const AugmentOp ops[3] = {AugmentOp::HFlip, AugmentOp::VFlip, AugmentOp::Rotate30};
    std::vector<AugmentedClip<T>> out;
    out.reserve(target_count);
    std::size_t pass = 0;
    while (out.size() < target_count) {
        const AugmentOp op = ops[pass % 3];
        for (std::size_t s = 0; s < sources.size() && out.size() < target_count; ++s)
            out.push_back({augment(sources[s], op), s, op});
        ++pass;
    }
    return out;
}

}  // namespace gwnet
