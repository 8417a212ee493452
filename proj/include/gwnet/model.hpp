#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "gwnet/error.hpp"
#include "gwnet/layers.hpp"
#include "gwnet/rng.hpp"
#include "gwnet/sampler.hpp"
#include "gwnet/tensor.hpp"

namespace gwnet {

// Declarative layer chain plus the parameters that realize it. The two named
// presets ("kth", 34x54 input; "weizmann", 64x48 input) share one pattern:
//   Conv1(16@3x3x3) Pool1(2x2x1) Conv2(16@5x5x3) Pool2(2x2x1)
//   Conv3(32@3x3x3) Conv4(32@3x3x3) flatten FC1(256)
// with ReLU and dropout after every conv/fc stage. "-6".."-8" suffixes append
// extra FC(256) stages for the trainable-depth sweep; "tiny" and "synth" are
// scaled-down instances of the same pattern for verification and the
// synthetic sanity task.

enum class LayerKind { Conv, Pool, ReLU, Dropout, Flatten, FC };

struct LayerSpec {
    LayerKind kind;
    std::string name;
    std::size_t out_channels = 0;            // conv
    std::size_t kh = 0, kw = 0, kt = 0;      // conv
    std::size_t ph = 0, pw = 0, pt = 0;      // pool
    double rate = 0.0;                       // dropout
    std::size_t out_features = 0;            // fc
};

struct ArchitectureSpec {
    std::string name;
    std::size_t in_h = 0, in_w = 0, in_t = 0, in_ch = 1;
    std::vector<LayerSpec> layers;
};

namespace detail {
inline LayerSpec conv_spec(std::string name, std::size_t out_ch, std::size_t kh, std::size_t kw,
                           std::size_t kt) {
    LayerSpec s;
    s.kind = LayerKind::Conv;
    s.name = std::move(name);
    s.out_channels = out_ch;
    s.kh = kh;
    s.kw = kw;
    s.kt = kt;
    return s;
}
inline LayerSpec pool_spec(std::string name, std::size_t ph, std::size_t pw, std::size_t pt) {
    LayerSpec s;
    s.kind = LayerKind::Pool;
    s.name = std::move(name);
    s.ph = ph;
    s.pw = pw;
    s.pt = pt;
    return s;
}
inline LayerSpec relu_spec(std::string name) {
    LayerSpec s;
    s.kind = LayerKind::ReLU;
    s.name = std::move(name);
    return s;
}
inline LayerSpec dropout_spec(std::string name, double rate) {
    LayerSpec s;
    s.kind = LayerKind::Dropout;
    s.name = std::move(name);
    s.rate = rate;
    return s;
}
inline LayerSpec flatten_spec(std::string name) {
    LayerSpec s;
    s.kind = LayerKind::Flatten;
    s.name = std::move(name);
    return s;
}
inline LayerSpec fc_spec(std::string name, std::size_t out) {
    LayerSpec s;
    s.kind = LayerKind::FC;
    s.name = std::move(name);
    s.out_features = out;
    return s;
}
}  // namespace detail

// Walks the chain and returns the output shape after every layer, validating
// that each stage fits. Shapes are rank-4 (h,w,t,c) until Flatten, rank-1 after.
inline std::vector<Shape> layer_output_shapes(const ArchitectureSpec& spec) {
    std::vector<Shape> shapes;
    shapes.reserve(spec.layers.size());
    Shape cur = {spec.in_h, spec.in_w, spec.in_t, spec.in_ch};
    bool flat = false;
    for (const LayerSpec& l : spec.layers) {
        switch (l.kind) {
            case LayerKind::Conv: {
                if (flat) throw ShapeError(l.name + ": convolution after flatten");
                if (cur[0] < l.kh || cur[1] < l.kw || cur[2] < l.kt)
                    throw ShapeError(l.name + ": input " + shape_to_string(cur) +
                                     " smaller than kernel");
                cur = {cur[0] - l.kh + 1, cur[1] - l.kw + 1, cur[2] - l.kt + 1, l.out_channels};
                break;
            }
            case LayerKind::Pool: {
                if (flat) throw ShapeError(l.name + ": pooling after flatten");
                if (cur[0] < l.ph || cur[1] < l.pw || cur[2] < l.pt)
                    throw ShapeError(l.name + ": input " + shape_to_string(cur) +
                                     " smaller than receptive field");
                cur = {cur[0] / l.ph, cur[1] / l.pw, cur[2] / l.pt, cur[3]};
                break;
            }
            case LayerKind::ReLU:
            case LayerKind::Dropout:
                break;
            case LayerKind::Flatten: {
                if (flat) throw ShapeError(l.name + ": flatten applied twice");
                std::size_t n = 1;
                for (std::size_t e : cur) n *= e;
                cur = {n};
                flat = true;
                break;
            }
            case LayerKind::FC: {
                if (!flat) throw ShapeError(l.name + ": fully connected layer before flatten");
                cur = {l.out_features};
                break;
            }
        }
        shapes.push_back(cur);
    }
    return shapes;
}

enum class InitRule { GlorotUniform, Zeros };

template <typename T>
struct Model {
    ArchitectureSpec spec;
    // Aligned with spec.layers; empty tensors where a layer has no parameters.
    std::vector<Tensor<T>> weights;
    std::vector<Tensor<T>> biases;
    std::vector<bool> trainable;
    Mode mode = Mode::Eval;

    // Optional classifier head (feature -> num_classes), attached for the
    // CNN pretraining stage. Not counted by total_parameters.
    bool has_head = false;
    FCLayer<T> head;
    bool head_trainable = true;

    std::size_t feature_size() const { return layer_output_shapes(spec).back()[0]; }
};

namespace detail {

inline ArchitectureSpec preset_pattern(const std::string& base, std::size_t window_count,
                                       double dropout_rate, std::size_t extra_fc) {
    ArchitectureSpec spec;
    spec.in_t = window_count;

    std::size_t conv_ch1, conv_ch2, fc1;
    std::size_t k1[3], k2[3], k3[3], k4[3];
    if (base == "kth" || base == "weizmann") {
        if (base == "kth") {
            spec.in_h = 34;
            spec.in_w = 54;
        } else {
            spec.in_h = 64;
            spec.in_w = 48;
        }
        conv_ch1 = 16;
        conv_ch2 = 32;
        fc1 = 256;
        k1[0] = 3; k1[1] = 3; k1[2] = 3;
        k2[0] = 5; k2[1] = 5; k2[2] = 3;
        k3[0] = 3; k3[1] = 3; k3[2] = 3;
        k4[0] = 3; k4[1] = 3; k4[2] = 3;
    } else if (base == "tiny") {
        spec.in_h = 8;
        spec.in_w = 8;
        conv_ch1 = 2;
        conv_ch2 = 3;
        fc1 = 8;
        k1[0] = 3; k1[1] = 3; k1[2] = 3;
        k2[0] = 2; k2[1] = 2; k2[2] = 3;
        k3[0] = 1; k3[1] = 1; k3[2] = 3;
        k4[0] = 1; k4[1] = 1; k4[2] = 3;
    } else if (base == "synth") {
        spec.in_h = 12;
        spec.in_w = 12;
        conv_ch1 = 4;
        conv_ch2 = 8;
        fc1 = 32;
        k1[0] = 3; k1[1] = 3; k1[2] = 3;
        k2[0] = 2; k2[1] = 2; k2[2] = 3;
        k3[0] = 2; k3[1] = 2; k3[2] = 3;
        k4[0] = 1; k4[1] = 1; k4[2] = 3;
    } else {
        throw ConfigError("unknown architecture preset '" + base + "'");
    }

    auto push_act = [&](const std::string& stage) {
        spec.layers.push_back(relu_spec("ReLU-" + stage));
        spec.layers.push_back(dropout_spec("Dropout-" + stage, dropout_rate));
    };
    spec.layers.push_back(conv_spec("Conv1", conv_ch1, k1[0], k1[1], k1[2]));
    push_act("Conv1");
    spec.layers.push_back(pool_spec("Pool1", 2, 2, 1));
    spec.layers.push_back(conv_spec("Conv2", conv_ch1, k2[0], k2[1], k2[2]));
    push_act("Conv2");
    spec.layers.push_back(pool_spec("Pool2", 2, 2, 1));
    spec.layers.push_back(conv_spec("Conv3", conv_ch2, k3[0], k3[1], k3[2]));
    push_act("Conv3");
    spec.layers.push_back(conv_spec("Conv4", conv_ch2, k4[0], k4[1], k4[2]));
    push_act("Conv4");
    spec.layers.push_back(flatten_spec("Flatten"));
    spec.layers.push_back(fc_spec("FC1", fc1));
    push_act("FC1");
    for (std::size_t i = 0; i < extra_fc; ++i) {
        const std::string name = "FC" + std::to_string(i + 2);
        spec.layers.push_back(fc_spec(name, fc1));
        push_act(name);
    }
    return spec;
}

}  // namespace detail

// Preset names: "kth", "weizmann", "tiny", "synth", optionally suffixed with
// the total trainable-layer count, e.g. "kth-7" adds FC2 and FC3. The bare
// names carry five trainable layers, so "-5" is an accepted alias.
inline ArchitectureSpec preset_spec(const std::string& name, std::size_t window_count,
                                    double dropout_rate = 0.4) {
    std::string base = name;
    std::size_t extra_fc = 0;
    const auto dash = name.rfind('-');
    if (dash != std::string::npos && dash + 1 < name.size() &&
        name.find_first_not_of("0123456789", dash + 1) == std::string::npos) {
        const int depth = std::stoi(name.substr(dash + 1));
        if (depth < 5 || depth > 8)
            throw ConfigError("preset '" + name + "': trainable depth must lie in [5,8]");
        base = name.substr(0, dash);
        extra_fc = static_cast<std::size_t>(depth - 5);
    }
    ArchitectureSpec spec = detail::preset_pattern(base, window_count, dropout_rate, extra_fc);
    spec.name = name;
    layer_output_shapes(spec);  // validates, throws ShapeError when too small
    return spec;
}

template <typename T>
void init_parameter(Tensor<T>& w, std::size_t fan_in, std::size_t fan_out, Rng& rng, InitRule rule) {
    if (rule == InitRule::Zeros) {
        for (std::size_t i = 0; i < w.size(); ++i) w[i] = T(0);
        return;
    }
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = static_cast<T>(rng.uniform(-bound, bound));
}

template <typename T>
Model<T> build_model(const ArchitectureSpec& spec, Rng& rng, InitRule rule = InitRule::GlorotUniform) {
    const std::vector<Shape> shapes = layer_output_shapes(spec);
    Model<T> m;
    m.spec = spec;
    m.weights.resize(spec.layers.size());
    m.biases.resize(spec.layers.size());
    m.trainable.assign(spec.layers.size(), true);

    Shape cur = {spec.in_h, spec.in_w, spec.in_t, spec.in_ch};
    for (std::size_t li = 0; li < spec.layers.size(); ++li) {
        const LayerSpec& l = spec.layers[li];
        if (l.kind == LayerKind::Conv) {
            const std::size_t in_ch = cur[3];
            m.weights[li] = Tensor<T>({l.kh, l.kw, l.kt, in_ch, l.out_channels}, T(0));
            m.biases[li] = Tensor<T>({l.out_channels}, T(0));
            const std::size_t patch = l.kh * l.kw * l.kt;
            init_parameter(m.weights[li], patch * in_ch, patch * l.out_channels, rng, rule);
        } else if (l.kind == LayerKind::FC) {
            const std::size_t in = cur[0];
            m.weights[li] = Tensor<T>({l.out_features, in}, T(0));
            m.biases[li] = Tensor<T>({l.out_features}, T(0));
            init_parameter(m.weights[li], in, l.out_features, rng, rule);
        }
        cur = shapes[li];
    }
    return m;
}

template <typename T>
Model<T> build_preset(const std::string& name, std::size_t window_count, Rng& rng,
                      InitRule rule = InitRule::GlorotUniform, double dropout_rate = 0.4) {
    return build_model<T>(preset_spec(name, window_count, dropout_rate), rng, rule);
}

// Attaches (or replaces) the classifier head used for CNN-stage pretraining.
template <typename T>
void attach_head(Model<T>& model, std::size_t num_classes, Rng& rng,
                 InitRule rule = InitRule::GlorotUniform) {
    const std::size_t feat = model.feature_size();
    model.head = fc_layer<T>(num_classes, feat);
    init_parameter(model.head.weights, feat, num_classes, rng, rule);
    model.has_head = true;
    model.head_trainable = true;
}

// Exact count of learnable scalars in the trunk (head excluded).
template <typename T>
std::size_t total_parameters(const Model<T>& model) {
    std::size_t n = 0;
    for (std::size_t li = 0; li < model.spec.layers.size(); ++li)
        n += model.weights[li].size() + model.biases[li].size();
    return n;
}

template <typename T>
std::size_t layer_parameters(const Model<T>& model, const std::string& name) {
    for (std::size_t li = 0; li < model.spec.layers.size(); ++li)
        if (model.spec.layers[li].name == name)
            return model.weights[li].size() + model.biases[li].size();
    throw ConfigError("unknown layer '" + name + "'");
}

// Restricts optimizer updates to the named learnable layers. Every name must
// refer to a conv/fc layer of the spec; the head keeps its own flag.
template <typename T>
void freeze_layers(Model<T>& model, const std::vector<std::string>& trainable_names) {
    std::unordered_set<std::string> wanted(trainable_names.begin(), trainable_names.end());
    std::unordered_set<std::string> known;
    for (std::size_t li = 0; li < model.spec.layers.size(); ++li) {
        const LayerSpec& l = model.spec.layers[li];
        if (l.kind != LayerKind::Conv && l.kind != LayerKind::FC) continue;
        known.insert(l.name);
        model.trainable[li] = wanted.count(l.name) > 0;
    }
    for (const std::string& n : trainable_names)
        if (!known.count(n)) throw ConfigError("freeze_layers: unknown layer '" + n + "'");
}

template <typename T>
void set_all_trainable(Model<T>& model) {
    model.trainable.assign(model.spec.layers.size(), true);
    model.head_trainable = true;
}

// Per-call record of everything the backward pass needs: the input seen by
// each layer, pool argmax records, and the dropout masks actually drawn.
template <typename T>
struct ForwardTrace {
    std::vector<Tensor<T>> inputs;          // input tensor per layer
    std::vector<PoolRecord> pool_records;   // per layer; empty unless pool
    std::vector<Tensor<T>> dropout_masks;   // per layer; empty unless dropout
    Tensor<T> feature;                      // trunk output
    bool valid = false;
};

// Runs the trunk on one clip volume (h x w x t, single channel) and returns
// the feature vector. Eval mode is a pure function of (parameters, clip);
// train mode draws dropout masks from rng and records them in the trace.
template <typename T>
Tensor<T> model_forward(const Model<T>& model, const Tensor<T>& clip, Mode mode, Rng& rng,
                        ForwardTrace<T>* trace = nullptr) {
    const ArchitectureSpec& spec = model.spec;
    Shape expected = {spec.in_h, spec.in_w, spec.in_t};
    if (clip.shape() != expected && clip.shape() != Shape{spec.in_h, spec.in_w, spec.in_t, spec.in_ch})
        throw ShapeError("clip shape " + shape_to_string(clip.shape()) + " does not match model input " +
                         shape_to_string(expected));
    Tensor<T> cur = clip.rank() == 3 ? clip.reshaped({spec.in_h, spec.in_w, spec.in_t, 1}) : clip;

    if (trace) {
        trace->inputs.assign(spec.layers.size(), Tensor<T>());
        trace->pool_records.assign(spec.layers.size(), PoolRecord{});
        trace->dropout_masks.assign(spec.layers.size(), Tensor<T>());
        trace->valid = false;
    }

    for (std::size_t li = 0; li < spec.layers.size(); ++li) {
        const LayerSpec& l = spec.layers[li];
        if (trace) trace->inputs[li] = cur;
        switch (l.kind) {
            case LayerKind::Conv: {
                Conv3DLayer<T> layer{model.weights[li], model.biases[li]};
                cur = conv3d_forward(layer, cur);
                break;
            }
            case LayerKind::Pool: {
                MaxPool3DLayer pool{l.ph, l.pw, l.pt};
                PoolResult<T> r = maxpool3d_forward(pool, cur);
                if (trace) trace->pool_records[li] = std::move(r.record);
                cur = std::move(r.output);
                break;
            }
            case LayerKind::ReLU:
                cur = relu(cur);
                break;
            case LayerKind::Dropout: {
                Tensor<T> mask;
                cur = dropout_apply(l.rate, cur, mode, rng, trace ? &mask : nullptr);
                if (trace) trace->dropout_masks[li] = std::move(mask);
                break;
            }
            case LayerKind::Flatten:
                cur = cur.reshaped({cur.size()});
                break;
            case LayerKind::FC: {
                FCLayer<T> layer{model.weights[li], model.biases[li]};
                cur = fc_forward(layer, cur);
                break;
            }
        }
    }
    if (trace) {
        trace->feature = cur;
        trace->valid = true;
    }
    return cur;
}

template <typename T>
Tensor<T> head_forward(const Model<T>& model, const Tensor<T>& feature) {
    if (!model.has_head) throw StateError("model has no classifier head attached");
    return fc_forward(model.head, feature);
}

// Gradients for every trunk parameter, aligned with spec.layers.
template <typename T>
struct ModelGrads {
    std::vector<Tensor<T>> weights;
    std::vector<Tensor<T>> biases;
};

template <typename T>
ModelGrads<T> model_backward(const Model<T>& model, const ForwardTrace<T>& trace,
                             const Tensor<T>& grad_feature) {
    if (!trace.valid) throw StateError("model_backward requires a recorded forward trace");
    const ArchitectureSpec& spec = model.spec;
    ModelGrads<T> grads;
    grads.weights.resize(spec.layers.size());
    grads.biases.resize(spec.layers.size());

    Tensor<T> g = grad_feature;
    for (std::size_t ri = spec.layers.size(); ri-- > 0;) {
        const LayerSpec& l = spec.layers[ri];
        const Tensor<T>& x = trace.inputs[ri];
        switch (l.kind) {
            case LayerKind::Conv: {
                Conv3DLayer<T> layer{model.weights[ri], model.biases[ri]};
                Conv3DGrads<T> cg = conv3d_backward(layer, x, g);
                grads.weights[ri] = std::move(cg.kernels);
                grads.biases[ri] = std::move(cg.bias);
                g = std::move(cg.input);
                break;
            }
            case LayerKind::Pool:
                g = maxpool3d_backward(trace.pool_records[ri], g);
                break;
            case LayerKind::ReLU:
                g = relu_backward(x, g);
                break;
            case LayerKind::Dropout:
                g = trace.dropout_masks[ri].empty() ? g : dropout_backward(trace.dropout_masks[ri], g);
                break;
            case LayerKind::Flatten:
                g = g.reshaped(x.shape());
                break;
            case LayerKind::FC: {
                FCLayer<T> layer{model.weights[ri], model.biases[ri]};
                FCGrads<T> fg = fc_backward(layer, x, g);
                grads.weights[ri] = std::move(fg.weights);
                grads.biases[ri] = std::move(fg.bias);
                g = std::move(fg.input);
                break;
            }
        }
    }
    return grads;
}

// Stable enumeration of every learnable tensor (trunk, then head) used by the
// optimizer and the checkpoint format. Order follows spec.layers.
template <typename T>
void for_each_parameter(Model<T>& model,
                        const std::function<void(const std::string&, Tensor<T>&, bool trainable)>& fn) {
    for (std::size_t li = 0; li < model.spec.layers.size(); ++li) {
        if (model.weights[li].empty()) continue;
        const std::string& n = model.spec.layers[li].name;
        fn(n + ".kernels", model.weights[li], model.trainable[li]);
        fn(n + ".bias", model.biases[li], model.trainable[li]);
    }
    if (model.has_head) {
        fn("Head.weights", model.head.weights, model.head_trainable);
        fn("Head.bias", model.head.bias, model.head_trainable);
    }
}

template <typename T>
void for_each_parameter(const Model<T>& model,
                        const std::function<void(const std::string&, const Tensor<T>&, bool trainable)>& fn) {
    for (std::size_t li = 0; li < model.spec.layers.size(); ++li) {
        if (model.weights[li].empty()) continue;
        const std::string& n = model.spec.layers[li].name;
        fn(n + ".kernels", model.weights[li], model.trainable[li]);
        fn(n + ".bias", model.biases[li], model.trainable[li]);
    }
    if (model.has_head) {
        fn("Head.weights", model.head.weights, model.head_trainable);
        fn("Head.bias", model.head.bias, model.head_trainable);
    }
}

}  // namespace gwnet
