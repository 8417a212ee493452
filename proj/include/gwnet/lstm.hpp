#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "gwnet/error.hpp"
#include "gwnet/model.hpp"
#include "gwnet/tensor.hpp"

namespace gwnet {

// Sequence classifier: a single hidden layer of LSTM cells (forget gate, no
// peepholes) over per-neighborhood CNN features, with a linear class head on
// the final hidden state. Gate order throughout: input, forget, candidate,
// output.

template <typename T>
struct LstmParams {
    std::size_t input_size = 0, hidden_size = 0, num_classes = 0;
    std::array<Tensor<T>, 4> wx;  // hidden x input, per gate
    std::array<Tensor<T>, 4> wh;  // hidden x hidden, per gate
    std::array<Tensor<T>, 4> b;   // hidden, per gate
    Tensor<T> head_w;             // classes x hidden
    Tensor<T> head_b;             // classes

    std::size_t parameter_count() const {
        std::size_t n = head_w.size() + head_b.size();
        for (int g = 0; g < 4; ++g) n += wx[g].size() + wh[g].size() + b[g].size();
        return n;
    }
};

inline const char* lstm_gate_name(int g) {
    static const char* names[4] = {"i", "f", "g", "o"};
    return names[g];
}

template <typename T>
LstmParams<T> lstm_init(std::size_t input_size, std::size_t hidden_size, std::size_t num_classes,
                        Rng& rng, InitRule rule = InitRule::GlorotUniform) {
    LstmParams<T> p;
    p.input_size = input_size;
    p.hidden_size = hidden_size;
    p.num_classes = num_classes;
    for (int g = 0; g < 4; ++g) {
        p.wx[g] = Tensor<T>({hidden_size, input_size}, T(0));
        p.wh[g] = Tensor<T>({hidden_size, hidden_size}, T(0));
        p.b[g] = Tensor<T>({hidden_size}, T(0));
        init_parameter(p.wx[g], input_size, hidden_size, rng, rule);
        init_parameter(p.wh[g], hidden_size, hidden_size, rng, rule);
    }
    p.head_w = Tensor<T>({num_classes, hidden_size}, T(0));
    p.head_b = Tensor<T>({num_classes}, T(0));
    init_parameter(p.head_w, hidden_size, num_classes, rng, rule);
    return p;
}

template <typename T>
struct FeatureSequence {
    std::vector<Tensor<T>> steps;  // feature vector per time step
    std::optional<std::size_t> label;
};

namespace detail {
template <typename T>
T logistic(T v) {
    return T(1) / (T(1) + std::exp(-v));
}

// pre = Wx*x + Wh*h + b for one gate.
template <typename T>
Tensor<T> gate_preactivation(const Tensor<T>& wx, const Tensor<T>& wh, const Tensor<T>& b,
                             const Tensor<T>& x, const Tensor<T>& h) {
    const std::size_t hid = b.size(), in = x.size();
    Tensor<T> pre = b;
    for (std::size_t r = 0; r < hid; ++r) {
        T acc = pre[r];
        const T* wxr = wx.data() + r * in;
        for (std::size_t c = 0; c < in; ++c) acc += wxr[c] * x[c];
        const T* whr = wh.data() + r * hid;
        for (std::size_t c = 0; c < hid; ++c) acc += whr[c] * h[c];
        pre[r] = acc;
    }
    return pre;
}
}  // namespace detail

// Everything one step needs to replay for backpropagation through time.
template <typename T>
struct LstmStepTrace {
    Tensor<T> x, h_prev, c_prev;
    Tensor<T> i, f, g, o;  // post-activation gates
    Tensor<T> c, tanh_c, h;
};

template <typename T>
struct LstmState {
    Tensor<T> h, c;
};

template <typename T>
LstmState<T> lstm_step(const LstmParams<T>& p, const Tensor<T>& x, const Tensor<T>& h_prev,
                       const Tensor<T>& c_prev, LstmStepTrace<T>* trace = nullptr) {
    if (x.rank() != 1 || x.size() != p.input_size)
        throw ShapeError("lstm step input length " + std::to_string(x.size()) + ", expected " +
                         std::to_string(p.input_size));
    if (h_prev.size() != p.hidden_size || c_prev.size() != p.hidden_size)
        throw ShapeError("lstm state length does not match hidden size " +
                         std::to_string(p.hidden_size));

    Tensor<T> i = detail::gate_preactivation(p.wx[0], p.wh[0], p.b[0], x, h_prev);
    Tensor<T> f = detail::gate_preactivation(p.wx[1], p.wh[1], p.b[1], x, h_prev);
    Tensor<T> g = detail::gate_preactivation(p.wx[2], p.wh[2], p.b[2], x, h_prev);
    Tensor<T> o = detail::gate_preactivation(p.wx[3], p.wh[3], p.b[3], x, h_prev);
    const std::size_t hid = p.hidden_size;
    Tensor<T> c({hid}, T(0)), tanh_c({hid}, T(0)), h({hid}, T(0));
    for (std::size_t r = 0; r < hid; ++r) {
        i[r] = detail::logistic(i[r]);
        f[r] = detail::logistic(f[r]);
        g[r] = std::tanh(g[r]);
        o[r] = detail::logistic(o[r]);
        c[r] = f[r] * c_prev[r] + i[r] * g[r];
        tanh_c[r] = std::tanh(c[r]);
        h[r] = o[r] * tanh_c[r];
    }
    if (trace)
        *trace = LstmStepTrace<T>{x, h_prev, c_prev, std::move(i), std::move(f), std::move(g),
                                  std::move(o), c, std::move(tanh_c), h};
    return {std::move(h), std::move(c)};
}

template <typename T>
struct LstmTrace {
    std::vector<LstmStepTrace<T>> steps;
    Tensor<T> final_h;
    bool valid = false;
};

template <typename T>
struct LstmOutput {
    Tensor<T> logits;
    LstmTrace<T> trace;
};

// Runs the cell from zero initial state over the whole sequence and applies
// the class head to the final hidden state.
template <typename T>
LstmOutput<T> lstm_classify(const LstmParams<T>& p, const FeatureSequence<T>& seq) {
    if (seq.steps.empty()) throw InputError("lstm_classify on an empty feature sequence");
    LstmOutput<T> out;
    out.trace.steps.resize(seq.steps.size());
    Tensor<T> h({p.hidden_size}, T(0));
    Tensor<T> c({p.hidden_size}, T(0));
    for (std::size_t t = 0; t < seq.steps.size(); ++t) {
        LstmState<T> next = lstm_step(p, seq.steps[t], h, c, &out.trace.steps[t]);
        h = std::move(next.h);
        c = std::move(next.c);
    }
    FCLayer<T> head{p.head_w, p.head_b};
    out.logits = fc_forward(head, h);
    out.trace.final_h = std::move(h);
    out.trace.valid = true;
    return out;
}

template <typename T>
struct LstmGrads {
    std::array<Tensor<T>, 4> wx, wh, b;
    Tensor<T> head_w, head_b;
};

template <typename T>
LstmGrads<T> lstm_grads_zero(const LstmParams<T>& p) {
    LstmGrads<T> g;
    for (int k = 0; k < 4; ++k) {
        g.wx[k] = Tensor<T>::zeros_like(p.wx[k]);
        g.wh[k] = Tensor<T>::zeros_like(p.wh[k]);
        g.b[k] = Tensor<T>::zeros_like(p.b[k]);
    }
    g.head_w = Tensor<T>::zeros_like(p.head_w);
    g.head_b = Tensor<T>::zeros_like(p.head_b);
    return g;
}

// Full backpropagation through time for all eight weight matrices, the four
// bias vectors, and the head.
template <typename T>
LstmGrads<T> lstm_backward(const LstmParams<T>& p, const LstmTrace<T>& trace,
                           const Tensor<T>& grad_logits) {
    if (!trace.valid) throw StateError("lstm_backward requires the trace of a classify call");
    if (grad_logits.size() != p.num_classes)
        throw ShapeError("grad_logits length " + std::to_string(grad_logits.size()) +
                         " does not match " + std::to_string(p.num_classes) + " classes");
    LstmGrads<T> g = lstm_grads_zero(p);
    const std::size_t hid = p.hidden_size, in = p.input_size;

    // Head: logits = head_w * h_T + head_b.
    FCLayer<T> head{p.head_w, p.head_b};
    FCGrads<T> hg = fc_backward(head, trace.final_h, grad_logits);
    g.head_w = std::move(hg.weights);
    g.head_b = std::move(hg.bias);

    Tensor<T> gh = std::move(hg.input);
    Tensor<T> gc({hid}, T(0));
    for (std::size_t t = trace.steps.size(); t-- > 0;) {
        const LstmStepTrace<T>& s = trace.steps[t];
        Tensor<T> d_pre[4] = {Tensor<T>({hid}, T(0)), Tensor<T>({hid}, T(0)),
                              Tensor<T>({hid}, T(0)), Tensor<T>({hid}, T(0))};
        for (std::size_t r = 0; r < hid; ++r) {
            const T go = gh[r] * s.tanh_c[r];
            const T gc_total = gc[r] + gh[r] * s.o[r] * (T(1) - s.tanh_c[r] * s.tanh_c[r]);
            const T gi = gc_total * s.g[r];
            const T gf = gc_total * s.c_prev[r];
            const T gg = gc_total * s.i[r];
            d_pre[0][r] = gi * s.i[r] * (T(1) - s.i[r]);
            d_pre[1][r] = gf * s.f[r] * (T(1) - s.f[r]);
            d_pre[2][r] = gg * (T(1) - s.g[r] * s.g[r]);
            d_pre[3][r] = go * s.o[r] * (T(1) - s.o[r]);
            gc[r] = gc_total * s.f[r];
        }
        Tensor<T> gh_prev({hid}, T(0));
        for (int k = 0; k < 4; ++k) {
            T* gwx = g.wx[k].data();
            T* gwh = g.wh[k].data();
            const T* whd = p.wh[k].data();
            for (std::size_t r = 0; r < hid; ++r) {
                const T d = d_pre[k][r];
                g.b[k][r] += d;
                T* gwxr = gwx + r * in;
                for (std::size_t c = 0; c < in; ++c) gwxr[c] += d * s.x[c];
                T* gwhr = gwh + r * hid;
                const T* whr = whd + r * hid;
                for (std::size_t c = 0; c < hid; ++c) {
                    gwhr[c] += d * s.h_prev[c];
                    gh_prev[c] += whr[c] * d;
                }
            }
        }
        gh = std::move(gh_prev);
    }
    return g;
}

template <typename T>
void for_each_lstm_parameter(LstmParams<T>& p,
                             const std::function<void(const std::string&, Tensor<T>&)>& fn) {
    for (int g = 0; g < 4; ++g) {
        const std::string suffix = lstm_gate_name(g);
        fn("LSTM.wx." + suffix, p.wx[g]);
        fn("LSTM.wh." + suffix, p.wh[g]);
        fn("LSTM.b." + suffix, p.b[g]);
    }
    fn("LSTM.head.weights", p.head_w);
    fn("LSTM.head.bias", p.head_b);
}

template <typename T>
void for_each_lstm_parameter(const LstmParams<T>& p,
                             const std::function<void(const std::string&, const Tensor<T>&)>& fn) {
    for (int g = 0; g < 4; ++g) {
        const std::string suffix = lstm_gate_name(g);
        fn("LSTM.wx." + suffix, p.wx[g]);
        fn("LSTM.wh." + suffix, p.wh[g]);
        fn("LSTM.b." + suffix, p.b[g]);
    }
    fn("LSTM.head.weights", p.head_w);
    fn("LSTM.head.bias", p.head_b);
}

// Slides a window of `neighborhood` aggregated frames (stride = neighborhood)
// over the clip, tiles each window cyclically up to the model's temporal
// extent, and runs the trunk in eval mode. A 20-frame clip with the default
// neighborhood of 4 yields 5 feature steps.
template <typename T>
FeatureSequence<T> build_feature_sequence(const Model<T>& model, const ClipVolume<T>& clip,
                                          std::size_t neighborhood = 4) {
    if (neighborhood == 0) throw DomainError("neighborhood must be positive");
    const std::size_t t_clip = clip.frames();
    if (t_clip < neighborhood)
        throw InputError("clip of " + std::to_string(t_clip) +
                         " frames is shorter than one temporal neighborhood of " +
                         std::to_string(neighborhood));
    if (clip.height() != model.spec.in_h || clip.width() != model.spec.in_w)
        throw ShapeError("clip spatial shape does not match model input");

    const std::size_t t_model = model.spec.in_t;
    const std::size_t steps = t_clip / neighborhood;
    FeatureSequence<T> seq;
    seq.steps.reserve(steps);
    Rng unused(0);  // eval mode draws nothing
    for (std::size_t s = 0; s < steps; ++s) {
        Tensor<T> window({model.spec.in_h, model.spec.in_w, t_model, 1}, T(0));
        for (std::size_t y = 0; y < clip.height(); ++y)
            for (std::size_t x = 0; x < clip.width(); ++x)
                for (std::size_t t = 0; t < t_model; ++t)
                    window(y, x, t, std::size_t{0}) = clip.voxels(y, x, s * neighborhood + t % neighborhood);
        seq.steps.push_back(model_forward(model, window, Mode::Eval, unused));
    }
    seq.label = std::nullopt;
    return seq;
}

}  // namespace gwnet
