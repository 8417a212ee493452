#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "gwnet/error.hpp"
#include "gwnet/rng.hpp"
#include "gwnet/tensor.hpp"

namespace gwnet {

// Differentiable primitives. Every kernel reduces its contraction axes in a
// fixed sequential order so that repeated runs (and gradient checks) are
// bit-identical. Inputs are rank-4 tensors laid out h x w x t x channels.

enum class Mode { Train, Eval };

// ---------------------------------------------------------------------------
// 3D convolution, stride 1, valid (no padding). Kernels are rank-5
// kh x kw x kt x in_channels x out_channels, implemented as cross-correlation.

template <typename T>
struct Conv3DLayer {
    Tensor<T> kernels;
    Tensor<T> bias;

    std::size_t kh() const { return kernels.extent(0); }
    std::size_t kw() const { return kernels.extent(1); }
    std::size_t kt() const { return kernels.extent(2); }
    std::size_t in_channels() const { return kernels.extent(3); }
    std::size_t out_channels() const { return kernels.extent(4); }
    std::size_t parameter_count() const { return kernels.size() + bias.size(); }
};

template <typename T>
Conv3DLayer<T> conv3d_layer(std::size_t kh, std::size_t kw, std::size_t kt, std::size_t in_ch,
                            std::size_t out_ch) {
    return Conv3DLayer<T>{Tensor<T>({kh, kw, kt, in_ch, out_ch}, T(0)), Tensor<T>({out_ch}, T(0))};
}

template <typename T>
Shape conv3d_output_shape(const Conv3DLayer<T>& layer, const Shape& in) {
    if (in.size() != 4)
        throw ShapeError("conv3d expects a rank-4 input, got " + shape_to_string(in));
    if (in[3] != layer.in_channels())
        throw ShapeError("conv3d channel mismatch: input has " + std::to_string(in[3]) +
                         ", kernels expect " + std::to_string(layer.in_channels()));
    if (in[0] < layer.kh() || in[1] < layer.kw() || in[2] < layer.kt())
        throw ShapeError("conv3d input " + shape_to_string(in) + " smaller than kernel " +
                         shape_to_string(layer.kernels.shape()));
    return {in[0] - layer.kh() + 1, in[1] - layer.kw() + 1, in[2] - layer.kt() + 1,
            layer.out_channels()};
}

template <typename T>
Tensor<T> conv3d_forward(const Conv3DLayer<T>& layer, const Tensor<T>& x) {
    const Shape out_shape = conv3d_output_shape(layer, x.shape());
    const std::size_t oh = out_shape[0], ow = out_shape[1], ot = out_shape[2];
    const std::size_t kh = layer.kh(), kw = layer.kw(), kt = layer.kt();
    const std::size_t ci = layer.in_channels(), co = layer.out_channels();
    const std::size_t xw = x.extent(1), xt = x.extent(2);

    Tensor<T> y(out_shape, T(0));
    const T* xd = x.data();
    const T* kd = layer.kernels.data();
    const T* bd = layer.bias.data();
    T* yd = y.data();

    std::vector<T> acc(co);
    for (std::size_t i = 0; i < oh; ++i)
        for (std::size_t j = 0; j < ow; ++j)
            for (std::size_t t = 0; t < ot; ++t) {
                for (std::size_t c = 0; c < co; ++c) acc[c] = bd[c];
                for (std::size_t dh = 0; dh < kh; ++dh)
                    for (std::size_t dw = 0; dw < kw; ++dw)
                        for (std::size_t dt = 0; dt < kt; ++dt) {
                            const T* xrow = xd + (((i + dh) * xw + (j + dw)) * xt + (t + dt)) * ci;
                            const T* krow = kd + ((dh * kw + dw) * kt + dt) * ci * co;
                            for (std::size_t c = 0; c < ci; ++c) {
                                const T xv = xrow[c];
                                const T* kc = krow + c * co;
                                for (std::size_t o = 0; o < co; ++o) acc[o] += xv * kc[o];
                            }
                        }
                T* yrow = yd + ((i * ow + j) * ot + t) * co;
                for (std::size_t c = 0; c < co; ++c) yrow[c] = acc[c];
            }
    return y;
}

template <typename T>
struct Conv3DGrads {
    Tensor<T> input;
    Tensor<T> kernels;
    Tensor<T> bias;
};

template <typename T>
Conv3DGrads<T> conv3d_backward(const Conv3DLayer<T>& layer, const Tensor<T>& x, const Tensor<T>& grad_out) {
    const Shape out_shape = conv3d_output_shape(layer, x.shape());
    if (grad_out.shape() != out_shape)
        throw ShapeError("conv3d grad shape " + shape_to_string(grad_out.shape()) +
                         " does not match forward output " + shape_to_string(out_shape));
    const std::size_t oh = out_shape[0], ow = out_shape[1], ot = out_shape[2];
    const std::size_t kh = layer.kh(), kw = layer.kw(), kt = layer.kt();
    const std::size_t ci = layer.in_channels(), co = layer.out_channels();
    const std::size_t xw = x.extent(1), xt = x.extent(2);

    Conv3DGrads<T> g{Tensor<T>::zeros_like(x), Tensor<T>::zeros_like(layer.kernels),
                     Tensor<T>::zeros_like(layer.bias)};
    const T* xd = x.data();
    const T* kd = layer.kernels.data();
    const T* gyd = grad_out.data();
    T* gxd = g.input.data();
    T* gkd = g.kernels.data();
    T* gbd = g.bias.data();

    for (std::size_t i = 0; i < oh; ++i)
        for (std::size_t j = 0; j < ow; ++j)
            for (std::size_t t = 0; t < ot; ++t) {
                const T* gyrow = gyd + ((i * ow + j) * ot + t) * co;
                for (std::size_t c = 0; c < co; ++c) gbd[c] += gyrow[c];
                for (std::size_t dh = 0; dh < kh; ++dh)
                    for (std::size_t dw = 0; dw < kw; ++dw)
                        for (std::size_t dt = 0; dt < kt; ++dt) {
                            const std::size_t xoff = (((i + dh) * xw + (j + dw)) * xt + (t + dt)) * ci;
                            const std::size_t koff = ((dh * kw + dw) * kt + dt) * ci * co;
                            for (std::size_t c = 0; c < ci; ++c) {
                                const T xv = xd[xoff + c];
                                const T* kc = kd + koff + c * co;
                                T* gkc = gkd + koff + c * co;
                                T s = T(0);
                                for (std::size_t o = 0; o < co; ++o) {
                                    const T gv = gyrow[o];
                                    s += kc[o] * gv;
                                    gkc[o] += xv * gv;
                                }
                                gxd[xoff + c] += s;
                            }
                        }
            }
    return g;
}

// ---------------------------------------------------------------------------
// Non-overlapping 3D max pooling; stride equals the receptive field and
// remainder rows/columns/frames past the last full window are dropped.

struct MaxPool3DLayer {
    std::size_t ph = 2, pw = 2, pt = 1;
};

// Winning input position per output element, kept for the backward pass.
struct PoolRecord {
    Shape input_shape;
    Shape output_shape;
    std::vector<std::size_t> argmax;  // flat input index per output element
};

inline Shape maxpool3d_output_shape(const MaxPool3DLayer& layer, const Shape& in) {
    if (in.size() != 4)
        throw ShapeError("maxpool3d expects a rank-4 input, got " + shape_to_string(in));
    if (in[0] < layer.ph || in[1] < layer.pw || in[2] < layer.pt)
        throw ShapeError("maxpool3d input " + shape_to_string(in) + " smaller than receptive field");
    return {in[0] / layer.ph, in[1] / layer.pw, in[2] / layer.pt, in[3]};
}

template <typename T>
struct PoolResult {
    Tensor<T> output;
    PoolRecord record;
};

template <typename T>
PoolResult<T> maxpool3d_forward(const MaxPool3DLayer& layer, const Tensor<T>& x) {
    const Shape out_shape = maxpool3d_output_shape(layer, x.shape());
    const std::size_t oh = out_shape[0], ow = out_shape[1], ot = out_shape[2], ch = out_shape[3];
    const std::size_t xw = x.extent(1), xt = x.extent(2);

    PoolResult<T> res{Tensor<T>(out_shape, T(0)), PoolRecord{x.shape(), out_shape, {}}};
    res.record.argmax.resize(res.output.size());
    const T* xd = x.data();
    T* yd = res.output.data();

    std::size_t out_idx = 0;
    for (std::size_t i = 0; i < oh; ++i)
        for (std::size_t j = 0; j < ow; ++j)
            for (std::size_t t = 0; t < ot; ++t)
                for (std::size_t c = 0; c < ch; ++c, ++out_idx) {
                    T best{};
                    std::size_t best_idx = 0;
                    bool first = true;
                    // Row-major scan of the window; first maximum wins ties.
                    for (std::size_t dh = 0; dh < layer.ph; ++dh)
                        for (std::size_t dw = 0; dw < layer.pw; ++dw)
                            for (std::size_t dt = 0; dt < layer.pt; ++dt) {
                                const std::size_t xi =
                                    (((i * layer.ph + dh) * xw + (j * layer.pw + dw)) * xt +
                                     (t * layer.pt + dt)) * ch + c;
                                if (first || xd[xi] > best) {
                                    best = xd[xi];
                                    best_idx = xi;
                                    first = false;
                                }
                            }
                    yd[out_idx] = best;
                    res.record.argmax[out_idx] = best_idx;
                }
    return res;
}

template <typename T>
Tensor<T> maxpool3d_backward(const PoolRecord& record, const Tensor<T>& grad_out) {
    if (grad_out.shape() != record.output_shape)
        throw ShapeError("maxpool3d grad shape " + shape_to_string(grad_out.shape()) +
                         " does not match recorded output " + shape_to_string(record.output_shape));
    Tensor<T> gx(record.input_shape, T(0));
    for (std::size_t i = 0; i < grad_out.size(); ++i) gx[record.argmax[i]] += grad_out[i];
    return gx;
}

// ---------------------------------------------------------------------------
// ReLU.

template <typename T>
Tensor<T> relu(const Tensor<T>& x) {
    Tensor<T> y = Tensor<T>::zeros_like(x);
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] > T(0) ? x[i] : T(0);
    return y;
}

template <typename T>
Tensor<T> relu_backward(const Tensor<T>& x, const Tensor<T>& grad_out) {
    if (!x.same_shape(grad_out))
        throw ShapeError("relu grad shape mismatch: " + shape_to_string(grad_out.shape()) + " vs " +
                         shape_to_string(x.shape()));
    Tensor<T> gx = Tensor<T>::zeros_like(x);
    for (std::size_t i = 0; i < x.size(); ++i) gx[i] = x[i] > T(0) ? grad_out[i] : T(0);
    return gx;
}

// ---------------------------------------------------------------------------
// Fully connected layer: y = Wx + b with W laid out out x in.

template <typename T>
struct FCLayer {
    Tensor<T> weights;
    Tensor<T> bias;

    std::size_t in_features() const { return weights.extent(1); }
    std::size_t out_features() const { return weights.extent(0); }
    std::size_t parameter_count() const { return weights.size() + bias.size(); }
};

template <typename T>
FCLayer<T> fc_layer(std::size_t out, std::size_t in) {
    return FCLayer<T>{Tensor<T>({out, in}, T(0)), Tensor<T>({out}, T(0))};
}

template <typename T>
Tensor<T> fc_forward(const FCLayer<T>& layer, const Tensor<T>& x) {
    if (x.rank() != 1 || x.extent(0) != layer.in_features())
        throw ShapeError("fc expects an input vector of length " + std::to_string(layer.in_features()) +
                         ", got " + shape_to_string(x.shape()));
    const std::size_t out = layer.out_features(), in = layer.in_features();
    Tensor<T> y({out}, T(0));
    const T* wd = layer.weights.data();
    for (std::size_t o = 0; o < out; ++o) {
        T acc = layer.bias[o];
        const T* wrow = wd + o * in;
        for (std::size_t i = 0; i < in; ++i) acc += wrow[i] * x[i];
        y[o] = acc;
    }
    return y;
}

template <typename T>
struct FCGrads {
    Tensor<T> input;
    Tensor<T> weights;
    Tensor<T> bias;
};

template <typename T>
FCGrads<T> fc_backward(const FCLayer<T>& layer, const Tensor<T>& x, const Tensor<T>& grad_out) {
    if (grad_out.rank() != 1 || grad_out.extent(0) != layer.out_features())
        throw ShapeError("fc grad of length " + shape_to_string(grad_out.shape()) +
                         " does not match output size " + std::to_string(layer.out_features()));
    if (x.rank() != 1 || x.extent(0) != layer.in_features())
        throw ShapeError("fc input length mismatch in backward");
    const std::size_t out = layer.out_features(), in = layer.in_features();
    FCGrads<T> g{Tensor<T>::zeros_like(x), Tensor<T>::zeros_like(layer.weights), grad_out};
    const T* wd = layer.weights.data();
    T* gwd = g.weights.data();
    // grad_w[o,i] = gy[o] * x[i]; grad_x[i] = sum_o W[o,i] * gy[o] over ascending o.
    for (std::size_t o = 0; o < out; ++o) {
        const T gv = grad_out[o];
        const T* wrow = wd + o * in;
        T* gwrow = gwd + o * in;
        for (std::size_t i = 0; i < in; ++i) {
            gwrow[i] = gv * x[i];
            g.input[i] += wrow[i] * gv;
        }
    }
    return g;
}

// ---------------------------------------------------------------------------
// Inverted dropout: survivors are scaled by 1/(1-rate) at train time so the
// eval path is exactly the identity.

template <typename T>
Tensor<T> dropout_apply(double rate, const Tensor<T>& x, Mode mode, Rng& rng,
                        Tensor<T>* mask_out = nullptr) {
    if (rate < 0.0 || rate >= 1.0)
        throw DomainError("dropout rate must lie in [0,1), got " + std::to_string(rate));
    if (mode == Mode::Eval || rate == 0.0) {
        if (mask_out) *mask_out = Tensor<T>(x.shape(), T(1));
        return x;
    }
    const T keep_scale = static_cast<T>(1.0 / (1.0 - rate));
    Tensor<T> mask = Tensor<T>::zeros_like(x);
    Tensor<T> y = Tensor<T>::zeros_like(x);
    for (std::size_t i = 0; i < x.size(); ++i) {
        const bool keep = rng.uniform() >= rate;
        mask[i] = keep ? keep_scale : T(0);
        y[i] = x[i] * mask[i];
    }
    if (mask_out) *mask_out = std::move(mask);
    return y;
}

template <typename T>
Tensor<T> dropout_backward(const Tensor<T>& mask, const Tensor<T>& grad_out) {
    return mul(mask, grad_out);
}

// ---------------------------------------------------------------------------
// Softmax cross-entropy head with max-subtraction stabilization.

template <typename T>
struct SoftmaxLoss {
    T loss;
    Tensor<T> grad_logits;
};

template <typename T>
SoftmaxLoss<T> softmax_cross_entropy(const Tensor<T>& logits, std::size_t label) {
    if (logits.rank() != 1 || logits.empty())
        throw ShapeError("softmax expects a non-empty vector of logits");
    if (label >= logits.size())
        throw DomainError("label " + std::to_string(label) + " out of range for " +
                          std::to_string(logits.size()) + " classes");
    const std::size_t n = logits.size();
    T maxv = logits[0];
    for (std::size_t i = 1; i < n; ++i) maxv = std::max(maxv, logits[i]);
    T denom = T(0);
    Tensor<T> grad = Tensor<T>::zeros_like(logits);
    for (std::size_t i = 0; i < n; ++i) {
        grad[i] = std::exp(logits[i] - maxv);
        denom += grad[i];
    }
    for (std::size_t i = 0; i < n; ++i) grad[i] /= denom;
    const T loss = -(logits[label] - maxv - std::log(denom));
    grad[label] -= T(1);
    return {loss, std::move(grad)};
}

}  // namespace gwnet
